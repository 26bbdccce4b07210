"""Pressure functions of weighted random matrix products."""

from ._mpp import (
    Ensemble,
    MppError,
    __version__,
    check,
    config_hash,
    keep_switch,
    load_ensemble,
    parse_ensemble,
    pressure,
    reducible_oracle,
    reducible_pair,
    rotation,
    run,
    spectral,
    sweep,
    thermo,
    word_sum,
)

__all__ = [
    "Ensemble",
    "MppError",
    "__version__",
    "check",
    "config_hash",
    "keep_switch",
    "load_ensemble",
    "parse_ensemble",
    "pressure",
    "reducible_oracle",
    "reducible_pair",
    "rotation",
    "run",
    "spectral",
    "sweep",
    "thermo",
    "word_sum",
]
