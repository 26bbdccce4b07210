import json
import math
from pathlib import Path

import pytest

import mpp

CORPUS = Path(__file__).resolve().parents[2] / "corpus"


def test_load_and_round_trip():
    e = mpp.load_ensemble(str(CORPUS / "keep_switch.ens"))
    assert e.dim == 2
    assert e.labels == ["K", "S"]
    assert e.mode == "counting"
    back = mpp.parse_ensemble(e.to_text())
    assert back.to_text() == e.to_text()


def test_parse_error_names_field():
    with pytest.raises(mpp.MppError, match="weight"):
        mpp.parse_ensemble("dimension 1\nfield real\nmeasure counting\nletter A weight 0\n  1\n")


def test_checks():
    r = mpp.check(mpp.keep_switch(0.3, 0.6))
    assert r["irreducible"] and r["algebra_dimension"] == 4
    assert r["witness_found"] and r["ratio"] <= 1e-6
    red = mpp.check(mpp.reducible_pair(3, 2, 1 / 3, 0.5))
    assert not red["irreducible"] and red["certificate_verified"]


def test_pressure_matches_oracle():
    e = mpp.reducible_pair(3, 2, 1 / 3, 0.5)
    for s in (0.5, 1.0, 2.0):
        p = mpp.pressure(e, s, [8, 16, 24])
        assert p["exact"] and p["method"] == "structured_dp"
        assert abs(p["value"] - mpp.reducible_oracle(3, 2, 1 / 3, 0.5, s)) < 0.02


def test_keep_switch_word_sum_and_spectral():
    e = mpp.keep_switch(0.3, 0.6)
    assert abs(mpp.word_sum(e, 40, 1.0) - math.log(2)) < 1e-12
    t = mpp.spectral(e, 1.0, mesh=256)
    assert abs(t["k"] - 1) < 1e-6
    assert t["period"] == 1
    assert len(t["e"]) == 256 and abs(sum(t["sigma"]) - 1) < 1e-12


def test_sweep_flags_the_kink():
    c = mpp.sweep(mpp.reducible_pair(2, 1, 2, 3), 0.25, 2.0, 0.025)
    assert len(c["flags"]) == 1
    assert 0.9 <= c["flags"][0]["s_star"] <= 1.1
    assert len(c["wordsum"]["P"]) == len(c["s"])


def test_thermo_probability_mode():
    r = mpp.thermo(mpp.keep_switch(0.3, 0.6, probability=True), 1.0, n=100, count=200)
    assert abs(r["pressure"] + math.log(2)) < 1e-6
    with pytest.raises(mpp.MppError, match="ModeError"):
        mpp.thermo(mpp.keep_switch(0.3, 0.6), 1.0, n=10, count=10)


def test_spectral_rejects_dimension_three():
    e = mpp.load_ensemble(str(CORPUS / "triangular_3.ens"))
    with pytest.raises(mpp.MppError, match="UnsupportedDimension"):
        mpp.spectral(e, 1.0)


def test_run_is_reproducible(tmp_path):
    cfg = {"command": "oracle", "family": "reducible", "params": [2, 1, 2, 3],
           "s_min": 0.5, "s_max": 1.5, "s_step": 0.5, "out": str(tmp_path / "a")}
    first = json.loads(mpp.run(json.dumps(cfg)))
    assert first["status"] == "ok"
    assert first["config_hash"] == mpp.config_hash(json.dumps(cfg))
    cfg["out"] = str(tmp_path / "b")
    second = json.loads(mpp.run(json.dumps(cfg)))
    assert first["results"] == second["results"]
    assert (tmp_path / "a" / "oracle.csv").read_text() == (tmp_path / "b" / "oracle.csv").read_text()
