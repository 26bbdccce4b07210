#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpp/ensemble.hpp"
#include "mpp/pressure.hpp"
#include "mpp/spectral.hpp"

namespace mpp {

enum class SweepMethod { wordsum, spectral, both };
enum class CurveMethod { wordsum, spectral };
std::string to_string(SweepMethod m);
std::string to_string(CurveMethod m);
SweepMethod parse_sweep_method(std::string_view text);

/// s_min, s_min + step, ... up to s_max (inclusive within step/1e6), computed
/// as s_min + i * step so that no rounding accumulates.
std::vector<double> uniform_grid(double s_min, double s_max, double step);

struct CurvePoint {
  double s = 0.0;
  CurveMethod method = CurveMethod::wordsum;
  bool ok = false;
  std::string error;  // set when !ok
  double P = 0.0;
  /// Monte Carlo: 95% half-width. Exact word sums: distance between the ratio
  /// estimate and the secant through the previous schedule length. Spectral:
  /// the triple's residual.
  double uncertainty = 0.0;
  /// Statistical noise only (0 for exact values); sets the kink noise floor.
  double noise = 0.0;
  bool monte_carlo = false;
  std::string detail;  // "structured_dp n=24", "mesh=512 linear", ...
  double D1 = 0.0;     // NaN when no uniform neighbours
  double D2 = 0.0;
  bool kink = false;
};

struct KinkFlag {
  CurveMethod method = CurveMethod::wordsum;
  double s_star = 0.0;
  double lo = 0.0, hi = 0.0;  // localized interval
  double score = 0.0;         // |D2| / max(window median, noise floor)
  double left_slope = 0.0;
  double right_slope = 0.0;
  bool refined = false;
  std::string label = "candidate kink";
};

struct PressureCurve {
  std::vector<double> s;
  std::vector<CurvePoint> wordsum;   // empty unless requested
  std::vector<CurvePoint> spectral;  // empty unless requested
  /// P_wordsum - P_spectral where both succeeded (NaN elsewhere).
  std::vector<double> discrepancy;
  std::vector<KinkFlag> flags;

  const std::vector<CurvePoint>& series(CurveMethod m) const {
    return m == CurveMethod::wordsum ? wordsum : spectral;
  }
  std::vector<CurvePoint>& series(CurveMethod m) {
    return m == CurveMethod::wordsum ? wordsum : spectral;
  }
};

struct KinkOptions {
  int window = 5;
  double threshold = 10.0;
  /// Relative rounding level of a pressure value; sets the floor together
  /// with the per-point statistical noise.
  double rounding = 1e-10;
};

struct SweepParams {
  std::vector<int> schedule;  // empty: auto_schedule(e, schedule_budget)
  double schedule_budget = 1 << 20;
  PressureOptions pressure;
  SpectralOptions spectral;
  KinkOptions kinks;
  bool detect = true;
  bool refine = true;
};

/// Pressure on the grid by the requested method(s). Failures at single grid
/// points are recorded in the point and the sweep continues.
PressureCurve sweep(const MatrixEnsemble& e, std::span<const double> s_grid, SweepMethod method,
                    const SweepParams& params = {});

/// Fills D1 and D2 of every series: central differences between same-method
/// successes on uniform stretches; Monte Carlo values are binomially
/// smoothed (1, 2, 1)/4 before D2 only.
void finite_differences(PressureCurve& curve);

/// Re-evaluates the pressure at one s; used by the refinement pass.
using CurveEvaluator = std::function<std::optional<double>(double s)>;

/// Flags grid points whose |D2| exceeds threshold times the median |D2| over
/// the surrounding window (or the noise floor, whichever is larger). Adjacent
/// triggers merge into one flag at the largest score. GridTooCoarse unless
/// some uniform stretch has at least 2 * window + 1 points.
std::vector<KinkFlag> detect_kinks(const PressureCurve& curve, CurveMethod method,
                                   const KinkOptions& opts = {},
                                   const CurveEvaluator& refine = nullptr);

}  // namespace mpp
