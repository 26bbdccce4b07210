#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpp/ensemble.hpp"
#include "mpp/numerics.hpp"
#include "mpp/spectral.hpp"

namespace mpp {

/// Doob transform of Gamma_s on the mesh:
///   p(a | x) = w_a e(v_a . x) ||v_a x||^s / (k e(x)),
/// kernel hits get probability 0. Raw rows are kept for the defect table and
/// renormalized rows are used for sampling.
class TiltedKernel {
 public:
  TiltedKernel(const MatrixEnsemble& e, std::shared_ptr<const SpectralTriple> triple);

  const MatrixEnsemble& ensemble() const noexcept { return ensemble_; }
  const SpectralTriple& triple() const noexcept { return *triple_; }
  std::shared_ptr<const SpectralTriple> triple_ptr() const noexcept { return triple_; }
  std::size_t letters() const noexcept { return ensemble_.size(); }
  double s() const noexcept { return triple_->s; }

  double raw(int node, std::size_t a) const { return raw_[node * letters() + a]; }
  double prob(int node, std::size_t a) const { return prob_[node * letters() + a]; }
  /// |sum_a p(a|x_i) - 1| before renormalization.
  const std::vector<double>& defects() const noexcept { return defect_; }
  double max_defect() const noexcept { return max_defect_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Renormalized letter probabilities at an arbitrary point (interpolated e).
  /// DegenerateNode if every letter is a kernel hit or has zero mass.
  std::vector<double> probabilities_at(const ProjectivePoint& x) const;

  /// Node-to-node transition matrix of the chain restricted to the mesh, per
  /// letter: T_a(i, j) = p(a|x_i) * stencil weight of node j in v_a . x_i.
  struct Move {
    std::size_t letter;
    int node;
    double p;
  };
  const std::vector<Move>& moves(int node) const { return moves_[node]; }

 private:
  MatrixEnsemble ensemble_;
  std::shared_ptr<const SpectralTriple> triple_;
  std::vector<double> raw_, prob_, defect_;
  double max_defect_ = 0.0;
  std::vector<std::vector<Move>> moves_;
  std::vector<std::string> warnings_;
};

TiltedKernel build_tilted(const MatrixEnsemble& e, std::shared_ptr<const SpectralTriple> triple);

struct TiltedTrajectory {
  int start_node = 0;
  std::vector<std::size_t> word;           // word[m] is the (m+1)-th letter
  std::vector<ProjectivePoint> chain;      // x_0 .. x_n when recorded
  std::vector<double> log_norm;            // log ||W_m x_0||, m = 1..n
  std::vector<double> log_q;               // log q_m(x_0, W_m), m = 1..n
  std::vector<double> log_step;            // log(p(a_m | x_{m-1}) / w_{a_m})
  std::vector<double> log_a1;              // log a1(W_m) when recorded
  std::vector<double> sv_ratio;            // a2/a1 of W_m when recorded
  CMatrix final_product;                   // W_n / scale
  double final_log_scale = 0.0;
};

struct SampleOptions {
  std::optional<int> start_node;  // empty: start drawn from eta
  bool record_chain = true;
  bool record_singular = true;
};

/// i.i.d. trajectories of length n; trajectory i uses shard_rng(seed, i).
std::vector<TiltedTrajectory> sample_trajectories(const TiltedKernel& ctx, int n,
                                                  std::size_t count, std::uint64_t seed,
                                                  const SampleOptions& opts = {});

/// log q_m(x, W) = log e(W.x) - log e(x) + s log ||W x|| - m log k.
double log_q_point(const TiltedKernel& ctx, const ProjectivePoint& x,
                   std::span<const std::size_t> word);
/// log J_s(W) = log sum_j eta_j e(W.y_j)/e(y_j) ||W y_j||^s over mesh nodes,
/// W = exp(log_scale) * m.
double log_J(const TiltedKernel& ctx, const CMatrix& m, double log_scale);

// h_alpha ------------------------------------------------------------------

enum class HalphaMode { exact, mc };

struct HalphaPoint {
  int n = 0;
  double value = 0.0;
  double std_error = 0.0;  // mc only
};

struct HalphaCurve {
  double alpha = 0.0;
  std::vector<HalphaPoint> points;
  double rate = 0.0;       // exp(slope) of log h on the tail
  double fit_r2 = 0.0;
  bool strictly_decreasing = false;
  bool all_zero = false;
};

/// alpha in (0, min(1, s/2)); min(s/3, 1) * (1 - 1e-6) is the customary default.
double default_alpha(double s);

struct HalphaOptions {
  HalphaMode mode = HalphaMode::exact;
  std::size_t enumeration_cap = std::size_t{1} << 22;
  std::size_t samples = 4000;
  std::uint64_t seed = 1;
};

/// h_alpha(n) = k^{-n} sum_w weight(w) ||wedge^2 W||^alpha ||W||^{s - 2 alpha}
/// with ||wedge^2 W|| = a1 a2, ||W|| in the ensemble's norm and k from the
/// triple.
HalphaCurve h_alpha_curve(const TiltedKernel& ctx, double alpha, std::span<const int> n_list,
                          const HalphaOptions& opts = {});

// a2 collapse -------------------------------------------------------------

struct CollapseRow {
  int n = 0;
  double median = 0.0;
  double q90 = 0.0;
};
struct CollapseSummary {
  std::vector<CollapseRow> rows;
  bool collapsed = false;  // false: 0.9-quantile above 0.5 at the final n
};
CollapseSummary a2_collapse(const std::vector<TiltedTrajectory>& traj,
                            std::span<const int> n_list = {});

// Martingale ----------------------------------------------------------------

struct MartingaleReport {
  int n = 0;
  int start_node = 0;
  double max_relative_defect = 0.0;
  std::size_t words_checked = 0;
  std::vector<std::size_t> worst_word;
};

/// Exhaustive check of E[P_{n+1}(x) | first n letters] = P_n(x) under the
/// stationary tilted law of the discretized chain, where
/// P_n(x) = q_n(x, W_n) / q_n(W_n) and q_n(W_n) = sum_j eta_j q_n(x_j, W_n).
MartingaleReport martingale_check(const TiltedKernel& ctx, int node, int n,
                                  std::size_t cap = std::size_t{1} << 22);

// Correlations --------------------------------------------------------------

/// Observable depending on the first `depth` letters. Single-letter
/// observables carry their per-letter values, which also enables the exact
/// evaluation on the discretized chain.
struct CylinderObservable {
  std::string name;
  int depth = 1;
  double lipschitz = 1.0;
  std::vector<double> letter_values;
  std::function<double(std::span<const std::size_t>)> fn;

  static CylinderObservable letter_indicator(std::size_t letter, std::size_t letters);
  static CylinderObservable constant(double c, std::size_t letters);
  double operator()(std::span<const std::size_t> w) const;
};

struct CorrelationRow {
  int lag = 0;
  double model = 0.0;       // discretized-chain value (NaN when unavailable)
  double sample = 0.0;      // ergodic average over simulated stationary chains
  double half_width = 0.0;  // 95% across independent chains
};

struct ExpFit {
  double rate = 0.0;  // lambda-hat = exp(slope of log|cov|)
  double slope = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  bool valid = false;
};

struct CorrelationReport {
  int period = 1;
  std::vector<CorrelationRow> rows;
  ExpFit model_fit;    // lags whose |model| exceeds model_floor only
  double model_floor = 0.0;
  ExpFit sample_fit;  // lags whose |cov| exceeds the half-width only
  /// The reported fit: the discretized-chain fit when available.
  const ExpFit& fit() const { return model_fit.valid ? model_fit : sample_fit; }
};

struct CorrelationOptions {
  int chains = 32;
  int length = 20000;
  std::uint64_t seed = 1;
  std::optional<int> period;  // default: the triple's peripheral period
};

CorrelationReport correlation_decay(const TiltedKernel& ctx, const CylinderObservable& f,
                                    const CylinderObservable& g, std::span<const int> lags,
                                    const CorrelationOptions& opts = {});

// Thermodynamics ------------------------------------------------------------

struct Estimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95%
};

struct ThermoReport {
  double s = 0.0;
  int n = 0;
  std::size_t count = 0;
  Estimate zeta;     // -(1/n) E log ||W_n||
  Estimate xi;       // -(1/n) E log q_n(W_n)
  Estimate entropy;  // -(1/n) E log (d tilted path law / d mu^n), chain likelihood
  double pressure = 0.0;  // log k from the triple
  double variational_defect = 0.0;     // |xi - s zeta - P|
  double variational_half_width = 0.0; // root-sum-square of the two half-widths
  double entropy_route = 0.0;          // h - s zeta
  double entropy_defect = 0.0;         // |h - s zeta - P|
  double entropy_half_width = 0.0;
};

/// Requires a probability-mode ensemble (ModeError otherwise).
ThermoReport thermo_report(const TiltedKernel& ctx, int n, std::size_t count,
                           std::uint64_t seed);

}  // namespace mpp
