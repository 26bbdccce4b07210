#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpp/ensemble.hpp"

namespace mpp {

enum class WordSumMethod { exact_enumeration, structured_dp, monte_carlo };
std::string to_string(WordSumMethod m);

/// log Z_n(s) where Z_n(s) = sum over words of weight(word) * ||W||^s.
struct WordSumResult {
  int n = 0;
  double s = 0.0;
  double value = 0.0;  // log Z_n(s)
  WordSumMethod method = WordSumMethod::exact_enumeration;
  double std_error = 0.0;  // in log space; 0 for exact methods
  std::size_t samples = 0;
};

inline constexpr std::size_t kDefaultEnumerationCap = std::size_t{1} << 22;

enum class Structure { none, diagonal, monomial };
/// Which exact dynamic program applies: every generator diagonal, or d = 2
/// with every generator diagonal or antidiagonal.
Structure structure_of(const MatrixEnsemble& e);

struct WordSumOptions {
  std::size_t enumeration_cap = kDefaultEnumerationCap;
  bool use_structure = true;
  /// Upper bound on the number of dynamic-program states before giving up.
  std::size_t state_cap = std::size_t{1} << 24;
};

/// True when word_sum_exact can handle (e, n) with these options.
bool exact_feasible(const MatrixEnsemble& e, int n, const WordSumOptions& opts = {});

/// Increasing word lengths n whose exact sums at n and n + 1 stay within
/// `budget` words or dynamic-program states, drawn from a fixed ladder
/// 2, 4, 8, 12, 16, 20, 24, 32, ..., 2048. Falls back to {16} when nothing
/// is exact (Monte Carlo then takes over).
std::vector<int> auto_schedule(const MatrixEnsemble& e, double budget = 1 << 20);

WordSumResult word_sum_exact(const MatrixEnsemble& e, int n, double s,
                             const WordSumOptions& opts = {});
/// Same words, many exponents: every log-norm is computed once.
std::vector<WordSumResult> word_sum_exact_grid(const MatrixEnsemble& e, int n,
                                               std::span<const double> s_values,
                                               const WordSumOptions& opts = {});

/// Monte Carlo over i.i.d. words drawn from the normalized weights. In
/// counting mode n * log(total weight) is added back.
WordSumResult word_sum_mc(const MatrixEnsemble& e, int n, double s,
                          std::size_t samples, std::uint64_t seed);
std::vector<WordSumResult> word_sum_mc_grid(const MatrixEnsemble& e, int n,
                                            std::span<const double> s_values,
                                            std::size_t samples, std::uint64_t seed);

/// Visits every word of length n whose product is nonzero. word[0] is applied
/// first, so the product is v_{word[n-1]} ... v_{word[0]}.
struct WordVisit {
  std::span<const std::size_t> word;
  double log_weight;
  const ScaledProduct& product;
};
void for_each_word(const MatrixEnsemble& e, int n,
                   const std::function<void(const WordVisit&)>& fn,
                   std::size_t cap = kDefaultEnumerationCap);

struct PressureOptions {
  WordSumOptions exact;
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 1;
  /// Run the Monte Carlo estimator even when an exact value exists.
  bool always_mc = false;
};

struct PressureEstimate {
  double s = 0.0;
  bool has_exact = false;
  int exact_n = 0;                   // largest n with exact Z_n and Z_{n+1}
  WordSumMethod exact_method = WordSumMethod::exact_enumeration;
  double fekete_upper = 0.0;         // (1/n) log Z_n
  double ratio_estimate = 0.0;       // log Z_{n+1} - log Z_n, not a bound
  bool has_mc = false;
  int mc_n = 0;
  std::size_t mc_samples = 0;
  double mc_estimate = 0.0;          // paired log ratio from sampled words
  double mc_std_error = 0.0;
  std::vector<WordSumResult> word_sums;  // exact values along the schedule

  /// Primary point estimate: the exact ratio if available, else Monte Carlo.
  double value() const { return has_exact ? ratio_estimate : mc_estimate; }
  /// 95% half-width; 0 for exact ratios.
  double half_width() const;
};

PressureEstimate pressure_estimate(const MatrixEnsemble& e, double s,
                                   std::span<const int> schedule,
                                   const PressureOptions& opts = {});
/// Grid version sharing enumeration work across exponents.
std::vector<PressureEstimate> pressure_estimate_grid(const MatrixEnsemble& e,
                                                     std::span<const double> s_values,
                                                     std::span<const int> schedule,
                                                     const PressureOptions& opts = {});

/// max{log(a^s + c^s), log(b^s + d^s)}: pressure of {diag(a,b), diag(c,d)}.
double reducible_pressure_oracle(double a, double b, double c, double d, double s);

}  // namespace mpp
