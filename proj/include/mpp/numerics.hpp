#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace mpp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// Streaming log-sum-exp accumulator. Merging two accumulators is exact in
/// the sense that the result does not depend on how terms were sharded up to
/// rounding of the final combination.
class LogSumExp {
 public:
  void add(double log_term) {
    if (log_term == kNegInf) return;
    if (log_term <= max_) {
      sum_ += std::exp(log_term - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    }
  }
  void merge(const LogSumExp& other) {
    if (other.max_ == kNegInf) return;
    if (max_ == kNegInf) {
      *this = other;
      return;
    }
    if (other.max_ <= max_) {
      sum_ += other.sum_ * std::exp(other.max_ - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - other.max_) + other.sum_;
      max_ = other.max_;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }
  bool empty() const { return max_ == kNegInf; }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

double log_sum_exp(std::span<const double> terms);

/// splitmix64 finalizer; used to derive per-shard seeds as mix(seed ^ shard).
std::uint64_t mix_seed(std::uint64_t x);

using Rng = std::mt19937_64;
Rng shard_rng(std::uint64_t seed, std::uint64_t shard);

/// Uniform double in [0,1) from 53 random bits (portable, unlike
/// std::uniform_real_distribution).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Index drawn from a discrete law given by its cumulative sums (last = total).
std::size_t sample_cumulative(std::span<const double> cumulative, Rng& rng);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

MeanSe mean_se(std::span<const double> values);

/// Linear-interpolated empirical quantile, q in [0,1].
double quantile(std::vector<double> values, double q);

/// Two-sided 95% normal quantile used for every reported confidence interval.
inline constexpr double kZ95 = 1.959963984540054;

/// Number of worker threads: MPP_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs fn(i) for i in [0, count) on the worker pool. Work is assigned by
/// index, so results written to per-index slots are thread-count independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace mpp
