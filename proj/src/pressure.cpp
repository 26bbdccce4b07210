#include "mpp/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mpp/errors.hpp"
#include "mpp/numerics.hpp"

namespace mpp {

std::string to_string(WordSumMethod m) {
  switch (m) {
    case WordSumMethod::exact_enumeration:
      return "exact_enumeration";
    case WordSumMethod::structured_dp:
      return "structured_dp";
    case WordSumMethod::monte_carlo:
      return "monte_carlo";
  }
  return "exact_enumeration";
}

Structure structure_of(const MatrixEnsemble& e) {
  if (e.all_diagonal()) return Structure::diagonal;
  if (e.all_monomial_2x2()) return Structure::monomial;
  return Structure::none;
}

namespace {

// Saturating binomial coefficient as a double (only compared against caps).
double binomial_d(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

double word_count(std::size_t letters, int n) {
  return std::pow(static_cast<double>(letters), n);
}

double diagonal_states(const MatrixEnsemble& e, int n) {
  const int l = static_cast<int>(e.size());
  return binomial_d(n + l - 1, l - 1);
}

double monomial_states(const MatrixEnsemble& e, int n) {
  const int slots = 2 * static_cast<int>(e.size());
  return 2.0 * binomial_d(n + slots - 1, slots - 1);
}

double log_norm_from_logs(std::span<const double> logs, NormKind kind) {
  switch (kind) {
    case NormKind::entry_sum:
      return log_sum_exp(logs);
    case NormKind::operator_norm:
      return *std::max_element(logs.begin(), logs.end());
    case NormKind::frobenius: {
      LogSumExp acc;
      for (double l : logs) acc.add(2.0 * l);
      return 0.5 * acc.value();
    }
  }
  return kNegInf;
}

// c * log|x| with the convention 0 * log 0 = 0.
double times_log(int count, double log_abs) {
  return count == 0 ? 0.0 : count * log_abs;
}

std::vector<WordSumResult> finish(int n, std::span<const double> s_values,
                                  const std::vector<LogSumExp>& acc,
                                  WordSumMethod method) {
  std::vector<WordSumResult> out;
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    if (acc[i].empty()) {
      throw DegenerateSample("every product of length " + std::to_string(n) +
                             " vanishes");
    }
    out.push_back(WordSumResult{n, s_values[i], acc[i].value(), method, 0.0, 0});
  }
  return out;
}

std::vector<WordSumResult> diagonal_dp(const MatrixEnsemble& e, int n,
                                       std::span<const double> s_values) {
  const int l = static_cast<int>(e.size());
  const int d = e.dim();
  const auto lw = e.log_weights();
  std::vector<std::vector<double>> logx(l, std::vector<double>(d));
  for (int a = 0; a < l; ++a)
    for (int i = 0; i < d; ++i) {
      const double m = std::abs(e.letter(a).matrix.entries()(i, i));
      logx[a][i] = m > 0.0 ? std::log(m) : kNegInf;
    }

  std::vector<LogSumExp> acc(s_values.size());
  std::vector<int> counts(l, 0);
  std::vector<double> diag(d);
  const double lg_n = std::lgamma(n + 1.0);

  // Enumerate compositions of n into l parts.
  std::function<void(int, int)> rec = [&](int a, int remaining) {
    if (a == l - 1) {
      counts[a] = remaining;
      double lmult = lg_n, lwt = 0.0;
      for (int b = 0; b < l; ++b) {
        lmult -= std::lgamma(counts[b] + 1.0);
        lwt += counts[b] * lw[b];
      }
      bool any = false;
      for (int i = 0; i < d; ++i) {
        double v = 0.0;
        for (int b = 0; b < l; ++b) v += times_log(counts[b], logx[b][i]);
        diag[i] = v;
        any = any || v != kNegInf;
      }
      if (!any) return;
      const double ln = log_norm_from_logs(diag, e.norm());
      for (std::size_t k = 0; k < s_values.size(); ++k) {
        acc[k].add(lmult + lwt + s_values[k] * ln);
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[a] = c;
      rec(a + 1, remaining - c);
    }
  };
  rec(0, n);
  return finish(n, s_values, acc, WordSumMethod::structured_dp);
}

// d = 2, every letter diagonal or antidiagonal. A product of such matrices
// sends e_j to (product of entries along the path) e_{pi(j)}. Path 0 starts
// at column 0 and path 1 at column 1; at every step the two paths sit in
// different rows, so path 1 always reads the column-partner entry of the one
// path 0 reads. The state is (row of path 0, how often path 0 used each
// (letter, column) slot).
struct CountsHash {
  std::size_t operator()(const std::vector<std::uint16_t>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto x : v) {
      h ^= x;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

std::vector<WordSumResult> monomial_dp(const MatrixEnsemble& e, int n,
                                       std::span<const double> s_values) {
  const int l = static_cast<int>(e.size());
  const int slots = 2 * l;
  const auto lw = e.log_weights();
  std::vector<double> logx(slots);
  std::vector<bool> anti(l);
  for (int a = 0; a < l; ++a) {
    const auto& m = e.letter(a).matrix.entries();
    anti[a] = !e.letter(a).matrix.is_diagonal();
    for (int col = 0; col < 2; ++col) {
      const int row = anti[a] ? 1 - col : col;
      const double v = std::abs(m(row, col));
      logx[2 * a + col] = v > 0.0 ? std::log(v) : kNegInf;
    }
  }

  // Key: counts followed by the current row of path 0.
  using Key = std::vector<std::uint16_t>;
  std::unordered_map<Key, double, CountsHash> layer, next;
  Key start(slots + 1, 0);
  layer[start] = 0.0;
  for (int t = 0; t < n; ++t) {
    next.clear();
    next.reserve(layer.size() * 2);
    for (const auto& [key, lcount] : layer) {
      const int row = key[slots];
      for (int a = 0; a < l; ++a) {
        Key k2 = key;
        ++k2[2 * a + row];
        k2[slots] = static_cast<std::uint16_t>(anti[a] ? 1 - row : row);
        auto [it, inserted] = next.try_emplace(std::move(k2), lcount);
        if (!inserted) it->second = log_add_exp(it->second, lcount);
      }
    }
    std::swap(layer, next);
  }

  // Iterate in a canonical order so the floating-point sum does not depend on
  // hash-table layout.
  std::vector<std::pair<Key, double>> states(layer.begin(), layer.end());
  std::sort(states.begin(), states.end());
  std::vector<LogSumExp> acc(s_values.size());
  double paths[2];
  for (const auto& [key, lcount] : states) {
    double l0 = 0.0, l1 = 0.0, lwt = 0.0;
    for (int a = 0; a < l; ++a) {
      for (int col = 0; col < 2; ++col) {
        const int c = key[2 * a + col];
        l0 += times_log(c, logx[2 * a + col]);
        l1 += times_log(c, logx[2 * a + 1 - col]);
        lwt += c * lw[a];
      }
    }
    if (l0 == kNegInf && l1 == kNegInf) continue;
    paths[0] = l0;
    paths[1] = l1;
    const double ln = log_norm_from_logs(paths, e.norm());
    for (std::size_t k = 0; k < s_values.size(); ++k) {
      acc[k].add(lcount + lwt + s_values[k] * ln);
    }
  }
  return finish(n, s_values, acc, WordSumMethod::structured_dp);
}

// Depth-first enumeration below a fixed prefix; zero products prune the
// subtree.
void enumerate_from(const MatrixEnsemble& e, int n, std::vector<std::size_t> word,
                    const std::vector<double>& lw,
                    const std::function<void(const WordVisit&)>& fn) {
  const std::size_t l = e.size();
  const std::size_t depth0 = word.size();
  std::vector<ScaledProduct> stack(n + 1, ScaledProduct(e.dim()));
  std::vector<double> lwstack(n + 1, 0.0);
  for (std::size_t i = 0; i < depth0; ++i) {
    stack[i + 1] = stack[i];
    stack[i + 1].left_multiply(e.letter(word[i]).matrix);
    lwstack[i + 1] = lwstack[i] + lw[word[i]];
    if (stack[i + 1].is_zero()) return;
  }
  if (static_cast<int>(depth0) == n) {
    fn(WordVisit{word, lwstack[n], stack[n]});
    return;
  }
  word.resize(n);
  std::vector<std::size_t> choice(n, 0);
  int depth = static_cast<int>(depth0);
  choice[depth] = 0;
  while (depth >= static_cast<int>(depth0)) {
    if (choice[depth] >= l) {
      --depth;
      if (depth >= static_cast<int>(depth0)) ++choice[depth];
      continue;
    }
    const std::size_t a = choice[depth];
    word[depth] = a;
    stack[depth + 1] = stack[depth];
    stack[depth + 1].left_multiply(e.letter(a).matrix);
    lwstack[depth + 1] = lwstack[depth] + lw[a];
    if (stack[depth + 1].is_zero()) {
      ++choice[depth];
      continue;
    }
    if (depth + 1 == n) {
      fn(WordVisit{word, lwstack[n], stack[n]});
      ++choice[depth];
    } else {
      ++depth;
      choice[depth] = 0;
    }
  }
}

std::vector<std::vector<std::size_t>> prefixes(std::size_t letters, int n) {
  int k = 0;
  std::size_t count = 1;
  while (k < n && count < 256) {
    count *= letters;
    ++k;
  }
  std::vector<std::vector<std::size_t>> out(count, std::vector<std::size_t>(k));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t x = i;
    for (int j = k - 1; j >= 0; --j) {
      out[i][j] = x % letters;
      x /= letters;
    }
  }
  return out;
}

std::vector<WordSumResult> enumeration(const MatrixEnsemble& e, int n,
                                       std::span<const double> s_values) {
  const auto lw = e.log_weights();
  const auto pre = prefixes(e.size(), n);
  std::vector<std::vector<LogSumExp>> shard(pre.size(),
                                            std::vector<LogSumExp>(s_values.size()));
  parallel_for(pre.size(), [&](std::size_t i) {
    auto& acc = shard[i];
    enumerate_from(e, n, pre[i], lw, [&](const WordVisit& v) {
      const double ln = v.product.log_norm(e.norm());
      for (std::size_t k = 0; k < s_values.size(); ++k) {
        acc[k].add(v.log_weight + s_values[k] * ln);
      }
    });
  });
  std::vector<LogSumExp> acc(s_values.size());
  for (const auto& sh : shard)
    for (std::size_t k = 0; k < s_values.size(); ++k) acc[k].merge(sh[k]);
  return finish(n, s_values, acc, WordSumMethod::exact_enumeration);
}

enum class Route { diagonal, monomial, enumeration, none };

Route choose_route(const MatrixEnsemble& e, int n, const WordSumOptions& opts) {
  if (opts.use_structure) {
    const auto st = structure_of(e);
    if (st == Structure::diagonal &&
        diagonal_states(e, n) <= static_cast<double>(opts.state_cap))
      return Route::diagonal;
    if (st == Structure::monomial &&
        monomial_states(e, n) <= static_cast<double>(opts.state_cap))
      return Route::monomial;
  }
  if (word_count(e.size(), n) <= static_cast<double>(opts.enumeration_cap))
    return Route::enumeration;
  return Route::none;
}

}  // namespace

bool exact_feasible(const MatrixEnsemble& e, int n, const WordSumOptions& opts) {
  return n >= 1 && choose_route(e, n, opts) != Route::none;
}

std::vector<int> auto_schedule(const MatrixEnsemble& e, double budget) {
  static const int ladder[] = {2,   4,   8,   12,  16,  20,  24,   32,   48,   64,  96,
                               128, 192, 256, 384, 512, 768, 1024, 1536, 2048};
  const auto st = structure_of(e);
  std::vector<int> out;
  for (int n : ladder) {
    double cost = word_count(e.size(), n + 1);
    if (st == Structure::diagonal) cost = std::min(cost, diagonal_states(e, n + 1));
    if (st == Structure::monomial) cost = std::min(cost, monomial_states(e, n + 1));
    if (cost > budget) break;
    out.push_back(n);
  }
  if (out.empty()) out.push_back(16);
  return out;
}

std::vector<WordSumResult> word_sum_exact_grid(const MatrixEnsemble& e, int n,
                                               std::span<const double> s_values,
                                               const WordSumOptions& opts) {
  if (n < 1) throw InvalidArgument("word length n must be >= 1");
  switch (choose_route(e, n, opts)) {
    case Route::diagonal:
      return diagonal_dp(e, n, s_values);
    case Route::monomial:
      return monomial_dp(e, n, s_values);
    case Route::enumeration:
      return enumeration(e, n, s_values);
    case Route::none:
      break;
  }
  throw CapExceeded(std::to_string(e.size()) + "^" + std::to_string(n) +
                    " words exceed the enumeration cap and no structured form applies");
}

WordSumResult word_sum_exact(const MatrixEnsemble& e, int n, double s,
                             const WordSumOptions& opts) {
  const double sv[1] = {s};
  return word_sum_exact_grid(e, n, sv, opts).front();
}

void for_each_word(const MatrixEnsemble& e, int n,
                   const std::function<void(const WordVisit&)>& fn, std::size_t cap) {
  if (n < 1) throw InvalidArgument("word length n must be >= 1");
  if (word_count(e.size(), n) > static_cast<double>(cap)) {
    throw CapExceeded(std::to_string(e.size()) + "^" + std::to_string(n) +
                      " words exceed the enumeration cap");
  }
  enumerate_from(e, n, {}, e.log_weights(), fn);
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

constexpr std::size_t kShardSize = 4096;

std::vector<double> cumulative_weights(const MatrixEnsemble& e) {
  std::vector<double> c;
  double acc = 0.0;
  for (double w : e.weights()) c.push_back(acc += w);
  return c;
}

// log ||W_m|| for m = n_lo and m = n_hi (n_lo <= n_hi) along each sampled word.
struct SampledLogNorms {
  std::vector<double> lo, hi;
};

SampledLogNorms sample_log_norms(const MatrixEnsemble& e, int n_lo, int n_hi,
                                 std::size_t samples, std::uint64_t seed) {
  SampledLogNorms out;
  out.lo.assign(samples, kNegInf);
  out.hi.assign(samples, kNegInf);
  const auto cum = cumulative_weights(e);
  const std::size_t shards = (samples + kShardSize - 1) / kShardSize;
  parallel_for(shards, [&](std::size_t sh) {
    Rng rng = shard_rng(seed, sh);
    const std::size_t begin = sh * kShardSize;
    const std::size_t end = std::min(samples, begin + kShardSize);
    for (std::size_t i = begin; i < end; ++i) {
      ScaledProduct p(e.dim());
      for (int m = 1; m <= n_hi; ++m) {
        p.left_multiply(e.letter(sample_cumulative(cum, rng)).matrix);
        if (m == n_lo) out.lo[i] = p.log_norm(e.norm());
      }
      out.hi[i] = p.log_norm(e.norm());
    }
  });
  return out;
}

// log of the sample mean of exp(s * x) and the delta-method standard error of
// that log.
std::pair<double, double> log_mean_se(const std::vector<double>& x, double s) {
  double top = kNegInf;
  for (double v : x)
    if (v != kNegInf) top = std::max(top, s * v);
  if (top == kNegInf) return {kNegInf, 0.0};
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v == kNegInf ? 0.0 : std::exp(s * v - top);
  const double mean = sum / n;
  double se = 0.0;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) {
      const double dv = (v == kNegInf ? 0.0 : std::exp(s * v - top)) - mean;
      ss += dv * dv;
    }
    se = std::sqrt(ss / (n - 1.0) / n) / mean;
  }
  return {top + std::log(mean), se};
}

}  // namespace

std::vector<WordSumResult> word_sum_mc_grid(const MatrixEnsemble& e, int n,
                                            std::span<const double> s_values,
                                            std::size_t samples, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("word length n must be >= 1");
  if (samples < 2) throw InvalidArgument("need at least 2 samples");
  const auto draws = sample_log_norms(e, n, n, samples, seed);
  const double shift =
      e.mode() == MeasureMode::counting ? n * std::log(e.total_weight()) : 0.0;
  std::vector<WordSumResult> out;
  for (double s : s_values) {
    auto [lm, se] = log_mean_se(draws.hi, s);
    if (lm == kNegInf) {
      throw DegenerateSample("every sampled product of length " + std::to_string(n) +
                             " vanished");
    }
    out.push_back(WordSumResult{n, s, lm + shift, WordSumMethod::monte_carlo, se, samples});
  }
  return out;
}

WordSumResult word_sum_mc(const MatrixEnsemble& e, int n, double s, std::size_t samples,
                          std::uint64_t seed) {
  const double sv[1] = {s};
  return word_sum_mc_grid(e, n, sv, samples, seed).front();
}

// ---------------------------------------------------------------------------

double PressureEstimate::half_width() const {
  return has_exact ? 0.0 : kZ95 * mc_std_error;
}

namespace {

void validate_schedule(std::span<const int> schedule) {
  if (schedule.empty()) throw InvalidArgument("n schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 1) throw InvalidArgument("n schedule entries must be >= 1");
    if (i && schedule[i] <= schedule[i - 1]) {
      throw InvalidArgument("n schedule must be strictly increasing");
    }
  }
}

// Paired ratio log(mean y / mean x) with x = ||W_n||^s, y = ||W_{n+1}||^s from
// the same sampled words.
std::pair<double, double> paired_ratio(const SampledLogNorms& d, double s) {
  const std::size_t n = d.lo.size();
  double mx = kNegInf, my = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (d.lo[i] != kNegInf) mx = std::max(mx, s * d.lo[i]);
    if (d.hi[i] != kNegInf) my = std::max(my, s * d.hi[i]);
  }
  if (mx == kNegInf || my == kNegInf) return {kNegInf, 0.0};
  auto xv = [&](std::size_t i) { return d.lo[i] == kNegInf ? 0.0 : std::exp(s * d.lo[i] - mx); };
  auto yv = [&](std::size_t i) { return d.hi[i] == kNegInf ? 0.0 : std::exp(s * d.hi[i] - my); };
  const double N = static_cast<double>(n);
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xv(i);
    sy += yv(i);
  }
  const double xb = sx / N, yb = sy / N;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xv(i) - xb, dy = yv(i) - yb;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= N - 1.0;
  vy /= N - 1.0;
  cxy /= N - 1.0;
  const double var = (vy / (yb * yb) + vx / (xb * xb) - 2.0 * cxy / (xb * yb)) / N;
  return {std::log(yb) + my - std::log(xb) - mx, std::sqrt(std::max(0.0, var))};
}

}  // namespace

std::vector<PressureEstimate> pressure_estimate_grid(const MatrixEnsemble& e,
                                                     std::span<const double> s_values,
                                                     std::span<const int> schedule,
                                                     const PressureOptions& opts) {
  validate_schedule(schedule);
  std::vector<PressureEstimate> out(s_values.size());
  for (std::size_t k = 0; k < s_values.size(); ++k) out[k].s = s_values[k];

  int n_exact = 0;
  for (int n : schedule) {
    if (exact_feasible(e, n + 1, opts.exact) && exact_feasible(e, n, opts.exact)) n_exact = n;
  }
  if (n_exact > 0) {
    std::vector<WordSumResult> at_n, at_n1;
    for (int n : schedule) {
      if (n > n_exact) break;
      auto r = word_sum_exact_grid(e, n, s_values, opts.exact);
      for (std::size_t k = 0; k < s_values.size(); ++k) out[k].word_sums.push_back(r[k]);
      if (n == n_exact) at_n = std::move(r);
    }
    at_n1 = word_sum_exact_grid(e, n_exact + 1, s_values, opts.exact);
    for (std::size_t k = 0; k < s_values.size(); ++k) {
      auto& p = out[k];
      p.word_sums.push_back(at_n1[k]);
      p.has_exact = true;
      p.exact_n = n_exact;
      p.exact_method = at_n[k].method;
      p.fekete_upper = at_n[k].value / n_exact;
      p.ratio_estimate = at_n1[k].value - at_n[k].value;
    }
  }

  if (n_exact == 0 || opts.always_mc) {
    if (opts.mc_samples < 2) {
      throw CapExceeded("no exact word sum is feasible and Monte Carlo is disabled");
    }
    const int n = schedule.back();
    const auto draws = sample_log_norms(e, n, n + 1, opts.mc_samples, opts.seed);
    const double shift =
        e.mode() == MeasureMode::counting ? std::log(e.total_weight()) : 0.0;
    for (std::size_t k = 0; k < s_values.size(); ++k) {
      auto [ratio, se] = paired_ratio(draws, s_values[k]);
      if (ratio == kNegInf) {
        throw DegenerateSample("every sampled product vanished at n = " +
                               std::to_string(n));
      }
      auto& p = out[k];
      p.has_mc = true;
      p.mc_n = n;
      p.mc_samples = opts.mc_samples;
      p.mc_estimate = ratio + shift;
      p.mc_std_error = se;
    }
  }
  return out;
}

PressureEstimate pressure_estimate(const MatrixEnsemble& e, double s,
                                   std::span<const int> schedule,
                                   const PressureOptions& opts) {
  const double sv[1] = {s};
  return pressure_estimate_grid(e, sv, schedule, opts).front();
}

double reducible_pressure_oracle(double a, double b, double c, double d, double s) {
  if (!(a > 0 && b > 0 && c > 0 && d > 0)) {
    throw InvalidArgument("reducible oracle needs a, b, c, d > 0");
  }
  const double first = log_add_exp(s * std::log(a), s * std::log(c));
  const double second = log_add_exp(s * std::log(b), s * std::log(d));
  return std::max(first, second);
}

}  // namespace mpp
