#include "mpp/tilted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpp/errors.hpp"
#include "mpp/pressure.hpp"

namespace mpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> c;
  c.reserve(p.size());
  double acc = 0.0;
  for (double v : p) c.push_back(acc += v);
  return c;
}

}  // namespace

TiltedKernel::TiltedKernel(const MatrixEnsemble& e,
                           std::shared_ptr<const SpectralTriple> triple)
    : ensemble_(e), triple_(std::move(triple)) {
  const auto& tr = *triple_;
  const auto& table = *tr.table;
  const int n = tr.mesh().size();
  const std::size_t l = e.size();
  if (table.letters != static_cast<int>(l)) {
    throw InvalidArgument("triple was computed for a different alphabet");
  }
  for (int i = 0; i < n; ++i) {
    if (!(tr.e[i] > 0.0)) {
      throw NonPositiveEigenfunction("e_s vanishes at node " + std::to_string(i));
    }
  }
  if (!tr.irreducible) {
    warnings_.push_back("triple was computed for a reducible ensemble");
  }
  const auto w = e.weights();
  raw_.assign(n * l, 0.0);
  prob_.assign(n * l, 0.0);
  defect_.assign(n, 0.0);
  moves_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t a = 0; a < l; ++a) {
      const auto idx = table.at(i, a);
      if (table.hit[idx]) continue;
      const double c = w[a] * std::pow(table.norm[idx], tr.s) / (tr.k * tr.e[i]);
      const auto& st = table.image[idx];
      double pa = 0.0;
      for (int q = 0; q < st.count; ++q) {
        if (st.weight[q] == 0.0) continue;
        const double pj = c * st.weight[q] * tr.e[st.node[q]];
        moves_[i].push_back(Move{a, st.node[q], pj});
        pa += pj;
      }
      raw_[i * l + a] = pa;
      total += pa;
    }
    if (!(total > 0.0)) {
      throw DegenerateNode("every letter annihilates node " + std::to_string(i) +
                           " (assumption of irreducibility violated near it)");
    }
    defect_[i] = std::abs(total - 1.0);
    max_defect_ = std::max(max_defect_, defect_[i]);
    for (std::size_t a = 0; a < l; ++a) prob_[i * l + a] = raw_[i * l + a] / total;
    for (auto& m : moves_[i]) m.p /= total;
  }
}

TiltedKernel build_tilted(const MatrixEnsemble& e, std::shared_ptr<const SpectralTriple> triple) {
  return TiltedKernel(e, std::move(triple));
}

std::vector<double> TiltedKernel::probabilities_at(const ProjectivePoint& x) const {
  std::vector<double> p(letters(), 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < letters(); ++a) {
    const auto r = try_act(ensemble_.letter(a).matrix, x);
    if (!r) continue;
    p[a] = ensemble_.letter(a).weight * triple_->e_at(r->point) * std::pow(r->norm, s());
    total += p[a];
  }
  if (!(total > 0.0)) throw DegenerateNode("every letter annihilates the current state");
  for (auto& v : p) v /= total;
  return p;
}

std::vector<TiltedTrajectory> sample_trajectories(const TiltedKernel& ctx, int n,
                                                  std::size_t count, std::uint64_t seed,
                                                  const SampleOptions& opts) {
  if (n < 1) throw InvalidArgument("trajectory length must be >= 1");
  const auto& tr = ctx.triple();
  const auto& e = ctx.ensemble();
  const auto eta_cum = cumulative(tr.eta);
  const double log_k = tr.log_k();
  std::vector<TiltedTrajectory> out(count);
  parallel_for(count, [&](std::size_t idx) {
    Rng rng = shard_rng(seed, idx);
    auto& t = out[idx];
    t.start_node = opts.start_node ? *opts.start_node
                                   : static_cast<int>(sample_cumulative(eta_cum, rng));
    ProjectivePoint x = tr.mesh().node(t.start_node);
    const double log_e0 = std::log(tr.e_at(x));
    t.word.reserve(n);
    t.log_norm.reserve(n);
    t.log_q.reserve(n);
    t.log_step.reserve(n);
    if (opts.record_chain) t.chain.push_back(x);
    ScaledProduct prod(e.dim());
    double log_norm = 0.0;
    for (int m = 1; m <= n; ++m) {
      const auto p = ctx.probabilities_at(x);
      const auto cum = cumulative(p);
      const std::size_t a = sample_cumulative(cum, rng);
      const auto step = act(e.letter(a).matrix, x);
      x = step.point;
      log_norm += std::log(step.norm);
      t.word.push_back(a);
      t.log_norm.push_back(log_norm);
      t.log_q.push_back(std::log(tr.e_at(x)) - log_e0 + tr.s * log_norm - m * log_k);
      t.log_step.push_back(std::log(p[a] / e.letter(a).weight));
      if (opts.record_chain) t.chain.push_back(x);
      prod.left_multiply(e.letter(a).matrix);
      if (opts.record_singular) {
        const auto sv = top_two_singular(prod.normalized());
        t.log_a1.push_back(prod.log_scale() + std::log(sv.a1));
        t.sv_ratio.push_back(sv.a2 / sv.a1);
      }
    }
    t.final_product = prod.normalized();
    t.final_log_scale = prod.log_scale();
  });
  return out;
}

double log_q_point(const TiltedKernel& ctx, const ProjectivePoint& x,
                   std::span<const std::size_t> word) {
  const auto& tr = ctx.triple();
  ProjectivePoint y = x;
  double log_norm = 0.0;
  for (auto a : word) {
    const auto r = try_act(ctx.ensemble().letter(a).matrix, y);
    if (!r) return kNegInf;
    y = r->point;
    log_norm += std::log(r->norm);
  }
  return std::log(tr.e_at(y)) - std::log(tr.e_at(x)) + tr.s * log_norm -
         static_cast<double>(word.size()) * tr.log_k();
}

double log_J(const TiltedKernel& ctx, const CMatrix& m, double log_scale) {
  const auto& tr = ctx.triple();
  const auto& mesh = tr.mesh();
  double acc = 0.0;
  for (int j = 0; j < mesh.size(); ++j) {
    if (tr.eta[j] <= 0.0) continue;
    const CVector y = m * mesh.node(j).rep();
    const double ny = y.norm();
    if (ny == 0.0) continue;
    acc += tr.eta[j] * tr.e_at(ProjectivePoint(y)) / tr.e[j] * std::pow(ny, tr.s);
  }
  if (acc == 0.0) return kNegInf;
  return std::log(acc) + tr.s * log_scale;
}

// ---------------------------------------------------------------------------

double default_alpha(double s) { return std::min(s / 3.0, 1.0) * (1.0 - 1e-6); }

namespace {

void finish_curve(HalphaCurve& c) {
  const auto& pts = c.points;
  c.all_zero = std::all_of(pts.begin(), pts.end(),
                           [](const HalphaPoint& p) { return p.value == 0.0; });
  c.strictly_decreasing = pts.size() >= 2;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].value < pts[i - 1].value)) c.strictly_decreasing = false;
  }
  std::vector<double> x, y;
  for (std::size_t i = pts.size() / 2; i < pts.size(); ++i) {
    if (pts[i].value > 0.0) {
      x.push_back(pts[i].n);
      y.push_back(std::log(pts[i].value));
    }
  }
  if (x.size() >= 2) {
    const auto f = fit_line(x, y);
    c.rate = std::exp(f.slope);
    c.fit_r2 = f.r2;
  }
}

}  // namespace

HalphaCurve h_alpha_curve(const TiltedKernel& ctx, double alpha, std::span<const int> n_list,
                          const HalphaOptions& opts) {
  const double s = ctx.s();
  if (!(alpha > 0.0) || !(alpha < std::min(1.0, s / 2.0))) {
    throw InvalidArgument("alpha must lie in (0, min(1, s/2))");
  }
  if (n_list.empty()) throw InvalidArgument("empty n list");
  const auto& e = ctx.ensemble();
  if (e.dim() < 2) throw DimTooSmall("h_alpha needs d >= 2");
  const double log_k = ctx.triple().log_k();
  HalphaCurve c;
  c.alpha = alpha;

  if (opts.mode == HalphaMode::exact) {
    for (int n : n_list) {
      LogSumExp acc;
      for_each_word(
          e, n,
          [&](const WordVisit& v) {
            const auto sv = top_two_singular(v.product.normalized());
            if (sv.a2 == 0.0) return;
            const double la1 = v.product.log_scale() + std::log(sv.a1);
            const double la2 = v.product.log_scale() + std::log(sv.a2);
            const double ln = v.product.log_norm(e.norm());
            acc.add(v.log_weight + alpha * (la1 + la2) + (s - 2.0 * alpha) * ln);
          },
          opts.enumeration_cap);
      const double lv = acc.value() - n * log_k;
      c.points.push_back(HalphaPoint{n, acc.empty() ? 0.0 : std::exp(lv), 0.0});
    }
    finish_curve(c);
    return c;
  }

  // Monte Carlo under the stationary tilted law:
  // E[(a1 a2)^alpha ||W||^(s - 2 alpha) / J(W)].
  const int n_max = *std::max_element(n_list.begin(), n_list.end());
  SampleOptions so;
  so.record_chain = false;
  so.record_singular = false;
  const auto traj = sample_trajectories(ctx, n_max, opts.samples, opts.seed, so);
  for (int n : n_list) {
    std::vector<double> xs(traj.size(), 0.0);
    parallel_for(traj.size(), [&](std::size_t i) {
      ScaledProduct p(e.dim());
      for (int m = 0; m < n; ++m) p.left_multiply(e.letter(traj[i].word[m]).matrix);
      const auto sv = top_two_singular(p.normalized());
      if (sv.a2 == 0.0) return;
      const double lj = log_J(ctx, p.normalized(), p.log_scale());
      const double la1 = p.log_scale() + std::log(sv.a1);
      const double la2 = p.log_scale() + std::log(sv.a2);
      xs[i] = std::exp(alpha * (la1 + la2) + (s - 2.0 * alpha) * p.log_norm(e.norm()) - lj);
    });
    const auto ms = mean_se(xs);
    c.points.push_back(HalphaPoint{n, ms.mean, ms.se});
  }
  finish_curve(c);
  return c;
}

// ---------------------------------------------------------------------------

CollapseSummary a2_collapse(const std::vector<TiltedTrajectory>& traj,
                            std::span<const int> n_list) {
  CollapseSummary out;
  if (traj.empty()) return out;
  int n_max = static_cast<int>(traj.front().sv_ratio.size());
  for (const auto& t : traj) n_max = std::min<int>(n_max, t.sv_ratio.size());
  if (n_max == 0) throw InvalidArgument("trajectories carry no singular-value records");
  std::vector<int> ns(n_list.begin(), n_list.end());
  if (ns.empty()) {
    for (int n = 1; n <= n_max; ++n) ns.push_back(n);
  }
  for (int n : ns) {
    if (n < 1 || n > n_max) continue;
    std::vector<double> r;
    r.reserve(traj.size());
    for (const auto& t : traj) r.push_back(t.sv_ratio[n - 1]);
    out.rows.push_back(CollapseRow{n, quantile(r, 0.5), quantile(r, 0.9)});
  }
  out.collapsed = !out.rows.empty() && out.rows.back().q90 <= 0.5;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// (H_a f)_i = ||v_a x_i||^s * f(v_a . x_i) on the mesh (no weight).
std::vector<double> apply_letter(const TiltedKernel& ctx, std::size_t a,
                                 const std::vector<double>& f) {
  const auto& tr = ctx.triple();
  const auto& table = *tr.table;
  const int n = tr.mesh().size();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto idx = table.at(i, a);
    if (table.hit[idx]) continue;
    const auto& st = table.image[idx];
    double v = 0.0;
    for (int q = 0; q < st.count; ++q) v += st.weight[q] * f[st.node[q]];
    out[i] = std::pow(table.norm[idx], tr.s) * v;
  }
  return out;
}

}  // namespace

MartingaleReport martingale_check(const TiltedKernel& ctx, int node, int n,
                                  std::size_t cap) {
  const auto& tr = ctx.triple();
  const auto& e = ctx.ensemble();
  const std::size_t l = e.size();
  if (n < 1) throw InvalidArgument("martingale check needs n >= 1");
  if (node < 0 || node >= tr.mesh().size()) throw InvalidArgument("node out of range");
  if (std::pow(static_cast<double>(l), n + 1) > static_cast<double>(cap)) {
    throw CapExceeded("alphabet^(n+1) words exceed the enumeration cap");
  }
  const auto w = e.weights();
  const int nodes = tr.mesh().size();

  // H_a e for every letter, shared by all words.
  std::vector<std::vector<double>> he(l);
  for (std::size_t a = 0; a < l; ++a) he[a] = apply_letter(ctx, a, tr.e);

  MartingaleReport rep;
  rep.n = n;
  rep.start_node = node;
  auto eta_dot = [&](const std::vector<double>& u) {
    double acc = 0.0;
    for (int j = 0; j < nodes; ++j) acc += tr.eta[j] * u[j] / tr.e[j];
    return acc;
  };
  // H_{w_1} ... H_{w_n} f: the first letter acts last on functions.
  auto apply_word = [&](const std::vector<std::size_t>& word, std::vector<double> f) {
    for (int m = static_cast<int>(word.size()) - 1; m >= 0; --m) f = apply_letter(ctx, word[m], f);
    return f;
  };

  std::vector<std::size_t> word(n, 0);
  const auto total = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(l), n)));
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int m = n - 1; m >= 0; --m) {
      word[m] = c % l;
      c /= l;
    }
    // q_n(x, w) and q_n(w) share the factor 1 / k^n, which cancels in P_n.
    const auto u = apply_word(word, tr.e);
    const double qw = eta_dot(u);
    const double qx = u[node] / tr.e[node];
    if (!(qw > 0.0) || !(qx > 0.0)) continue;
    const double p_n = qx / qw;
    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < l; ++a) {
      const auto ua = apply_word(word, he[a]);
      num += w[a] * ua[node] / tr.e[node];
      den += w[a] * eta_dot(ua);
    }
    if (!(den > 0.0)) continue;
    const double defect = std::abs(num / den - p_n) / p_n;
    ++rep.words_checked;
    if (defect > rep.max_relative_defect || rep.worst_word.empty()) {
      rep.max_relative_defect = std::max(rep.max_relative_defect, defect);
      rep.worst_word = word;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

CylinderObservable CylinderObservable::letter_indicator(std::size_t letter,
                                                        std::size_t letters) {
  CylinderObservable o;
  o.name = "letter" + std::to_string(letter);
  o.letter_values.assign(letters, 0.0);
  o.letter_values.at(letter) = 1.0;
  return o;
}

CylinderObservable CylinderObservable::constant(double c, std::size_t letters) {
  CylinderObservable o;
  o.name = "constant";
  o.lipschitz = 0.0;
  o.letter_values.assign(letters, c);
  return o;
}

double CylinderObservable::operator()(std::span<const std::size_t> w) const {
  if (!letter_values.empty()) return letter_values.at(w[0]);
  return fn(w);
}

namespace {

// Centered values x_p - mean with the mean taken as x_0 + mean(x_p - x_0), so
// that a constant series is centered to exact zeros.
void center(std::vector<double>& x) {
  if (x.empty()) return;
  const double x0 = x[0];
  double acc = 0.0;
  for (double v : x) acc += v - x0;
  const double m = acc / static_cast<double>(x.size());
  for (auto& v : x) v = (v - x0) - m;
}

ExpFit exp_fit(const std::vector<double>& lags, const std::vector<double>& cov) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (cov[i] != 0.0 && std::isfinite(cov[i]) && std::abs(cov[i]) > 1e-300) {
      x.push_back(lags[i]);
      y.push_back(std::log(std::abs(cov[i])));
    }
  }
  ExpFit f;
  f.points = x.size();
  if (x.size() < 3) return f;
  const auto lf = fit_line(x, y);
  f.slope = lf.slope;
  f.rate = std::exp(lf.slope);
  f.r2 = lf.r2;
  f.valid = true;
  return f;
}

// Exact lagged covariance of single-letter observables for the chain on the
// mesh nodes started from eta.
struct ModelCov {
  std::vector<double> values;
  double floor = 0.0;
};

ModelCov model_covariances(const TiltedKernel& ctx, const std::vector<double>& fv,
                           const std::vector<double>& gv, const std::vector<int>& raw_lags) {
  const auto& tr = ctx.triple();
  const int nodes = tr.mesh().size();
  const std::size_t l = ctx.letters();
  const auto& eta = tr.eta;

  auto mean_of = [&](const std::vector<double>& v) {
    const double v0 = v[0];
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i)
      for (std::size_t a = 0; a < l; ++a) acc += eta[i] * ctx.prob(i, a) * (v[a] - v0);
    return v0 + acc;
  };
  std::vector<double> ft(l), gt(l);
  const double fm = mean_of(fv), gm = mean_of(gv);
  auto is_const = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  const bool fc = is_const(fv), gc = is_const(gv);
  for (std::size_t a = 0; a < l; ++a) {
    ft[a] = fc ? 0.0 : fv[a] - fm;
    gt[a] = gc ? 0.0 : gv[a] - gm;
  }

  // h(j) = E[g~(letter) | node j], then u_t = T^{t-1} h re-centered under eta
  // at every step so that the stationary component cannot accumulate.
  std::vector<double> u(nodes, 0.0);
  for (int j = 0; j < nodes; ++j)
    for (std::size_t a = 0; a < l; ++a) u[j] += ctx.prob(j, a) * gt[a];
  auto recenter = [&](std::vector<double>& v) {
    double m = 0.0;
    for (int j = 0; j < nodes; ++j) m += eta[j] * v[j];
    for (auto& x : v) x -= m;
  };
  auto step = [&](const std::vector<double>& v) {
    std::vector<double> out(nodes, 0.0);
    for (int i = 0; i < nodes; ++i) {
      double acc = 0.0;
      for (const auto& mv : ctx.moves(i)) acc += mv.p * v[mv.node];
      out[i] = acc;
    }
    return out;
  };
  auto pair_with_f = [&](const std::vector<double>& v) {
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i) {
      if (eta[i] == 0.0) continue;
      double row = 0.0;
      for (const auto& mv : ctx.moves(i)) row += mv.p * ft[mv.letter] * v[mv.node];
      acc += eta[i] * row;
    }
    return acc;
  };

  const int max_lag = raw_lags.empty() ? 0 : *std::max_element(raw_lags.begin(), raw_lags.end());
  std::vector<double> by_lag(max_lag + 1, 0.0);
  double var_f = 0.0, var_g = 0.0;
  {
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i)
      for (std::size_t a = 0; a < l; ++a) {
        const double w = eta[i] * ctx.prob(i, a);
        acc += w * ft[a] * gt[a];
        var_f += w * ft[a] * ft[a];
        var_g += w * gt[a] * gt[a];
      }
    by_lag[0] = acc;
  }
  recenter(u);
  for (int t = 1; t <= max_lag; ++t) {
    by_lag[t] = pair_with_f(u);
    u = step(u);
    recenter(u);
  }
  ModelCov out;
  for (int lag : raw_lags) out.values.push_back(by_lag[lag]);
  // eta and e are only known to the triple's residual; below this level the
  // values are rounding noise of the eigendata, not covariance.
  const double res = std::max(tr.residual(), 1e-14);
  out.floor = 100.0 * res * std::sqrt(var_f * var_g);
  return out;
}

}  // namespace

CorrelationReport correlation_decay(const TiltedKernel& ctx, const CylinderObservable& f,
                                    const CylinderObservable& g, std::span<const int> lags,
                                    const CorrelationOptions& opts) {
  if (lags.empty()) throw InvalidArgument("no lags requested");
  for (int lag : lags)
    if (lag < 0) throw InvalidArgument("lags must be >= 0");
  CorrelationReport rep;
  rep.period = opts.period ? *opts.period : ctx.triple().period;
  if (rep.period < 1) rep.period = 1;
  const int m = rep.period;

  // All raw lags n*m + j needed for the period averages.
  std::vector<int> raw;
  for (int lag : lags)
    for (int j = 0; j < m; ++j) raw.push_back(lag * m + j);
  const int max_raw = *std::max_element(raw.begin(), raw.end());
  const int depth = std::max(f.depth, g.depth);
  if (opts.length <= max_raw + depth + 1) {
    throw InvalidArgument("chain length too short for the requested lags");
  }

  // Simulated stationary chains.
  SampleOptions so;
  so.record_chain = false;
  so.record_singular = false;
  const auto traj = sample_trajectories(ctx, opts.length, opts.chains, opts.seed, so);
  std::vector<std::vector<double>> per_chain(raw.size(), std::vector<double>(traj.size()));
  parallel_for(traj.size(), [&](std::size_t c) {
    const auto& w = traj[c].word;
    const int usable = static_cast<int>(w.size()) - depth + 1;
    std::vector<double> fs(usable), gs(usable);
    for (int p = 0; p < usable; ++p) {
      std::span<const std::size_t> win(w.data() + p, static_cast<std::size_t>(depth));
      fs[p] = f(win);
      gs[p] = g(win);
    }
    for (std::size_t r = 0; r < raw.size(); ++r) {
      const int lag = raw[r];
      std::vector<double> a(fs.begin(), fs.end() - lag), b(gs.begin() + lag, gs.end());
      center(a);
      center(b);
      double acc = 0.0;
      for (std::size_t p = 0; p < a.size(); ++p) acc += a[p] * b[p];
      per_chain[r][c] = acc / static_cast<double>(a.size());
    }
  });

  const bool model_ok = !f.letter_values.empty() && !g.letter_values.empty();
  ModelCov model_raw;
  if (model_ok) {
    model_raw = model_covariances(ctx, f.letter_values, g.letter_values, raw);
    rep.model_floor = model_raw.floor;
  }

  std::vector<double> xs, model_vals, sample_vals, sig_x, sig_v;
  for (std::size_t li = 0; li < lags.size(); ++li) {
    CorrelationRow row;
    row.lag = lags[li];
    std::vector<double> avg(traj.size(), 0.0);
    double mod = 0.0;
    for (int j = 0; j < m; ++j) {
      const std::size_t r = li * m + j;
      for (std::size_t c = 0; c < traj.size(); ++c) avg[c] += per_chain[r][c] / m;
      if (model_ok) mod += model_raw.values[r] / m;
    }
    const auto ms = mean_se(avg);
    row.sample = ms.mean;
    row.half_width = kZ95 * ms.se;
    row.model = model_ok ? mod : kNaN;
    rep.rows.push_back(row);
    if (row.lag >= 1) {
      if (model_ok && std::abs(row.model) > rep.model_floor) {
        xs.push_back(row.lag);
        model_vals.push_back(row.model);
      }
      if (std::abs(row.sample) > row.half_width) {
        sig_x.push_back(row.lag);
        sig_v.push_back(row.sample);
      }
    }
  }
  if (model_ok) rep.model_fit = exp_fit(xs, model_vals);
  rep.sample_fit = exp_fit(sig_x, sig_v);
  return rep;
}

// ---------------------------------------------------------------------------

ThermoReport thermo_report(const TiltedKernel& ctx, int n, std::size_t count,
                           std::uint64_t seed) {
  const auto& e = ctx.ensemble();
  if (e.mode() != MeasureMode::probability) {
    throw ModeError("thermodynamic estimates require a probability-mode ensemble");
  }
  if (count < 2) throw InvalidArgument("need at least 2 trajectories");
  const auto& tr = ctx.triple();
  SampleOptions so;
  so.record_chain = false;
  so.record_singular = false;
  const auto traj = sample_trajectories(ctx, n, count, seed, so);
  std::vector<double> z(count), x(count), h(count);
  parallel_for(count, [&](std::size_t i) {
    const auto& t = traj[i];
    const double log_w =
        t.final_log_scale + std::log(matrix_norm(t.final_product, NormKind::operator_norm));
    const double lq = log_J(ctx, t.final_product, t.final_log_scale) - n * tr.log_k();
    double ls = 0.0;
    for (double v : t.log_step) ls += v;
    z[i] = -log_w / n;
    x[i] = -lq / n;
    h[i] = -ls / n;
  });
  auto est = [](const std::vector<double>& v) {
    const auto ms = mean_se(v);
    return Estimate{ms.mean, kZ95 * ms.se};
  };
  ThermoReport r;
  r.s = tr.s;
  r.n = n;
  r.count = count;
  r.zeta = est(z);
  r.xi = est(x);
  r.entropy = est(h);
  r.pressure = tr.log_k();
  r.variational_defect = std::abs(r.xi.mean - r.s * r.zeta.mean - r.pressure);
  r.variational_half_width = std::hypot(r.xi.half_width, r.s * r.zeta.half_width);
  r.entropy_route = r.entropy.mean - r.s * r.zeta.mean;
  r.entropy_defect = std::abs(r.entropy_route - r.pressure);
  r.entropy_half_width = std::hypot(r.entropy.half_width, r.s * r.zeta.half_width);
  return r;
}

}  // namespace mpp
