#include "mpp/run.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "mpp/ensemble.hpp"
#include "mpp/errors.hpp"
#include "mpp/pressure.hpp"
#include "mpp/spectral.hpp"
#include "mpp/sweep.hpp"
#include "mpp/tilted.hpp"

namespace mpp {

using json = nlohmann::ordered_json;

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& v) {
  if (!j.contains(key)) return;
  if (j[key].is_null()) {
    v.reset();
  } else {
    v = j[key].get<T>();
  }
}

template <class T>
void read(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j[key].get<T>();
}

json config_json(const RunConfig& c, bool with_output) {
  json j;
  j["command"] = c.command;
  j["ensemble"] = c.ensemble;
  j["s"] = opt(c.s);
  j["s_min"] = opt(c.s_min);
  j["s_max"] = opt(c.s_max);
  j["s_step"] = opt(c.s_step);
  j["method"] = c.method;
  j["n_schedule"] = c.n_schedule;
  j["schedule_budget"] = c.schedule_budget;
  j["enumeration_cap"] = c.enumeration_cap;
  j["mc_samples"] = c.mc_samples;
  j["mesh"] = c.mesh;
  j["interp"] = c.interp;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["alpha"] = opt(c.alpha);
  j["samples"] = c.samples;
  j["tilted_n"] = c.tilted_n;
  j["halpha_n_max"] = c.halpha_n_max;
  j["lags"] = c.lags;
  j["chains"] = c.chains;
  j["chain_length"] = c.chain_length;
  j["martingale_n"] = c.martingale_n;
  j["thermo"] = c.thermo;
  j["kink_window"] = c.kink_window;
  j["kink_threshold"] = c.kink_threshold;
  j["family"] = c.family;
  j["params"] = c.params;
  j["seed"] = c.seed;
  if (with_output) {
    j["out"] = c.out;
    j["formats"] = c.formats;
  }
  return j;
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

json finite(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json complex_list(const std::vector<std::complex<double>>& v) {
  json a = json::array();
  for (auto z : v) a.push_back({z.real(), z.imag()});
  return a;
}

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

double clock_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Context {
  const RunConfig& cfg;
  RunReport& rep;
  std::string header;
  bool csv = false;
  bool json_out = false;

  std::filesystem::path path(const std::string& name) const {
    return std::filesystem::path(cfg.out) / name;
  }
  void write_csv(const std::string& name, const std::string& columns,
                 const std::vector<std::string>& rows) {
    if (!csv) return;
    std::ofstream f(path(name));
    if (!f) throw InvalidArgument("cannot write " + path(name).string());
    f << header << "\n" << columns << "\n";
    for (const auto& r : rows) f << r << "\n";
    rep.files.push_back(name);
  }
  template <class F>
  auto timed(const std::string& phase, F&& fn) {
    const double t0 = clock_now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      rep.timings.emplace_back(phase, clock_now() - t0);
    } else {
      auto r = fn();
      rep.timings.emplace_back(phase, clock_now() - t0);
      return r;
    }
  }
};

std::string join(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ",";
    out += c;
  }
  return out;
}

MatrixEnsemble load(const RunConfig& c) {
  if (c.ensemble.empty()) throw UsageError("--ensemble is required for " + c.command);
  return load_ensemble(c.ensemble);
}

double require_s(const RunConfig& c) {
  if (!c.s) throw UsageError("--s is required for " + c.command);
  return *c.s;
}

std::vector<double> grid_of(const RunConfig& c) {
  if (c.s) {
    if (c.s_min || c.s_max || c.s_step) throw UsageError("give either --s or a grid, not both");
    return {*c.s};
  }
  if (!c.s_min && !c.s_max && !c.s_step) throw UsageError("empty s grid: give --s or a grid");
  if (!c.s_min || !c.s_max || !c.s_step) {
    throw UsageError("a grid needs --s-min, --s-max and --s-step");
  }
  if (!(*c.s_step > 0.0)) throw UsageError("--s-step must be > 0");
  if (*c.s_max < *c.s_min) throw UsageError("empty s grid: --s-max < --s-min");
  return uniform_grid(*c.s_min, *c.s_max, *c.s_step);
}

SpectralOptions spectral_options(const RunConfig& c) {
  SpectralOptions so;
  so.mesh_size = c.mesh;
  so.interp = parse_interp(c.interp);
  so.tol = c.tol;
  so.max_iter = c.max_iter;
  return so;
}

PressureOptions pressure_options(const RunConfig& c) {
  PressureOptions po;
  po.exact.enumeration_cap = c.enumeration_cap;
  po.mc_samples = c.mc_samples;
  po.seed = c.seed;
  return po;
}

json ensemble_summary(const MatrixEnsemble& e) {
  json j;
  j["dimension"] = e.dim();
  j["letters"] = e.size();
  json labels = json::array();
  for (const auto& l : e.letters()) labels.push_back(l.label);
  j["labels"] = labels;
  j["measure"] = to_string(e.mode());
  j["norm"] = to_string(e.norm());
  j["field"] = e.is_real() ? "real" : "complex";
  return j;
}

// ---------------------------------------------------------------------------

json cmd_check(Context& ctx) {
  const auto e = load(ctx.cfg);
  IrrOptions io;
  io.seed = ctx.cfg.seed;
  ContOptions co;
  co.seed = ctx.cfg.seed;
  const auto irr = ctx.timed("irr_check", [&] { return irr_check(e, io); });
  const auto prox = ctx.timed("cont_check", [&] { return cont_check(e, co); });

  json j;
  j["ensemble"] = ensemble_summary(e);
  json ji;
  ji["irreducible"] = irr.irreducible;
  ji["algebra_dimension"] = irr.algebra_dimension;
  ji["closure_rounds"] = irr.closure_rounds;
  ji["certificate_verified"] = irr.certificate_verified;
  ji["invariance_residual"] = irr.invariance_residual;
  ji["invariant_subspace"] = matrix_json(irr.invariant_subspace);
  j["irreducibility"] = ji;
  json jp;
  jp["witness_found"] = prox.witness_found;
  jp["witness"] = prox.witness_text;
  jp["ratio"] = prox.ratio;
  jp["max_word_length"] = prox.max_word_length;
  jp["restarts"] = prox.restarts;
  jp["heuristic"] = prox.heuristic;
  j["proximality"] = jp;

  if (!irr.irreducible) {
    ctx.rep.warnings.push_back(
        std::string("irreducibility fails: common invariant subspace of dimension ") +
        std::to_string(irr.invariant_subspace.cols()) +
        (irr.certificate_verified ? " (certificate verified)" : " (certificate unverified)"));
  }
  if (!prox.witness_found) {
    ctx.rep.warnings.push_back("no proximality witness found within the search budget "
                               "(heuristic; not a disproof)");
  }
  return j;
}

json cmd_pressure(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto grid = grid_of(c);
  const auto e = load(c);
  SweepParams sp;
  sp.schedule = c.n_schedule;
  sp.schedule_budget = c.schedule_budget;
  sp.pressure = pressure_options(c);
  sp.spectral = spectral_options(c);
  sp.spectral.compute_spectrum = false;
  sp.kinks.window = c.kink_window;
  sp.kinks.threshold = c.kink_threshold;
  const auto method = parse_sweep_method(c.method);
  const auto curve = ctx.timed("sweep", [&] { return sweep(e, grid, method, sp); });

  std::vector<std::string> rows;
  std::size_t ok = 0, total = 0;
  json failures = json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (const auto* series : {&curve.wordsum, &curve.spectral}) {
      if (series->empty()) continue;
      const auto& p = (*series)[i];
      ++total;
      if (p.ok) {
        ++ok;
      } else {
        failures.push_back({{"s", p.s}, {"method", to_string(p.method)}, {"error", p.error}});
      }
      rows.push_back(join({num(p.s), to_string(p.method), num(p.P), num(p.uncertainty),
                           num(p.D1), num(p.D2), p.kink ? "1" : "0"}));
    }
  }
  ctx.write_csv("pressure.csv", "s,method,P,uncertainty,D1,D2,kink_flag", rows);

  json j;
  j["ensemble"] = ensemble_summary(e);
  j["method"] = to_string(method);
  j["grid_points"] = grid.size();
  j["points_ok"] = ok;
  j["points_failed"] = total - ok;
  if (!curve.wordsum.empty()) {
    for (const auto& p : curve.wordsum)
      if (p.ok) {
        j["wordsum_detail"] = p.detail;
        break;
      }
  }
  double max_disc = 0.0;
  bool any_disc = false;
  for (double d : curve.discrepancy)
    if (std::isfinite(d)) {
      any_disc = true;
      max_disc = std::max(max_disc, std::abs(d));
    }
  j["max_abs_discrepancy"] = any_disc ? json(max_disc) : json(nullptr);
  json flags = json::array();
  for (const auto& f : curve.flags) {
    json jf;
    jf["label"] = f.label;
    jf["method"] = to_string(f.method);
    jf["s_star"] = f.s_star;
    jf["interval"] = {f.lo, f.hi};
    jf["score"] = f.score;
    jf["left_slope"] = finite(f.left_slope);
    jf["right_slope"] = finite(f.right_slope);
    jf["refined"] = f.refined;
    flags.push_back(jf);
  }
  j["kink_flags"] = flags;
  j["failures"] = failures;
  if (!failures.empty()) {
    ctx.rep.warnings.push_back(std::to_string(failures.size()) + " grid point(s) failed");
  }
  if (ok == 0) {
    ctx.rep.status = "failed";
    ctx.rep.error_kind = "NoConvergence";
    ctx.rep.error_message = "every grid point failed";
    ctx.rep.exit_code = 3;
  }
  return j;
}

json triple_json(const SpectralTriple& t) {
  json j;
  j["s"] = t.s;
  j["k"] = t.k;
  j["log_k"] = t.log_k();
  j["mesh"] = {{"kind", to_string(t.mesh().kind())},
               {"size", t.mesh().size()},
               {"interp", to_string(t.table->interp)}};
  j["residuals"] = {{"sigma_tv", t.residuals.sigma_tv},
                    {"e_max", t.residuals.e_max},
                    {"e_relative", t.residuals.e_relative},
                    {"e_pointwise", t.residuals.e_pointwise}};
  j["iterations"] = {{"sigma", t.sigma_iterations}, {"e", t.e_iterations}};
  j["has_spectrum"] = t.has_spectrum;
  if (t.has_spectrum) {
    j["period"] = t.period;
    j["period_closed"] = t.period_closed;
    j["gap"] = t.gap;
    j["peripheral"] = complex_list(t.peripheral);
  }
  j["irreducible"] = t.irreducible;
  return j;
}

json cmd_spectral(Context& ctx) {
  const auto& c = ctx.cfg;
  const double s = require_s(c);
  if (!(s > 0.0)) throw InvalidArgument("the spectral solver needs s > 0");
  const auto e = load(c);
  const auto so = spectral_options(c);
  const auto t = ctx.timed("solve", [&] { return solve_spectral(e, s, so); });
  for (const auto& w : t.warnings) ctx.rep.warnings.push_back(w);

  std::vector<std::string> rows;
  const auto& mesh = t.mesh();
  for (int i = 0; i < mesh.size(); ++i) {
    const auto xy = mesh.coordinates(i);
    rows.push_back(join({std::to_string(i), num(xy[0]), num(xy[1]), num(t.e[i]),
                         num(t.sigma[i]), num(t.eta[i])}));
  }
  ctx.write_csv("spectral_triple.csv", "node,coord1,coord2,e,sigma,eta", rows);

  json j = triple_json(t);
  const auto cs = ctx.timed("cs_proxy", [&] { return cs_sigma_proxy(e, t, 256, c.seed); });
  j["cs_sigma_proxy"] = {{"value", cs.value}, {"trials", cs.trials}, {"heuristic", true}};
  return j;
}

std::array<double, 2> point_coordinates(const ProjectivePoint& x) {
  if (x.is_real()) return {x.angle(), 0.0};
  const auto& v = x.rep();
  const double polar = 2.0 * std::acos(std::min(1.0, std::abs(v(0))));
  return {polar, std::arg(v(1))};
}

json cmd_tilted(Context& ctx) {
  const auto& c = ctx.cfg;
  const double s = require_s(c);
  if (!(s > 0.0)) throw InvalidArgument("the tilted chain needs s > 0");
  if (c.thermo != "auto" && c.thermo != "on" && c.thermo != "off") {
    throw UsageError("--thermo must be auto, on or off");
  }
  const auto e = load(c);
  if (c.thermo == "on" && e.mode() != MeasureMode::probability) {
    throw ModeError("thermodynamic estimates require a probability-mode ensemble");
  }
  const auto so = spectral_options(c);
  auto triple = ctx.timed("solve", [&] {
    return std::make_shared<const SpectralTriple>(solve_spectral(e, s, so));
  });
  for (const auto& w : triple->warnings) ctx.rep.warnings.push_back(w);
  const TiltedKernel kernel = ctx.timed("kernel", [&] { return build_tilted(e, triple); });
  for (const auto& w : kernel.warnings()) ctx.rep.warnings.push_back(w);

  json j;
  j["triple"] = triple_json(*triple);
  j["kernel_max_defect"] = kernel.max_defect();

  // h_alpha
  const double alpha = c.alpha ? *c.alpha : default_alpha(s);
  std::vector<int> ns;
  for (int n = 1; n <= c.halpha_n_max; ++n) ns.push_back(n);
  HalphaOptions ho;
  ho.enumeration_cap = c.enumeration_cap;
  ho.seed = c.seed;
  HalphaCurve h = ctx.timed("h_alpha", [&] {
    try {
      return h_alpha_curve(kernel, alpha, ns, ho);
    } catch (const CapExceeded&) {
      ho.mode = HalphaMode::mc;
      return h_alpha_curve(kernel, alpha, ns, ho);
    }
  });
  {
    std::vector<std::string> rows;
    for (const auto& p : h.points) rows.push_back(join({std::to_string(p.n), num(p.value), num(p.std_error)}));
    ctx.write_csv("h_alpha.csv", "n,h_alpha,std_error", rows);
  }
  j["h_alpha"] = {{"alpha", alpha},
                  {"mode", ho.mode == HalphaMode::exact ? "exact" : "mc"},
                  {"rate", finite(h.rate)},
                  {"fit_r2", finite(h.fit_r2)},
                  {"strictly_decreasing", h.strictly_decreasing},
                  {"all_zero", h.all_zero}};

  // trajectories and a2 collapse
  const int n = c.tilted_n;
  const auto traj = ctx.timed("trajectories", [&] {
    return sample_trajectories(kernel, n, c.samples, c.seed);
  });
  std::vector<int> marks;
  for (int m : {10, 25, 50, 100, 150, 200, 300, 500, 1000})
    if (m < n) marks.push_back(m);
  marks.push_back(n);
  const auto col = a2_collapse(traj, marks);
  {
    std::vector<std::string> rows;
    for (const auto& r : col.rows) rows.push_back(join({std::to_string(r.n), num(r.median), num(r.q90)}));
    ctx.write_csv("a2_collapse.csv", "n,median_ratio,q90_ratio", rows);
  }
  j["a2_collapse"] = {{"final_n", n},
                      {"final_q90", col.rows.empty() ? json(nullptr) : json(col.rows.back().q90)},
                      {"collapsed", col.collapsed}};
  if (!col.collapsed) ctx.rep.warnings.push_back("no a2/a1 collapse under the tilted law");
  if (!traj.empty()) {
    const auto& t0 = traj.front();
    std::vector<std::string> rows;
    for (std::size_t m = 0; m < t0.word.size(); ++m) {
      const auto xy = point_coordinates(t0.chain[m + 1]);
      const double la1 = t0.log_a1[m];
      const double a2 = std::exp(la1) * t0.sv_ratio[m];
      rows.push_back(join({std::to_string(m + 1), e.letter(t0.word[m]).label, num(xy[0]),
                           num(xy[1]), num(t0.log_norm[m]), num(std::exp(la1)), num(a2)}));
    }
    ctx.write_csv("trajectory.csv", "step,letter,coord1,coord2,log_norm,a1,a2", rows);
  }

  // martingale
  const auto mg = ctx.timed("martingale", [&] {
    return martingale_check(kernel, 0, c.martingale_n, c.enumeration_cap);
  });
  j["martingale"] = {{"n", mg.n},
                     {"start_node", mg.start_node},
                     {"max_relative_defect", mg.max_relative_defect},
                     {"words_checked", mg.words_checked},
                     {"residual", triple->residual()}};

  // correlations of the first-letter indicator
  std::vector<int> lags;
  for (int l = 0; l <= c.lags; ++l) lags.push_back(l);
  CorrelationOptions cop;
  cop.chains = c.chains;
  cop.length = c.chain_length;
  cop.seed = c.seed;
  const auto f = CylinderObservable::letter_indicator(0, e.size());
  const auto cr = ctx.timed("correlations", [&] { return correlation_decay(kernel, f, f, lags, cop); });
  {
    std::vector<std::string> rows;
    for (const auto& r : cr.rows)
      rows.push_back(join({std::to_string(r.lag), num(r.model), num(r.sample), num(r.half_width)}));
    ctx.write_csv("correlations.csv", "lag,model,sample,half_width", rows);
  }
  auto fit_json = [](const ExpFit& ft) {
    return json{{"valid", ft.valid}, {"rate", finite(ft.rate)}, {"r2", finite(ft.r2)},
                {"points", ft.points}};
  };
  j["correlations"] = {{"observable", f.name},
                       {"period", cr.period},
                       {"model_floor", cr.model_floor},
                       {"model_fit", fit_json(cr.model_fit)},
                       {"sample_fit", fit_json(cr.sample_fit)}};

  // thermodynamics
  const bool thermo = c.thermo == "on" ||
                      (c.thermo == "auto" && e.mode() == MeasureMode::probability);
  if (thermo) {
    const auto th = ctx.timed("thermo", [&] { return thermo_report(kernel, n, c.samples, c.seed); });
    auto est = [](const Estimate& x) { return json{{"mean", x.mean}, {"half_width", x.half_width}}; };
    j["thermo"] = {{"n", th.n},
                   {"count", th.count},
                   {"pressure", th.pressure},
                   {"zeta", est(th.zeta)},
                   {"xi", est(th.xi)},
                   {"entropy", est(th.entropy)},
                   {"variational_defect", th.variational_defect},
                   {"variational_half_width", th.variational_half_width},
                   {"entropy_route", th.entropy_route},
                   {"entropy_defect", th.entropy_defect},
                   {"entropy_half_width", th.entropy_half_width}};
    // experimental: central-difference P'(s) against -zeta
    const double h = std::min(1e-3, s / 2);
    auto side = so;
    side.compute_spectrum = false;
    const double dp = ctx.timed("p_prime", [&] {
      return (solve_spectral(e, s + h, side).log_k() - solve_spectral(e, s - h, side).log_k()) /
             (2 * h);
    });
    j["thermo"]["p_prime_vs_zeta"] = {{"experimental", true},
                                      {"step", h},
                                      {"p_prime", dp},
                                      {"minus_zeta", -th.zeta.mean},
                                      {"difference", dp + th.zeta.mean},
                                      {"half_width", th.zeta.half_width}};
  } else {
    j["thermo"] = nullptr;
  }
  return j;
}

json cmd_oracle(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto grid = grid_of(c);
  std::vector<std::string> rows;
  json pts = json::array();
  auto add = [&](double s, double P, const std::string& branch) {
    rows.push_back(join({num(s), num(P), branch}));
    pts.push_back({{"s", s}, {"P", finite(P)}, {"branch", branch}});
  };
  json j;
  j["family"] = c.family;
  j["params"] = c.params;
  if (c.family == "reducible") {
    if (c.params.size() != 4) throw UsageError("reducible oracle needs --params a,b,c,d");
    const double a = c.params[0], b = c.params[1], cc = c.params[2], d = c.params[3];
    for (double s : grid) {
      const double first = log_add_exp(s * std::log(a), s * std::log(cc));
      const double second = log_add_exp(s * std::log(b), s * std::log(d));
      const double P = reducible_pressure_oracle(a, b, cc, d, s);
      add(s, P, first >= second ? "first" : "second");
    }
    j["formula"] = "max(log(a^s + c^s), log(b^s + d^s))";
  } else if (c.family == "keep-switch") {
    if (c.params.size() != 2) throw UsageError("keep-switch oracle needs --params q1,q2");
    // Row-stochastic M_K + M_S gives P(1) = 0; every word is nonzero, so
    // P(0) = log 2.
    for (double s : grid) {
      if (s == 0.0) {
        add(s, std::log(2.0), "counting");
      } else if (s == 1.0) {
        add(s, 0.0, "stochastic");
      } else {
        add(s, std::numeric_limits<double>::quiet_NaN(), "none");
      }
    }
    j["formula"] = "P(0) = log 2, P(1) = 0";
  } else {
    throw UsageError("unknown oracle family '" + c.family + "' (reducible or keep-switch)");
  }
  ctx.write_csv("oracle.csv", "s,P,branch", rows);
  j["points"] = pts;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string config_to_json(const RunConfig& c) { return config_json(c, true).dump(2); }

RunConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(0, "config", err.what());
  }
  if (!j.is_object()) throw ParseError(0, "config", "expected a JSON object");
  RunConfig c;
  try {
    read(j, "command", c.command);
    read(j, "ensemble", c.ensemble);
    read_opt(j, "s", c.s);
    read_opt(j, "s_min", c.s_min);
    read_opt(j, "s_max", c.s_max);
    read_opt(j, "s_step", c.s_step);
    read(j, "method", c.method);
    read(j, "n_schedule", c.n_schedule);
    read(j, "schedule_budget", c.schedule_budget);
    read(j, "enumeration_cap", c.enumeration_cap);
    read(j, "mc_samples", c.mc_samples);
    read(j, "mesh", c.mesh);
    read(j, "interp", c.interp);
    read(j, "tol", c.tol);
    read(j, "max_iter", c.max_iter);
    read_opt(j, "alpha", c.alpha);
    read(j, "samples", c.samples);
    read(j, "tilted_n", c.tilted_n);
    read(j, "halpha_n_max", c.halpha_n_max);
    read(j, "lags", c.lags);
    read(j, "chains", c.chains);
    read(j, "chain_length", c.chain_length);
    read(j, "martingale_n", c.martingale_n);
    read(j, "thermo", c.thermo);
    read(j, "kink_window", c.kink_window);
    read(j, "kink_threshold", c.kink_threshold);
    read(j, "family", c.family);
    read(j, "params", c.params);
    read(j, "seed", c.seed);
    read(j, "out", c.out);
    read(j, "formats", c.formats);
  } catch (const json::exception& err) {
    throw ParseError(0, "config", err.what());
  }
  return c;
}

std::uint64_t config_hash(const RunConfig& c) {
  const std::string text = config_json(c, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string report_to_json(const RunReport& r) {
  json j;
  j["tool_version"] = r.tool_version;
  j["command"] = r.command;
  j["config_hash"] = hash_hex(r.hash);
  j["seed"] = r.config.seed;
  j["config"] = config_json(r.config, true);
  j["status"] = r.status;
  if (r.status != "ok") {
    j["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
  }
  j["warnings"] = r.warnings;
  j["results"] = json::parse(r.results);
  j["files"] = r.files;
  return j.dump(2);
}

int exit_code_for(std::string_view kind) {
  if (kind == "UsageError" || kind == "ParseError" || kind == "InvalidArgument" ||
      kind == "ModeError" || kind == "UnsupportedDimension" || kind == "DimTooSmall") {
    return 2;
  }
  return 3;
}

RunReport run_command(const RunConfig& cfg) {
  RunReport rep;
  rep.command = cfg.command;
  rep.config = cfg;
  rep.hash = config_hash(cfg);

  Context ctx{cfg, rep, "", false, false};
  ctx.header = "# mpp " + std::string(kToolVersion) + " command=" + cfg.command +
               " config_hash=" + hash_hex(rep.hash) + " seed=" + std::to_string(cfg.seed);
  for (const auto& f : cfg.formats) {
    if (f == "csv") {
      ctx.csv = true;
    } else if (f == "json") {
      ctx.json_out = true;
    } else {
      rep.status = "failed";
      rep.error_kind = "UsageError";
      rep.error_message = "unknown format '" + f + "' (csv or json)";
      rep.exit_code = 2;
      return rep;
    }
  }

  static const std::vector<std::pair<std::string, std::function<json(Context&)>>> commands = {
      {"check", cmd_check},   {"pressure", cmd_pressure}, {"spectral", cmd_spectral},
      {"tilted", cmd_tilted}, {"oracle", cmd_oracle}};
  const auto it = std::find_if(commands.begin(), commands.end(),
                               [&](const auto& p) { return p.first == cfg.command; });
  try {
    if (it == commands.end()) throw UsageError("unknown command '" + cfg.command + "'");
    if ((ctx.csv || ctx.json_out) && !cfg.out.empty()) {
      std::filesystem::create_directories(cfg.out);
    }
    rep.results = it->second(ctx).dump();
  } catch (const Error& err) {
    rep.status = "failed";
    rep.error_kind = err.kind();
    rep.error_message = err.what();
    rep.exit_code = exit_code_for(err.kind());
  } catch (const std::filesystem::filesystem_error& err) {
    rep.status = "failed";
    rep.error_kind = "UsageError";
    rep.error_message = err.what();
    rep.exit_code = 2;
  }

  if (ctx.json_out && rep.exit_code != 2 && std::filesystem::is_directory(cfg.out)) {
    const std::string name = cfg.command + ".json";
    rep.files.push_back(name);
    std::ofstream(ctx.path(name)) << report_to_json(rep) << "\n";
    json t;
    for (const auto& [phase, sec] : rep.timings) t[phase] = sec;
    std::ofstream(ctx.path("timings.json")) << t.dump(2) << "\n";
  }
  return rep;
}

}  // namespace mpp
