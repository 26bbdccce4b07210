#include "mpp/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mpp/errors.hpp"
#include "mpp/numerics.hpp"

namespace mpp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_step(double h1, double h2) {
  return std::abs(h1 - h2) <= 1e-6 * std::max(std::abs(h1), std::abs(h2));
}

CurvePoint from_estimate(const PressureEstimate& p) {
  CurvePoint c;
  c.s = p.s;
  c.method = CurveMethod::wordsum;
  c.ok = true;
  c.P = p.value();
  if (p.has_exact) {
    c.detail = to_string(p.exact_method) + " n=" + std::to_string(p.exact_n);
    const auto& ws = p.word_sums;
    if (ws.size() >= 3) {
      const auto& hi = ws.back();
      const auto& lo = ws[ws.size() - 3];
      const double secant = (hi.value - lo.value) / (hi.n - lo.n);
      c.uncertainty = std::abs(p.ratio_estimate - secant);
    }
  } else {
    c.monte_carlo = true;
    c.noise = p.half_width();
    c.uncertainty = c.noise;
    c.detail = "monte_carlo n=" + std::to_string(p.mc_n) +
               " samples=" + std::to_string(p.mc_samples);
  }
  return c;
}

CurvePoint failed(double s, CurveMethod m, const std::string& what) {
  CurvePoint c;
  c.s = s;
  c.method = m;
  c.ok = false;
  c.error = what;
  c.P = kNaN;
  return c;
}

std::vector<CurvePoint> wordsum_series(const MatrixEnsemble& e, std::span<const double> grid,
                                       std::span<const int> schedule, const PressureOptions& po) {
  std::vector<CurvePoint> out;
  try {
    for (const auto& p : pressure_estimate_grid(e, grid, schedule, po))
      out.push_back(from_estimate(p));
    return out;
  } catch (const Error&) {
    // isolate the failing points below
  }
  out.clear();
  for (double s : grid) {
    try {
      out.push_back(from_estimate(pressure_estimate(e, s, schedule, po)));
    } catch (const Error& err) {
      out.push_back(failed(s, CurveMethod::wordsum, err.kind() + ": " + err.what()));
    }
  }
  return out;
}

std::shared_ptr<const TransferTable> spectral_table(const MatrixEnsemble& e,
                                                    const SpectralOptions& so) {
  auto mesh = std::make_shared<const ProjectiveMesh>(ProjectiveMesh::for_ensemble(e, so.mesh_size));
  return std::make_shared<const TransferTable>(
      TransferTable::build(e, mesh, so.interp, so.kernel_tol));
}

CurvePoint spectral_point(const MatrixEnsemble& e, double s,
                          const std::shared_ptr<const TransferTable>& table,
                          const SpectralOptions& so) {
  try {
    const auto t = solve_spectral(e, s, table, so);
    CurvePoint c;
    c.s = s;
    c.method = CurveMethod::spectral;
    c.ok = true;
    c.P = t.log_k();
    c.uncertainty = t.residual();
    c.detail = "mesh=" + std::to_string(so.mesh_size) + " " + to_string(so.interp);
    return c;
  } catch (const Error& err) {
    return failed(s, CurveMethod::spectral, err.kind() + ": " + err.what());
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::wordsum: return "wordsum";
    case SweepMethod::spectral: return "spectral";
    case SweepMethod::both: return "both";
  }
  return "?";
}

std::string to_string(CurveMethod m) {
  return m == CurveMethod::wordsum ? "wordsum" : "spectral";
}

SweepMethod parse_sweep_method(std::string_view text) {
  if (text == "wordsum") return SweepMethod::wordsum;
  if (text == "spectral") return SweepMethod::spectral;
  if (text == "both") return SweepMethod::both;
  throw InvalidArgument("unknown method '" + std::string(text) +
                        "' (expected wordsum, spectral or both)");
}

std::vector<double> uniform_grid(double s_min, double s_max, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidArgument("s step must be > 0");
  if (!std::isfinite(s_min) || !std::isfinite(s_max) || s_max < s_min) {
    throw InvalidArgument("need finite s_min <= s_max");
  }
  const auto count = static_cast<long>(std::floor((s_max - s_min) / step + 1e-6)) + 1;
  if (count > 10000000) throw InvalidArgument("s grid too large");
  std::vector<double> g(count);
  for (long i = 0; i < count; ++i) g[i] = s_min + static_cast<double>(i) * step;
  return g;
}

void finite_differences(PressureCurve& curve) {
  for (auto* series : {&curve.wordsum, &curve.spectral}) {
    auto& pts = *series;
    const std::size_t n = pts.size();
    auto central = [&](std::size_t i) {
      return i > 0 && i + 1 < n && pts[i - 1].ok && pts[i].ok && pts[i + 1].ok &&
             same_step(pts[i].s - pts[i - 1].s, pts[i + 1].s - pts[i].s);
    };
    std::vector<double> smooth(n, kNaN);
    for (std::size_t i = 0; i < n; ++i) {
      if (!pts[i].ok) continue;
      smooth[i] = pts[i].monte_carlo && central(i)
                      ? 0.25 * (pts[i - 1].P + 2.0 * pts[i].P + pts[i + 1].P)
                      : pts[i].P;
    }
    for (std::size_t i = 0; i < n; ++i) {
      pts[i].D1 = kNaN;
      pts[i].D2 = kNaN;
      if (!central(i)) continue;
      const double h = pts[i + 1].s - pts[i].s;
      pts[i].D1 = (pts[i + 1].P - pts[i - 1].P) / (2.0 * h);
      pts[i].D2 = (smooth[i + 1] - 2.0 * smooth[i] + smooth[i - 1]) / (h * h);
    }
  }
}

std::vector<KinkFlag> detect_kinks(const PressureCurve& curve, CurveMethod method,
                                   const KinkOptions& opts, const CurveEvaluator& refine) {
  if (opts.window < 1) throw InvalidArgument("kink window must be >= 1");
  if (!(opts.threshold > 0.0)) throw InvalidArgument("kink threshold must be > 0");
  const auto& pts = curve.series(method);
  const std::size_t n = pts.size();

  // Maximal runs of successive points with finite D2 and a common step.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < n;) {
    if (!std::isfinite(pts[i].D2)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && std::isfinite(pts[j].D2) &&
           same_step(pts[j].s - pts[j - 1].s, pts[i + 1].s - pts[i].s))
      ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  const std::size_t need = 2 * static_cast<std::size_t>(opts.window) + 1;
  // A run of D2 values of length L spans L + 2 grid points.
  if (std::none_of(runs.begin(), runs.end(),
                   [&](auto r) { return r.second - r.first + 2 >= need; })) {
    throw GridTooCoarse("no uniform stretch of " + std::to_string(need) +
                        " successful grid points for window " + std::to_string(opts.window));
  }

  std::vector<KinkFlag> flags;
  for (auto [b, end] : runs) {
    if (end - b + 2 < need) continue;
    const double h = pts[b + 1].s - pts[b].s;
    std::vector<double> score(end - b, 0.0);
    for (std::size_t i = b; i < end; ++i) {
      const std::size_t lo = i >= b + opts.window ? i - opts.window : b;
      const std::size_t hi = std::min(end, i + opts.window + 1);
      std::vector<double> win;
      for (std::size_t j = lo; j < hi; ++j) win.push_back(std::abs(pts[j].D2));
      double noise = opts.rounding * (1.0 + std::abs(pts[i].P));
      for (std::size_t j = i - 1; j <= i + 1; ++j) noise = std::max(noise, pts[j].noise);
      const double floor = 4.0 * noise / (h * h);
      score[i - b] = std::abs(pts[i].D2) / std::max(median_of(win), floor);
    }
    for (std::size_t i = b; i < end;) {
      if (score[i - b] <= opts.threshold) {
        ++i;
        continue;
      }
      std::size_t j = i, best = i;
      while (j < end && score[j - b] > opts.threshold) {
        if (score[j - b] > score[best - b]) best = j;
        ++j;
      }
      KinkFlag f;
      f.method = method;
      f.s_star = pts[best].s;
      f.lo = pts[i].s - h;
      f.hi = pts[j - 1].s + h;
      f.score = score[best - b];

      // One-sided quadratic extrapolation to s* from three points strictly on
      // each side: P'(s*) ~ (5 P(-1) - 8 P(-2) + 3 P(-3)) / 2h.
      auto P = [&](long k) -> double {
        const long idx = static_cast<long>(best) + k;
        if (idx < 0 || idx >= static_cast<long>(n) || !pts[idx].ok) return kNaN;
        return pts[idx].P;
      };
      f.left_slope = (5.0 * P(-1) - 8.0 * P(-2) + 3.0 * P(-3)) / (2.0 * h);
      f.right_slope = -(5.0 * P(1) - 8.0 * P(2) + 3.0 * P(3)) / (2.0 * h);

      if (refine) {
        const auto lm = refine(f.s_star - 0.5 * h);
        const auto rm = refine(f.s_star + 0.5 * h);
        if (lm && rm && std::isfinite(*lm) && std::isfinite(*rm)) {
          // second differences at step h/2 centred on s* - h/2, s*, s* + h/2
          const double q = 0.25 * h * h;
          const double c[3] = {std::abs(pts[best].P - 2.0 * *lm + P(-1)) / q,
                               std::abs(*rm - 2.0 * pts[best].P + *lm) / q,
                               std::abs(P(1) - 2.0 * *rm + pts[best].P) / q};
          const int k = static_cast<int>(std::max_element(c, c + 3) - c);
          if (std::isfinite(c[k])) {
            f.s_star = pts[best].s + (k - 1) * 0.5 * h;
            f.lo = f.s_star - 0.5 * h;
            f.hi = f.s_star + 0.5 * h;
            f.refined = true;
          }
        }
      }
      flags.push_back(f);
      i = j;
    }
  }
  return flags;
}

PressureCurve sweep(const MatrixEnsemble& e, std::span<const double> s_grid, SweepMethod method,
                    const SweepParams& params) {
  if (s_grid.empty()) throw UsageError("empty s grid");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (!std::isfinite(s_grid[i])) throw InvalidArgument("s grid must be finite");
    if (i && !(s_grid[i] > s_grid[i - 1])) {
      throw InvalidArgument("s grid must be strictly increasing");
    }
  }
  const bool do_w = method != SweepMethod::spectral;
  const bool do_s = method != SweepMethod::wordsum;
  if (do_s && !(s_grid.front() > 0.0)) {
    throw InvalidArgument("the spectral method needs every s > 0");
  }

  PressureCurve curve;
  curve.s.assign(s_grid.begin(), s_grid.end());
  const std::vector<int> schedule =
      params.schedule.empty() ? auto_schedule(e, params.schedule_budget) : params.schedule;

  if (do_w) curve.wordsum = wordsum_series(e, s_grid, schedule, params.pressure);

  std::shared_ptr<const TransferTable> table;
  std::string table_error;
  if (do_s) {
    try {
      table = spectral_table(e, params.spectral);
    } catch (const Error& err) {
      table_error = err.kind() + ": " + err.what();
    }
    curve.spectral.resize(s_grid.size());
    parallel_for(s_grid.size(), [&](std::size_t i) {
      curve.spectral[i] = table ? spectral_point(e, s_grid[i], table, params.spectral)
                                : failed(s_grid[i], CurveMethod::spectral, table_error);
    });
  }

  curve.discrepancy.assign(s_grid.size(), kNaN);
  if (do_w && do_s) {
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
      if (curve.wordsum[i].ok && curve.spectral[i].ok)
        curve.discrepancy[i] = curve.wordsum[i].P - curve.spectral[i].P;
    }
  }

  finite_differences(curve);

  if (params.detect) {
    for (CurveMethod m : {CurveMethod::wordsum, CurveMethod::spectral}) {
      auto& pts = curve.series(m);
      if (pts.empty()) continue;
      CurveEvaluator eval;
      if (params.refine) {
        if (m == CurveMethod::wordsum) {
          eval = [&](double s) -> std::optional<double> {
            try {
              return pressure_estimate(e, s, schedule, params.pressure).value();
            } catch (const Error&) {
              return std::nullopt;
            }
          };
        } else if (table) {
          eval = [&](double s) -> std::optional<double> {
            const auto c = spectral_point(e, s, table, params.spectral);
            return c.ok ? std::optional<double>(c.P) : std::nullopt;
          };
        }
      }
      std::vector<KinkFlag> found;
      try {
        found = detect_kinks(curve, m, params.kinks, eval);
      } catch (const GridTooCoarse&) {
        continue;  // short sweeps simply carry no flags
      }
      for (const auto& f : found) {
        auto nearest = std::min_element(pts.begin(), pts.end(), [&](const auto& x, const auto& y) {
          return std::abs(x.s - f.s_star) < std::abs(y.s - f.s_star);
        });
        nearest->kink = true;
        curve.flags.push_back(f);
      }
    }
  }
  return curve;
}

}  // namespace mpp
