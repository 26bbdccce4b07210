#include <gtest/gtest.h>

#include <cmath>

#include "mpp/errors.hpp"
#include "mpp/sweep.hpp"
#include "test_util.hpp"

using namespace mpp;

namespace {

SweepParams params(int mesh = 256) {
  SweepParams p;
  p.spectral.mesh_size = mesh;
  p.spectral.compute_spectrum = false;
  return p;
}

double kink_branch(double s) {
  return std::max(std::log(std::pow(2.0, s + 1)), std::log(1 + std::pow(3.0, s)));
}

std::string corpus_path(const std::string& name) {
  return std::string(MPP_SOURCE_DIR) + "/corpus/" + name;
}

CurvePoint point(double s, double p, bool mc) {
  CurvePoint c;
  c.s = s;
  c.ok = true;
  c.P = p;
  c.monte_carlo = mc;
  return c;
}

}  // namespace

TEST(Grid, Uniform) {
  const auto g = uniform_grid(0.25, 2.0, 0.025);
  ASSERT_EQ(g.size(), 71u);
  EXPECT_EQ(g.front(), 0.25);
  EXPECT_NEAR(g.back(), 2.0, 1e-12);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], 0.25 + i * 0.025);
  EXPECT_EQ(uniform_grid(1.0, 1.0, 0.1).size(), 1u);
  EXPECT_THROW(uniform_grid(1.0, 0.0, 0.1), InvalidArgument);
  EXPECT_THROW(uniform_grid(0.0, 1.0, 0.0), InvalidArgument);
}

TEST(Sweep, ScalarIsLinear) {
  const double c = 2.5;
  const auto e = corpus::scalar(c);
  const auto grid = uniform_grid(0.5, 3.0, 0.125);
  const auto curve = sweep(e, grid, SweepMethod::both, params(64));
  for (auto m : {CurveMethod::wordsum, CurveMethod::spectral}) {
    for (const auto& p : curve.series(m)) {
      ASSERT_TRUE(p.ok) << p.error;
      EXPECT_NEAR(p.P, p.s * std::log(c), 1e-12);
      if (std::isfinite(p.D2)) EXPECT_NEAR(p.D2, 0.0, 1e-9);
      EXPECT_FALSE(p.kink);
    }
  }
  EXPECT_TRUE(curve.flags.empty());
}

TEST(Sweep, ReduciblePairFollowsClosedForm) {
  const auto e = corpus::reducible_pair(3, 2, 1.0 / 3, 0.5);
  const auto grid = uniform_grid(0.25, 4.0, 0.05);
  const auto curve = sweep(e, grid, SweepMethod::both, params());
  for (auto m : {CurveMethod::wordsum, CurveMethod::spectral}) {
    for (const auto& p : curve.series(m)) {
      ASSERT_TRUE(p.ok) << p.error;
      EXPECT_NEAR(p.P, std::log(std::pow(3.0, p.s) + std::pow(3.0, -p.s)), 0.02) << p.s;
    }
  }
  EXPECT_TRUE(curve.flags.empty());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ASSERT_TRUE(std::isfinite(curve.discrepancy[i]));
    const double tol = std::max(0.01, curve.wordsum[i].uncertainty + curve.spectral[i].uncertainty);
    EXPECT_LE(std::abs(curve.discrepancy[i]), tol) << grid[i];
  }
}

TEST(Sweep, KinkPairFlagsOnePoint) {
  const auto e = corpus::reducible_pair(2, 1, 2, 3);
  const auto grid = uniform_grid(0.25, 2.0, 0.025);
  const auto curve = sweep(e, grid, SweepMethod::wordsum, params());
  for (const auto& p : curve.wordsum) EXPECT_NEAR(p.P, kink_branch(p.s), 0.02) << p.s;
  ASSERT_EQ(curve.flags.size(), 1u);
  const auto& f = curve.flags[0];
  EXPECT_GE(f.s_star, 0.9);
  EXPECT_LE(f.s_star, 1.1);
  EXPECT_NEAR(f.left_slope, std::log(2.0), 0.05);
  EXPECT_NEAR(f.right_slope, 3 * std::log(3.0) / 4, 0.05);
  EXPECT_GT(f.score, 10.0);
  EXPECT_EQ(f.label, "candidate kink");
  int marked = 0;
  for (const auto& p : curve.wordsum) marked += p.kink;
  EXPECT_EQ(marked, 1);
}

TEST(Sweep, FlagStableUnderGridHalving) {
  const auto e = corpus::reducible_pair(2, 1, 2, 3);
  for (double step : {0.05, 0.04}) {
    const auto coarse = sweep(e, uniform_grid(0.2, 2.0, step), SweepMethod::wordsum, params());
    const auto fine = sweep(e, uniform_grid(0.2, 2.0, step / 2), SweepMethod::wordsum, params());
    ASSERT_EQ(coarse.flags.size(), 1u) << step;
    ASSERT_EQ(fine.flags.size(), 1u) << step;
    EXPECT_LE(std::abs(coarse.flags[0].s_star - fine.flags[0].s_star), step + 1e-12);
  }
}

TEST(Sweep, NoFlagsOnIrreducibleProximalEnsembles) {
  for (const char* f : {"keep_switch.ens", "random_7.ens", "keep_switch_probability.ens"}) {
    const auto e = load_ensemble(corpus_path(f));
    const auto curve = sweep(e, uniform_grid(0.25, 3.0, 0.05), SweepMethod::both, params());
    EXPECT_TRUE(curve.flags.empty()) << f << " flag at " << curve.flags.front().s_star;
    for (std::size_t i = 0; i < curve.s.size(); ++i) {
      if (!curve.wordsum[i].ok || !curve.spectral[i].ok) continue;
      const double tol =
          std::max(0.01, curve.wordsum[i].uncertainty + curve.spectral[i].uncertainty);
      EXPECT_LE(std::abs(curve.discrepancy[i]), tol) << f << " s=" << curve.s[i];
    }
  }
}

TEST(Sweep, Errors) {
  const auto e = corpus::keep_switch(0.3, 0.6);
  EXPECT_THROW(sweep(e, std::vector<double>{}, SweepMethod::wordsum), UsageError);
  EXPECT_THROW(sweep(e, std::vector<double>{1.0, 0.5}, SweepMethod::wordsum), InvalidArgument);
  EXPECT_THROW(sweep(e, std::vector<double>{1.0, 1.0}, SweepMethod::wordsum), InvalidArgument);
  EXPECT_THROW(sweep(e, std::vector<double>{-0.5, 0.5}, SweepMethod::spectral), InvalidArgument);
  EXPECT_NO_THROW(sweep(e, std::vector<double>{-0.5, 0.5}, SweepMethod::wordsum));
  EXPECT_THROW(parse_sweep_method("fourier"), InvalidArgument);
}

TEST(Sweep, SpectralFailuresAreRecordedPerPoint) {
  // d = 3 has no mesh; word sums still run
  const auto e = load_ensemble(corpus_path("triangular_3.ens"));
  const auto curve = sweep(e, std::vector<double>{0.5, 1.0, 1.5}, SweepMethod::both, params());
  for (const auto& p : curve.spectral) {
    EXPECT_FALSE(p.ok);
    EXPECT_FALSE(p.error.empty());
  }
  for (const auto& p : curve.wordsum) EXPECT_TRUE(p.ok) << p.error;
  for (double d : curve.discrepancy) EXPECT_TRUE(std::isnan(d));
}

TEST(Detect, GridTooCoarse) {
  const auto e = corpus::reducible_pair(2, 1, 2, 3);
  auto p = params();
  p.detect = false;
  const auto curve = sweep(e, uniform_grid(0.5, 1.5, 0.25), SweepMethod::wordsum, p);
  EXPECT_THROW(detect_kinks(curve, CurveMethod::wordsum), GridTooCoarse);
  // the sweep itself swallows it and reports no flags
  EXPECT_NO_THROW(sweep(e, uniform_grid(0.5, 1.5, 0.25), SweepMethod::wordsum, params()));
}

TEST(Detect, ScoreIsScaleFree) {
  const auto e = corpus::reducible_pair(2, 1, 2, 3);
  auto p = params();
  p.detect = false;
  p.refine = false;
  const auto grid = uniform_grid(0.25, 2.0, 0.025);
  const auto a = sweep(e, grid, SweepMethod::wordsum, p);
  const auto b = sweep(e.with_weights_scaled(7.0), grid, SweepMethod::wordsum, p);
  const auto fa = detect_kinks(a, CurveMethod::wordsum);
  const auto fb = detect_kinks(b, CurveMethod::wordsum);
  ASSERT_EQ(fa.size(), 1u);
  ASSERT_EQ(fb.size(), 1u);
  EXPECT_EQ(fa[0].s_star, fb[0].s_star);
  EXPECT_NEAR(fa[0].score, fb[0].score, 1e-6 * fa[0].score);
}

TEST(FiniteDifferences, MonteCarloSmoothingTouchesD2Only) {
  auto g = testutil::rng(71);
  for (int t = 0; t < 1000; ++t) {
    PressureCurve c;
    const double h = 0.1;
    const int n = 8;
    std::vector<double> raw;
    for (int i = 0; i < n; ++i) {
      const double s = i * h;
      raw.push_back(std::sin(s) + testutil::unif(g, -1e-3, 1e-3));
      c.s.push_back(s);
      c.wordsum.push_back(point(s, raw.back(), t % 2 == 0));
    }
    finite_differences(c);
    const bool mc = t % 2 == 0;
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(c.wordsum[i].P, raw[i]);
      if (i == 0 || i == n - 1) {
        EXPECT_TRUE(std::isnan(c.wordsum[i].D1));
        EXPECT_TRUE(std::isnan(c.wordsum[i].D2));
        continue;
      }
      EXPECT_NEAR(c.wordsum[i].D1, (raw[i + 1] - raw[i - 1]) / (2 * h), 1e-12);
      auto sm = [&](int j) {
        if (!mc || j == 0 || j == n - 1) return raw[j];
        return 0.25 * (raw[j - 1] + 2 * raw[j] + raw[j + 1]);
      };
      EXPECT_NEAR(c.wordsum[i].D2, (sm(i + 1) - 2 * sm(i) + sm(i - 1)) / (h * h), 1e-9);
    }
  }
}

TEST(FiniteDifferences, OnlyAcrossUniformSameMethodNeighbours) {
  PressureCurve c;
  for (double s : {0.0, 0.1, 0.2, 0.4, 0.5, 0.6}) {
    c.s.push_back(s);
    c.wordsum.push_back(point(s, s * s, false));
  }
  c.wordsum[4].ok = false;
  finite_differences(c);
  EXPECT_NEAR(c.wordsum[1].D2, 2.0, 1e-9);
  EXPECT_TRUE(std::isnan(c.wordsum[2].D2));  // steps 0.1 and 0.2
  EXPECT_TRUE(std::isnan(c.wordsum[3].D2));  // failed neighbour
  EXPECT_TRUE(std::isnan(c.wordsum[5].D2));
}
