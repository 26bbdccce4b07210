#include <gtest/gtest.h>

#include <cmath>

#include "mpp/errors.hpp"
#include "mpp/pressure.hpp"
#include "test_util.hpp"

using namespace mpp;

namespace {

MatrixEnsemble diag_pair(double a, double b, double c, double d, NormKind norm) {
  return corpus::reducible_pair(a, b, c, d, norm);
}

// log of the entry sum of (M_1 + ... + M_k)^n; equals log Z_n(1) for
// nonnegative letters under the entry_sum norm with unit weights.
double log_entry_sum_of_power(const MatrixEnsemble& e, int n) {
  CMatrix sum = CMatrix::Zero(e.dim(), e.dim());
  for (const auto& l : e.letters()) sum += l.matrix.entries() * l.weight;
  CMatrix p = CMatrix::Identity(e.dim(), e.dim());
  for (int i = 0; i < n; ++i) p = sum * p;
  return std::log(p.real().sum());
}

}  // namespace

TEST(WordSum, Examples) {
  for (int n : {1, 5, 40}) EXPECT_EQ(word_sum_exact(corpus::scalar(1.0), n, 2.0).value, 0.0);
  const auto z2 = word_sum_exact(diag_pair(2, 1, 2, 3, NormKind::entry_sum), 2, 1.0);
  EXPECT_NEAR(std::exp(z2.value), 32.0, 1e-12);
  EXPECT_NEAR(z2.value, log_entry_sum_of_power(diag_pair(2, 1, 2, 3, NormKind::entry_sum), 2),
              1e-14);
  const auto ks = corpus::keep_switch(0.3, 0.6);
  for (int n : {1, 2, 7, 16, 100, 300}) {
    const auto r = word_sum_exact(ks, n, 1.0);
    EXPECT_NEAR(r.value, std::log(2.0), 1e-11) << n;
    EXPECT_EQ(r.std_error, 0.0);
  }
  EXPECT_EQ(word_sum_exact(ks, 300, 1.0).method, WordSumMethod::structured_dp);
}

TEST(WordSum, StructureDetection) {
  EXPECT_EQ(structure_of(diag_pair(3, 2, 1, 1, NormKind::entry_sum)), Structure::diagonal);
  EXPECT_EQ(structure_of(corpus::keep_switch(0.3, 0.6)), Structure::monomial);
  EXPECT_EQ(structure_of(corpus::random_positive(3)), Structure::none);
  EXPECT_EQ(structure_of(corpus::scalar(2.0, 3)), Structure::diagonal);
}

TEST(WordSum, CapExceeded) {
  WordSumOptions o;
  o.enumeration_cap = 1000;
  EXPECT_THROW(word_sum_exact(corpus::random_positive(3), 12, 1.0, o), CapExceeded);
  EXPECT_FALSE(exact_feasible(corpus::random_positive(3), 12, o));
  EXPECT_TRUE(exact_feasible(corpus::random_positive(3), 9, o));
}

TEST(WordSum, DynamicProgramsMatchBruteForce) {
  auto g = testutil::rng(41);
  for (int t = 0; t < 1000; ++t) {
    const bool monomial = t % 2;
    std::vector<CMatrix> ms;
    std::vector<double> ws;
    for (int a = 0; a < 2 + t % 2; ++a) {
      CMatrix m = CMatrix::Zero(2, 2);
      const bool anti = monomial && (a % 2 == 1);
      const double x = testutil::unif(g, -2.0, 2.0), y = testutil::unif(g, -2.0, 2.0);
      if (anti) {
        m(0, 1) = x;
        m(1, 0) = y;
      } else {
        m(0, 0) = x;
        m(1, 1) = y;
      }
      ms.push_back(m);
      ws.push_back(testutil::unif(g, 0.1, 2.0));
    }
    const auto norm = static_cast<NormKind>(t % 3);
    const auto e = testutil::make_ensemble(ms, ws, MeasureMode::counting, norm);
    ASSERT_NE(structure_of(e), Structure::none);
    const int n = 1 + t % 6;
    const double s = testutil::unif(g, -1.0, 3.0);
    const auto r = word_sum_exact(e, n, s);
    EXPECT_EQ(r.method, WordSumMethod::structured_dp);
    EXPECT_NEAR(r.value, testutil::brute_log_z(e, n, s), 1e-9 * (1 + std::abs(r.value)));
    WordSumOptions plain;
    plain.use_structure = false;
    EXPECT_NEAR(word_sum_exact(e, n, s, plain).value, r.value, 1e-9 * (1 + std::abs(r.value)));
  }
}

TEST(WordSum, EnumerationMatchesBruteForce) {
  auto g = testutil::rng(42);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 2;
    const auto e = testutil::make_ensemble(
        {testutil::random_complex(g, d), testutil::random_real(g, d)},
        {testutil::unif(g, 0.1, 2.0), testutil::unif(g, 0.1, 2.0)}, MeasureMode::counting,
        static_cast<NormKind>(t % 3));
    const int n = 1 + t % 5;
    const double s = testutil::unif(g, -1.0, 3.0);
    EXPECT_NEAR(word_sum_exact(e, n, s).value, testutil::brute_log_z(e, n, s), 1e-9);
  }
}

TEST(WordSum, GridMatchesPointwise) {
  const auto e = corpus::random_positive(5);
  const std::vector<double> ss{-0.5, 0.0, 0.7, 2.0};
  const auto grid = word_sum_exact_grid(e, 8, ss);
  ASSERT_EQ(grid.size(), ss.size());
  for (std::size_t i = 0; i < ss.size(); ++i)
    EXPECT_NEAR(grid[i].value, word_sum_exact(e, 8, ss[i]).value, 1e-12);
}

TEST(WordSum, Submultiplicative) {
  auto g = testutil::rng(43);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2;
    const auto norm = t % 2 ? NormKind::operator_norm : NormKind::entry_sum;
    const auto e = testutil::make_ensemble(
        {testutil::random_real(g, d), testutil::random_complex(g, d)},
        {testutil::unif(g, 0.1, 2.0), testutil::unif(g, 0.1, 2.0)}, MeasureMode::counting, norm);
    const double s = testutil::unif(g, 0.0, 3.0);
    const int n = 1 + t % 4, m = 1 + (t / 4) % 4;
    const double zn = word_sum_exact(e, n, s).value, zm = word_sum_exact(e, m, s).value;
    EXPECT_LE(word_sum_exact(e, n + m, s).value, zn + zm + 1e-10);
  }
}

TEST(WordSum, WeightScalingLaw) {
  auto g = testutil::rng(44);
  for (int t = 0; t < 1000; ++t) {
    const auto e = testutil::make_ensemble(
        {testutil::random_real(g, 2), testutil::random_real(g, 2)},
        {testutil::unif(g, 0.1, 2.0), testutil::unif(g, 0.1, 2.0)});
    const double lambda = testutil::unif(g, 0.05, 20.0);
    const double s = testutil::unif(g, -1.0, 3.0);
    const int n = 1 + t % 6;
    const auto scaled = e.with_weights_scaled(lambda);
    EXPECT_NEAR(word_sum_exact(scaled, n, s).value - word_sum_exact(e, n, s).value,
                n * std::log(lambda), 1e-10 * n);
    if (t % 50 == 0) {
      const std::vector<int> sched{4, 6};
      EXPECT_NEAR(pressure_estimate(scaled, s, sched).value() - pressure_estimate(e, s, sched).value(),
                  std::log(lambda), 1e-10);
    }
  }
}

TEST(MonteCarlo, Examples) {
  const auto id = word_sum_mc(corpus::scalar(1.0), 10, 3.0, 1000, 7);
  EXPECT_EQ(id.value, 0.0);
  EXPECT_EQ(id.std_error, 0.0);
  EXPECT_EQ(id.method, WordSumMethod::monte_carlo);

  const auto e = diag_pair(3, 2, 1.0 / 3, 0.5, NormKind::entry_sum);
  const auto exact = word_sum_exact(e, 12, 1.0);
  const auto mc = word_sum_mc(e, 12, 1.0, 100000, 11);
  EXPECT_GT(mc.std_error, 0.0);
  EXPECT_LE(std::abs(mc.value - exact.value), 3 * mc.std_error);

  // projector then rotation annihilates some words
  const auto pr = testutil::make_ensemble(
      {CMatrix(SquareMatrix::from_rows(2, {1, 0, 0, 0}).entries()),
       CMatrix(SquareMatrix::from_rows(2, {0, -1, 1, 0}).entries())},
      {0.5, 0.5}, MeasureMode::probability);
  const auto pz = word_sum_exact(pr, 5, 1.0);
  EXPECT_TRUE(std::isfinite(pz.value));
  int zero_words = 0;
  for_each_word(pr, 5, [&](const WordVisit&) { ++zero_words; });
  EXPECT_LT(zero_words, 32);
  EXPECT_NEAR(pz.value, testutil::brute_log_z(pr, 5, 1.0), 1e-12);
  const auto pmc = word_sum_mc(pr, 5, 1.0, 20000, 3);
  EXPECT_TRUE(std::isfinite(pmc.value));
}

TEST(MonteCarlo, WithinThreeStandardErrors) {
  // 3 sigma covers 99.7%; allow the binomial tail over 100 seeds
  int outside = 0;
  const auto e = corpus::random_positive(9);
  const double exact = word_sum_exact(e, 8, 1.5).value;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto mc = word_sum_mc(e, 8, 1.5, 4000, seed);
    if (std::abs(mc.value - exact) > 3 * mc.std_error) ++outside;
  }
  EXPECT_LE(outside, 3);
}

TEST(MonteCarlo, SeedReproducible) {
  const auto e = corpus::random_positive(9);
  const auto a = word_sum_mc(e, 20, 1.0, 3000, 5), b = word_sum_mc(e, 20, 1.0, 3000, 5);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NE(a.value, word_sum_mc(e, 20, 1.0, 3000, 6).value);
}

TEST(MonteCarlo, DegenerateSample) {
  const auto nil = testutil::make_ensemble(
      {CMatrix(SquareMatrix::from_rows(2, {0, 1, 0, 0}).entries())}, {1.0});
  EXPECT_THROW(word_sum_mc(nil, 3, 1.0, 100, 1), DegenerateSample);
}

TEST(Estimate, ScalarIsExact) {
  for (double c : {0.5, 2.0, 3.7}) {
    const auto e = corpus::scalar(c);
    for (double s : {-1.0, 0.0, 1.0, 2.5}) {
      const std::vector<int> sched{4, 8};
      const auto p = pressure_estimate(e, s, sched);
      EXPECT_NEAR(p.ratio_estimate, s * std::log(c), 1e-12);
      EXPECT_NEAR(p.fekete_upper, s * std::log(c), 1e-12);
      PressureOptions o;
      o.always_mc = true;
      o.mc_samples = 500;
      const auto q = pressure_estimate(e, s, sched, o);
      ASSERT_TRUE(q.has_mc);
      EXPECT_NEAR(q.mc_estimate, s * std::log(c), 1e-12);
    }
  }
}

TEST(Estimate, ReduciblePairMatchesClosedForm) {
  const auto e = diag_pair(3, 2, 1.0 / 3, 0.5, NormKind::entry_sum);
  std::vector<int> sched;
  for (int n = 2; n <= 24; n += 2) sched.push_back(n);
  const auto p = pressure_estimate(e, 2.0, sched);
  EXPECT_EQ(p.exact_n, 24);
  EXPECT_NEAR(p.value(), std::log(82.0 / 9.0), 5e-3);
  EXPECT_EQ(p.half_width(), 0.0);
}

TEST(Estimate, KeepSwitchAtOneIsZero) {
  const auto ks = corpus::keep_switch(0.3, 0.6);
  const auto p = pressure_estimate(ks, 1.0, auto_schedule(ks));
  EXPECT_NEAR(p.value(), 0.0, 1e-11);
  EXPECT_GE(p.exact_n, 128);
}

TEST(Estimate, FeketeAboveRatioForSubmultiplicativeNorms) {
  auto g = testutil::rng(45);
  for (int t = 0; t < 1000; ++t) {
    const auto norm = t % 2 ? NormKind::operator_norm : NormKind::entry_sum;
    const auto e = testutil::make_ensemble(
        {testutil::random_real(g, 2, 0.0, 1.0), testutil::random_real(g, 2, 0.0, 1.0)},
        {1.0, 1.0}, MeasureMode::counting, norm);
    const std::vector<int> sched{2, 4, 6};
    const double s = testutil::unif(g, 0.1, 3.0);
    const auto p = pressure_estimate(e, s, sched);
    EXPECT_GE(p.fekete_upper, p.ratio_estimate - 1e-10);
  }
}

TEST(Estimate, NormIndependenceInTheLimit) {
  // ||.||_op <= ||.||_1 <= d^{3/2} ||.||_op in dimension d
  const double log_c = 1.5 * std::log(2.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto e = corpus::random_positive(seed, 2, NormKind::operator_norm);
    const auto f = e.with_norm(NormKind::entry_sum);
    const std::vector<int> sched{8, 12};
    for (double s : {0.5, 1.0, 2.0}) {
      const auto a = pressure_estimate(e, s, sched), b = pressure_estimate(f, s, sched);
      EXPECT_LE(std::abs(a.ratio_estimate - b.ratio_estimate), 2.0 / 12 * s * log_c);
      EXPECT_LE(std::abs(a.fekete_upper - b.fekete_upper), s * log_c / 12 + 1e-12);
    }
  }
}

TEST(Estimate, BracketingForReduciblePairs) {
  auto g = testutil::rng(46);
  for (int t = 0; t < 1000; ++t) {
    const double a = testutil::unif(g, 0.1, 3.0), b = testutil::unif(g, 0.1, 3.0),
                 c = testutil::unif(g, 0.1, 3.0), d = testutil::unif(g, 0.1, 3.0);
    const double s = testutil::unif(g, 1.0, 3.0);
    const int n = 1 + t % 24;
    const auto e = diag_pair(a, b, c, d, NormKind::entry_sum);
    const double lz = word_sum_exact(e, n, s).value;
    const double lmax = reducible_pressure_oracle(a, b, c, d, s);
    EXPECT_GE(lz, n * lmax - 1e-10 * n);
    EXPECT_LE(lz, (s + 1) * std::log(2.0) + n * lmax + 1e-10 * n);
  }
}

TEST(Oracle, Examples) {
  EXPECT_NEAR(reducible_pressure_oracle(3, 2, 1.0 / 3, 0.5, 1.0), std::log(10.0 / 3.0), 1e-15);
  EXPECT_NEAR(reducible_pressure_oracle(3, 2, 1.0 / 3, 0.5, 1.0), 1.20397, 1e-5);
  EXPECT_NEAR(reducible_pressure_oracle(2, 1, 2, 3, 1.0), std::log(4.0), 1e-15);
  for (double s : {-2.0, 0.0, 0.5, 7.0})
    EXPECT_NEAR(reducible_pressure_oracle(1, 1, 1, 1, s), std::log(2.0), 1e-15);
}

TEST(Schedule, IncreasingAndWithinBudget) {
  for (const auto& e : {corpus::keep_switch(0.3, 0.6), corpus::random_positive(2),
                        diag_pair(3, 2, 1.0 / 3, 0.5, NormKind::entry_sum)}) {
    const auto sched = auto_schedule(e);
    ASSERT_FALSE(sched.empty());
    for (std::size_t i = 1; i < sched.size(); ++i) EXPECT_LT(sched[i - 1], sched[i]);
  }
  const auto rp = auto_schedule(corpus::random_positive(2));
  EXPECT_LE(std::pow(2.0, rp.back() + 1), double(1 << 20));
}
