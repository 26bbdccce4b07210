#include <gtest/gtest.h>

#include <cmath>

#include "mpp/ensemble.hpp"
#include "mpp/errors.hpp"
#include "test_util.hpp"

using namespace mpp;

namespace {

const char* kKeepSwitch = R"(# Keep-Switch
dimension 2
field real
measure counting
norm entry_sum
letter K weight 1
  3/10 0
  0    3/5
letter S weight 1   # trailing comment
  0 7/10
  2/5 0
)";

ParseError parse_failure(const std::string& text) {
  try {
    parse_ensemble(text);
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return ParseError(0, "", "");
}

std::string corpus_path(const std::string& name) {
  return std::string(MPP_SOURCE_DIR) + "/corpus/" + name;
}

}  // namespace

TEST(Parse, KeepSwitchFile) {
  const auto e = parse_ensemble(kKeepSwitch);
  EXPECT_EQ(e.dim(), 2);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e.letter(0).label, "K");
  EXPECT_EQ(e.letter(1).label, "S");
  EXPECT_EQ(e.mode(), MeasureMode::counting);
  EXPECT_EQ(e.norm(), NormKind::entry_sum);
  EXPECT_TRUE(e.is_real());
  // fractions are correctly rounded quotients
  EXPECT_EQ(e.letter(0).matrix.entries()(0, 0).real(), 0.3);
  EXPECT_EQ(e.letter(0).matrix.entries()(1, 1).real(), 0.6);
  EXPECT_EQ(e.letter(1).matrix.entries()(0, 1).real(), 0.7);
  EXPECT_EQ(e.letter(1).matrix.entries()(1, 0).real(), 0.4);
  EXPECT_TRUE(e.all_monomial_2x2());
  EXPECT_FALSE(e.all_diagonal());
}

TEST(Parse, CorpusFilesLoad) {
  for (const char* name : {"keep_switch.ens", "keep_switch_probability.ens", "reducible_3_2.ens",
                           "kink_2_1_2_3.ens", "rotation.ens", "scalar_2.ens", "random_7.ens",
                           "complex_pair.ens", "triangular_3.ens"}) {
    EXPECT_NO_THROW(load_ensemble(corpus_path(name))) << name;
  }
  const auto ks = load_ensemble(corpus_path("keep_switch.ens"));
  const auto ref = corpus::keep_switch(0.3, 0.6);
  for (std::size_t a = 0; a < 2; ++a)
    EXPECT_EQ(ks.letter(a).matrix.entries(), ref.letter(a).matrix.entries());
  EXPECT_FALSE(load_ensemble(corpus_path("complex_pair.ens")).is_real());
}

TEST(Parse, ErrorsNameTheField) {
  const std::string head = "dimension 2\nfield real\nmeasure counting\nnorm entry_sum\n";
  auto e = parse_failure(head + "letter K weight 0\n 1 0\n 0 1\n");
  EXPECT_EQ(e.field(), "weight");
  EXPECT_EQ(e.line(), 5);
  EXPECT_EQ(parse_failure(head + "letter K weight -2\n 1 0\n 0 1\n").field(), "weight");
  EXPECT_EQ(parse_failure(head + "letter K weight abc\n 1 0\n 0 1\n").field(), "weight");
  EXPECT_EQ(parse_failure(head + "letter K weight 1\n 1 0\n 0\n").field(), "entries");
  EXPECT_EQ(parse_failure(head + "letter K weight 1\n 1 0\n 0 x\n").field(), "entries");
  EXPECT_EQ(parse_failure(head + "letter K weight 1\n 0 0\n 0 0\n").field(), "entries");
  EXPECT_EQ(parse_failure("field real\nmeasure counting\n").field(), "dimension");
  EXPECT_EQ(parse_failure("dimension 2\nfield real\nmeasure often\n").field(), "measure");
  EXPECT_EQ(parse_failure("dimension 2\nfield quaternion\n").field(), "field");
  EXPECT_EQ(parse_failure(head + "color blue\n").field(), "color");
  EXPECT_EQ(parse_failure("dimension 2\nfield real\nmeasure probability\n"
                          "letter A weight 0.5\n 1 0\n 0 1\nletter B weight 0.6\n 1 0\n 0 1\n")
                .field(),
            "weight");
  EXPECT_EQ(parse_failure(head + "letter A weight 1\n 1 0\n 0 1\nletter A weight 1\n 1 0\n 0 1\n")
                .field(),
            "letter");
  EXPECT_EQ(parse_failure(head).field(), "letter");
  EXPECT_THROW(load_ensemble(std::string(MPP_SOURCE_DIR) + "/tests/data/bad_weight.ens"),
               ParseError);
  EXPECT_THROW(load_ensemble("/nonexistent/file.ens"), ParseError);
}

TEST(Parse, WriteParseRoundTrip) {
  auto g = testutil::rng(31);
  for (int t = 0; t < 1000; ++t) {
    const int d = 1 + t % 3;
    const std::size_t letters = 1 + t % 4;
    const bool cx = (t / 4) % 2;
    const bool prob = (t / 8) % 2;
    std::vector<CMatrix> ms;
    std::vector<double> ws;
    for (std::size_t a = 0; a < letters; ++a) {
      ms.push_back(cx ? testutil::random_complex(g, d) : testutil::random_real(g, d));
      ws.push_back(testutil::unif(g, 0.01, 3.0));
    }
    if (prob) {
      double tot = 0;
      for (double w : ws) tot += w;
      for (auto& w : ws) w /= tot;
    }
    const auto norm = static_cast<NormKind>(t % 3);
    auto e = testutil::make_ensemble(ms, ws, MeasureMode::counting, norm);
    if (prob) e = e.normalized();
    const auto back = parse_ensemble(write_ensemble(e));
    ASSERT_EQ(back.size(), e.size());
    EXPECT_EQ(back.mode(), e.mode());
    EXPECT_EQ(back.norm(), e.norm());
    EXPECT_EQ(back.is_real(), e.is_real());
    for (std::size_t a = 0; a < e.size(); ++a) {
      EXPECT_EQ(back.letter(a).label, e.letter(a).label);
      EXPECT_EQ(back.letter(a).weight, e.letter(a).weight);
      EXPECT_EQ(back.letter(a).matrix.entries(), e.letter(a).matrix.entries());
    }
  }
}

TEST(Ensemble, Invariants) {
  EXPECT_THROW(MatrixEnsemble({}, MeasureMode::counting), InvalidArgument);
  const auto ks = corpus::keep_switch(0.3, 0.6);
  EXPECT_DOUBLE_EQ(ks.total_weight(), 2.0);
  const auto p = ks.normalized();
  EXPECT_EQ(p.mode(), MeasureMode::probability);
  EXPECT_DOUBLE_EQ(p.letter(0).weight, 0.5);
  EXPECT_DOUBLE_EQ(ks.with_weights_scaled(3.0).letter(1).weight, 3.0);
  EXPECT_EQ(ks.with_matrices_scaled(2.0).letter(0).matrix.entries()(1, 1).real(), 1.2);
}

TEST(Irr, ReduciblePairCertificate) {
  const auto r = irr_check(corpus::reducible_pair(3, 2, 1.0 / 3, 0.5));
  EXPECT_FALSE(r.irreducible);
  EXPECT_TRUE(r.certificate_verified);
  ASSERT_EQ(r.invariant_subspace.cols(), 1);
  EXPECT_NEAR(std::abs(r.invariant_subspace(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.invariant_subspace(1, 0)), 0.0, 1e-12);
  EXPECT_LE(r.invariance_residual, 1e-10);
}

TEST(Irr, KeepSwitchIrreducible) {
  const auto r = irr_check(corpus::keep_switch(0.3, 0.6));
  EXPECT_TRUE(r.irreducible);
  EXPECT_EQ(r.algebra_dimension, 4);
  EXPECT_EQ(r.invariant_subspace.size(), 0);
}

TEST(Irr, IdentityIsReducible) {
  const auto r = irr_check(corpus::scalar(1.0));
  EXPECT_FALSE(r.irreducible);
  EXPECT_EQ(r.algebra_dimension, 1);
  ASSERT_EQ(r.invariant_subspace.cols(), 1);
  EXPECT_NEAR(std::abs(r.invariant_subspace(0, 0)), 1.0, 1e-12);
  EXPECT_TRUE(r.certificate_verified);
}

TEST(Irr, ScaleInvariantVerdict) {
  auto g = testutil::rng(32);
  for (int t = 0; t < 1000; ++t) {
    const int d = 2 + t % 2;
    std::vector<CMatrix> ms{testutil::random_real(g, d), testutil::random_real(g, d)};
    if (t % 2) {
      // common invariant line span{e_1}
      for (auto& m : ms)
        for (int i = 1; i < d; ++i) m(i, 0) = 0.0;
    }
    const auto e = testutil::make_ensemble(ms, {1.0, 1.0});
    std::vector<CMatrix> scaled{ms[0] * testutil::unif(g, 0.01, 100.0),
                                ms[1] * testutil::unif(g, 0.01, 100.0)};
    const auto e2 = testutil::make_ensemble(scaled, {1.0, 1.0});
    const auto a = irr_check(e), b = irr_check(e2);
    EXPECT_EQ(a.irreducible, b.irreducible);
    EXPECT_EQ(a.irreducible, t % 2 == 0);
    if (!a.irreducible) {
      EXPECT_TRUE(a.certificate_verified);
      EXPECT_LE(a.invariance_residual, 1e-10);
    }
  }
}

TEST(Irr, BasisIndependentVerdict) {
  auto g = testutil::rng(33);
  const std::vector<MatrixEnsemble> cases{corpus::keep_switch(0.3, 0.6),
                                          corpus::reducible_pair(3, 2, 1.0 / 3, 0.5),
                                          corpus::random_positive(7),
                                          corpus::reducible_pair(2, 1, 2, 3)};
  for (const auto& e : cases) {
    const bool base = irr_check(e).irreducible;
    for (int t = 0; t < 10; ++t) {
      CMatrix p = testutil::random_complex(g, 2);
      p += CMatrix::Identity(2, 2) * 2.0;
      const auto r = irr_check(e.conjugated(p));
      EXPECT_EQ(r.irreducible, base);
      if (!r.irreducible) EXPECT_TRUE(r.certificate_verified);
    }
  }
}

TEST(Cont, KeepSwitchWitnessIsAPurePower) {
  const auto r = cont_check(corpus::keep_switch(0.6, 0.3));
  ASSERT_TRUE(r.witness_found);
  EXPECT_EQ(r.witness_text, "K^20");
  EXPECT_NEAR(r.ratio, std::pow(0.5, 20), 1e-15);
  EXPECT_LE(r.ratio, 1e-6);
}

TEST(Cont, RotationHasNoWitness) {
  const auto r = cont_check(corpus::rotation(1.0, 1.0));
  EXPECT_FALSE(r.witness_found);
  EXPECT_NEAR(r.ratio, 1.0, 1e-7);
  EXPECT_TRUE(r.heuristic);
  ContOptions big;
  big.max_word_length = 128;
  big.restarts = 1024;
  EXPECT_FALSE(cont_check(corpus::rotation(1.0, 1.0), big).witness_found);
}

TEST(Cont, DiagonalPowerLength) {
  const auto e = testutil::make_ensemble({CMatrix(SquareMatrix::from_rows(2, {3, 0, 0, 2}).entries())},
                                         {1.0});
  const auto r = cont_check(e);
  ASSERT_TRUE(r.witness_found);
  EXPECT_EQ(r.witness.size(), 35u);
  EXPECT_NEAR(r.ratio, std::pow(2.0 / 3.0, 35), 1e-15);
}

TEST(Cont, ReproducibleUnderSeed) {
  auto g = testutil::rng(34);
  for (int t = 0; t < 20; ++t) {
    const auto e = testutil::make_ensemble(
        {testutil::random_real(g, 2), testutil::random_real(g, 2)}, {1.0, 1.0});
    ContOptions o;
    o.seed = 99 + t;
    const auto a = cont_check(e, o), b = cont_check(e, o);
    EXPECT_EQ(a.witness, b.witness);
    EXPECT_EQ(a.ratio, b.ratio);
  }
}
