#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mpp/ensemble.hpp"

namespace testutil {

using mpp::CMatrix;
using mpp::CVector;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double unif(std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline CMatrix random_real(std::mt19937_64& g, int d, double lo = -1.0, double hi = 1.0) {
  CMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = unif(g, lo, hi);
  return m;
}

inline CMatrix random_complex(std::mt19937_64& g, int d) {
  CMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = {unif(g), unif(g)};
  return m;
}

inline CVector random_vector(std::mt19937_64& g, int d, bool complex) {
  CVector v(d);
  for (int i = 0; i < d; ++i) v(i) = complex ? mpp::Complex(unif(g), unif(g)) : unif(g);
  return v;
}

// Singular values from the eigenvalues of A^H A, descending.
inline std::vector<double> svd_oracle(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a.adjoint() * a);
  std::vector<double> out;
  for (Eigen::Index i = es.eigenvalues().size() - 1; i >= 0; --i)
    out.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
  return out;
}

inline double norm_oracle(const CMatrix& m, mpp::NormKind kind) {
  switch (kind) {
    case mpp::NormKind::entry_sum: return m.cwiseAbs().sum();
    case mpp::NormKind::frobenius: return std::sqrt(m.cwiseAbs2().sum());
    case mpp::NormKind::operator_norm: return svd_oracle(m).front();
  }
  return 0.0;
}

// Z_n(s) by plain recursion over all words with plain Eigen products.
inline double brute_log_z(const mpp::MatrixEnsemble& e, int n, double s) {
  const int d = e.dim();
  double total = 0.0;
  std::function<void(int, const CMatrix&, double)> rec = [&](int depth, const CMatrix& w,
                                                             double weight) {
    if (depth == n) {
      const double nv = norm_oracle(w, e.norm());
      if (nv > 0) total += weight * std::pow(nv, s);
      return;
    }
    for (const auto& l : e.letters()) rec(depth + 1, l.matrix.entries() * w, weight * l.weight);
  };
  rec(0, CMatrix::Identity(d, d), 1.0);
  return std::log(total);
}

inline mpp::MatrixEnsemble make_ensemble(const std::vector<CMatrix>& ms,
                                         const std::vector<double>& weights,
                                         mpp::MeasureMode mode = mpp::MeasureMode::counting,
                                         mpp::NormKind norm = mpp::NormKind::operator_norm) {
  std::vector<mpp::Letter> letters;
  for (std::size_t i = 0; i < ms.size(); ++i)
    letters.push_back({std::string(1, static_cast<char>('A' + i)), mpp::SquareMatrix(ms[i]),
                       weights[i]});
  return mpp::MatrixEnsemble(std::move(letters), mode, norm);
}

}  // namespace testutil
