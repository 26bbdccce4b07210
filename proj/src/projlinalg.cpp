#include "mpp/projlinalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpp/errors.hpp"

namespace mpp {

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::operator_norm:
      return "operator";
    case NormKind::entry_sum:
      return "entry_sum";
    case NormKind::frobenius:
      return "frobenius";
  }
  return "operator";
}

NormKind parse_norm_kind(std::string_view text) {
  if (text == "operator") return NormKind::operator_norm;
  if (text == "entry_sum") return NormKind::entry_sum;
  if (text == "frobenius") return NormKind::frobenius;
  throw InvalidArgument("unknown norm '" + std::string(text) +
                        "' (expected operator|entry_sum|frobenius)");
}

namespace {

bool all_finite(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

bool imag_is_zero(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m.data()[i].imag() != 0.0) return false;
  }
  return true;
}

}  // namespace

SquareMatrix::SquareMatrix(CMatrix entries) : m_(std::move(entries)) {
  if (m_.rows() < 1 || m_.rows() != m_.cols()) {
    throw InvalidArgument("matrix must be square with dim >= 1");
  }
  if (!all_finite(m_)) throw InvalidArgument("matrix has non-finite entries");
  real_ = imag_is_zero(m_);
}

SquareMatrix::SquareMatrix(const Eigen::MatrixXd& entries)
    : SquareMatrix(CMatrix(entries.cast<Complex>())) {}

SquareMatrix SquareMatrix::identity(int dim) {
  return SquareMatrix(CMatrix(CMatrix::Identity(dim, dim)));
}

SquareMatrix SquareMatrix::from_rows(int dim,
                                     const std::vector<double>& row_major) {
  if (dim < 1 || row_major.size() != static_cast<size_t>(dim) * dim) {
    throw InvalidArgument("from_rows: expected dim*dim entries");
  }
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = row_major[i * dim + j];
  return SquareMatrix(m);
}

bool SquareMatrix::is_zero() const { return m_.isZero(0.0); }

bool SquareMatrix::is_diagonal() const {
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j)
      if (i != j && m_(i, j) != Complex(0.0)) return false;
  return true;
}

bool SquareMatrix::is_antidiagonal() const {
  const int d = dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i + j != d - 1 && m_(i, j) != Complex(0.0)) return false;
  return true;
}

SquareMatrix SquareMatrix::scaled(double factor) const {
  return SquareMatrix(CMatrix(m_ * factor));
}

SquareMatrix SquareMatrix::conjugated_by(const CMatrix& basis) const {
  return SquareMatrix(CMatrix(basis.inverse() * m_ * basis));
}

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("dimension mismatch in product");
  return SquareMatrix(CMatrix(a.m_ * b.m_));
}

ProjectivePoint::ProjectivePoint(const CVector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidArgument("projective point needs a finite nonzero vector");
  }
  rep_ = v / n;
  for (Eigen::Index i = 0; i < rep_.size(); ++i) {
    const double mag = std::abs(rep_(i));
    if (mag > 0.0) {
      const Complex phase = std::conj(rep_(i)) / mag;
      rep_ *= phase;
      rep_(i) = Complex(mag, 0.0);
      break;
    }
  }
  // Re-normalize after the phase rotation so ||rep|| = 1 to rounding.
  rep_ /= rep_.norm();
}

ProjectivePoint ProjectivePoint::from_angle(double theta) {
  CVector v(2);
  v << Complex(std::cos(theta)), Complex(std::sin(theta));
  return ProjectivePoint(v);
}

ProjectivePoint ProjectivePoint::basis(int dim, int index) {
  CVector v = CVector::Zero(dim);
  v(index) = 1.0;
  return ProjectivePoint(v);
}

bool ProjectivePoint::is_real() const {
  for (Eigen::Index i = 0; i < rep_.size(); ++i)
    if (rep_(i).imag() != 0.0) return false;
  return true;
}

double ProjectivePoint::angle() const {
  double t = std::atan2(rep_(1).real(), rep_(0).real());
  if (t < 0.0) t += M_PI;
  if (t >= M_PI) t -= M_PI;
  return t;
}

// ||x ^ y||^2 = sum_{i<j} |x_i y_j - x_j y_i|^2 equals 1 - |<x,y>|^2 for unit
// vectors without the cancellation near 0.
double proj_metric(const ProjectivePoint& x, const ProjectivePoint& y) {
  const auto& u = x.rep();
  const auto& v = y.rep();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = i + 1; j < u.size(); ++j) acc += std::norm(u(i) * v(j) - u(j) * v(i));
  return std::min(1.0, std::sqrt(acc));
}

std::optional<Action> try_act(const CMatrix& v, const ProjectivePoint& x,
                              double kernel_tol) {
  CVector y = v * x.rep();
  const double n = y.norm();
  if (n <= kernel_tol * v.norm() || n == 0.0) return std::nullopt;
  return Action{ProjectivePoint(y), n};
}

std::optional<Action> try_act(const SquareMatrix& v, const ProjectivePoint& x,
                              double kernel_tol) {
  return try_act(v.entries(), x, kernel_tol);
}

Action act(const SquareMatrix& v, const ProjectivePoint& x, double kernel_tol) {
  if (v.dim() != x.dim()) throw InvalidArgument("act: dimension mismatch");
  auto r = try_act(v, x, kernel_tol);
  if (!r) throw KernelHit("v x = 0 within kernel tolerance");
  return *r;
}

std::vector<double> singular_values(const CMatrix& v) {
  Eigen::BDCSVD<CMatrix> svd(v);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

TopTwo top_two_singular(const CMatrix& v) {
  if (v.rows() < 2) throw DimTooSmall("top_two_singular requires d >= 2");
  if (v.rows() == 2) {
    // (a1 + a2)^2 = ||v||_F^2 + 2|det v|. For (a1 - a2)^2 rotate the phase so
    // that det is real and positive; it then equals |a - conj d|^2 + |b + conj c|^2
    // without cancellation. a2 goes through |det|/a1.
    const Complex dv = v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0);
    const double det = std::abs(dv);
    const Complex half = det > 0.0 ? std::polar(1.0, -0.5 * std::arg(dv)) : Complex(1.0);
    const double plus = std::sqrt(v.squaredNorm() + 2.0 * det);
    const double minus = std::sqrt(std::norm(half * v(0, 0) - std::conj(half * v(1, 1))) +
                                   std::norm(half * v(0, 1) + std::conj(half * v(1, 0))));
    const double a1 = 0.5 * (plus + minus);
    const double a2 = a1 > 0.0 ? det / a1 : 0.0;
    return {a1, std::min(a2, a1)};
  }
  auto s = singular_values(v);
  return {s[0], s[1]};
}

TopTwo top_two_singular(const SquareMatrix& v) {
  return top_two_singular(v.entries());
}

double wedge2_norm(const CMatrix& v) {
  const auto t = top_two_singular(v);
  return t.a1 * t.a2;
}

double wedge2_norm(const SquareMatrix& v) { return wedge2_norm(v.entries()); }

double matrix_norm(const CMatrix& v, NormKind kind) {
  switch (kind) {
    case NormKind::entry_sum:
      return v.cwiseAbs().sum();
    case NormKind::frobenius:
      return v.norm();
    case NormKind::operator_norm:
      if (v.rows() == 1) return std::abs(v(0, 0));
      return top_two_singular(v).a1;
  }
  return 0.0;
}

double matrix_norm(const SquareMatrix& v, NormKind kind) {
  return matrix_norm(v.entries(), kind);
}

ScaledProduct::ScaledProduct(int dim)
    : m_(CMatrix::Identity(dim, dim)), tmp_(dim, dim) {}

void ScaledProduct::left_multiply(const CMatrix& v) {
  if (zero_) return;
  tmp_.noalias() = v * m_;
  const double scale = tmp_.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    zero_ = true;
    m_.setZero();
    return;
  }
  m_ = tmp_ / scale;
  log_scale_ += std::log(scale);
}

double ScaledProduct::log_norm(NormKind kind) const {
  if (zero_) return -std::numeric_limits<double>::infinity();
  return log_scale_ + std::log(matrix_norm(m_, kind));
}

}  // namespace mpp
