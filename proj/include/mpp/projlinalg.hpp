#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpp {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kDefaultKernelTol = 1e-14;

enum class NormKind { operator_norm, entry_sum, frobenius };

std::string to_string(NormKind kind);
NormKind parse_norm_kind(std::string_view text);

/// A d x d matrix over C. Real input stays real: the imaginary parts are exact
/// zeros, so every product, norm and action agrees bit-for-bit with real
/// arithmetic. `is_real()` is derived from the entries.
class SquareMatrix {
 public:
  explicit SquareMatrix(CMatrix entries);
  explicit SquareMatrix(const Eigen::MatrixXd& entries);

  static SquareMatrix identity(int dim);
  static SquareMatrix from_rows(int dim, const std::vector<double>& row_major);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const CMatrix& entries() const noexcept { return m_; }
  bool is_real() const noexcept { return real_; }
  bool is_zero() const;
  bool is_diagonal() const;
  bool is_antidiagonal() const;

  SquareMatrix scaled(double factor) const;
  SquareMatrix conjugated_by(const CMatrix& basis) const;  // P^{-1} M P

  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);

 private:
  CMatrix m_;
  bool real_ = true;
};

/// Point of P(C^d): a unit representative whose first nonzero coordinate is
/// real and positive.
class ProjectivePoint {
 public:
  explicit ProjectivePoint(const CVector& v);

  /// RP^1 point (cos theta, sin theta).
  static ProjectivePoint from_angle(double theta);
  static ProjectivePoint basis(int dim, int index);

  int dim() const noexcept { return static_cast<int>(rep_.size()); }
  const CVector& rep() const noexcept { return rep_; }
  bool is_real() const;
  /// Angle in [0, pi) of a real point of RP^1.
  double angle() const;

 private:
  CVector rep_;
};

/// sqrt(1 - |<x,y>|^2) = ||x ^ y||.
double proj_metric(const ProjectivePoint& x, const ProjectivePoint& y);

struct Action {
  ProjectivePoint point;
  double norm;  // ||v x|| for the unit representative x
};

/// v . x with the image norm; throws KernelHit when ||v x|| <= tol * ||v||_F.
Action act(const SquareMatrix& v, const ProjectivePoint& x,
           double kernel_tol = kDefaultKernelTol);
std::optional<Action> try_act(const SquareMatrix& v, const ProjectivePoint& x,
                              double kernel_tol = kDefaultKernelTol);
std::optional<Action> try_act(const CMatrix& v, const ProjectivePoint& x,
                              double kernel_tol = kDefaultKernelTol);

struct TopTwo {
  double a1;
  double a2;
};

TopTwo top_two_singular(const SquareMatrix& v);
TopTwo top_two_singular(const CMatrix& v);
/// All singular values, descending.
std::vector<double> singular_values(const CMatrix& v);

/// ||wedge^2 v|| = a1(v) a2(v).
double wedge2_norm(const SquareMatrix& v);
double wedge2_norm(const CMatrix& v);

double matrix_norm(const SquareMatrix& v, NormKind kind);
double matrix_norm(const CMatrix& v, NormKind kind);

/// Running product W = v_n ... v_1 kept as (unit-scale matrix, log scale) so
/// long words neither overflow nor underflow.
class ScaledProduct {
 public:
  explicit ScaledProduct(int dim);

  void left_multiply(const CMatrix& v);
  void left_multiply(const SquareMatrix& v) { left_multiply(v.entries()); }

  const CMatrix& normalized() const noexcept { return m_; }
  double log_scale() const noexcept { return log_scale_; }
  bool is_zero() const noexcept { return zero_; }
  /// log of the chosen norm of the true product (-inf for the zero matrix).
  double log_norm(NormKind kind) const;

 private:
  CMatrix m_;
  CMatrix tmp_;
  double log_scale_ = 0.0;
  bool zero_ = false;
};

}  // namespace mpp
