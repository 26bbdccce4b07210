#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mpp/ensemble.hpp"

namespace mpp {

enum class MeshKind { rp1, cp1 };
enum class Interp { nearest, linear };
std::string to_string(MeshKind k);
std::string to_string(Interp i);
Interp parse_interp(std::string_view text);

/// Up to two mesh nodes with convex weights.
struct Stencil {
  std::array<int, 2> node{0, 0};
  std::array<double, 2> weight{1.0, 0.0};
  int count = 1;
};

/// RP1: nodes at angles i*pi/N. CP1: spherical Fibonacci set on the Bloch
/// sphere, mapped back to unit vectors (cos(t/2), e^{i phi} sin(t/2)).
class ProjectiveMesh {
 public:
  static ProjectiveMesh rp1(int n);
  static ProjectiveMesh cp1(int n);
  /// RP1 for real ensembles, CP1 otherwise; UnsupportedDimension unless d = 2.
  static ProjectiveMesh for_ensemble(const MatrixEnsemble& e, int n);

  MeshKind kind() const noexcept { return kind_; }
  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  const ProjectivePoint& node(int i) const { return nodes_.at(i); }
  const std::vector<ProjectivePoint>& nodes() const noexcept { return nodes_; }
  /// Node coordinate for tables: angle on RP1, (polar, azimuth) on CP1.
  std::array<double, 2> coordinates(int i) const;

  int nearest(const ProjectivePoint& x) const;
  /// Linear interpolation is only available on RP1; CP1 always uses nearest.
  Stencil locate(const ProjectivePoint& x, Interp interp) const;

 private:
  ProjectiveMesh(MeshKind kind, std::vector<ProjectivePoint> nodes,
                 std::vector<std::array<double, 3>> bloch);
  MeshKind kind_;
  std::vector<ProjectivePoint> nodes_;
  std::vector<std::array<double, 3>> bloch_;
};

/// Per node, per letter: image stencil and ||v_a x_i|| (0 on kernel hits).
struct TransferTable {
  std::shared_ptr<const ProjectiveMesh> mesh;
  Interp interp = Interp::linear;
  int letters = 0;
  std::vector<double> norm;      // [node * letters + a]
  std::vector<Stencil> image;    // [node * letters + a]
  std::vector<bool> hit;         // [node * letters + a]

  static TransferTable build(const MatrixEnsemble& e,
                             std::shared_ptr<const ProjectiveMesh> mesh, Interp interp,
                             double kernel_tol = kDefaultKernelTol);
  std::size_t at(int node, std::size_t a) const { return node * letters + a; }
};

/// Gamma_s f at every node: sum_a w_a f(v_a . x) ||v_a x||^s, kernel hits
/// contribute 0, f(v_a . x) interpolated on the mesh.
std::vector<double> gamma_apply(const MatrixEnsemble& e, double s,
                                const std::vector<double>& f, const TransferTable& table);
std::vector<double> gamma_apply(const MatrixEnsemble& e, double s,
                                const std::vector<double>& f, const ProjectiveMesh& mesh,
                                Interp interp = Interp::linear);

struct SpectralOptions {
  int mesh_size = 512;
  Interp interp = Interp::linear;
  double tol = 1e-12;
  int max_iter = 200000;
  bool compute_spectrum = true;
  int dense_limit = 2048;
  double gap_tol = 1e-6;
  bool check_irreducible = true;
  double kernel_tol = kDefaultKernelTol;
};

struct SpectralResiduals {
  double sigma_tv = 0.0;     // ||sigma G - k sigma||_1 / k
  double e_max = 0.0;        // max_i |(G e)_i - k e_i| / k
  double e_relative = 0.0;   // e_max / max_i e_i
  double e_pointwise = 0.0;  // max_i |(G e)_i - k e_i| / (k e_i)
  double max() const { return std::max({sigma_tv, e_max, e_relative, e_pointwise}); }
};

struct SpectralTriple {
  double s = 0.0;
  double k = 0.0;
  std::shared_ptr<const TransferTable> table;
  std::vector<double> e;      // strictly positive eigenfunction, sigma(e) = 1
  std::vector<double> sigma;  // eigenmeasure, mass 1
  std::vector<double> eta;    // e * sigma, mass 1
  SpectralResiduals residuals;
  int sigma_iterations = 0;
  int e_iterations = 0;

  bool has_spectrum = false;
  int period = 1;
  bool period_closed = true;
  double gap = 0.0;  // modulus of the largest non-peripheral eigenvalue of Q
  std::vector<std::complex<double>> peripheral;

  bool irreducible = true;
  std::vector<std::string> warnings;

  const ProjectiveMesh& mesh() const { return *table->mesh; }
  double log_k() const { return std::log(k); }
  double residual() const { return residuals.max(); }
  /// e interpolated at an arbitrary point with the table's interpolation.
  double e_at(const ProjectivePoint& x) const;
};

SpectralTriple solve_spectral(const MatrixEnsemble& e, double s,
                              const SpectralOptions& opts = {});
/// Reuses a prebuilt transfer table (sweeps over s on a fixed mesh).
SpectralTriple solve_spectral(const MatrixEnsemble& e, double s,
                              std::shared_ptr<const TransferTable> table,
                              const SpectralOptions& opts = {});

/// min over sampled semigroup elements v (random words of length 1..32) of
/// sum_i sigma_i ||v x_i||^s / ||v||^s. Heuristic evidence that sigma is not
/// carried by a hyperplane.
struct CsProxy {
  double value = 0.0;
  std::vector<std::size_t> worst_word;
  int trials = 0;
  bool heuristic = true;
};
CsProxy cs_sigma_proxy(const MatrixEnsemble& e, const SpectralTriple& triple, int trials,
                       std::uint64_t seed = 1);
/// The same ratio for one given word (word[0] applied first).
double cs_sigma_ratio(const MatrixEnsemble& e, const SpectralTriple& triple,
                      const std::vector<std::size_t>& word);

}  // namespace mpp
