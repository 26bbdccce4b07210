#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpp/projlinalg.hpp"

namespace mpp {

enum class MeasureMode { counting, probability };

std::string to_string(MeasureMode mode);
MeasureMode parse_measure_mode(std::string_view text);

struct Letter {
  std::string label;
  SquareMatrix matrix;
  double weight;
};

/// Finitely supported measure on d x d matrices: one matrix and one positive
/// weight per letter. In counting mode the weights are used as given; in
/// probability mode they must sum to 1.
class MatrixEnsemble {
 public:
  MatrixEnsemble(std::vector<Letter> letters, MeasureMode mode,
                 NormKind norm = NormKind::operator_norm);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return letters_.size(); }
  const std::vector<Letter>& letters() const noexcept { return letters_; }
  const Letter& letter(std::size_t i) const { return letters_.at(i); }
  MeasureMode mode() const noexcept { return mode_; }
  NormKind norm() const noexcept { return norm_; }
  bool is_real() const noexcept { return real_; }

  double total_weight() const;
  std::vector<double> weights() const;
  std::vector<double> log_weights() const;

  MatrixEnsemble with_norm(NormKind norm) const;
  /// Every weight multiplied by `factor` (counting mode result).
  MatrixEnsemble with_weights_scaled(double factor) const;
  /// Every matrix multiplied by `factor`.
  MatrixEnsemble with_matrices_scaled(double factor) const;
  /// Same matrices, weights divided by their total, probability mode.
  MatrixEnsemble normalized() const;
  /// Every matrix replaced by P^{-1} v P.
  MatrixEnsemble conjugated(const CMatrix& basis) const;

  bool all_diagonal() const;
  /// d = 2 and every letter is diagonal or antidiagonal.
  bool all_monomial_2x2() const;

 private:
  std::vector<Letter> letters_;
  MeasureMode mode_;
  NormKind norm_;
  int dim_ = 0;
  bool real_ = true;
};

// Ensemble text files --------------------------------------------------------
//
//   # comment
//   dimension 2
//   field real            (real | complex)
//   measure counting      (counting | probability)
//   norm entry_sum        (operator | entry_sum | frobenius)
//   letter K weight 1
//     0.3 0
//     0   0.6
//
// Entries are decimal numbers parsed with correct rounding, or p/q with both
// parts decimal. Complex entries are written re,im (no spaces).

MatrixEnsemble parse_ensemble(std::string_view text);
MatrixEnsemble load_ensemble(const std::string& path);
/// Shortest round-trip decimal representation; parse(write(e)) == e exactly.
std::string write_ensemble(const MatrixEnsemble& e);

// Assumption checks ----------------------------------------------------------

struct IrreducibilityReport {
  bool irreducible = false;
  int algebra_dimension = 0;
  int closure_rounds = 0;
  /// Orthonormal basis (columns) of a common invariant subspace when
  /// reducible; empty otherwise.
  CMatrix invariant_subspace;
  /// max over generators of ||(I - P) v P|| / ||v||.
  double invariance_residual = 0.0;
  bool certificate_verified = false;
};

struct IrrOptions {
  double rank_tol = 1e-10;
  double certificate_tol = 1e-10;
  std::uint64_t seed = 1;
};

IrreducibilityReport irr_check(const MatrixEnsemble& e, const IrrOptions& opts = {});

struct ContOptions {
  int max_word_length = 64;
  int restarts = 256;
  double tol = 1e-6;
  std::uint64_t seed = 1;
};

struct ProximalityReport {
  bool witness_found = false;
  std::vector<std::size_t> witness;  // letter indices, first applied first
  std::string witness_text;          // labels, e.g. "K^20" or "K S K"
  double ratio = 1.0;                // a2/a1 of the witness (or best word)
  int max_word_length = 0;
  int restarts = 0;
  bool heuristic = true;  // "none found" is never a disproof
};

ProximalityReport cont_check(const MatrixEnsemble& e, const ContOptions& opts = {});

struct AssumptionReport {
  IrreducibilityReport irreducibility;
  ProximalityReport proximality;
};

// Reference ensembles used across tests, the CLI corpus and the bindings ----

namespace corpus {

/// K = diag(q1, q2), S = [[0, 1-q1], [1-q2, 0]], unit weights (counting) or
/// 1/2 each (probability).
MatrixEnsemble keep_switch(double q1, double q2,
                           MeasureMode mode = MeasureMode::counting,
                           NormKind norm = NormKind::entry_sum);
/// A = diag(a, b), B = diag(c, d), unit weights.
MatrixEnsemble reducible_pair(double a, double b, double c, double d,
                              NormKind norm = NormKind::entry_sum);
/// {c R_theta}, weight 1.
MatrixEnsemble rotation(double c, double theta,
                        NormKind norm = NormKind::operator_norm);
/// {c I_d}, weight 1.
MatrixEnsemble scalar(double c, int dim = 2,
                      NormKind norm = NormKind::operator_norm);
/// Seeded two-letter 2x2 ensemble with entries uniform in [0.1, 1]
/// (strictly positive, hence proximal; irreducible for generic draws).
MatrixEnsemble random_positive(std::uint64_t seed, std::size_t letters = 2,
                               NormKind norm = NormKind::operator_norm);

}  // namespace corpus

}  // namespace mpp
