#include "mpp/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mpp/errors.hpp"
#include "mpp/numerics.hpp"

namespace mpp {

std::string to_string(MeasureMode mode) {
  return mode == MeasureMode::counting ? "counting" : "probability";
}

MeasureMode parse_measure_mode(std::string_view text) {
  if (text == "counting") return MeasureMode::counting;
  if (text == "probability") return MeasureMode::probability;
  throw InvalidArgument("unknown measure mode '" + std::string(text) + "'");
}

MatrixEnsemble::MatrixEnsemble(std::vector<Letter> letters, MeasureMode mode,
                               NormKind norm)
    : letters_(std::move(letters)), mode_(mode), norm_(norm) {
  if (letters_.empty()) throw InvalidArgument("ensemble needs at least one letter");
  dim_ = letters_.front().matrix.dim();
  double total = 0.0;
  for (const auto& l : letters_) {
    if (l.matrix.dim() != dim_) throw InvalidArgument("letters differ in dimension");
    if (!(l.weight > 0.0) || !std::isfinite(l.weight)) {
      throw InvalidArgument("weight of letter '" + l.label + "' must be > 0");
    }
    if (l.matrix.is_zero()) {
      throw InvalidArgument("letter '" + l.label + "' is the zero matrix");
    }
    real_ = real_ && l.matrix.is_real();
    total += l.weight;
  }
  if (mode_ == MeasureMode::probability && std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("probability weights must sum to 1");
  }
}

double MatrixEnsemble::total_weight() const {
  double t = 0.0;
  for (const auto& l : letters_) t += l.weight;
  return t;
}

std::vector<double> MatrixEnsemble::weights() const {
  std::vector<double> w;
  w.reserve(size());
  for (const auto& l : letters_) w.push_back(l.weight);
  return w;
}

std::vector<double> MatrixEnsemble::log_weights() const {
  std::vector<double> w;
  w.reserve(size());
  for (const auto& l : letters_) w.push_back(std::log(l.weight));
  return w;
}

MatrixEnsemble MatrixEnsemble::with_norm(NormKind norm) const {
  return MatrixEnsemble(letters_, mode_, norm);
}

MatrixEnsemble MatrixEnsemble::with_weights_scaled(double factor) const {
  auto ls = letters_;
  for (auto& l : ls) l.weight *= factor;
  return MatrixEnsemble(std::move(ls), MeasureMode::counting, norm_);
}

MatrixEnsemble MatrixEnsemble::with_matrices_scaled(double factor) const {
  auto ls = letters_;
  for (auto& l : ls) l.matrix = l.matrix.scaled(factor);
  return MatrixEnsemble(std::move(ls), mode_, norm_);
}

MatrixEnsemble MatrixEnsemble::normalized() const {
  const double total = total_weight();
  auto ls = letters_;
  for (auto& l : ls) l.weight /= total;
  // Renormalize the last weight so the sum is 1 to within rounding.
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < ls.size(); ++i) partial += ls[i].weight;
  if (ls.size() > 1) ls.back().weight = 1.0 - partial;
  return MatrixEnsemble(std::move(ls), MeasureMode::probability, norm_);
}

MatrixEnsemble MatrixEnsemble::conjugated(const CMatrix& basis) const {
  auto ls = letters_;
  for (auto& l : ls) l.matrix = l.matrix.conjugated_by(basis);
  return MatrixEnsemble(std::move(ls), mode_, norm_);
}

bool MatrixEnsemble::all_diagonal() const {
  return std::all_of(letters_.begin(), letters_.end(),
                     [](const Letter& l) { return l.matrix.is_diagonal(); });
}

bool MatrixEnsemble::all_monomial_2x2() const {
  if (dim_ != 2) return false;
  return std::all_of(letters_.begin(), letters_.end(), [](const Letter& l) {
    return l.matrix.is_diagonal() || l.matrix.is_antidiagonal();
  });
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_decimal(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_real(std::string_view tok, double& out) {
  const auto slash = tok.find('/');
  if (slash == std::string_view::npos) return parse_decimal(tok, out);
  double num = 0, den = 0;
  if (!parse_decimal(tok.substr(0, slash), num) ||
      !parse_decimal(tok.substr(slash + 1), den) || den == 0.0)
    return false;
  out = num / den;
  return std::isfinite(out);
}

bool parse_entry(std::string_view tok, bool complex_field, Complex& out) {
  const auto comma = tok.find(',');
  double re = 0, im = 0;
  if (comma == std::string_view::npos) {
    if (!parse_real(tok, re)) return false;
  } else {
    if (!complex_field) return false;
    if (!parse_real(tok.substr(0, comma), re) ||
        !parse_real(tok.substr(comma + 1), im))
      return false;
  }
  out = Complex(re, im);
  return true;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct PendingLetter {
  std::string label;
  double weight = 0.0;
  int line = 0;
  std::vector<Complex> entries;
};

}  // namespace

MatrixEnsemble parse_ensemble(std::string_view text) {
  int dim = 0;
  bool complex_field = false;
  bool have_field = false;
  std::optional<MeasureMode> mode;
  NormKind norm = NormKind::operator_norm;
  std::vector<PendingLetter> pending;

  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    const auto& key = tok[0];
    if (key == "dimension") {
      if (tok.size() != 2) throw ParseError(line_no, "dimension", "expected one value");
      int v = 0;
      auto [p, ec] = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), v);
      if (ec != std::errc() || p != tok[1].data() + tok[1].size() || v < 1) {
        throw ParseError(line_no, "dimension", "expected a positive integer");
      }
      dim = v;
    } else if (key == "field") {
      if (tok.size() != 2 || (tok[1] != "real" && tok[1] != "complex")) {
        throw ParseError(line_no, "field", "expected real|complex");
      }
      complex_field = tok[1] == "complex";
      have_field = true;
    } else if (key == "measure") {
      if (tok.size() != 2) throw ParseError(line_no, "measure", "expected one value");
      try {
        mode = parse_measure_mode(tok[1]);
      } catch (const InvalidArgument& e) {
        throw ParseError(line_no, "measure", e.what());
      }
    } else if (key == "norm") {
      if (tok.size() != 2) throw ParseError(line_no, "norm", "expected one value");
      try {
        norm = parse_norm_kind(tok[1]);
      } catch (const InvalidArgument& e) {
        throw ParseError(line_no, "norm", e.what());
      }
    } else if (key == "letter") {
      if (dim == 0) throw ParseError(line_no, "dimension", "must precede letters");
      if (tok.size() != 4 || tok[2] != "weight") {
        throw ParseError(line_no, "letter", "expected 'letter <label> weight <w>'");
      }
      PendingLetter pl;
      pl.label = std::string(tok[1]);
      pl.line = line_no;
      if (!parse_real(tok[3], pl.weight)) {
        throw ParseError(line_no, "weight", "not a number");
      }
      if (!(pl.weight > 0.0)) {
        throw ParseError(line_no, "weight", "must be > 0 for letter '" + pl.label + "'");
      }
      for (const auto& other : pending) {
        if (other.label == pl.label) {
          throw ParseError(line_no, "letter", "duplicate label '" + pl.label + "'");
        }
      }
      pending.push_back(std::move(pl));
    } else {
      if (pending.empty()) {
        throw ParseError(line_no, std::string(key), "unknown key");
      }
      auto& cur = pending.back();
      for (const auto& t : tok) {
        Complex z;
        if (!parse_entry(t, complex_field, z)) {
          throw ParseError(line_no, "entries",
                           "bad matrix entry '" + std::string(t) + "' in letter '" +
                               cur.label + "'");
        }
        if (cur.entries.size() >= static_cast<std::size_t>(dim) * dim) {
          throw ParseError(line_no, "entries",
                           "too many entries for letter '" + cur.label + "'");
        }
        cur.entries.push_back(z);
      }
    }
    if (nl == text.size()) break;
  }

  if (dim == 0) throw ParseError(line_no, "dimension", "missing");
  if (!have_field) throw ParseError(line_no, "field", "missing");
  if (!mode) throw ParseError(line_no, "measure", "missing");
  if (pending.empty()) throw ParseError(line_no, "letter", "no letters");

  std::vector<Letter> letters;
  double total = 0.0;
  for (auto& pl : pending) {
    if (pl.entries.size() != static_cast<std::size_t>(dim) * dim) {
      throw ParseError(pl.line, "entries",
                       "letter '" + pl.label + "' needs " +
                           std::to_string(dim * dim) + " entries");
    }
    CMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = pl.entries[i * dim + j];
    if (m.isZero(0.0)) {
      throw ParseError(pl.line, "entries", "letter '" + pl.label + "' is the zero matrix");
    }
    total += pl.weight;
    letters.push_back(Letter{pl.label, SquareMatrix(m), pl.weight});
  }
  if (*mode == MeasureMode::probability && std::abs(total - 1.0) > 1e-12) {
    throw ParseError(pending.back().line, "weight",
                     "probability weights sum to " + format_double(total));
  }
  return MatrixEnsemble(std::move(letters), *mode, norm);
}

MatrixEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "path", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ensemble(ss.str());
}

std::string write_ensemble(const MatrixEnsemble& e) {
  std::ostringstream out;
  out << "dimension " << e.dim() << "\n";
  out << "field " << (e.is_real() ? "real" : "complex") << "\n";
  out << "measure " << to_string(e.mode()) << "\n";
  out << "norm " << to_string(e.norm()) << "\n";
  for (const auto& l : e.letters()) {
    out << "letter " << l.label << " weight " << format_double(l.weight) << "\n";
    const auto& m = l.matrix.entries();
    for (int i = 0; i < e.dim(); ++i) {
      out << " ";
      for (int j = 0; j < e.dim(); ++j) {
        out << " " << format_double(m(i, j).real());
        if (!e.is_real()) out << "," << format_double(m(i, j).imag());
      }
      out << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// (Irr): Burnside closure of the generated algebra

namespace {

using Flat = CVector;

Flat flatten(const CMatrix& m) {
  return Eigen::Map<const Flat>(m.data(), m.size());
}

CMatrix unflatten(const Flat& v, int d) {
  return Eigen::Map<const CMatrix>(v.data(), d, d);
}

// Gram-Schmidt with one re-orthogonalization pass; returns the residual
// vector (not normalized).
Flat orthogonalize(const std::vector<Flat>& basis, Flat v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) v -= b * b.dot(v);
  }
  return v;
}

// Orthonormal basis (columns) of span{vectors}, rank decided at rel_tol.
CMatrix span_basis(const std::vector<CVector>& vectors, double rel_tol) {
  std::vector<Flat> basis;
  for (const auto& v : vectors) {
    const double n = v.norm();
    if (n == 0.0) continue;
    Flat r = orthogonalize(basis, v);
    if (r.norm() > rel_tol * n) basis.push_back(r / r.norm());
  }
  if (basis.empty()) return CMatrix(vectors.empty() ? 0 : vectors[0].size(), 0);
  CMatrix out(basis[0].size(), basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) out.col(i) = basis[i];
  return out;
}

double invariance_residual(const MatrixEnsemble& e, const CMatrix& q) {
  const int d = e.dim();
  const CMatrix proj = q * q.adjoint();
  const CMatrix comp = CMatrix::Identity(d, d) - proj;
  double worst = 0.0;
  for (const auto& l : e.letters()) {
    const CMatrix& v = l.matrix.entries();
    const double r = matrix_norm(CMatrix(comp * v * proj), NormKind::operator_norm) /
                     matrix_norm(v, NormKind::operator_norm);
    worst = std::max(worst, r);
  }
  return worst;
}

CMatrix canonical_phase(CMatrix q) {
  if (q.cols() == 1) {
    ProjectivePoint p(q.col(0));
    q.col(0) = p.rep();
  }
  return q;
}

}  // namespace

IrreducibilityReport irr_check(const MatrixEnsemble& e, const IrrOptions& opts) {
  const int d = e.dim();
  const int full = d * d;
  std::vector<CMatrix> gens;
  for (const auto& l : e.letters()) {
    gens.push_back(l.matrix.entries() / l.matrix.entries().norm());
  }

  IrreducibilityReport rep;
  std::vector<Flat> basis;           // orthonormal, flattened
  std::vector<CMatrix> elements;     // the same span, as matrices
  CMatrix id = CMatrix::Identity(d, d);
  basis.push_back(flatten(id) / std::sqrt(static_cast<double>(d)));
  elements.push_back(id / std::sqrt(static_cast<double>(d)));

  std::vector<CMatrix> frontier = elements;
  int rounds = 0;
  while (!frontier.empty() && static_cast<int>(basis.size()) < full) {
    if (++rounds > full + 1) {
      throw BudgetExceeded("algebra span did not stabilize after d^2 + 1 rounds");
    }
    std::vector<CMatrix> next;
    for (const auto& b : frontier) {
      for (const auto& g : gens) {
        CMatrix c = g * b;
        const double n = c.norm();
        if (n == 0.0) continue;
        Flat r = orthogonalize(basis, flatten(c));
        if (r.norm() > opts.rank_tol * n) {
          r /= r.norm();
          basis.push_back(r);
          elements.push_back(unflatten(r, d));
          next.push_back(elements.back());
          if (static_cast<int>(basis.size()) == full) break;
        }
      }
      if (static_cast<int>(basis.size()) == full) break;
    }
    frontier = std::move(next);
  }
  rep.closure_rounds = rounds;
  rep.algebra_dimension = static_cast<int>(basis.size());
  rep.irreducible = rep.algebra_dimension == full;
  if (rep.irreducible) return rep;

  // Reducible: every minimal invariant subspace contains an eigenvector of a
  // generic algebra element u, and A u is then a proper invariant subspace.
  // The adjoint algebra gives complements of invariant subspaces the same way.
  Rng rng = shard_rng(opts.seed, 0);
  std::vector<CMatrix> candidates;
  for (int trial = 0; trial < 4; ++trial) {
    CMatrix r = CMatrix::Zero(d, d);
    for (const auto& el : elements) {
      r += Complex(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0) * el;
    }
    for (int adjoint = 0; adjoint < 2; ++adjoint) {
      const CMatrix target = adjoint ? CMatrix(r.adjoint()) : r;
      Eigen::ComplexEigenSolver<CMatrix> es(target);
      if (es.info() != Eigen::Success) continue;
      for (int k = 0; k < d; ++k) {
        const CVector u = es.eigenvectors().col(k);
        std::vector<CVector> orbit;
        for (const auto& el : elements) {
          orbit.push_back(adjoint ? CVector(el.adjoint() * u) : CVector(el * u));
        }
        CMatrix q = span_basis(orbit, opts.rank_tol);
        if (q.cols() == 0 || q.cols() >= d) continue;
        if (adjoint) {
          // Orthogonal complement of an invariant subspace of the adjoints.
          Eigen::JacobiSVD<CMatrix> svd(CMatrix(q.adjoint()), Eigen::ComputeFullV);
          q = svd.matrixV().rightCols(d - q.cols());
        }
        candidates.push_back(q);
      }
    }
  }

  auto e1_weight = [](const CMatrix& q) { return q.row(0).norm(); };
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const CMatrix& a, const CMatrix& b) {
                     if (a.cols() != b.cols()) return a.cols() < b.cols();
                     return e1_weight(a) > e1_weight(b) + 1e-12;
                   });
  for (const auto& q : candidates) {
    const double res = invariance_residual(e, q);
    if (res <= opts.certificate_tol) {
      rep.invariant_subspace = canonical_phase(q);
      rep.invariance_residual = res;
      rep.certificate_verified = true;
      return rep;
    }
  }
  if (!candidates.empty()) {
    rep.invariant_subspace = canonical_phase(candidates.front());
    rep.invariance_residual = invariance_residual(e, candidates.front());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// (Cont): search for nearly rank-one normalized semigroup elements

namespace {

double ratio_of(const ScaledProduct& p) {
  if (p.is_zero()) return 1.0;
  const auto t = top_two_singular(p.normalized());
  return t.a1 > 0.0 ? t.a2 / t.a1 : 1.0;
}

std::string describe_word(const MatrixEnsemble& e, const std::vector<std::size_t>& w) {
  if (w.empty()) return "";
  const bool power = std::all_of(w.begin(), w.end(), [&](std::size_t a) { return a == w[0]; });
  if (power && w.size() > 1) {
    return e.letter(w[0]).label + "^" + std::to_string(w.size());
  }
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ' ';
    out += e.letter(w[i]).label;
  }
  return out;
}

}  // namespace

ProximalityReport cont_check(const MatrixEnsemble& e, const ContOptions& opts) {
  if (e.dim() < 2) throw DimTooSmall("cont_check requires d >= 2");
  ProximalityReport rep;
  rep.max_word_length = opts.max_word_length;
  rep.restarts = opts.restarts;
  rep.ratio = 1.0;

  auto consider = [&](const std::vector<std::size_t>& word, double ratio) {
    if (ratio < rep.ratio ||
        (ratio == rep.ratio && !rep.witness.empty() && word < rep.witness)) {
      rep.ratio = ratio;
      rep.witness = word;
    }
  };

  // Pure powers first: the shortest qualifying power of any generator wins.
  int best_len = opts.max_word_length + 1;
  std::size_t best_letter = 0;
  double best_power_ratio = 1.0;
  for (std::size_t a = 0; a < e.size(); ++a) {
    ScaledProduct p(e.dim());
    std::vector<std::size_t> word;
    for (int n = 1; n <= opts.max_word_length; ++n) {
      p.left_multiply(e.letter(a).matrix);
      if (p.is_zero()) break;
      word.push_back(a);
      const double r = ratio_of(p);
      consider(word, r);
      if (r <= opts.tol) {
        if (n < best_len) {
          best_len = n;
          best_letter = a;
          best_power_ratio = r;
        }
        break;
      }
    }
  }
  if (best_len <= opts.max_word_length) {
    rep.witness_found = true;
    rep.witness.assign(best_len, best_letter);
    rep.ratio = best_power_ratio;
    rep.witness_text = describe_word(e, rep.witness);
    return rep;
  }

  // Randomized greedy descent: extend by the best of a few random blocks.
  constexpr int kCandidates = 4;
  for (int r = 0; r < opts.restarts; ++r) {
    Rng rng = shard_rng(opts.seed, static_cast<std::uint64_t>(r));
    ScaledProduct p(e.dim());
    std::vector<std::size_t> word;
    while (static_cast<int>(word.size()) < opts.max_word_length) {
      double best = 2.0;
      std::vector<std::size_t> best_block;
      ScaledProduct best_p = p;
      for (int c = 0; c < kCandidates; ++c) {
        const int len = 1 + static_cast<int>(uniform01(rng) * 3.0);
        std::vector<std::size_t> block;
        ScaledProduct q = p;
        for (int i = 0; i < len && static_cast<int>(word.size() + block.size()) <
                                       opts.max_word_length;
             ++i) {
          const auto a = static_cast<std::size_t>(uniform01(rng) * e.size());
          block.push_back(std::min(a, e.size() - 1));
          q.left_multiply(e.letter(block.back()).matrix);
        }
        if (block.empty() || q.is_zero()) continue;
        const double rq = ratio_of(q);
        if (rq < best) {
          best = rq;
          best_block = block;
          best_p = q;
        }
      }
      if (best_block.empty()) break;
      word.insert(word.end(), best_block.begin(), best_block.end());
      p = best_p;
      consider(word, best);
      if (best <= opts.tol) break;
    }
    if (rep.ratio <= opts.tol) break;
  }
  rep.witness_found = rep.ratio <= opts.tol;
  rep.witness_text = describe_word(e, rep.witness);
  return rep;
}

// ---------------------------------------------------------------------------

namespace corpus {

MatrixEnsemble keep_switch(double q1, double q2, MeasureMode mode, NormKind norm) {
  const double w = mode == MeasureMode::counting ? 1.0 : 0.5;
  std::vector<Letter> ls;
  ls.push_back({"K", SquareMatrix::from_rows(2, {q1, 0.0, 0.0, q2}), w});
  ls.push_back({"S", SquareMatrix::from_rows(2, {0.0, 1.0 - q1, 1.0 - q2, 0.0}), w});
  return MatrixEnsemble(std::move(ls), mode, norm);
}

MatrixEnsemble reducible_pair(double a, double b, double c, double d, NormKind norm) {
  std::vector<Letter> ls;
  ls.push_back({"A", SquareMatrix::from_rows(2, {a, 0.0, 0.0, b}), 1.0});
  ls.push_back({"B", SquareMatrix::from_rows(2, {c, 0.0, 0.0, d}), 1.0});
  return MatrixEnsemble(std::move(ls), MeasureMode::counting, norm);
}

MatrixEnsemble rotation(double c, double theta, NormKind norm) {
  const double co = std::cos(theta), si = std::sin(theta);
  std::vector<Letter> ls;
  ls.push_back({"R", SquareMatrix::from_rows(2, {c * co, -c * si, c * si, c * co}), 1.0});
  return MatrixEnsemble(std::move(ls), MeasureMode::counting, norm);
}

MatrixEnsemble scalar(double c, int dim, NormKind norm) {
  std::vector<Letter> ls;
  ls.push_back({"C", SquareMatrix::identity(dim).scaled(c), 1.0});
  return MatrixEnsemble(std::move(ls), MeasureMode::counting, norm);
}

MatrixEnsemble random_positive(std::uint64_t seed, std::size_t letters, NormKind norm) {
  Rng rng = shard_rng(seed, 0);
  std::vector<Letter> ls;
  for (std::size_t a = 0; a < letters; ++a) {
    std::vector<double> entries(4);
    for (auto& x : entries) x = 0.1 + 0.9 * uniform01(rng);
    ls.push_back({std::string(1, static_cast<char>('A' + a)),
                  SquareMatrix::from_rows(2, entries), 1.0});
  }
  return MatrixEnsemble(std::move(ls), MeasureMode::counting, norm);
}

}  // namespace corpus

}  // namespace mpp
