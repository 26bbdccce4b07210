#include "mpp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mpp/errors.hpp"
#include "mpp/numerics.hpp"

namespace mpp {

std::string to_string(MeshKind k) { return k == MeshKind::rp1 ? "RP1" : "CP1"; }

std::string to_string(Interp i) { return i == Interp::linear ? "linear" : "nearest"; }

Interp parse_interp(std::string_view text) {
  if (text == "linear") return Interp::linear;
  if (text == "nearest") return Interp::nearest;
  throw InvalidArgument("unknown interpolation '" + std::string(text) + "'");
}

namespace {

std::array<double, 3> bloch_of(const ProjectivePoint& x) {
  const Complex a = x.rep()(0), b = x.rep()(1);
  const Complex ab = std::conj(a) * b;
  return {2.0 * ab.real(), 2.0 * ab.imag(), std::norm(a) - std::norm(b)};
}

}  // namespace

ProjectiveMesh::ProjectiveMesh(MeshKind kind, std::vector<ProjectivePoint> nodes,
                               std::vector<std::array<double, 3>> bloch)
    : kind_(kind), nodes_(std::move(nodes)), bloch_(std::move(bloch)) {}

ProjectiveMesh ProjectiveMesh::rp1(int n) {
  if (n < 2) throw InvalidArgument("mesh needs at least 2 nodes");
  std::vector<ProjectivePoint> nodes;
  nodes.reserve(n);
  for (int i = 0; i < n; ++i) nodes.push_back(ProjectivePoint::from_angle(i * M_PI / n));
  return ProjectiveMesh(MeshKind::rp1, std::move(nodes), {});
}

ProjectiveMesh ProjectiveMesh::cp1(int n) {
  if (n < 2) throw InvalidArgument("mesh needs at least 2 nodes");
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<ProjectivePoint> nodes;
  std::vector<std::array<double, 3>> bloch;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double t = std::acos(z);
    const double phi = std::fmod(i * golden, 2.0 * M_PI);
    CVector v(2);
    v << Complex(std::cos(t / 2)), std::polar(std::sin(t / 2), phi);
    nodes.emplace_back(v);
    bloch.push_back(bloch_of(nodes.back()));
  }
  return ProjectiveMesh(MeshKind::cp1, std::move(nodes), std::move(bloch));
}

ProjectiveMesh ProjectiveMesh::for_ensemble(const MatrixEnsemble& e, int n) {
  if (e.dim() != 2) {
    throw UnsupportedDimension("projective meshes exist only for d = 2 (got d = " +
                               std::to_string(e.dim()) + ")");
  }
  return e.is_real() ? rp1(n) : cp1(n);
}

std::array<double, 2> ProjectiveMesh::coordinates(int i) const {
  if (kind_ == MeshKind::rp1) return {i * M_PI / size(), 0.0};
  const auto& b = bloch_.at(i);
  double phi = std::atan2(b[1], b[0]);
  if (phi < 0) phi += 2.0 * M_PI;
  return {std::acos(std::clamp(b[2], -1.0, 1.0)), phi};
}

int ProjectiveMesh::nearest(const ProjectivePoint& x) const {
  if (kind_ == MeshKind::rp1 && x.is_real()) {
    const int n = size();
    const long i = std::lround(x.angle() * n / M_PI);
    return static_cast<int>(((i % n) + n) % n);
  }
  const auto b = bloch_of(x);
  int best = 0;
  double best_dot = -2.0;
  if (kind_ == MeshKind::rp1) {
    for (int i = 0; i < size(); ++i) {
      const double ip = std::abs(nodes_[i].rep().dot(x.rep()));
      if (ip > best_dot) {
        best_dot = ip;
        best = i;
      }
    }
    return best;
  }
  for (int i = 0; i < size(); ++i) {
    const double dot = b[0] * bloch_[i][0] + b[1] * bloch_[i][1] + b[2] * bloch_[i][2];
    if (dot > best_dot) {
      best_dot = dot;
      best = i;
    }
  }
  return best;
}

Stencil ProjectiveMesh::locate(const ProjectivePoint& x, Interp interp) const {
  Stencil st;
  if (kind_ == MeshKind::rp1 && interp == Interp::linear && x.is_real()) {
    const int n = size();
    const double pos = x.angle() * n / M_PI;
    const double fl = std::floor(pos);
    const double t = pos - fl;
    const int i0 = static_cast<int>(fl) % n;
    st.node = {i0, (i0 + 1) % n};
    st.weight = {1.0 - t, t};
    st.count = 2;
    return st;
  }
  st.node = {nearest(x), 0};
  return st;
}

TransferTable TransferTable::build(const MatrixEnsemble& e,
                                   std::shared_ptr<const ProjectiveMesh> mesh,
                                   Interp interp, double kernel_tol) {
  if (e.dim() != 2) {
    throw UnsupportedDimension("transfer operators are discretized only for d = 2");
  }
  TransferTable t;
  t.mesh = std::move(mesh);
  t.interp = interp;
  t.letters = static_cast<int>(e.size());
  const int n = t.mesh->size();
  const std::size_t total = static_cast<std::size_t>(n) * e.size();
  t.norm.assign(total, 0.0);
  t.image.assign(total, Stencil{});
  std::vector<char> hit(total, 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto& x = t.mesh->node(static_cast<int>(i));
    for (std::size_t a = 0; a < e.size(); ++a) {
      const auto idx = t.at(static_cast<int>(i), a);
      auto r = try_act(e.letter(a).matrix, x, kernel_tol);
      if (!r) {
        hit[idx] = 1;
        continue;
      }
      t.norm[idx] = r->norm;
      t.image[idx] = t.mesh->locate(r->point, interp);
    }
  });
  t.hit.assign(hit.begin(), hit.end());
  return t;
}

namespace {

// Row-sparse transfer matrix G_ij = sum_a w_a ||v_a x_i||^s [stencil weight of j].
struct SparseRows {
  std::vector<int> start;
  std::vector<int> col;
  std::vector<double> val;
  int n = 0;

  std::vector<double> apply(const std::vector<double>& f) const {
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int p = start[i]; p < start[i + 1]; ++p) acc += val[p] * f[col[p]];
      out[i] = acc;
    }
    return out;
  }
  std::vector<double> apply_left(const std::vector<double>& m) const {
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int p = start[i]; p < start[i + 1]; ++p) out[col[p]] += m[i] * val[p];
    }
    return out;
  }
};

SparseRows assemble(const MatrixEnsemble& e, double s, const TransferTable& t) {
  SparseRows g;
  g.n = t.mesh->size();
  g.start.push_back(0);
  const auto w = e.weights();
  for (int i = 0; i < g.n; ++i) {
    for (std::size_t a = 0; a < e.size(); ++a) {
      const auto idx = t.at(i, a);
      if (t.hit[idx]) continue;
      const double c = w[a] * std::pow(t.norm[idx], s);
      const auto& st = t.image[idx];
      for (int q = 0; q < st.count; ++q) {
        if (st.weight[q] == 0.0) continue;
        g.col.push_back(st.node[q]);
        g.val.push_back(c * st.weight[q]);
      }
    }
    g.start.push_back(static_cast<int>(g.col.size()));
  }
  return g;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

std::vector<double> gamma_apply(const MatrixEnsemble& e, double s,
                                const std::vector<double>& f, const TransferTable& table) {
  if (static_cast<int>(f.size()) != table.mesh->size()) {
    throw InvalidArgument("mesh function has the wrong size");
  }
  return assemble(e, s, table).apply(f);
}

std::vector<double> gamma_apply(const MatrixEnsemble& e, double s,
                                const std::vector<double>& f, const ProjectiveMesh& mesh,
                                Interp interp) {
  auto shared = std::make_shared<const ProjectiveMesh>(mesh);
  return gamma_apply(e, s, f, TransferTable::build(e, shared, interp));
}

double SpectralTriple::e_at(const ProjectivePoint& x) const {
  const auto st = table->mesh->locate(x, table->interp);
  double v = 0.0;
  for (int q = 0; q < st.count; ++q) v += st.weight[q] * e[st.node[q]];
  return v;
}

SpectralTriple solve_spectral(const MatrixEnsemble& e, double s,
                              const SpectralOptions& opts) {
  auto mesh = std::make_shared<const ProjectiveMesh>(
      ProjectiveMesh::for_ensemble(e, opts.mesh_size));
  auto table = std::make_shared<const TransferTable>(
      TransferTable::build(e, mesh, opts.interp, opts.kernel_tol));
  return solve_spectral(e, s, table, opts);
}

SpectralTriple solve_spectral(const MatrixEnsemble& e, double s,
                              std::shared_ptr<const TransferTable> table,
                              const SpectralOptions& opts) {
  if (!(s > 0.0)) throw InvalidArgument("the transfer operator requires s > 0");
  SpectralTriple tr;
  tr.s = s;
  tr.table = table;
  if (opts.check_irreducible) {
    tr.irreducible = irr_check(e).irreducible;
    if (!tr.irreducible) {
      tr.warnings.push_back(
          "ensemble is reducible: the eigendata need not be unique and e may vanish");
    }
  }
  const SparseRows g = assemble(e, s, *table);
  const int n = g.n;

  // Left eigenmeasure by lazy power iteration: sigma <- (sigma + sigma G / k) / 2.
  std::vector<double> sigma(n, 1.0 / n);
  double k = 0.0, k_prev = -1.0, tv = 1.0;
  std::vector<std::pair<int, double>> history;  // at iterations 1, 2, 4, ...
  auto record = [&](int it, double r) {
    if (((it + 1) & it) == 0) history.emplace_back(it + 1, r);
  };
  auto history_text = [&] {
    std::ostringstream h;
    h << "; residual history:";
    for (auto [i, r] : history) h << " " << i << ":" << r;
    return h.str();
  };
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    auto next = g.apply_left(sigma);
    k = sum(next);
    if (!(k > 0.0)) {
      throw NonPositiveEigenfunction("sigma Gamma_s vanished: every node is a kernel hit");
    }
    tv = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = 0.5 * (sigma[i] + next[i] / k);
      tv += std::abs(v - sigma[i]);
      sigma[i] = v;
    }
    record(it, tv);
    if (std::abs(k - k_prev) <= opts.tol * k && tv <= opts.tol) break;
    k_prev = k;
  }
  if (it == opts.max_iter) {
    std::ostringstream msg;
    msg << "sigma iteration did not converge in " << opts.max_iter
        << " steps (last |dk|/k = " << std::abs(k - k_prev) / k << ", TV step = " << tv
        << ")" << history_text();
    throw NoConvergence(msg.str());
  }
  tr.sigma_iterations = it + 1;
  {
    const double m = sum(sigma);
    for (auto& v : sigma) v /= m;
    const auto next = g.apply_left(sigma);
    k = sum(next);
  }

  // Right eigenfunction by lazy averaging of Gamma_s^m 1 / k^m, normalized so
  // that sigma(e) = 1.
  std::vector<double> ef(n, 1.0);
  double step = 1.0;
  history.clear();
  it = 0;
  for (; it < opts.max_iter; ++it) {
    auto ge = g.apply(ef);
    step = 0.0;
    double se = 0.0;
    for (int i = 0; i < n; ++i) {
      ge[i] = 0.5 * (ef[i] + ge[i] / k);
      se += sigma[i] * ge[i];
    }
    const double top = *std::max_element(ge.begin(), ge.end()) / se;
    for (int i = 0; i < n; ++i) {
      ge[i] /= se;
      // pointwise relative, so small values of e converge as well as large ones
      step = std::max(step, std::abs(ge[i] - ef[i]) / std::max(ge[i], 1e-8 * top));
    }
    ef = std::move(ge);
    record(it, step);
    if (step <= opts.tol) break;
  }
  if (it == opts.max_iter) {
    std::ostringstream msg;
    msg << "eigenfunction iteration did not converge in " << opts.max_iter
        << " steps (last sup step = " << step << ")" << history_text();
    throw NoConvergence(msg.str());
  }
  tr.e_iterations = it + 1;

  const double emin = *std::min_element(ef.begin(), ef.end());
  const double emax = *std::max_element(ef.begin(), ef.end());
  if (!(emin > 0.0)) {
    if (tr.irreducible) {
      throw NonPositiveEigenfunction("min e_s = " + std::to_string(emin) +
                                     " <= 0 (mesh too coarse or assumptions violated)");
    }
    tr.warnings.push_back("eigenfunction is not strictly positive");
  }

  // Residuals of both eigen-equations.
  {
    const auto sg = g.apply_left(sigma);
    double r = 0.0;
    for (int i = 0; i < n; ++i) r += std::abs(sg[i] - k * sigma[i]);
    tr.residuals.sigma_tv = r / k;
    const auto ge = g.apply(ef);
    double m = 0.0, pw = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(ge[i] - k * ef[i]);
      m = std::max(m, d);
      if (ef[i] > 1e-8 * emax) pw = std::max(pw, d / ef[i]);
    }
    tr.residuals.e_max = m / k;
    tr.residuals.e_relative = m / k / emax;
    tr.residuals.e_pointwise = pw / k;
  }

  tr.k = k;
  tr.e = std::move(ef);
  tr.sigma = std::move(sigma);
  tr.eta.resize(n);
  double mass = 0.0;
  for (int i = 0; i < n; ++i) mass += (tr.eta[i] = std::max(0.0, tr.e[i]) * tr.sigma[i]);
  for (auto& v : tr.eta) v /= mass;

  // Q = D^{-1} G D / k is similar to G / k, so its spectrum is read off G.
  if (opts.compute_spectrum && n <= opts.dense_limit) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int p = g.start[i]; p < g.start[i + 1]; ++p) dense(i, g.col[p]) += g.val[p] / k;
    Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
    if (es.info() == Eigen::Success) {
      std::vector<Complex> ev(es.eigenvalues().data(),
                              es.eigenvalues().data() + es.eigenvalues().size());
      std::sort(ev.begin(), ev.end(),
                [](Complex a, Complex b) { return std::abs(a) > std::abs(b); });
      const double cut = 1.0 - 10.0 * opts.gap_tol;
      tr.peripheral.clear();
      double gap = 0.0;
      for (const auto& z : ev) {
        if (std::abs(z) > cut) {
          tr.peripheral.push_back(z);
        } else {
          gap = std::max(gap, std::abs(z));
        }
      }
      tr.period = std::max<int>(1, static_cast<int>(tr.peripheral.size()));
      tr.gap = gap;
      const Complex rot = std::polar(1.0, 2.0 * M_PI / tr.period);
      tr.period_closed = true;
      for (const auto& z : tr.peripheral) {
        const Complex w = z * rot;
        bool found = false;
        for (const auto& y : tr.peripheral) {
          if (std::abs(w - y) <= 1e-6 + 10.0 * opts.gap_tol) found = true;
        }
        tr.period_closed = tr.period_closed && found;
      }
      tr.has_spectrum = true;
    } else {
      tr.warnings.push_back("dense eigensolver failed; period and gap not reported");
    }
  }
  return tr;
}

double cs_sigma_ratio(const MatrixEnsemble& e, const SpectralTriple& triple,
                      const std::vector<std::size_t>& word) {
  ScaledProduct p(e.dim());
  for (auto a : word) p.left_multiply(e.letter(a).matrix);
  if (p.is_zero()) return 0.0;
  const CMatrix& v = p.normalized();
  const double vn = matrix_norm(v, NormKind::operator_norm);
  double acc = 0.0;
  const auto& mesh = triple.mesh();
  for (int i = 0; i < mesh.size(); ++i) {
    if (triple.sigma[i] == 0.0) continue;
    const double nx = (v * mesh.node(i).rep()).norm() / vn;
    acc += triple.sigma[i] * std::pow(nx, triple.s);
  }
  return acc;
}

CsProxy cs_sigma_proxy(const MatrixEnsemble& e, const SpectralTriple& triple, int trials,
                       std::uint64_t seed) {
  CsProxy out;
  out.trials = trials;
  out.value = 1.0;
  std::vector<double> cum;
  double acc = 0.0;
  for (double w : e.weights()) cum.push_back(acc += w);
  for (int t = 0; t < trials; ++t) {
    Rng rng = shard_rng(seed, static_cast<std::uint64_t>(t));
    const int len = 1 + static_cast<int>(uniform01(rng) * 32.0);
    std::vector<std::size_t> word;
    for (int i = 0; i < len; ++i) word.push_back(sample_cumulative(cum, rng));
    const double r = cs_sigma_ratio(e, triple, word);
    if (t == 0 || r < out.value) {
      out.value = r;
      out.worst_word = word;
    }
  }
  return out;
}

}  // namespace mpp
