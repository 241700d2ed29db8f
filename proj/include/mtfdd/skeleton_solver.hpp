#pragma once

// Interface system posed on the skeleton traces: the exchange operator
// composed with the local scattering solves, iterative solvers in the dual
// trace metric, coercivity certificates, and reconstruction of the volume
// field for comparison with the undecomposed discretization.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtfdd/exchange.hpp"
#include "mtfdd/local_solver.hpp"

namespace mtfdd {

// The reflected form solves p - exchange(scattering(p)) = exchange(g),
// the direct form the equivalent exchange(p) - scattering(p) = g, where g
// collects the outgoing data of the source-only local solves.
enum class SkeletonVariant { reflected, direct };

struct SolveOptions {
  SkeletonVariant variant = SkeletonVariant::reflected;
  double tol = 1e-10;  // relative residual target
  int max_iterations = 500;
  int restart = 100;   // Krylov cycle length
  double beta = 0.5;   // relaxation weight
};

struct IterationReport {
  std::vector<double> residuals;  // dual norms, entry k after k iterations
  std::vector<double> errors;     // dual distance to a reference, if given
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXcd flatten(const MultiTrace& p) {
  int n = 0;
  for (const auto& b : p.blocks) n += static_cast<int>(b.size());
  Eigen::VectorXcd out(n);
  int off = 0;
  for (const auto& b : p.blocks) {
    out.segment(off, b.size()) = b;
    off += static_cast<int>(b.size());
  }
  return out;
}

inline MultiTrace unflatten(const Eigen::VectorXcd& v,
                            const std::vector<DtnOperator>& T) {
  MultiTrace p;
  int off = 0;
  for (const auto& t : T) {
    p.blocks.push_back(v.segment(off, t.size()));
    off += t.size();
  }
  if (off != v.size()) throw std::invalid_argument("unflatten: size mismatch");
  return p;
}

}  // namespace detail

// Couples the exchange with the per-subdomain scattering solves. The mesh
// and trace space must outlive the system.
class SkeletonSystem {
 public:
  SkeletonSystem(const Mesh& m, const TraceSpace& ts,
                 const CoefficientField& cf, double omega)
      : mesh_(&m),
        space_(&ts),
        exchange_(ts),
        local_(build_local_solvers(m, ts, cf, omega)) {}

  const Mesh& mesh() const { return *mesh_; }
  const TraceSpace& space() const { return *space_; }
  const ExchangeOperator& exchange() const { return exchange_; }
  const std::vector<LocalRobinSolver>& local() const { return local_; }

  int size() const {
    int n = 0;
    for (const auto& t : space_->dtn) n += t.size();
    return n;
  }

  MultiTrace zero() const {
    MultiTrace p;
    for (const auto& t : space_->dtn)
      p.blocks.push_back(Eigen::VectorXcd::Zero(t.size()));
    return p;
  }

  MultiTrace apply(const MultiTrace& p, SkeletonVariant v) const {
    MultiTrace sp = apply_scattering(local_, p);
    if (v == SkeletonVariant::reflected) return p - exchange_.apply(sp);
    return exchange_.apply(p) - sp;
  }

  // adjoint of the reflected operator in the dual metric
  MultiTrace adjoint_apply(const MultiTrace& p) const {
    MultiTrace w = exchange_.apply(p);
    MultiTrace sw;
    sw.blocks.reserve(local_.size());
    for (size_t j = 0; j < local_.size(); ++j)
      sw.blocks.push_back(local_[j].scattering_adjoint(w.blocks[j]));
    return p - sw;
  }

  MultiTrace rhs(SkeletonVariant v) const {
    MultiTrace g = source_offsets(local_);
    if (v == SkeletonVariant::reflected) return exchange_.apply(g);
    return g;
  }

 private:
  const Mesh* mesh_;
  const TraceSpace* space_;
  ExchangeOperator exchange_;
  std::vector<LocalRobinSolver> local_;
};

// Damped fixed-point iteration p <- p - beta (A p - f) on the reflected
// form; the iteration matrix mixes the identity with an isometry-or-
// contraction, which is what makes the certified rate work.
inline std::pair<MultiTrace, IterationReport> solve_richardson(
    const SkeletonSystem& sys, const SolveOptions& opt,
    const MultiTrace* reference = nullptr) {
  if (opt.variant != SkeletonVariant::reflected)
    throw std::invalid_argument("relaxation iterates the reflected form");
  if (!(opt.beta > 0.0 && opt.beta < 1.0))
    throw std::invalid_argument("relaxation weight must lie in (0, 1)");
  if (opt.max_iterations < 0)
    throw std::invalid_argument("negative iteration budget");
  const auto& T = sys.space().dtn;
  MultiTrace f = sys.rhs(opt.variant);
  double target = opt.tol * neumann_norm(f, T);
  MultiTrace p = sys.zero();
  IterationReport rep;
  if (reference) rep.errors.push_back(neumann_norm(p - *reference, T));
  for (int it = 0; it <= opt.max_iterations; ++it) {
    MultiTrace r = sys.apply(p, opt.variant) - f;
    double rn = neumann_norm(r, T);
    rep.residuals.push_back(rn);
    if (rn <= target) {
      rep.converged = true;
      break;
    }
    if (it == opt.max_iterations) break;
    p -= opt.beta * r;
    ++rep.iterations;
    if (reference) rep.errors.push_back(neumann_norm(p - *reference, T));
  }
  return {std::move(p), std::move(rep)};
}

// Restarted GMRES with all inner products taken in the dual trace metric.
inline std::pair<MultiTrace, IterationReport> solve_gmres(
    const SkeletonSystem& sys, const SolveOptions& opt,
    const MultiTrace* reference = nullptr) {
  if (opt.restart < 1) throw std::invalid_argument("restart must be positive");
  if (opt.max_iterations < 0)
    throw std::invalid_argument("negative iteration budget");
  const auto& T = sys.space().dtn;
  MultiTrace f = sys.rhs(opt.variant);
  double target = opt.tol * neumann_norm(f, T);
  MultiTrace x = sys.zero();
  IterationReport rep;
  if (reference) rep.errors.push_back(neumann_norm(x - *reference, T));
  while (true) {
    MultiTrace r = f - sys.apply(x, opt.variant);
    double rn = neumann_norm(r, T);
    if (rep.residuals.empty())
      rep.residuals.push_back(rn);
    else
      rep.residuals.back() = rn;  // replace the recurrence estimate
    if (rn <= target) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opt.max_iterations) break;

    std::vector<MultiTrace> V;
    V.push_back((1.0 / rn) * r);
    std::vector<std::vector<complexd>> cols;
    std::vector<complexd> rot1, rot2;
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(opt.restart + 1);
    g(0) = rn;

    auto combine = [&](int kk) {
      Eigen::VectorXcd y(kk);
      for (int i = kk - 1; i >= 0; --i) {
        complexd acc = g(i);
        for (int j = i + 1; j < kk; ++j) acc -= cols[j][i] * y(j);
        y(i) = acc / cols[i][i];
      }
      MultiTrace xk = x;
      for (int i = 0; i < kk; ++i) xk += y(i) * V[i];
      return xk;
    };

    bool exhausted = false;
    while (static_cast<int>(cols.size()) < opt.restart &&
           rep.iterations < opt.max_iterations && !exhausted) {
      int k = static_cast<int>(cols.size());
      MultiTrace w = sys.apply(V[k], opt.variant);
      std::vector<complexd> h(k + 2, complexd(0, 0));
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= k; ++i) {
          complexd c = hm12_inner(w, V[i], T);
          h[i] += c;
          w -= c * V[i];
        }
      double wn = neumann_norm(w, T);
      h[k + 1] = wn;
      for (int i = 0; i < k; ++i) {
        complexd a = h[i], b = h[i + 1];
        h[i] = rot1[i] * a + rot2[i] * b;
        h[i + 1] = -std::conj(rot2[i]) * a + std::conj(rot1[i]) * b;
      }
      complexd a = h[k], b = h[k + 1];
      double rr = std::sqrt(std::norm(a) + std::norm(b));
      if (rr == 0.0) throw std::runtime_error("gmres breakdown: zero column");
      rot1.push_back(std::conj(a) / rr);
      rot2.push_back(std::conj(b) / rr);
      h[k] = rr;
      h[k + 1] = complexd(0, 0);
      complexd gk = g(k);
      g(k) = rot1[k] * gk;
      g(k + 1) = -std::conj(rot2[k]) * gk;
      cols.push_back(std::move(h));
      ++rep.iterations;
      rep.residuals.push_back(std::abs(g(k + 1)));
      if (reference)
        rep.errors.push_back(neumann_norm(
            combine(static_cast<int>(cols.size())) - *reference, T));
      if (std::abs(g(k + 1)) <= target || wn == 0.0)
        exhausted = true;
      else
        V.push_back((1.0 / wn) * w);
    }
    if (cols.empty()) break;
    x = combine(static_cast<int>(cols.size()));
  }
  return {std::move(x), std::move(rep)};
}

struct CoercivityReport {
  double alpha = 0.0;      // least eigenvalue of the Hermitian part
  double sigma_min = 0.0;  // least singular value
  int dimension = 0;
};

// Materializes the reflected operator column by column and measures it in
// the dual metric through the Cholesky similarity of the trace maps.
inline CoercivityReport estimate_coercivity_dense(const SkeletonSystem& sys,
                                                  int max_dofs = 2000) {
  const auto& T = sys.space().dtn;
  int n = sys.size();
  if (n > max_dofs)
    throw std::invalid_argument("dense coercivity estimate: system too large");
  Eigen::MatrixXcd B(n, n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(k) = complexd(1, 0);
    B.col(k) = detail::flatten(
        sys.apply(detail::unflatten(e, T), SkeletonVariant::reflected));
  }
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(n, n);
  int off = 0;
  for (const auto& t : T) {
    Eigen::MatrixXd lj = t.llt().matrixL();
    L.block(off, off, t.size(), t.size()) = lj.cast<complexd>();
    off += t.size();
  }
  Eigen::MatrixXcd M = L.triangularView<Eigen::Lower>().solve(B * L);
  Eigen::MatrixXcd herm = 0.5 * (M + M.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm,
                                                     Eigen::EigenvaluesOnly);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(M);
  CoercivityReport rep;
  rep.dimension = n;
  rep.alpha = es.eigenvalues()(0);
  rep.sigma_min = svd.singularValues()(n - 1);
  return rep;
}

// Matrix-free probe of the same lower bound: Lanczos on the Hermitian part
// of the reflected operator, fully reorthogonalized.
inline double estimate_coercivity_probe(const SkeletonSystem& sys,
                                        int iterations = 80,
                                        unsigned long long seed = 1) {
  if (iterations < 2)
    throw std::invalid_argument("probe needs at least two iterations");
  const auto& T = sys.space().dtn;
  int m = std::min(iterations, sys.size());
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  MultiTrace v = sys.zero();
  for (auto& blk : v.blocks)
    for (int i = 0; i < blk.size(); ++i) blk(i) = complexd(dist(gen), dist(gen));
  double vn = neumann_norm(v, T);
  if (!(vn > 0.0)) throw std::runtime_error("probe start vector vanished");
  v *= complexd(1.0 / vn, 0);
  std::vector<MultiTrace> V{std::move(v)};
  std::vector<double> diag, off;
  for (int k = 0; k < m; ++k) {
    MultiTrace w = 0.5 * (sys.apply(V[k], SkeletonVariant::reflected) +
                          sys.adjoint_apply(V[k]));
    diag.push_back(hm12_inner(w, V[k], T).real());
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : V) w -= hm12_inner(w, u, T) * u;
    if (k + 1 == m) break;
    double bk = neumann_norm(w, T);
    if (bk < 1e-13) break;  // invariant subspace reached
    off.push_back(bk);
    V.push_back((1.0 / bk) * w);
  }
  Eigen::VectorXd d =
      Eigen::Map<const Eigen::VectorXd>(diag.data(), diag.size());
  Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(off.data(), off.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

struct Reconstruction {
  std::vector<LocalSolution> local;  // per-subdomain fields with sources
  Eigen::VectorXcd global;           // mesh-vertex field, interface-averaged
  double trace_mismatch = 0.0;       // largest jump or unbalanced dual
  double trace_scale = 0.0;
};

inline Reconstruction reconstruct(const SkeletonSystem& sys,
                                  const MultiTrace& p) {
  const TraceSpace& ts = sys.space();
  if (p.blocks.size() != sys.local().size())
    throw std::invalid_argument("reconstruct: block count mismatch");
  Reconstruction rec;
  CauchyPair bdry;
  for (size_t j = 0; j < sys.local().size(); ++j) {
    rec.local.push_back(sys.local()[j].solve(p.blocks[j], true));
    const LocalSolution& s = rec.local.back();
    bdry.dir.blocks.push_back(s.dirichlet);
    bdry.neu.blocks.push_back(s.neumann);
    if (s.dirichlet.size() > 0)
      rec.trace_scale =
          std::max({rec.trace_scale, s.dirichlet.cwiseAbs().maxCoeff(),
                    s.neumann.cwiseAbs().maxCoeff()});
  }
  rec.trace_mismatch = polarity_residual(bdry, ts.map);
  const Mesh& m = sys.mesh();
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(m.vertices.size());
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(m.vertices.size());
  for (size_t j = 0; j < ts.subs.size(); ++j) {
    const SubdomainMesh& sub = ts.subs[j];
    for (int i = 0; i < sub.n(); ++i) {
      sum(sub.global_vertex[i]) += rec.local[j].field(i);
      cnt(sub.global_vertex[i]) += 1.0;
    }
  }
  for (int k = 0; k < sum.size(); ++k)
    if (cnt(k) > 0.0) sum(k) /= cnt(k);
  rec.global = std::move(sum);
  return rec;
}

// One sparse solve of the undecomposed system, for cross checking.
inline Eigen::VectorXcd monolithic_reference(const Mesh& m,
                                             const CoefficientField& cf) {
  SubdomainMesh whole = whole_domain_mesh(m);
  LocalSystem sys = assemble_helmholtz(m, whole, cf);
  SparseFactor factor(sys.A);
  return factor.solve(sys.load);
}

inline double relative_l2(const Mesh& m, const Eigen::VectorXcd& u,
                          const Eigen::VectorXcd& ref) {
  if (u.size() != ref.size() ||
      u.size() != static_cast<long>(m.vertices.size()))
    throw std::invalid_argument("relative_l2: size mismatch");
  SubdomainMesh whole = whole_domain_mesh(m);
  Eigen::SparseMatrix<double> mass = assemble_mass(m, whole);
  auto sq = [&](const Eigen::VectorXcd& v) {
    Eigen::VectorXd re = v.real(), im = v.imag();
    return re.dot(mass * re) + im.dot(mass * im);
  };
  double den = sq(ref);
  if (!(den > 0.0)) throw std::invalid_argument("relative_l2: zero reference");
  return std::sqrt(sq(u - ref) / den);
}

}  // namespace mtfdd
