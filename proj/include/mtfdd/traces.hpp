#pragma once

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtfdd/fem.hpp"
#include "mtfdd/specfun.hpp"

namespace mtfdd {

// One complex vector per subdomain; block j lives on the skeleton boundary
// dofs of subdomain j. Dirichlet data are nodal values, Neumann data are
// load-vector (dual) representations, so duality pairings are dot products.
struct MultiTrace {
  std::vector<Eigen::VectorXcd> blocks;

  MultiTrace conjugate() const {
    MultiTrace out;
    out.blocks.reserve(blocks.size());
    for (const auto& b : blocks) out.blocks.push_back(b.conjugate());
    return out;
  }
  MultiTrace& operator+=(const MultiTrace& o) {
    if (o.blocks.size() != blocks.size())
      throw std::invalid_argument("multitrace block count mismatch");
    for (size_t j = 0; j < blocks.size(); ++j) blocks[j] += o.blocks[j];
    return *this;
  }
  MultiTrace& operator-=(const MultiTrace& o) {
    if (o.blocks.size() != blocks.size())
      throw std::invalid_argument("multitrace block count mismatch");
    for (size_t j = 0; j < blocks.size(); ++j) blocks[j] -= o.blocks[j];
    return *this;
  }
  MultiTrace& operator*=(complexd s) {
    for (auto& b : blocks) b *= s;
    return *this;
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks) s += b.squaredNorm();
    return s;
  }
};

inline MultiTrace operator+(MultiTrace a, const MultiTrace& b) {
  a += b;
  return a;
}
inline MultiTrace operator-(MultiTrace a, const MultiTrace& b) {
  a -= b;
  return a;
}
inline MultiTrace operator*(complexd s, MultiTrace a) {
  a *= s;
  return a;
}

struct CauchyPair {
  MultiTrace dir;
  MultiTrace neu;

  CauchyPair conjugate() const { return {dir.conjugate(), neu.conjugate()}; }
};

enum class ClosureKind {
  robin,        // gamma^{-1} boundary mass on the truncation boundary
  exact_circle  // spectral map of the exterior kernel, circles only
};

struct DtnOptions {
  double gamma = 1.0;
  ClosureKind closure = ClosureKind::robin;
};

// Dense symmetric positive definite Dirichlet-to-Neumann block of one
// subdomain, with its Cholesky factor. apply maps nodal values to dual
// Neumann data; solve inverts that.
class DtnOperator {
 public:
  DtnOperator() = default;
  explicit DtnOperator(Eigen::MatrixXd t) : T_(std::move(t)), llt_(T_) {
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("DtN block is not positive definite");
  }

  int size() const { return static_cast<int>(T_.rows()); }
  const Eigen::MatrixXd& matrix() const { return T_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return T_ * u; }
  Eigen::VectorXd solve(const Eigen::VectorXd& p) const {
    return llt_.solve(p);
  }
  Eigen::VectorXcd apply(const Eigen::VectorXcd& u) const {
    Eigen::VectorXcd out(T_.rows());
    out.real() = T_ * u.real();
    out.imag() = T_ * u.imag();
    return out;
  }
  Eigen::VectorXcd solve(const Eigen::VectorXcd& p) const {
    Eigen::VectorXcd out(T_.rows());
    out.real() = llt_.solve(p.real().eval());
    out.imag() = llt_.solve(p.imag().eval());
    return out;
  }

 private:
  Eigen::MatrixXd T_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {

// Exterior kernel map of a circle, Fourier mode eigenvalue.
inline double exterior_circle_dtn_eig(int mode, double radius, double gamma) {
  double x = radius / gamma;
  if (mode == 0) return specfun::bessel_k_ratio(0, x) / gamma;
  return 0.5 / gamma *
         (1.0 / specfun::bessel_k_ratio(mode - 1, x) +
          specfun::bessel_k_ratio(mode, x));
}

// Circulant closure on a uniform circular truncation boundary: the exact
// discrete exterior map, diagonalized by the DFT of the node ring.
inline Eigen::SparseMatrix<double> spectral_closure(
    const Mesh& m, const SubdomainMesh& sub, double gamma) {
  std::map<int, int> next;
  for (const auto& e : sub.artificial_edges)
    if (!next.emplace(e[0], e[1]).second)
      throw std::runtime_error("truncation boundary is not a simple cycle");
  std::vector<int> cycle;
  int start = next.begin()->first;
  int cur = start;
  do {
    cycle.push_back(cur);
    auto it = next.find(cur);
    if (it == next.end())
      throw std::runtime_error("truncation boundary is not closed");
    cur = it->second;
  } while (cur != start && cycle.size() <= next.size());
  if (cycle.size() != next.size())
    throw std::runtime_error("truncation boundary has several components");

  int n = static_cast<int>(cycle.size());
  double radius = 0.0;
  for (int v : cycle) radius += m.vertices[v].norm();
  radius /= n;
  double chord = (m.vertices[cycle[1]] - m.vertices[cycle[0]]).norm();
  for (int k = 0; k < n; ++k) {
    if (std::abs(m.vertices[cycle[k]].norm() - radius) > 1e-8 * radius)
      throw std::invalid_argument(
          "spectral closure needs a circular truncation boundary");
    double c =
        (m.vertices[cycle[(k + 1) % n]] - m.vertices[cycle[k]]).norm();
    if (std::abs(c - chord) > 1e-8 * chord)
      throw std::invalid_argument(
          "spectral closure needs uniform node spacing");
  }

  std::vector<double> lam(n);
  for (int k = 0; k < n; ++k)
    lam[k] = exterior_circle_dtn_eig(std::min(k, n - k), radius, gamma);
  const double pi = 3.14159265358979323846;
  std::vector<double> row(n, 0.0);
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += lam[k] * std::cos(2.0 * pi * k * d / n);
    row[d] = s * 2.0 * pi * radius / (static_cast<double>(n) * n);
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(n) * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      trips.emplace_back(sub.local_of_mesh[cycle[a]],
                         sub.local_of_mesh[cycle[b]], row[(a - b + n) % n]);
  Eigen::SparseMatrix<double> closure(sub.n(), sub.n());
  closure.setFromTriplets(trips.begin(), trips.end());
  return closure;
}

}  // namespace detail

// Schur complement of the screened-Laplace matrix onto the skeleton
// boundary dofs. Truncation edges get the chosen closure first, so T stays
// symmetric positive definite.
inline DtnOperator build_dtn(const Mesh& m, const SubdomainMesh& sub,
                             const DtnOptions& opt) {
  if (opt.gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (sub.nb() == 0)
    throw std::invalid_argument("subdomain has no skeleton boundary");
  Eigen::SparseMatrix<double> A = assemble_yukawa(m, sub, opt.gamma);
  if (!sub.artificial_edges.empty()) {
    if (opt.closure == ClosureKind::robin) {
      Eigen::SparseMatrix<double> mart =
          boundary_mass(m, sub.artificial_edges, sub.local_of_mesh, sub.n());
      A = A + Eigen::SparseMatrix<double>(mart / opt.gamma);
    } else {
      A = A + detail::spectral_closure(m, sub, opt.gamma);
    }
  }

  int nb = sub.nb(), ni = sub.n() - nb;
  Eigen::MatrixXd T;
  if (ni == 0) {
    T = Eigen::MatrixXd(A);
  } else {
    Eigen::MatrixXd Abb = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::MatrixXd Aib = Eigen::MatrixXd::Zero(ni, nb);
    std::vector<Eigen::Triplet<double>> tii;
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
        int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
        if (r < nb && c < nb)
          Abb(r, c) += it.value();
        else if (r >= nb && c < nb)
          Aib(r - nb, c) += it.value();
        else if (r >= nb && c >= nb)
          tii.emplace_back(r - nb, c - nb, it.value());
      }
    Eigen::SparseMatrix<double> Aii(ni, ni);
    Aii.setFromTriplets(tii.begin(), tii.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> interior(Aii);
    if (interior.info() != Eigen::Success)
      throw std::runtime_error("interior elimination failed in DtN build");
    Eigen::MatrixXd X = interior.solve(Aib);
    T = Abb - Aib.transpose() * X;
  }
  Eigen::MatrixXd sym = 0.5 * (T + T.transpose());
  return DtnOperator(std::move(sym));
}

inline MultiTrace apply_dtn(const std::vector<DtnOperator>& T,
                            const MultiTrace& u) {
  if (T.size() != u.blocks.size())
    throw std::invalid_argument("multitrace block count mismatch");
  MultiTrace out;
  out.blocks.reserve(T.size());
  for (size_t j = 0; j < T.size(); ++j)
    out.blocks.push_back(T[j].apply(u.blocks[j]));
  return out;
}

inline MultiTrace dtn_solve(const std::vector<DtnOperator>& T,
                            const MultiTrace& p) {
  if (T.size() != p.blocks.size())
    throw std::invalid_argument("multitrace block count mismatch");
  MultiTrace out;
  out.blocks.reserve(T.size());
  for (size_t j = 0; j < T.size(); ++j)
    out.blocks.push_back(T[j].solve(p.blocks[j]));
  return out;
}

// Trace-space metrics. Dirichlet data pair through T, dual Neumann data
// through T^{-1}; both are hermitian and positive.
inline complexd h12_inner(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v,
                          const DtnOperator& T) {
  return v.dot(T.apply(u));
}

inline complexd hm12_inner(const Eigen::VectorXcd& p,
                           const Eigen::VectorXcd& q, const DtnOperator& T) {
  return q.dot(T.solve(p));
}

inline complexd h12_inner(const MultiTrace& u, const MultiTrace& v,
                          const std::vector<DtnOperator>& T) {
  complexd s(0, 0);
  for (size_t j = 0; j < T.size(); ++j)
    s += h12_inner(u.blocks[j], v.blocks[j], T[j]);
  return s;
}

inline complexd hm12_inner(const MultiTrace& p, const MultiTrace& q,
                           const std::vector<DtnOperator>& T) {
  complexd s(0, 0);
  for (size_t j = 0; j < T.size(); ++j)
    s += hm12_inner(p.blocks[j], q.blocks[j], T[j]);
  return s;
}

inline double dirichlet_norm(const MultiTrace& u,
                             const std::vector<DtnOperator>& T) {
  return std::sqrt(std::max(0.0, h12_inner(u, u, T).real()));
}

inline double neumann_norm(const MultiTrace& p,
                           const std::vector<DtnOperator>& T) {
  return std::sqrt(std::max(0.0, hm12_inner(p, p, T).real()));
}

// Bilinear (unconjugated) skew-symmetric pairing of Cauchy pairs.
inline complexd skew_pairing(const CauchyPair& a, const CauchyPair& b) {
  if (a.dir.blocks.size() != b.dir.blocks.size())
    throw std::invalid_argument("multitrace block count mismatch");
  complexd s(0, 0);
  for (size_t j = 0; j < a.dir.blocks.size(); ++j)
    s += (b.neu.blocks[j].transpose() * a.dir.blocks[j]).value() -
         (a.neu.blocks[j].transpose() * b.dir.blocks[j]).value();
  return s;
}

// Restriction structure between the global skeleton and subdomain
// boundaries. spread is blockwise injection, gather its transpose.
struct SingleTraceMap {
  int skeleton_size = 0;
  std::vector<int> block_size;
  std::vector<std::vector<int>> position;  // [j][k] -> local dof or -1

  MultiTrace spread(const Eigen::VectorXcd& phi) const {
    if (phi.size() != skeleton_size)
      throw std::invalid_argument("skeleton vector size mismatch");
    MultiTrace out;
    for (size_t j = 0; j < position.size(); ++j) {
      Eigen::VectorXcd b = Eigen::VectorXcd::Zero(block_size[j]);
      for (int k = 0; k < skeleton_size; ++k)
        if (position[j][k] >= 0) b(position[j][k]) = phi(k);
      out.blocks.push_back(std::move(b));
    }
    return out;
  }

  Eigen::VectorXcd gather(const MultiTrace& p) const {
    if (p.blocks.size() != position.size())
      throw std::invalid_argument("multitrace block count mismatch");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(skeleton_size);
    for (size_t j = 0; j < position.size(); ++j)
      for (int k = 0; k < skeleton_size; ++k)
        if (position[j][k] >= 0) out(k) += p.blocks[j](position[j][k]);
    return out;
  }
};

inline SingleTraceMap assemble_single_trace_map(const Skeleton& sk) {
  SingleTraceMap map;
  map.skeleton_size = static_cast<int>(sk.vertices.size());
  map.position = sk.restriction;
  map.block_size.reserve(sk.boundary.size());
  for (const auto& b : sk.boundary)
    map.block_size.push_back(static_cast<int>(b.vertices.size()));
  return map;
}

// How far a Cauchy pair is from the single-trace space: the largest
// Dirichlet jump across an interface or unbalanced dual Neumann component.
inline double polarity_residual(const CauchyPair& u,
                                const SingleTraceMap& map) {
  Eigen::VectorXcd g = map.gather(u.neu);
  double res = g.size() > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  for (int k = 0; k < map.skeleton_size; ++k) {
    int first = -1;
    for (size_t j = 0; j < map.position.size(); ++j) {
      if (map.position[j][k] < 0) continue;
      if (first < 0) {
        first = static_cast<int>(j);
        continue;
      }
      res = std::max(res, std::abs(u.dir.blocks[j](map.position[j][k]) -
                                   u.dir.blocks[first](map.position[first][k])));
    }
  }
  return res;
}

// Everything the skeleton formulation needs about one partitioned mesh.
struct TraceSpace {
  DtnOptions options;
  std::vector<SubdomainMesh> subs;
  std::vector<DtnOperator> dtn;
  SingleTraceMap map;
};

inline TraceSpace build_trace_space(const Mesh& m, const Skeleton& sk,
                                    const DtnOptions& opt) {
  TraceSpace ts;
  ts.options = opt;
  int nsub = static_cast<int>(sk.boundary.size());
  ts.subs.reserve(nsub);
  ts.dtn.reserve(nsub);
  for (int j = 0; j < nsub; ++j) {
    ts.subs.push_back(subdomain_mesh(m, sk, j));
    ts.dtn.push_back(build_dtn(m, ts.subs.back(), opt));
  }
  ts.map = assemble_single_trace_map(sk);
  return ts;
}

}  // namespace mtfdd
