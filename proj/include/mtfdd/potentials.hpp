#pragma once

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mtfdd/fem.hpp"
#include "mtfdd/specfun.hpp"

namespace mtfdd {

// Composite Gauss rule along an oriented boundary polyline. Normals point
// away from the subdomain lying left of the edges.
struct BoundaryQuadrature {
  struct Node {
    Eigen::Vector2d x;
    Eigen::Vector2d normal;
    double weight;
    std::array<int, 2> dof;
    std::array<double, 2> shape;
  };
  std::vector<Node> nodes;
};

inline BoundaryQuadrature make_boundary_quadrature(
    const Mesh& m, const std::vector<std::array<int, 2>>& edges,
    const std::vector<int>& dof_of) {
  BoundaryQuadrature q;
  q.nodes.reserve(edges.size() * detail::gauss4.size());
  for (const auto& e : edges) {
    const auto& a = m.vertices[e[0]];
    Eigen::Vector2d d = m.vertices[e[1]] - a;
    double len = d.norm();
    int d0 = dof_of[e[0]], d1 = dof_of[e[1]];
    if (d0 < 0 || d1 < 0)
      throw std::invalid_argument("boundary edge vertex has no dof");
    Eigen::Vector2d normal(d.y() / len, -d.x() / len);
    for (auto [s, w] : detail::gauss4)
      q.nodes.push_back({a + s * d, normal, w * len, {d0, d1}, {1.0 - s, s}});
  }
  return q;
}

// Load-vector representation of a pointwise flux density.
inline Eigen::VectorXcd quadrature_dual(
    const BoundaryQuadrature& q, int ndof,
    const std::function<complexd(const Eigen::Vector2d&,
                                 const Eigen::Vector2d&)>& flux) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(ndof);
  for (const auto& n : q.nodes) {
    complexd f = n.weight * flux(n.x, n.normal);
    out(n.dof[0]) += n.shape[0] * f;
    out(n.dof[1]) += n.shape[1] * f;
  }
  return out;
}

namespace detail {

inline double point_segment_distance(const Eigen::Vector2d& p,
                                     const Eigen::Vector2d& a,
                                     const Eigen::Vector2d& b) {
  Eigen::Vector2d d = b - a;
  double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - a - t * d).norm();
}

}  // namespace detail

// Pointwise kernel integrals over one subdomain boundary. Evaluation points
// must keep two local edge lengths of clearance; closer points would need a
// singularity-aware rule.
class LayerPotentials {
 public:
  LayerPotentials(const Mesh& m, const std::vector<std::array<int, 2>>& edges,
                  const std::vector<int>& dof_of, int ndof,
                  specfun::KernelParams kernel)
      : quad_(make_boundary_quadrature(m, edges, dof_of)),
        kernel_(kernel),
        ndof_(ndof) {
    if (kernel.dim != 2)
      throw std::invalid_argument("layer potentials are two-dimensional");
    segments_.reserve(edges.size());
    std::vector<Eigen::Triplet<double>> trips;
    compact_of_.assign(ndof, -1);
    auto compact = [&](int dof) {
      if (compact_of_[dof] < 0) {
        compact_of_[dof] = ncompact_++;
      }
      return compact_of_[dof];
    };
    for (const auto& e : edges) {
      const auto& a = m.vertices[e[0]];
      const auto& b = m.vertices[e[1]];
      double len = (b - a).norm();
      segments_.push_back({a, b, len});
      int c0 = compact(dof_of[e[0]]), c1 = compact(dof_of[e[1]]);
      trips.emplace_back(c0, c0, len / 3.0);
      trips.emplace_back(c1, c1, len / 3.0);
      trips.emplace_back(c0, c1, len / 6.0);
      trips.emplace_back(c1, c0, len / 6.0);
    }
    Eigen::SparseMatrix<double> mass(ncompact_, ncompact_);
    mass.setFromTriplets(trips.begin(), trips.end());
    mass_.compute(mass);
    if (mass_.info() != Eigen::Success)
      throw std::runtime_error("boundary mass factorization failed");
  }

  const BoundaryQuadrature& quadrature() const { return quad_; }

  Eigen::VectorXcd dual_to_nodal(const Eigen::VectorXcd& dual) const {
    if (dual.size() != ndof_)
      throw std::invalid_argument("density vector size mismatch");
    Eigen::VectorXd pr(ncompact_), pi(ncompact_);
    for (int dof = 0; dof < ndof_; ++dof)
      if (compact_of_[dof] >= 0) {
        pr(compact_of_[dof]) = dual(dof).real();
        pi(compact_of_[dof]) = dual(dof).imag();
      }
    Eigen::VectorXd xr = mass_.solve(pr), xi = mass_.solve(pi);
    Eigen::VectorXcd nodal = Eigen::VectorXcd::Zero(ndof_);
    for (int dof = 0; dof < ndof_; ++dof)
      if (compact_of_[dof] >= 0)
        nodal(dof) = complexd(xr(compact_of_[dof]), xi(compact_of_[dof]));
    return nodal;
  }

  complexd single_layer(const Eigen::VectorXcd& neu_dual,
                        const Eigen::Vector2d& x) const {
    return single_layer_nodal(dual_to_nodal(neu_dual), x);
  }

  complexd single_layer_nodal(const Eigen::VectorXcd& nodal,
                              const Eigen::Vector2d& x) const {
    check_clearance(x);
    if (nodal.size() != ndof_)
      throw std::invalid_argument("density vector size mismatch");
    complexd s(0, 0);
    for (const auto& n : quad_.nodes) {
      double g = specfun::yukawa_green(kernel_, (x - n.x).norm());
      s += n.weight * g *
           (n.shape[0] * nodal(n.dof[0]) + n.shape[1] * nodal(n.dof[1]));
    }
    return s;
  }

  // kernel n(y)·(∇G)(x−y); minus the conventional normal derivative in y
  complexd double_layer(const Eigen::VectorXcd& nodal,
                        const Eigen::Vector2d& x) const {
    check_clearance(x);
    if (nodal.size() != ndof_)
      throw std::invalid_argument("density vector size mismatch");
    complexd s(0, 0);
    for (const auto& n : quad_.nodes) {
      Eigen::Vector2d z = x - n.x;
      double r = z.norm();
      double k = specfun::yukawa_green_dr(kernel_, r) * n.normal.dot(z) / r;
      s += n.weight * k *
           (n.shape[0] * nodal(n.dof[0]) + n.shape[1] * nodal(n.dof[1]));
    }
    return s;
  }

  // Calderon reproduction of the field with these Cauchy data
  complexd represent(const Eigen::VectorXcd& dir_nodal,
                     const Eigen::VectorXcd& neu_dual,
                     const Eigen::Vector2d& x) const {
    return single_layer(neu_dual, x) + double_layer(dir_nodal, x);
  }

 private:
  struct Segment {
    Eigen::Vector2d a, b;
    double len;
  };

  void check_clearance(const Eigen::Vector2d& x) const {
    for (const auto& s : segments_)
      if (detail::point_segment_distance(x, s.a, s.b) < 2.0 * s.len)
        throw std::runtime_error(
            "evaluation point too close to the boundary");
  }

  BoundaryQuadrature quad_;
  specfun::KernelParams kernel_;
  int ndof_;
  int ncompact_ = 0;
  std::vector<int> compact_of_;
  std::vector<Segment> segments_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> mass_;
};

// Dual conormal data of the discrete screened-harmonic extension of nodal
// boundary values, taken over the full subdomain boundary. Free rows of the
// returned vector carry only solver residual.
inline Eigen::VectorXcd extension_flux(
    const Mesh& m, const SubdomainMesh& sub, double gamma,
    const std::function<complexd(const Eigen::Vector2d&)>& g) {
  Eigen::SparseMatrix<double> A = assemble_yukawa(m, sub, gamma);
  std::vector<char> constrained(sub.n(), 0);
  for (const auto& e : sub.skeleton_edges)
    constrained[sub.local_of_mesh[e[0]]] = constrained[sub.local_of_mesh[e[1]]] = 1;
  for (const auto& e : sub.artificial_edges)
    constrained[sub.local_of_mesh[e[0]]] = constrained[sub.local_of_mesh[e[1]]] = 1;

  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(sub.n());
  std::vector<int> free_of(sub.n(), -1);
  int nf = 0;
  for (int i = 0; i < sub.n(); ++i) {
    if (constrained[i])
      u(i) = g(m.vertices[sub.global_vertex[i]]);
    else
      free_of[i] = nf++;
  }
  if (nf > 0) {
    std::vector<Eigen::Triplet<double>> tff;
    Eigen::VectorXcd bf = Eigen::VectorXcd::Zero(nf);
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
        int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
        if (free_of[r] < 0) continue;
        if (free_of[c] >= 0)
          tff.emplace_back(free_of[r], free_of[c], it.value());
        else
          bf(free_of[r]) -= it.value() * u(c);
      }
    Eigen::SparseMatrix<double> Aff(nf, nf);
    Aff.setFromTriplets(tff.begin(), tff.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Aff);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("harmonic extension solve failed");
    Eigen::VectorXd ur = solver.solve(bf.real().eval());
    Eigen::VectorXd ui = solver.solve(bf.imag().eval());
    for (int i = 0; i < sub.n(); ++i)
      if (free_of[i] >= 0) u(i) = complexd(ur(free_of[i]), ui(free_of[i]));
  }
  Eigen::VectorXcd t(sub.n());
  t.real() = A * u.real();
  t.imag() = A * u.imag();
  return t;
}

struct RepresentationReport {
  double interior_max_rel = 0.0;  // max |rep - u| over interior points / scale
  double exterior_max_rel = 0.0;  // max |rep| outside / scale
  double scale = 0.0;             // max |u| over interior points
  int interior_count = 0;
  int exterior_count = 0;
};

// Calderon reproduction of the off-domain kernel G(.-source) from its
// analytic Cauchy data on one subdomain boundary: equals the field inside,
// vanishes outside.
inline RepresentationReport verify_representation(
    const Mesh& m, const SubdomainMesh& sub, const specfun::KernelParams& kp,
    const Eigen::Vector2d& source,
    const std::vector<Eigen::Vector2d>& interior_points,
    const std::vector<Eigen::Vector2d>& exterior_points) {
  auto gval = [&](const Eigen::Vector2d& y) {
    return complexd(specfun::yukawa_green(kp, (y - source).norm()), 0.0);
  };
  auto gflux = [&](const Eigen::Vector2d& y, const Eigen::Vector2d& n) {
    Eigen::Vector2d d = y - source;
    double r = d.norm();
    return complexd(specfun::yukawa_green_dr(kp, r) * n.dot(d) / r, 0.0);
  };
  std::vector<std::array<int, 2>> edges = sub.skeleton_edges;
  edges.insert(edges.end(), sub.artificial_edges.begin(),
               sub.artificial_edges.end());
  LayerPotentials pot(m, edges, sub.local_of_mesh, sub.n(), kp);
  Eigen::VectorXcd dir(sub.n());
  for (int i = 0; i < sub.n(); ++i)
    dir(i) = gval(m.vertices[sub.global_vertex[i]]);
  Eigen::VectorXcd neu = quadrature_dual(pot.quadrature(), sub.n(), gflux);

  RepresentationReport rep;
  rep.interior_count = static_cast<int>(interior_points.size());
  rep.exterior_count = static_cast<int>(exterior_points.size());
  for (const auto& x : interior_points)
    rep.scale = std::max(rep.scale, std::abs(gval(x)));
  double interior_max = 0.0, exterior_max = 0.0;
  for (const auto& x : interior_points)
    interior_max =
        std::max(interior_max, std::abs(pot.represent(dir, neu, x) - gval(x)));
  for (const auto& x : exterior_points)
    exterior_max = std::max(exterior_max, std::abs(pot.represent(dir, neu, x)));
  rep.interior_max_rel = interior_max / rep.scale;
  rep.exterior_max_rel = exterior_max / rep.scale;
  return rep;
}

struct AnnihilationReport {
  double max_abs = 0.0;
  double scale = 0.0;  // max |G(.-source)| over the evaluation points
  int points = 0;
  double max_rel() const { return scale > 0.0 ? max_abs / scale : max_abs; }
};

// The multi-potential of a single trace vanishes identically off the
// skeleton. Discrete single trace of G(.-source): nodal Dirichlet data with
// extension fluxes on the mesh subdomains, analytic quadrature duals on the
// unbounded complement beyond the truncation boundary. The complement term
// is what cancels the free field radiated by the subdomain enclosing the
// source.
inline AnnihilationReport verify_single_trace_annihilation(
    const Mesh& m, const Skeleton& sk, const specfun::KernelParams& kp,
    const Eigen::Vector2d& source,
    const std::vector<Eigen::Vector2d>& eval_points) {
  auto gval = [&](const Eigen::Vector2d& y) {
    return complexd(specfun::yukawa_green(kp, (y - source).norm()), 0.0);
  };
  auto gflux = [&](const Eigen::Vector2d& y, const Eigen::Vector2d& n) {
    Eigen::Vector2d d = y - source;
    double r = d.norm();
    return complexd(specfun::yukawa_green_dr(kp, r) * n.dot(d) / r, 0.0);
  };

  std::vector<complexd> total(eval_points.size(), complexd(0, 0));
  std::vector<std::array<int, 2>> truncation;
  for (int j = 0; j < static_cast<int>(sk.boundary.size()); ++j) {
    SubdomainMesh sub = subdomain_mesh(m, sk, j);
    std::vector<std::array<int, 2>> edges = sub.skeleton_edges;
    edges.insert(edges.end(), sub.artificial_edges.begin(),
                 sub.artificial_edges.end());
    for (const auto& e : sub.artificial_edges)
      truncation.push_back({e[1], e[0]});
    LayerPotentials pot(m, edges, sub.local_of_mesh, sub.n(), kp);
    Eigen::VectorXcd dir(sub.n());
    for (int i = 0; i < sub.n(); ++i)
      dir(i) = gval(m.vertices[sub.global_vertex[i]]);
    Eigen::VectorXcd neu = extension_flux(m, sub, kp.gamma, gval);
    for (size_t i = 0; i < eval_points.size(); ++i)
      total[i] += pot.represent(dir, neu, eval_points[i]);
  }
  if (!truncation.empty()) {
    std::vector<int> dof_of(m.vertices.size(), -1);
    int nd = 0;
    for (const auto& e : truncation)
      for (int v : e)
        if (dof_of[v] < 0) dof_of[v] = nd++;
    LayerPotentials pot(m, truncation, dof_of, nd, kp);
    Eigen::VectorXcd dir(nd);
    for (const auto& e : truncation)
      for (int v : e) dir(dof_of[v]) = gval(m.vertices[v]);
    Eigen::VectorXcd neu = quadrature_dual(pot.quadrature(), nd, gflux);
    for (size_t i = 0; i < eval_points.size(); ++i)
      total[i] += pot.represent(dir, neu, eval_points[i]);
  }

  AnnihilationReport rep;
  rep.points = static_cast<int>(eval_points.size());
  for (size_t i = 0; i < eval_points.size(); ++i) {
    rep.max_abs = std::max(rep.max_abs, std::abs(total[i]));
    rep.scale = std::max(rep.scale, std::abs(gval(eval_points[i])));
  }
  return rep;
}

}  // namespace mtfdd
