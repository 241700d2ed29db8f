#pragma once

// P1 finite elements on subdomain views: Yukawa and Helmholtz assembly,
// boundary mass, factorized solves, discrete Neumann traces.
//
// Discrete conventions, used consistently by the trace and solver layers:
//  * subdomain DOFs are numbered with the skeleton boundary first, in the
//    order of Skeleton::boundary[j].vertices;
//  * volume coefficients are sampled at triangle barycenters (triangle tag
//    selects the subdomain argument, so piecewise fields stay piecewise);
//  * the Helmholtz system is  K(mu) - M(kappa^2) - i B^ - i kappa0 M_art,
//    complex symmetric, with B^ an optional dense operator on the skeleton
//    boundary block and M_art the mass on this subdomain's share of the
//    artificial (truncation) boundary;
//  * Neumann data and traces live in the dual (load vector) representation,
//    so duality pairings against nodal vectors are plain dot products.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtfdd/mesh.hpp"

namespace mtfdd {

using complexd = std::complex<double>;

struct CoefficientField {
  std::function<double(int, const Eigen::Vector2d&)> mu;
  std::function<complexd(int, const Eigen::Vector2d&)> kappa_sq;
  double kappa0 = 0.0;
  std::function<complexd(const Eigen::Vector2d&)> source;
  // Inhomogeneous absorbing-boundary datum g in (mu du/dn - i kappa0 u) = g,
  // evaluated at (x, outward normal); null means homogeneous.
  std::function<complexd(const Eigen::Vector2d&, const Eigen::Vector2d&)>
      robin_datum;

  static CoefficientField uniform(double kappa0_, double mu_ = 1.0) {
    CoefficientField cf;
    cf.kappa0 = kappa0_;
    cf.mu = [mu_](int, const Eigen::Vector2d&) { return mu_; };
    cf.kappa_sq = [kappa0_](int, const Eigen::Vector2d&) {
      return complexd(kappa0_ * kappa0_, 0.0);
    };
    return cf;
  }
};

struct SubdomainMesh {
  int subdomain = -1;  // -1: the whole mesh (monolithic view)
  std::vector<int> global_vertex;  // local -> mesh vertex id
  std::vector<int> local_of_mesh;  // mesh vertex id -> local id or -1
  std::vector<int> triangles;      // mesh triangle ids
  std::vector<int> boundary_dofs;  // skeleton boundary locals, 0..nb-1
  std::vector<std::array<int, 2>> skeleton_edges;    // mesh-id pairs
  std::vector<std::array<int, 2>> artificial_edges;  // mesh-id pairs

  int n() const { return static_cast<int>(global_vertex.size()); }
  int nb() const { return static_cast<int>(boundary_dofs.size()); }
};

inline SubdomainMesh subdomain_mesh(const Mesh& m, const Skeleton& sk,
                                    int j) {
  if (j < 0 || j >= static_cast<int>(sk.boundary.size()))
    throw std::invalid_argument("subdomain_mesh: no such subdomain");
  SubdomainMesh sub;
  sub.subdomain = j;
  sub.local_of_mesh.assign(m.vertices.size(), -1);
  for (int v : sk.boundary[j].vertices) {
    sub.local_of_mesh[v] = sub.n();
    sub.global_vertex.push_back(v);
  }
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    if (m.tag[t] != j) continue;
    sub.triangles.push_back(t);
  }
  // Remaining vertices in ascending mesh order keeps numbering reproducible.
  std::vector<char> used(m.vertices.size(), 0);
  for (int t : sub.triangles)
    for (int v : m.triangles[t]) used[v] = 1;
  for (int v = 0; v < static_cast<int>(m.vertices.size()); ++v) {
    if (!used[v]) continue;
    if (sub.local_of_mesh[v] >= 0) continue;
    sub.local_of_mesh[v] = sub.n();
    sub.global_vertex.push_back(v);
  }
  sub.boundary_dofs.resize(sk.boundary[j].vertices.size());
  for (int p = 0; p < sub.nb(); ++p) sub.boundary_dofs[p] = p;
  sub.skeleton_edges = sk.boundary[j].edges;
  sub.artificial_edges = sk.boundary[j].artificial_edges;
  return sub;
}

// Monolithic view: every triangle, natural vertex numbering, the whole mesh
// boundary treated as artificial.
inline SubdomainMesh whole_domain_mesh(const Mesh& m) {
  SubdomainMesh sub;
  sub.subdomain = -1;
  sub.global_vertex.resize(m.vertices.size());
  sub.local_of_mesh.resize(m.vertices.size());
  for (int v = 0; v < static_cast<int>(m.vertices.size()); ++v)
    sub.global_vertex[v] = sub.local_of_mesh[v] = v;
  sub.triangles.resize(m.triangles.size());
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
    sub.triangles[t] = t;
  auto inc = detail::edge_incidence(m);
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
    for (int k = 0; k < 3; ++k) {
      int a = m.triangles[t][k], b = m.triangles[t][(k + 1) % 3];
      if (inc.at(detail::edge_key(a, b))[1] == -1)
        sub.artificial_edges.push_back({a, b});
    }
  return sub;
}

namespace detail {

struct P1Triangle {
  double area;
  std::array<Eigen::Vector2d, 3> grad;
  Eigen::Vector2d barycenter;
};

inline P1Triangle p1_data(const Mesh& m, int t) {
  const auto& p0 = m.vertices[m.triangles[t][0]];
  const auto& p1 = m.vertices[m.triangles[t][1]];
  const auto& p2 = m.vertices[m.triangles[t][2]];
  P1Triangle d;
  d.area = signed_area(m, t);
  double s = 1.0 / (2.0 * d.area);
  d.grad[0] = s * Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x());
  d.grad[1] = s * Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x());
  d.grad[2] = s * Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x());
  d.barycenter = (p0 + p1 + p2) / 3.0;
  return d;
}

// 4-point Gauss-Legendre on [0,1]; exact through degree 7, shared by every
// boundary-line integral in the library.
inline constexpr std::array<std::array<double, 2>, 4> gauss4 = {{
    {0.06943184420297371, 0.17392742256872693},
    {0.33000947820757187, 0.32607257743127305},
    {0.66999052179242813, 0.32607257743127305},
    {0.93056815579702629, 0.17392742256872693},
}};

}  // namespace detail

// P1 mass matrix of a polyline given by mesh-id edges; row_of maps mesh
// vertex ids to matrix rows.
inline Eigen::SparseMatrix<double> boundary_mass(
    const Mesh& m, const std::vector<std::array<int, 2>>& edges,
    const std::vector<int>& row_of, int nrows) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * edges.size());
  for (const auto& e : edges) {
    int ra = row_of.at(e[0]), rb = row_of.at(e[1]);
    if (ra < 0 || rb < 0)
      throw std::invalid_argument("boundary_mass: edge vertex has no row");
    double len = (m.vertices[e[0]] - m.vertices[e[1]]).norm();
    trip.emplace_back(ra, ra, len / 3.0);
    trip.emplace_back(rb, rb, len / 3.0);
    trip.emplace_back(ra, rb, len / 6.0);
    trip.emplace_back(rb, ra, len / 6.0);
  }
  Eigen::SparseMatrix<double> mb(nrows, nrows);
  mb.setFromTriplets(trip.begin(), trip.end());
  return mb;
}

// Yukawa operator stiffness + gamma^-2 mass (mu = 1), SPD.
inline Eigen::SparseMatrix<double> assemble_yukawa(const Mesh& m,
                                                   const SubdomainMesh& sub,
                                                   double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("assemble_yukawa: gamma");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * sub.triangles.size());
  double ig2 = 1.0 / (gamma * gamma);
  for (int t : sub.triangles) {
    auto d = detail::p1_data(m, t);
    for (int i = 0; i < 3; ++i) {
      int li = sub.local_of_mesh[m.triangles[t][i]];
      for (int k = 0; k < 3; ++k) {
        int lk = sub.local_of_mesh[m.triangles[t][k]];
        double v = d.area * d.grad[i].dot(d.grad[k]) +
                   ig2 * d.area / 12.0 * (i == k ? 2.0 : 1.0);
        trip.emplace_back(li, lk, v);
      }
    }
  }
  Eigen::SparseMatrix<double> a(sub.n(), sub.n());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

// P1 mass matrix over the subdomain triangles.
inline Eigen::SparseMatrix<double> assemble_mass(const Mesh& m,
                                                 const SubdomainMesh& sub) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * sub.triangles.size());
  for (int t : sub.triangles) {
    auto d = detail::p1_data(m, t);
    for (int i = 0; i < 3; ++i) {
      int li = sub.local_of_mesh[m.triangles[t][i]];
      for (int k = 0; k < 3; ++k) {
        int lk = sub.local_of_mesh[m.triangles[t][k]];
        trip.emplace_back(li, lk, d.area / 12.0 * (i == k ? 2.0 : 1.0));
      }
    }
  }
  Eigen::SparseMatrix<double> a(sub.n(), sub.n());
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

struct LocalSystem {
  SubdomainMesh dofs;
  Eigen::SparseMatrix<complexd> A;
  Eigen::VectorXcd load;
};

// Helmholtz system on a subdomain view; B (optional) is a dense operator on
// the skeleton boundary block entering as -i B.
inline LocalSystem assemble_helmholtz(const Mesh& m, const SubdomainMesh& sub,
                                      const CoefficientField& cf,
                                      const Eigen::MatrixXd* B = nullptr) {
  if (!cf.mu || !cf.kappa_sq)
    throw std::invalid_argument("assemble_helmholtz: mu/kappa_sq not set");
  const complexd iu(0.0, 1.0);
  std::vector<Eigen::Triplet<complexd>> trip;
  trip.reserve(9 * sub.triangles.size());
  LocalSystem sys;
  sys.dofs = sub;
  sys.load = Eigen::VectorXcd::Zero(sub.n());

  for (int t : sub.triangles) {
    auto d = detail::p1_data(m, t);
    double mu = cf.mu(m.tag[t], d.barycenter);
    if (!(mu > 0.0))
      throw std::invalid_argument("assemble_helmholtz: mu must be positive");
    complexd ks = cf.kappa_sq(m.tag[t], d.barycenter);
    complexd fval = cf.source ? cf.source(d.barycenter) : complexd(0.0);
    for (int i = 0; i < 3; ++i) {
      int li = sub.local_of_mesh[m.triangles[t][i]];
      for (int k = 0; k < 3; ++k) {
        int lk = sub.local_of_mesh[m.triangles[t][k]];
        complexd v = complexd(d.area * mu * d.grad[i].dot(d.grad[k]), 0.0) -
                     ks * (d.area / 12.0 * (i == k ? 2.0 : 1.0));
        trip.emplace_back(li, lk, v);
      }
      sys.load(li) += fval * (d.area / 3.0);
    }
  }

  if (cf.kappa0 != 0.0 && !sub.artificial_edges.empty()) {
    Eigen::SparseMatrix<double> mart =
        boundary_mass(m, sub.artificial_edges, sub.local_of_mesh, sub.n());
    for (int k = 0; k < mart.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(mart, k); it; ++it)
        trip.emplace_back(it.row(), it.col(),
                          -iu * cf.kappa0 * it.value());
  }

  if (B) {
    if (B->rows() != sub.nb() || B->cols() != sub.nb())
      throw std::invalid_argument(
          "assemble_helmholtz: boundary operator size mismatch");
    for (int p = 0; p < sub.nb(); ++p)
      for (int q = 0; q < sub.nb(); ++q)
        if ((*B)(p, q) != 0.0)
          trip.emplace_back(p, q, -iu * (*B)(p, q));
  }

  sys.A.resize(sub.n(), sub.n());
  sys.A.setFromTriplets(trip.begin(), trip.end());

  if (cf.robin_datum) {
    for (const auto& e : sub.artificial_edges) {
      const auto& a = m.vertices[e[0]];
      const auto& b = m.vertices[e[1]];
      double len = (b - a).norm();
      Eigen::Vector2d normal((b - a).y() / len, -(b - a).x() / len);
      int ra = sub.local_of_mesh[e[0]], rb = sub.local_of_mesh[e[1]];
      for (auto [s, w] : detail::gauss4) {
        Eigen::Vector2d x = a + s * (b - a);
        complexd g = cf.robin_datum(x, normal);
        sys.load(ra) += w * len * g * (1.0 - s);
        sys.load(rb) += w * len * g * s;
      }
    }
  }
  return sys;
}

// Complex sparse LU with a residual guard; context names the subdomain in
// error messages.
class SparseFactor {
 public:
  SparseFactor() = default;
  explicit SparseFactor(Eigen::SparseMatrix<complexd> A,
                        std::string context = {})
      : matrix_(std::move(A)), context_(std::move(context)) {
    matrix_.makeCompressed();
    lu_.compute(matrix_);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("factorization failed (" + context_ + ")");
  }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
    Eigen::VectorXcd x = lu_.solve(b);
    double bn = b.norm();
    if (bn > 0.0 && (matrix_ * x - b).norm() > 1e-12 * bn)
      throw std::runtime_error("sparse solve lost accuracy (" + context_ +
                               ")");
    return x;
  }

  const Eigen::SparseMatrix<complexd>& matrix() const { return matrix_; }

 private:
  Eigen::SparseMatrix<complexd> matrix_;
  Eigen::SparseLU<Eigen::SparseMatrix<complexd>> lu_;
  std::string context_;
};

// Dual (load vector) Neumann trace: skeleton-boundary rows of (A u - load).
// The system must have been assembled without a boundary operator B.
inline Eigen::VectorXcd discrete_neumann_trace(const LocalSystem& sys,
                                               const Eigen::VectorXcd& u) {
  return (sys.A * u - sys.load).head(sys.dofs.nb());
}

}  // namespace mtfdd
