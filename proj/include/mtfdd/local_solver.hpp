#pragma once

#include <complex>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mtfdd/traces.hpp"

namespace mtfdd {

struct LocalSolution {
  Eigen::VectorXcd field;      // all local dofs
  Eigen::VectorXcd dirichlet;  // nodal values on the skeleton boundary
  Eigen::VectorXcd neumann;    // dual conormal data on the skeleton boundary
};

// i[[u, conj u]] of one subdomain: nonpositive for source-free local fields.
inline double energy_flux(const LocalSolution& s) {
  return -2.0 * std::imag(s.neumann.dot(s.dirichlet));
}

// Helmholtz solve on one subdomain with impedance coupling through the
// subdomain's own DtN map: the outgoing Robin trace is the datum, the
// incoming one is what scattering returns.
class LocalRobinSolver {
 public:
  LocalRobinSolver(const Mesh& m, const SubdomainMesh& sub,
                   const CoefficientField& cf, const DtnOperator& dtn,
                   double omega)
      : dtn_(&dtn), omega_(omega) {
    if (omega <= 0.0) throw std::invalid_argument("omega must be positive");
    if (dtn.size() != sub.nb())
      throw std::invalid_argument("DtN block size mismatch");
    Eigen::MatrixXd B = omega * dtn.matrix();
    sys_ = assemble_helmholtz(m, sub, cf, &B);
    factor_ = std::make_unique<SparseFactor>(sys_.A);
  }

  int nb() const { return sys_.dofs.nb(); }
  const DtnOperator& dtn() const { return *dtn_; }
  double omega() const { return omega_; }

  // Field driven by the outgoing datum h, optionally adding the subdomain's
  // volume and radiation sources to the right-hand side.
  LocalSolution solve(const Eigen::VectorXcd& h, bool with_sources) const {
    if (h.size() != nb()) throw std::invalid_argument("datum size mismatch");
    Eigen::VectorXcd rhs = with_sources
                               ? sys_.load
                               : Eigen::VectorXcd::Zero(sys_.load.size());
    rhs.head(nb()) += h;
    LocalSolution s;
    s.field = factor_->solve(rhs);
    s.dirichlet = s.field.head(nb());
    // the boundary rows of the solve make this the assembled conormal trace
    s.neumann = h + complexd(0, omega_) * dtn_->apply(s.dirichlet);
    return s;
  }

  LocalSolution source_solution() const {
    return solve(Eigen::VectorXcd::Zero(nb()), true);
  }

  Eigen::VectorXcd robin_plus(const LocalSolution& s) const {
    return s.neumann + complexd(0, omega_) * dtn_->apply(s.dirichlet);
  }
  Eigen::VectorXcd robin_minus(const LocalSolution& s) const {
    return s.neumann - complexd(0, omega_) * dtn_->apply(s.dirichlet);
  }

  Eigen::VectorXcd scattering(const Eigen::VectorXcd& h) const {
    return robin_plus(solve(h, false));
  }

  // Adjoint of scattering in the dual inner product. The local matrix is
  // complex symmetric, so a conjugated solve realizes the conjugate
  // transpose with the same factorization.
  Eigen::VectorXcd scattering_adjoint(const Eigen::VectorXcd& p) const {
    Eigen::VectorXcd phi = solve(p.conjugate(), false).dirichlet.conjugate();
    return p - complexd(0, 2.0 * omega_) * dtn_->apply(phi);
  }

 private:
  const DtnOperator* dtn_;
  double omega_;
  LocalSystem sys_;
  std::unique_ptr<SparseFactor> factor_;
};

inline std::vector<LocalRobinSolver> build_local_solvers(
    const Mesh& m, const TraceSpace& ts, const CoefficientField& cf,
    double omega) {
  std::vector<LocalRobinSolver> out;
  out.reserve(ts.subs.size());
  for (size_t j = 0; j < ts.subs.size(); ++j)
    out.emplace_back(m, ts.subs[j], cf, ts.dtn[j], omega);
  return out;
}

inline MultiTrace apply_scattering(const std::vector<LocalRobinSolver>& local,
                                   const MultiTrace& p) {
  if (local.size() != p.blocks.size())
    throw std::invalid_argument("multitrace block count mismatch");
  MultiTrace out;
  out.blocks.reserve(local.size());
  for (size_t j = 0; j < local.size(); ++j)
    out.blocks.push_back(local[j].scattering(p.blocks[j]));
  return out;
}

// Incoming traces radiated by the subdomain sources alone.
inline MultiTrace source_offsets(const std::vector<LocalRobinSolver>& local) {
  MultiTrace out;
  out.blocks.reserve(local.size());
  for (const auto& s : local) {
    LocalSolution sol = s.source_solution();
    out.blocks.push_back(s.robin_plus(sol));
  }
  return out;
}

}  // namespace mtfdd
