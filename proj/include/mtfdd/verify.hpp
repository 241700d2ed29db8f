#pragma once

// End-to-end identity checks for one configured problem. Each check is a
// named measurement against a fixed threshold; the balanced and coupled
// trace constructions read vertex incidence straight from the subdomain
// views, so a corrupted restriction map is detected rather than reproduced.

#include <algorithm>
#include <complex>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtfdd/skeleton_solver.hpp"

namespace mtfdd {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double limit = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  int trials = 20;
  unsigned long long seed = 1;
  double solver_tol = 1e-10;
  int max_iterations = 400;
  bool with_coercivity = true;
  int coercivity_max_dofs = 2000;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// The contraction checks assume dissipative media: Im kappa_sq >= 0.
inline VerifyReport verify_suite(const Mesh& m, const TraceSpace& ts,
                                 const CoefficientField& cf, double omega,
                                 const VerifyOptions& opt = {}) {
  if (opt.trials < 1) throw std::invalid_argument("verify needs trials >= 1");
  SkeletonSystem sys(m, ts, cf, omega);
  const auto& T = ts.dtn;
  std::mt19937_64 gen(opt.seed);
  std::normal_distribution<double> dist;
  VerifyReport rep;
  auto push = [&rep](const std::string& name, double measured, double limit) {
    rep.checks.push_back({name, measured, limit, measured <= limit});
  };
  auto random_trace = [&]() {
    MultiTrace p = sys.zero();
    for (auto& b : p.blocks)
      for (int i = 0; i < b.size(); ++i) b(i) = complexd(dist(gen), dist(gen));
    return p;
  };

  std::map<int, std::vector<std::pair<int, int>>> incidence;
  for (size_t j = 0; j < ts.subs.size(); ++j)
    for (int i = 0; i < ts.subs[j].nb(); ++i)
      incidence[ts.subs[j].global_vertex[i]].push_back(
          {static_cast<int>(j), i});

  double invol = 0, isom = 0, fixed = 0, negated = 0, contracted = 0,
         combined = 0, adjoint = 0;
  for (int t = 0; t < opt.trials; ++t) {
    MultiTrace p = random_trace();
    double pn = neumann_norm(p, T);
    MultiTrace ep = sys.exchange().apply(p);
    invol = std::max(
        invol, neumann_norm(sys.exchange().apply(ep) - p, T) / pn);
    isom = std::max(isom, std::abs(neumann_norm(ep, T) - pn) / pn);

    // balanced duals: opposite contributions at every shared vertex
    MultiTrace q = sys.zero();
    for (const auto& entry : incidence) {
      const auto& lst = entry.second;
      for (size_t a = 1; a < lst.size(); ++a) {
        complexd z(dist(gen), dist(gen));
        q.blocks[lst[0].first](lst[0].second) += z;
        q.blocks[lst[a].first](lst[a].second) -= z;
      }
    }
    double qn = neumann_norm(q, T);
    if (qn > 0.0)
      fixed = std::max(
          fixed, neumann_norm(sys.exchange().apply(q) - q, T) / qn);

    // coupled duals: the trace metric applied to a single-valued trace
    MultiTrace u = sys.zero();
    for (const auto& entry : incidence) {
      complexd z(dist(gen), dist(gen));
      for (const auto& ji : entry.second) u.blocks[ji.first](ji.second) = z;
    }
    MultiTrace cu = apply_dtn(T, u);
    double cn = neumann_norm(cu, T);
    if (cn > 0.0)
      negated = std::max(
          negated, neumann_norm(sys.exchange().apply(cu) + cu, T) / cn);

    MultiTrace sp = apply_scattering(sys.local(), p);
    contracted = std::max(contracted, (neumann_norm(sp, T) - pn) / pn);
    combined = std::max(
        combined, (neumann_norm(sys.exchange().apply(sp), T) - pn) / pn);

    MultiTrace r = random_trace();
    complexd lhs = hm12_inner(sys.apply(p, SkeletonVariant::reflected), r, T);
    complexd rhs = hm12_inner(p, sys.adjoint_apply(r), T);
    adjoint = std::max(adjoint,
                       std::abs(lhs - rhs) / (pn * neumann_norm(r, T)));
  }
  push("exchange_involution", invol, 1e-12);
  push("exchange_isometry", isom, 1e-10);
  push("exchange_fixes_balanced", fixed, 1e-10);
  push("exchange_negates_coupled", negated, 1e-10);
  push("scattering_contraction", contracted, 1e-9);
  push("combined_contraction", combined, 1e-9);
  push("adjoint_consistency", adjoint, 1e-10);

  SolveOptions so;
  so.tol = opt.solver_tol;
  so.max_iterations = opt.max_iterations;
  auto solved = solve_gmres(sys, so);
  const MultiTrace& p = solved.first;
  MultiTrace f = sys.rhs(so.variant);
  double fn = neumann_norm(f, T);
  double rel =
      fn > 0.0 ? neumann_norm(sys.apply(p, so.variant) - f, T) / fn : 0.0;
  push("skeleton_residual", rel, opt.solver_tol * 1.0001);

  Reconstruction rec = reconstruct(sys, p);
  push("trace_mismatch",
       rec.trace_scale > 0.0 ? rec.trace_mismatch / rec.trace_scale : 0.0,
       1e-6);

  Eigen::VectorXcd ref = monolithic_reference(m, cf);
  double refmax = ref.size() > 0 ? ref.cwiseAbs().maxCoeff() : 0.0;
  double dd = refmax > 0.0 ? relative_l2(m, rec.global, ref)
                           : rec.global.cwiseAbs().maxCoeff();
  push("dd_vs_monolithic", dd, 1e-6);

  if (opt.with_coercivity && sys.size() <= opt.coercivity_max_dofs) {
    CoercivityReport cr = estimate_coercivity_dense(sys,
                                                    opt.coercivity_max_dofs);
    rep.checks.push_back(
        {"coercivity_alpha", cr.alpha, 0.0, cr.alpha > 0.0});
    double probe = estimate_coercivity_probe(sys, 120, opt.seed + 1);
    push("coercivity_probe_agreement", std::abs(probe - cr.alpha) / cr.alpha,
         0.05);
  }
  return rep;
}

}  // namespace mtfdd
