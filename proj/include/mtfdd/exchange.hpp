#pragma once

#include <Eigen/Cholesky>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mtfdd/traces.hpp"

namespace mtfdd {

// Reflection about the balanced-dual subspace ker(gather), orthogonal in the
// dual metric. Balanced data are fixed, data of the form T * spread(phi) are
// negated; together those spaces span everything, so the map is an isometric
// involution.
class ExchangeOperator {
 public:
  explicit ExchangeOperator(const TraceSpace& ts) : ts_(&ts) {
    int n = ts.map.skeleton_size;
    coupling_ = Eigen::MatrixXd::Zero(n, n);
    for (size_t j = 0; j < ts.dtn.size(); ++j) {
      const auto& pos = ts.map.position[j];
      const auto& T = ts.dtn[j].matrix();
      std::vector<int> present;
      for (int k = 0; k < n; ++k)
        if (pos[k] >= 0) present.push_back(k);
      for (int a : present)
        for (int b : present) coupling_(a, b) += T(pos[a], pos[b]);
    }
    llt_.compute(coupling_);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("interface coupling is not positive definite");
  }

  const TraceSpace& space() const { return *ts_; }
  const Eigen::MatrixXd& coupling() const { return coupling_; }

  // Orthogonal projection onto T * range(spread) in the dual metric.
  MultiTrace project(const MultiTrace& p) const {
    Eigen::VectorXcd g = ts_->map.gather(p);
    Eigen::VectorXcd phi(g.size());
    phi.real() = llt_.solve(g.real().eval());
    phi.imag() = llt_.solve(g.imag().eval());
    return apply_dtn(ts_->dtn, ts_->map.spread(phi));
  }

  MultiTrace apply(const MultiTrace& p) const {
    return p - complexd(2, 0) * project(p);
  }

  // p = balanced + coupled, orthogonal in the dual metric.
  std::pair<MultiTrace, MultiTrace> orthogonal_decompose(
      const MultiTrace& p) const {
    MultiTrace coupled = project(p);
    return {p - coupled, coupled};
  }

 private:
  const TraceSpace* ts_;
  Eigen::MatrixXd coupling_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace mtfdd
