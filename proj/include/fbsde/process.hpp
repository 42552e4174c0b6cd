#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fbsde/errors.hpp"
#include "fbsde/tree.hpp"

namespace fbsde {

// Node-indexed values on a time range [t_lo, t_hi] of a scenario tree.
// The value shape (scalar, vector, matrix) is fixed by T and must be uniform
// across nodes; shape mismatches surface in the Eigen arithmetic of the
// consumers.
template <class T>
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  AdaptedProcess(const ScenarioTree& tree, int t_lo, int t_hi)
      : tree_(&tree), t_lo_(t_lo), t_hi_(t_hi) {
    if (t_lo < 0 || t_hi > tree.T() || t_lo > t_hi)
      throw TimeOutOfRange("AdaptedProcess: bad range [" +
                           std::to_string(t_lo) + "," + std::to_string(t_hi) +
                           "]");
    vals_.resize(t_hi - t_lo + 1);
    for (int t = t_lo; t <= t_hi; ++t)
      vals_[t - t_lo].resize(tree.count(t));
  }

  static AdaptedProcess constant(const ScenarioTree& tree, int t_lo, int t_hi,
                                 const T& v) {
    AdaptedProcess p(tree, t_lo, t_hi);
    for (auto& depth : p.vals_)
      for (auto& x : depth) x = v;
    return p;
  }

  const ScenarioTree& tree() const { return *tree_; }
  int t_lo() const { return t_lo_; }
  int t_hi() const { return t_hi_; }
  bool covers(int t) const { return t >= t_lo_ && t <= t_hi_; }

  T& at(NodeRef n) {
    check(n);
    return vals_[n.t - t_lo_][n.k];
  }
  const T& at(NodeRef n) const {
    check(n);
    return vals_[n.t - t_lo_][n.k];
  }

 private:
  void check(NodeRef n) const {
    if (!tree_) throw TimeOutOfRange("AdaptedProcess: empty process");
    if (n.t < t_lo_ || n.t > t_hi_)
      throw TimeOutOfRange("AdaptedProcess: t=" + std::to_string(n.t) +
                           " outside [" + std::to_string(t_lo_) + "," +
                           std::to_string(t_hi_) + "]");
    if (n.k < 0 || n.k >= static_cast<std::int64_t>(vals_[n.t - t_lo_].size()))
      throw IndexOutOfRange("AdaptedProcess: node index out of range");
  }

  const ScenarioTree* tree_ = nullptr;
  int t_lo_ = 0;
  int t_hi_ = 0;
  std::vector<std::vector<T>> vals_;
};

using ScalarProcess = AdaptedProcess<double>;
using VectorProcess = AdaptedProcess<Eigen::VectorXd>;
using MatrixProcess = AdaptedProcess<Eigen::MatrixXd>;

// E[X_t]: path-probability weighted sum over depth-t nodes, accumulated in
// ascending node order. The reduction order is part of the contract; results
// are reproducible bit for bit.
template <class T>
T expectation(const AdaptedProcess<T>& proc, int t) {
  if (!proc.covers(t))
    throw TimeOutOfRange("expectation: t=" + std::to_string(t) +
                         " outside process range");
  const ScenarioTree& tree = proc.tree();
  NodeRef first = tree.node(t, 0);
  T acc = proc.at(first) * tree.path_prob(first);
  for (std::int64_t k = 1; k < tree.count(t); ++k) {
    NodeRef n = tree.node(t, k);
    acc += proc.at(n) * tree.path_prob(n);
  }
  return acc;
}

}  // namespace fbsde
