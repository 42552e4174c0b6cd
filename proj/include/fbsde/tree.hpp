#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fbsde/errors.hpp"

namespace fbsde {

// A node is a history (w_1,...,w_t): depth t plus the rank of the history in
// base-d digit order. The root is {0, 0}.
struct NodeRef {
  int t = 0;
  std::int64_t k = 0;
  friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

// Conditional covariance of the next martingale increment at a node,
// E[M_{t+1} M_{t+1}^*|F_t] = diag(P) - P P^*, together with its Moore-Penrose
// pseudoinverse (spectral cutoff at 1e-12 relative).
struct CondCov {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd pinv;
};

// The d x (d-1) matrix with I_{d-1} on top and a row of -1's below.
// Its columns span the orthogonal complement of 1_d, so Z*itilde is a
// lossless coordinate for the ~_M class of Z.
Eigen::MatrixXd itilde(int d);

struct TreeLimits {
  int max_d = 4;
  int max_T = 8;
};

// Filtered probability space of a discrete-time finite-state process:
// full non-recombining tree, d^t nodes at depth t, one strictly positive
// one-step kernel per non-leaf node. Immutable after construction.
class ScenarioTree {
 public:
  // Homogeneous kernel: same probability vector at every node.
  ScenarioTree(int d, int T, const Eigen::VectorXd& kernel,
               TreeLimits limits = {});
  // Per-depth kernels: kernels[t] used at every node of depth t, t = 0..T-1.
  ScenarioTree(int d, int T, const std::vector<Eigen::VectorXd>& kernels,
               TreeLimits limits = {});
  // Per-node kernel.
  ScenarioTree(int d, int T,
               const std::function<Eigen::VectorXd(NodeRef)>& kernel_at,
               TreeLimits limits = {});

  int d() const { return d_; }
  int T() const { return T_; }
  std::int64_t count(int t) const;   // d^t
  NodeRef node(int t, std::int64_t k) const;
  NodeRef root() const { return {0, 0}; }
  NodeRef child(NodeRef n, int outcome) const;  // outcome in 1..d
  NodeRef parent(NodeRef n) const;
  int outcome_from_parent(NodeRef n) const;     // in 1..d
  std::vector<int> history(NodeRef n) const;    // outcomes 1..d, length t

  // One-step conditional law of W_{t+1} at a non-leaf node.
  const Eigen::VectorXd& kernel(NodeRef n) const;
  // Unconditional probability of the history leading to n.
  double path_prob(NodeRef n) const;

  // M_{t+1} realisation e_i - P at a non-leaf node, i in 1..d.
  Eigen::VectorXd mart_increment(NodeRef n, int i) const;

  const CondCov& cond_cov(NodeRef n) const;

  // Extreme generalized eigenvalues of z E[MM^*|F_t] z^* against |z Itilde|^2
  // over rows orthogonal to 1_d: the tightest constants with
  // c_min |Z Itilde|_F^2 <= E[|Z M|^2|F_t] <= c_max |Z Itilde|_F^2.
  std::pair<double, double> norm_equivalence_constants(NodeRef n) const;

  const Eigen::MatrixXd& tilde() const { return tilde_; }
  // Right inverse used to map the quotient coordinate back to the canonical
  // representative: for canonical Z (rows orthogonal to 1_d),
  // Z = (Z tilde) * tilde_pinv.
  const Eigen::MatrixXd& tilde_pinv() const { return tilde_pinv_; }
  // I_d - (1/d) 1 1^*: projects rows onto the orthogonal complement of 1_d.
  const Eigen::MatrixXd& centering() const { return centering_; }

 private:
  void build(const std::function<Eigen::VectorXd(NodeRef)>& kernel_at,
             TreeLimits limits);
  void check_node(NodeRef n) const;

  int d_ = 0;
  int T_ = 0;
  std::vector<std::vector<Eigen::VectorXd>> kernel_;  // [t][k], t = 0..T-1
  std::vector<std::vector<double>> path_prob_;        // [t][k], t = 0..T
  std::vector<std::vector<CondCov>> cond_cov_;        // [t][k], t = 0..T-1
  Eigen::MatrixXd tilde_;       // d x (d-1)
  Eigen::MatrixXd tilde_pinv_;  // (d-1) x d, (tilde^* tilde)^{-1} tilde^*
  Eigen::MatrixXd centering_;   // d x d
};

// Exact weighted average over the d children values; values indexed by
// outcome-1. Throws MissingChild unless exactly d values are supplied.
template <class T>
T cond_expect(const ScenarioTree& tree, NodeRef n, const std::vector<T>& values) {
  if (static_cast<int>(values.size()) != tree.d())
    throw MissingChild("cond_expect: expected " + std::to_string(tree.d()) +
                       " child values, got " + std::to_string(values.size()));
  const Eigen::VectorXd& p = tree.kernel(n);
  T acc = values[0] * p(0);
  for (int i = 1; i < tree.d(); ++i) acc += values[i] * p(i);
  return acc;
}

}  // namespace fbsde
