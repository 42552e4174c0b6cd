#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fbsde/process.hpp"
#include "fbsde/tree.hpp"

namespace fbsde {

// Generator of the backward difference equation, evaluated at time t+1 along
// each child node: f(node at depth t, y, z_tilde) -> R^n for t = 1..T.
// Taking z_tilde = Z*itilde (n x (d-1)) instead of Z enforces structurally
// that the generator respects the ~_M quotient. At t = T callers pass a zero
// z_tilde; the generator must not depend on it there.
using Generator = std::function<Eigen::VectorXd(
    NodeRef node, int t, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& z_tilde)>;

struct BsdeSolution {
  VectorProcess Y;  // R^n on [0, T]
  MatrixProcess Z;  // canonical n x d (rows orthogonal to 1_d) on [0, T-1]
};

// Canonical representative of the ~_M class: Z (I_d - (1/d) 1 1^*).
Eigen::MatrixXd canonicalize(const Eigen::MatrixXd& z);

// Canonical representative recovered from the quotient coordinate z_tilde.
Eigen::MatrixXd canonical_from_tilde(const ScenarioTree& tree,
                                     const Eigen::MatrixXd& z_tilde);

// Martingale representation at a node: given per-outcome values with zero
// conditional expectation, returns the canonical Z with Z M_{t+1}(i) =
// centered[i-1] for every outcome, via Z = E[X M^*|F_t] (E[M M^*|F_t])^+.
Eigen::MatrixXd mrep(const ScenarioTree& tree, NodeRef n,
                     const std::vector<Eigen::VectorXd>& centered,
                     double centering_tol = 1e-12);

// Exact backward recursion for
//   dY_t = -f(t+1, Y_{t+1}, Z_{t+1} Itilde) + Z_t M_{t+1},  Y_T = eta.
// terminal is indexed by leaf node rank. The generator is explicit in the
// t+1 values, so no iteration is involved.
BsdeSolution solve_bsde(const ScenarioTree& tree, const Generator& f,
                        const std::vector<Eigen::VectorXd>& terminal);

// Z1 ~_M Z2: the contractions against every realisable increment agree.
bool equiv_m(const MatrixProcess& z1, const MatrixProcess& z2,
             double tol = 1e-11);

// (E[|Z M_{t+1}|^2 | F_t])^{1/2}; a seminorm vanishing exactly on the ~_M
// class of zero.
double z_seminorm(const ScenarioTree& tree, NodeRef n,
                  const Eigen::MatrixXd& z);

}  // namespace fbsde
