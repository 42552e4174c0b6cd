#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fbsde/coefficients.hpp"
#include "fbsde/process.hpp"
#include "fbsde/tree.hpp"

namespace fbsde {

// Per-time box control domain [lo_t, hi_t] in R^r, t = 0..T.
struct ControlDomain {
  std::vector<Eigen::VectorXd> lo;
  std::vector<Eigen::VectorXd> hi;

  void validate(int T, int r) const;
  bool contains(int t, const Eigen::VectorXd& u, double tol = 0.0) const;
  Eigen::VectorXd clamp(int t, const Eigen::VectorXd& u) const;
};

struct ControlProblem {
  std::shared_ptr<const ScenarioTree> tree;
  std::shared_ptr<const Coefficients> coeffs;
  Eigen::VectorXd x0;  // R^m
  Eigen::VectorXd yT;  // R^n, terminal condition at every leaf
  ControlDomain domain;

  void validate() const;
  int m() const { return coeffs->m(); }
  int n() const { return coeffs->n(); }
  int r() const { return coeffs->r(); }

  // Control values at time T are decision variables only if f still reacts
  // to them there (b, sigma, l vanish at T by convention).
  int last_decision_time() const {
    return coeffs->f_depends_on_u_at_T() ? tree->T() : tree->T() - 1;
  }
};

using Control = VectorProcess;  // values in R^r on [0, T]

Control constant_control(const ControlProblem& p, const Eigen::VectorXd& u);
void require_admissible(const ControlProblem& p, const Control& u,
                        double tol = 1e-12);

}  // namespace fbsde
