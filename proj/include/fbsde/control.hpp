#pragma once

#include "fbsde/fbsde_solver.hpp"

namespace fbsde {

// Perturbation of an admissible control at one time: u^eps = u + delta_{ts}
// eps dv with an F_s-measurable direction dv such that u_s + dv stays in U_s.
struct PerturbationSpec {
  int s = 0;
  VectorProcess dv;  // lives on [s, s]
  double eps = 0.0;
};

struct VariationalTriple {
  VectorProcess xi;    // R^m on [0, T], xi_0 = 0
  VectorProcess eta;   // R^n on [0, T], eta_T = 0
  MatrixProcess zeta;  // canonical n x d on [0, T-1]
};

struct AdjointTriple {
  VectorProcess p;  // R^m on [0, T], p_T = -h_x(X_T)
  MatrixProcess q;  // canonical m x d on [0, T-1]
  VectorProcess k;  // R^n on [0, T], k_0 = 0
  double residual = 0.0;
  std::string method;
};

struct MPReport {
  ScalarProcess rho;  // box supremum of <H_u, v - u> per (node, t)
  double max_rho = 0.0;
  int argmax_t = 0;
  std::int64_t argmax_node = 0;
  double tol = 0.0;
  bool pass = false;
};

// J(u) = E sum_{t<T} l(t, X_t, Y_t, Z_t Itilde, u_t) + E h(X_T), with the
// state solved by the coupling-appropriate method.
double evaluate_cost(const ControlProblem& p, const Control& u,
                     const SolverOptions& opts = {});
// Same cost read off an already-solved trajectory.
double cost_of_trajectory(const ControlProblem& p, const Control& u,
                          const SolutionTriple& s);

Control perturb(const ControlProblem& p, const Control& u,
                const PerturbationSpec& spec);

// First variation (xi, eta, zeta) of the partially coupled system along the
// direction spec: xi by explicit forward recursion, (eta, zeta) by the exact
// backward recursion with the linearised generator.
VariationalTriple solve_variational_p1(const ControlProblem& p,
                                       const Control& u,
                                       const PerturbationSpec& spec,
                                       const SolutionTriple* base = nullptr);

// Fully coupled linear variational system, solved as one stacked linear
// system.
VariationalTriple solve_variational_p2(const ControlProblem& p,
                                       const Control& u,
                                       const PerturbationSpec& spec,
                                       const SolutionTriple* base = nullptr);

// Adjoint (p, q, k) of the partially coupled problem: k forward, then (p, q)
// backward with terminal p_T = -h_x(X_T).
AdjointTriple solve_adjoint_p1(const ControlProblem& p, const Control& u,
                               const SolutionTriple* base = nullptr);

// Adjoint of the fully coupled problem: one stacked linear solve of the
// coupled (p, q, k) system.
AdjointTriple solve_adjoint_p2(const ControlProblem& p, const Control& u,
                               const SolutionTriple* base = nullptr);

AdjointTriple solve_adjoint(const ControlProblem& p, const Control& u,
                            const SolutionTriple* base = nullptr);

// H = b^* p + sum_i sigma_i E[MM^*|F_t] q^* e_i - f^* k - l.
double hamiltonian(const ControlProblem& p, NodeRef node, int t,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                   const Eigen::VectorXd& pv, const Eigen::MatrixXd& q,
                   const Eigen::VectorXd& k);

// H_u = b_u^* p + sum_i sigma_iu E[MM^*|F_t] q^* e_i - f_u^* k - l_u.
Eigen::VectorXd hamiltonian_u(const ControlProblem& p, NodeRef node, int t,
                              const Eigen::VectorXd& u,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& zt,
                              const Eigen::VectorXd& pv,
                              const Eigen::MatrixXd& q,
                              const Eigen::VectorXd& k);

// H_u along a solved trajectory/adjoint pair.
Eigen::VectorXd hamiltonian_u_at(const ControlProblem& p, const Control& u,
                                 const SolutionTriple& s,
                                 const AdjointTriple& adj, NodeRef node);

// Maximum-principle residual: rho(node, t) = sup_{v in U_t} <H_u, v - u_t>,
// evaluated in closed form over the box. pass iff max rho <= tol_mp.
MPReport check_mp(const ControlProblem& p, const Control& u,
                  double tol_mp = 1e-8, const SolverOptions& opts = {});
MPReport check_mp_given(const ControlProblem& p, const Control& u,
                        const SolutionTriple& s, const AdjointTriple& adj,
                        double tol_mp = 1e-8);

}  // namespace fbsde
