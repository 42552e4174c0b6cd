#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/control.hpp"

namespace fbsde {

struct OptimizerConfig {
  double initial_step = 1.0;
  double shrink = 0.5;          // step multiplier of the backtracking search
  double armijo_c = 1e-4;       // sufficient-decrease constant
  double tol_mp = 1e-8;
  int max_outer_iters = 200;
  int max_line_search = 40;
  std::uint64_t seed = 0;       // randomized restarts, when used
  SolverOptions solver;
};

struct OptimizationResult {
  Control control;
  double J = 0.0;
  MPReport mp;
  int iterations = 0;
  bool converged = false;
};

// Projected gradient descent on J: u <- Proj_U(u + step H_u) nodewise with
// Armijo backtracking, stopping at MP residual <= tol_mp. The reported cost
// and MP residual are recomputed from scratch on exit.
OptimizationResult projected_gradient(const ControlProblem& p,
                                      const Control& u0,
                                      const OptimizerConfig& cfg = {});

// Exhaustive search over adapted controls with each component on the uniform
// grid of U_t, enumerated lexicographically by (t, node, component, grid
// index); ties keep the lexicographically smallest candidate. Times past the
// last decision epoch keep the box lower bound.
OptimizationResult brute_force(const ControlProblem& p, int grid_points,
                               double budget = 1e6,
                               const SolverOptions& opts = {});

// Number of cost evaluations brute_force would need.
double brute_force_combinations(const ControlProblem& p, int grid_points);

struct MpExperimentRow {
  int grid = 0;
  double spacing = 0.0;
  double J = 0.0;
  double rho = 0.0;
};

struct MpExperimentReport {
  std::vector<MpExperimentRow> rows;
  bool pass = false;            // residual decays with grid refinement
  std::string note;             // e.g. a BudgetExceeded cut the run short
  std::string table() const;
};

// Empirical necessity check: brute-force optimum and its MP residual per grid
// refinement; passes when the residual decays by at least ~35% per halving of
// the spacing (halving with 30% slack), degenerate zero residuals allowed.
MpExperimentReport mp_necessity_experiment(const ControlProblem& p,
                                           const std::vector<int>& grids,
                                           double budget = 1e6,
                                           const SolverOptions& opts = {});

// Local Lipschitz estimate of J in u: largest |dJ|/spacing over coordinate
// probes of the given spacing around u (clamped to the box).
double measure_cost_lipschitz(const ControlProblem& p, const Control& u,
                              double spacing, const SolverOptions& opts = {});

}  // namespace fbsde
