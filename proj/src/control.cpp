#include "fbsde/control.hpp"

#include <cmath>

namespace fbsde {

namespace {

Eigen::MatrixXd zt_or_zero(const ScenarioTree& tree, const MatrixProcess& Z,
                           NodeRef n, int rows) {
  if (n.t <= tree.T() - 1) return Z.at(n) * tree.tilde();
  return Eigen::MatrixXd::Zero(rows, tree.d() - 1);
}

// (y, z~) arguments fed to coefficient evaluations: actual values for full
// coupling, zeros for partial (where b and sigma ignore them and f, l see the
// same values either way through the solver contracts).
struct Args {
  Eigen::VectorXd y;
  Eigen::MatrixXd zt;
};

Args base_args(const ControlProblem& p, const SolutionTriple& s, NodeRef n) {
  const ScenarioTree& tree = *p.tree;
  Args a;
  a.y = s.Y.at(n);
  a.zt = zt_or_zero(tree, s.Z, n, p.n());
  return a;
}

}  // namespace

double cost_of_trajectory(const ControlProblem& p, const Control& u,
                          const SolutionTriple& s) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  double j = 0.0;
  for (int t = 0; t < tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      Args a = base_args(p, s, n);
      j += tree.path_prob(n) * cf.l(n, t, s.X.at(n), a.y, a.zt, u.at(n));
    }
  for (std::int64_t k = 0; k < tree.count(tree.T()); ++k) {
    NodeRef n = tree.node(tree.T(), k);
    j += tree.path_prob(n) * cf.h(n, s.X.at(n));
  }
  return j;
}

double evaluate_cost(const ControlProblem& p, const Control& u,
                     const SolverOptions& opts) {
  SolutionTriple s = solve_state(p, u, opts);
  return cost_of_trajectory(p, u, s);
}

Control perturb(const ControlProblem& p, const Control& u,
                const PerturbationSpec& spec) {
  const ScenarioTree& tree = *p.tree;
  if (spec.s < 0 || spec.s > tree.T())
    throw TimeOutOfRange("perturb: s outside 0..T");
  if (spec.eps < 0.0 || spec.eps > 1.0)
    throw InfeasibleDirection("perturb: eps outside [0, 1]");
  Control out = u;
  for (std::int64_t k = 0; k < tree.count(spec.s); ++k) {
    NodeRef n = tree.node(spec.s, k);
    const Eigen::VectorXd& dv = spec.dv.at(n);
    if (!p.domain.contains(spec.s, u.at(n) + dv))
      throw InfeasibleDirection("perturb: u_s + dv leaves U_s at node " +
                                std::to_string(k));
    out.at(n) = u.at(n) + spec.eps * dv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problem 1 variational and adjoint systems
// ---------------------------------------------------------------------------

VariationalTriple solve_variational_p1(const ControlProblem& p,
                                       const Control& u,
                                       const PerturbationSpec& spec,
                                       const SolutionTriple* base) {
  if (p.coeffs->kind() != Coupling::Partial)
    throw DimensionMismatch("solve_variational_p1: needs partial coupling");
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int m = p.m(), n = p.n(), d = tree.d(), T = tree.T();

  SolutionTriple local;
  if (!base) {
    local = solve_partially_coupled(p, u);
    base = &local;
  }
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd zt0 = Eigen::MatrixXd::Zero(n, d - 1);

  VariationalTriple v;
  v.xi = VectorProcess(tree, 0, T);
  v.xi.at(tree.root()) = Eigen::VectorXd::Zero(m);
  for (int t = 0; t < T; ++t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      Derivs dv = cf.derivs(node, t, base->X.at(node), y0, zt0, u.at(node));
      const Eigen::VectorXd& xi_t = v.xi.at(node);
      Eigen::VectorXd drift = dv.b_x * xi_t;
      Eigen::MatrixXd diff_rows(m, d);
      for (int i = 0; i < m; ++i)
        diff_rows.row(i) = xi_t.transpose() * dv.sig_x[i];
      if (t == spec.s) {
        Eigen::VectorXd dvv = spec.eps * spec.dv.at(node);
        drift += dv.b_u * dvv;
        for (int i = 0; i < m; ++i)
          diff_rows.row(i) += dvv.transpose() * dv.sig_u[i];
      }
      for (int j = 1; j <= d; ++j)
        v.xi.at(tree.child(node, j)) =
            xi_t + drift + diff_rows * tree.mart_increment(node, j);
    }
  }

  Generator gen = [&](NodeRef node, int t, const Eigen::VectorXd& eta,
                      const Eigen::MatrixXd& zeta_t) {
    Args a = base_args(p, *base, node);
    Derivs dv = cf.derivs(node, t, base->X.at(node), a.y, a.zt, u.at(node));
    Eigen::VectorXd g = dv.f_x * v.xi.at(node) + dv.f_y * eta;
    for (int i = 0; i < n; ++i)
      g += dv.f_zt[i] * zeta_t.row(i).transpose();
    if (t == spec.s) g += dv.f_u * (spec.eps * spec.dv.at(node));
    return g;
  };
  std::vector<Eigen::VectorXd> terminal(tree.count(T),
                                        Eigen::VectorXd::Zero(n));
  BsdeSolution bs = solve_bsde(tree, gen, terminal);
  v.eta = std::move(bs.Y);
  v.zeta = std::move(bs.Z);
  return v;
}

AdjointTriple solve_adjoint_p1(const ControlProblem& p, const Control& u,
                               const SolutionTriple* base) {
  if (p.coeffs->kind() != Coupling::Partial)
    throw DimensionMismatch("solve_adjoint_p1: needs partial coupling");
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int m = p.m(), n = p.n(), d = tree.d(), T = tree.T();

  SolutionTriple local;
  if (!base) {
    local = solve_partially_coupled(p, u);
    base = &local;
  }
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd zt0 = Eigen::MatrixXd::Zero(n, d - 1);

  AdjointTriple adj;
  adj.method = "recursion";
  adj.k = VectorProcess(tree, 0, T);
  adj.k.at(tree.root()) = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < T; ++t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      Args a = base_args(p, *base, node);
      Derivs dv = cf.derivs(node, t, base->X.at(node), a.y, a.zt, u.at(node));
      const Eigen::VectorXd& kt = adj.k.at(node);
      Eigen::VectorXd drift = dv.f_y.transpose() * kt + dv.l_y;
      // diffusion bracket: row i = (k^* f_{z~_i} + l_{z~_i}) Itilde^* C^+
      Eigen::MatrixXd bracket(n, d);
      const Eigen::MatrixXd& cpinv = tree.cond_cov(node).pinv;
      for (int i = 0; i < n; ++i)
        bracket.row(i) = (kt.transpose() * dv.f_zt[i] + dv.l_zt.row(i)) *
                         tree.tilde().transpose() * cpinv;
      for (int j = 1; j <= d; ++j)
        adj.k.at(tree.child(node, j)) =
            kt + drift + bracket * tree.mart_increment(node, j);
    }
  }

  Generator gen = [&](NodeRef node, int t, const Eigen::VectorXd& pv,
                      const Eigen::MatrixXd& q_tilde) {
    Args a = base_args(p, *base, node);
    Derivs dv = cf.derivs(node, t, base->X.at(node), a.y, a.zt, u.at(node));
    Eigen::VectorXd g = dv.b_x.transpose() * pv - dv.f_x.transpose() *
                        adj.k.at(node) - dv.l_x;
    if (t < T) {
      Eigen::MatrixXd q = canonical_from_tilde(tree, q_tilde);
      const Eigen::MatrixXd& C = tree.cond_cov(node).matrix;
      for (int i = 0; i < m; ++i)
        g += dv.sig_x[i] * (C * q.row(i).transpose());
    }
    return g;
  };
  std::vector<Eigen::VectorXd> terminal(tree.count(T));
  for (std::int64_t k = 0; k < tree.count(T); ++k) {
    NodeRef leaf = tree.node(T, k);
    terminal[k] = -cf.h_x(leaf, base->X.at(leaf));
  }
  BsdeSolution bs = solve_bsde(tree, gen, terminal);
  adj.p = std::move(bs.Y);
  adj.q = std::move(bs.Z);
  adj.residual = 0.0;
  return adj;
}

// ---------------------------------------------------------------------------
// Problem 2: stacked linear solves (m = n = 1)
// ---------------------------------------------------------------------------

namespace {

// Shared layout for the linear forward-backward systems in
// (fwd at 1..T, bwd at 0..T-1, diffusion-tilde at 0..T-1).
struct LinStack {
  const ScenarioTree* tree;
  std::vector<std::int64_t> fwd_off;  // depth 1..T
  std::vector<std::int64_t> bwd_off;  // depth 0..T-1, blocks [bwd, tilde]
  std::int64_t size = 0;

  explicit LinStack(const ScenarioTree& tr) : tree(&tr) {
    const int T = tr.T(), d = tr.d();
    fwd_off.resize(T + 1, -1);
    bwd_off.resize(T, -1);
    std::int64_t off = 0;
    for (int t = 1; t <= T; ++t) {
      fwd_off[t] = off;
      off += tr.count(t);
    }
    for (int t = 0; t < T; ++t) {
      bwd_off[t] = off;
      off += tr.count(t) * d;
    }
    size = off;
  }
  double fwd(const Eigen::VectorXd& v, NodeRef n) const {
    return n.t == 0 ? 0.0 : v(fwd_off[n.t] + n.k);
  }
  double bwd(const Eigen::VectorXd& v, NodeRef n) const {
    return v(bwd_off[n.t] + n.k * tree->d());
  }
  Eigen::RowVectorXd tld(const Eigen::VectorXd& v, NodeRef n) const {
    return v.segment(bwd_off[n.t] + n.k * tree->d() + 1, tree->d() - 1)
        .transpose();
  }
};

// Solves the affine system r(v) = 0 by assembling the exact jacobian from
// unit-vector evaluations (r is affine, so differencing is exact).
Eigen::VectorXd solve_affine(
    const LinStack& st,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rfun) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(st.size);
  Eigen::VectorXd r0 = rfun(zero);
  Eigen::MatrixXd J(st.size, st.size);
  for (std::int64_t j = 0; j < st.size; ++j) {
    Eigen::VectorXd ej = zero;
    ej(j) = 1.0;
    J.col(j) = rfun(ej) - r0;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
  if (!lu.isInvertible())
    throw SingularJacobian("stacked linear system is singular (rank " +
                           std::to_string(lu.rank()) + " of " +
                           std::to_string(st.size) + ")");
  return lu.solve(-r0);
}

// Per-node frozen derivatives along the base trajectory.
struct FrozenDerivs {
  std::vector<std::vector<Derivs>> at;  // [t][k], t = 0..T
  const Derivs& operator()(NodeRef n) const { return at[n.t][n.k]; }
};

FrozenDerivs freeze(const ControlProblem& p, const Control& u,
                    const SolutionTriple& base) {
  const ScenarioTree& tree = *p.tree;
  FrozenDerivs fr;
  fr.at.resize(tree.T() + 1);
  for (int t = 0; t <= tree.T(); ++t) {
    fr.at[t].reserve(tree.count(t));
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      Args a = base_args(p, base, n);
      fr.at[t].push_back(
          p.coeffs->derivs(n, t, base.X.at(n), a.y, a.zt, u.at(n)));
    }
  }
  return fr;
}

}  // namespace

VariationalTriple solve_variational_p2(const ControlProblem& p,
                                       const Control& u,
                                       const PerturbationSpec& spec,
                                       const SolutionTriple* base) {
  if (p.coeffs->kind() != Coupling::Full)
    throw DimensionMismatch("solve_variational_p2: needs full coupling");
  const ScenarioTree& tree = *p.tree;
  const int d = tree.d(), T = tree.T();

  SolutionTriple local;
  if (!base) {
    local = solve_fully_coupled(p, u);
    base = &local;
  }
  FrozenDerivs fr = freeze(p, u, *base);
  LinStack st(tree);

  auto rfun = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(st.size);
    std::int64_t row = 0;
    for (int t = 0; t < T; ++t)
      for (std::int64_t k = 0; k < tree.count(t); ++k) {
        NodeRef node = tree.node(t, k);
        const Derivs& dv = fr(node);
        const double xi = st.fwd(v, node);
        const double eta = st.bwd(v, node);
        Eigen::RowVectorXd zt = st.tld(v, node);
        Eigen::RowVectorXd zeta_row = zt * tree.tilde_pinv();

        double drift = dv.b_x(0, 0) * xi + dv.b_y(0, 0) * eta +
                       dv.b_zt[0].row(0).dot(zt);
        Eigen::RowVectorXd diff = xi * dv.sig_x[0].row(0) +
                                  eta * dv.sig_y.row(0) + zt * dv.sig_zt;
        if (t == spec.s) {
          Eigen::VectorXd dvv = spec.eps * spec.dv.at(node);
          drift += dv.b_u.row(0).dot(dvv);
          diff += dvv.transpose() * dv.sig_u[0];
        }
        for (int j = 1; j <= d; ++j) {
          NodeRef c = tree.child(node, j);
          Eigen::VectorXd mj = tree.mart_increment(node, j);
          const Derivs& dc = fr(c);
          const double xic = st.fwd(v, c);
          const double etac = (t + 1 == T) ? 0.0 : st.bwd(v, c);
          Eigen::RowVectorXd ztc = Eigen::RowVectorXd::Zero(d - 1);
          if (t + 1 < T) ztc = st.tld(v, c);

          double flin = dc.f_x(0, 0) * xic + dc.f_y(0, 0) * etac +
                        dc.f_zt[0].row(0).dot(ztc);
          if (t + 1 == spec.s)
            flin += dc.f_u.row(0).dot(spec.eps * spec.dv.at(c));

          r(row++) = xic - xi - drift - diff.dot(mj);
          r(row++) = etac - eta + flin - zeta_row.dot(mj);
        }
      }
    return r;
  };

  Eigen::VectorXd v = solve_affine(st, rfun);

  VariationalTriple out;
  out.xi = VectorProcess(tree, 0, T);
  out.eta = VectorProcess(tree, 0, T);
  out.zeta = MatrixProcess(tree, 0, T - 1);
  for (int t = 0; t <= T; ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      out.xi.at(n) = Eigen::VectorXd::Constant(1, st.fwd(v, n));
      out.eta.at(n) = Eigen::VectorXd::Constant(
          1, t == T ? 0.0 : st.bwd(v, n));
      if (t < T) out.zeta.at(n) = canonical_from_tilde(tree, st.tld(v, n));
    }
  return out;
}

AdjointTriple solve_adjoint_p2(const ControlProblem& p, const Control& u,
                               const SolutionTriple* base) {
  if (p.coeffs->kind() != Coupling::Full)
    throw DimensionMismatch("solve_adjoint_p2: needs full coupling");
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int d = tree.d(), T = tree.T();

  SolutionTriple local;
  if (!base) {
    local = solve_fully_coupled(p, u);
    base = &local;
  }
  FrozenDerivs fr = freeze(p, u, *base);
  std::vector<double> hx(tree.count(T));
  for (std::int64_t k = 0; k < tree.count(T); ++k) {
    NodeRef leaf = tree.node(T, k);
    hx[k] = cf.h_x(leaf, base->X.at(leaf))(0);
  }

  // Unknowns: k forward at 1..T, p backward at 0..T-1, q~ at 0..T-1.
  LinStack st(tree);
  auto rfun = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(st.size);
    std::int64_t row = 0;
    for (int t = 0; t < T; ++t)
      for (std::int64_t kk = 0; kk < tree.count(t); ++kk) {
        NodeRef node = tree.node(t, kk);
        const Derivs& dv = fr(node);
        const Eigen::MatrixXd& C = tree.cond_cov(node).matrix;
        const Eigen::MatrixXd& Cp = tree.cond_cov(node).pinv;
        const double kt = st.fwd(v, node);
        const double pt = st.bwd(v, node);
        Eigen::RowVectorXd qt = st.tld(v, node) * tree.tilde_pinv();

        double kdrift = dv.f_y(0, 0) * kt - dv.b_y(0, 0) * pt -
                        dv.sig_y.row(0).dot((C * qt.transpose())) +
                        dv.l_y(0);
        Eigen::RowVectorXd w =
            (kt * dv.f_zt[0].row(0) - pt * dv.b_zt[0].row(0) +
             dv.l_zt.row(0)) *
            tree.tilde().transpose() * Cp;
        w -= (qt * C * dv.sig_zt.transpose()) * tree.tilde().transpose() * Cp;

        for (int j = 1; j <= d; ++j) {
          NodeRef c = tree.child(node, j);
          Eigen::VectorXd mj = tree.mart_increment(node, j);
          const Derivs& dc = fr(c);
          const double kc = st.fwd(v, c);
          const double pc = (t + 1 == T) ? -hx[c.k] : st.bwd(v, c);

          double gen = dc.b_x(0, 0) * pc - dc.f_x(0, 0) * kc - dc.l_x(0);
          if (t + 1 < T) {
            Eigen::RowVectorXd qc = st.tld(v, c) * tree.tilde_pinv();
            gen += dc.sig_x[0].row(0).dot(
                tree.cond_cov(c).matrix * qc.transpose());
          }
          r(row++) = kc - kt - kdrift - w.dot(mj);      // forward k
          r(row++) = pc - pt + gen - qt.dot(mj);        // backward p
        }
      }
    return r;
  };

  Eigen::VectorXd v = solve_affine(st, rfun);

  AdjointTriple adj;
  adj.method = "stacked-linear";
  adj.p = VectorProcess(tree, 0, T);
  adj.k = VectorProcess(tree, 0, T);
  adj.q = MatrixProcess(tree, 0, T - 1);
  for (int t = 0; t <= T; ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      adj.k.at(n) = Eigen::VectorXd::Constant(1, st.fwd(v, n));
      adj.p.at(n) = Eigen::VectorXd::Constant(
          1, t == T ? -hx[k] : st.bwd(v, n));
      if (t < T) adj.q.at(n) = canonical_from_tilde(tree, st.tld(v, n));
    }
  adj.residual = rfun(v).cwiseAbs().maxCoeff();
  return adj;
}

AdjointTriple solve_adjoint(const ControlProblem& p, const Control& u,
                            const SolutionTriple* base) {
  return p.coeffs->kind() == Coupling::Partial
             ? solve_adjoint_p1(p, u, base)
             : solve_adjoint_p2(p, u, base);
}

// ---------------------------------------------------------------------------
// Hamiltonian and maximum-principle residual
// ---------------------------------------------------------------------------

double hamiltonian(const ControlProblem& p, NodeRef node, int t,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                   const Eigen::VectorXd& pv, const Eigen::MatrixXd& q,
                   const Eigen::VectorXd& k) {
  const Coefficients& cf = *p.coeffs;
  double hval = cf.b(node, t, x, y, zt, u).dot(pv) -
                cf.f(node, t, x, y, zt, u).dot(k) -
                cf.l(node, t, x, y, zt, u);
  if (t < p.tree->T()) {
    const Eigen::MatrixXd& C = p.tree->cond_cov(node).matrix;
    for (int i = 0; i < p.m(); ++i)
      hval += cf.sigma(node, t, i, x, y, zt, u).dot(C * q.row(i).transpose());
  }
  return hval;
}

Eigen::VectorXd hamiltonian_u(const ControlProblem& p, NodeRef node, int t,
                              const Eigen::VectorXd& u,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& zt,
                              const Eigen::VectorXd& pv,
                              const Eigen::MatrixXd& q,
                              const Eigen::VectorXd& k) {
  Derivs dv = p.coeffs->derivs(node, t, x, y, zt, u);
  Eigen::VectorXd hu =
      dv.b_u.transpose() * pv - dv.f_u.transpose() * k - dv.l_u;
  if (t < p.tree->T()) {
    const Eigen::MatrixXd& C = p.tree->cond_cov(node).matrix;
    for (int i = 0; i < p.m(); ++i)
      hu += dv.sig_u[i] * (C * q.row(i).transpose());
  }
  return hu;
}

Eigen::VectorXd hamiltonian_u_at(const ControlProblem& p, const Control& u,
                                 const SolutionTriple& s,
                                 const AdjointTriple& adj, NodeRef node) {
  const ScenarioTree& tree = *p.tree;
  Args a = base_args(p, s, node);
  Eigen::MatrixXd q = node.t < tree.T()
                          ? adj.q.at(node)
                          : Eigen::MatrixXd::Zero(p.m(), tree.d());
  return hamiltonian_u(p, node, node.t, u.at(node), s.X.at(node), a.y, a.zt,
                       adj.p.at(node), q, adj.k.at(node));
}

MPReport check_mp_given(const ControlProblem& p, const Control& u,
                        const SolutionTriple& s, const AdjointTriple& adj,
                        double tol_mp) {
  const ScenarioTree& tree = *p.tree;
  MPReport rep;
  rep.tol = tol_mp;
  rep.rho = ScalarProcess(tree, 0, tree.T());
  rep.max_rho = 0.0;
  for (int t = 0; t <= tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      Eigen::VectorXd hu = hamiltonian_u_at(p, u, s, adj, n);
      double rho = 0.0;
      for (int j = 0; j < p.r(); ++j) {
        double up = hu(j) * (p.domain.hi[t](j) - u.at(n)(j));
        double dn = hu(j) * (p.domain.lo[t](j) - u.at(n)(j));
        rho += std::max({up, dn, 0.0});
      }
      rep.rho.at(n) = rho;
      if (rho > rep.max_rho) {
        rep.max_rho = rho;
        rep.argmax_t = t;
        rep.argmax_node = k;
      }
    }
  rep.pass = rep.max_rho <= tol_mp;
  return rep;
}

MPReport check_mp(const ControlProblem& p, const Control& u, double tol_mp,
                  const SolverOptions& opts) {
  SolutionTriple s = solve_state(p, u, opts);
  AdjointTriple adj = solve_adjoint(p, u, &s);
  return check_mp_given(p, u, s, adj, tol_mp);
}

}  // namespace fbsde
