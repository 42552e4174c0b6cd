#include "fbsde/fbsde_solver.hpp"

#include <cmath>
#include <random>

namespace fbsde {

namespace {

Eigen::MatrixXd z_tilde_at(const ScenarioTree& tree, const MatrixProcess& Z,
                           NodeRef n, int rows) {
  if (n.t <= tree.T() - 1) return Z.at(n) * tree.tilde();
  return Eigen::MatrixXd::Zero(rows, tree.d() - 1);
}

}  // namespace

VectorProcess solve_forward(const ControlProblem& p, const Control& u,
                            const BsdeSolution* yz) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int m = cf.m(), n = cf.n(), d = tree.d();
  const bool full = cf.kind() == Coupling::Full;
  if (full && yz == nullptr)
    throw MissingYZ("solve_forward: fully coupled dynamics need (Y, Z)");
  require_admissible(p, u);

  VectorProcess X(tree, 0, tree.T());
  X.at(tree.root()) = p.x0;
  const Eigen::VectorXd y_zero = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd zt_zero = Eigen::MatrixXd::Zero(n, d - 1);

  for (int t = 0; t < tree.T(); ++t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      const Eigen::VectorXd& x = X.at(node);
      const Eigen::VectorXd& y = full ? yz->Y.at(node) : y_zero;
      const Eigen::MatrixXd zt =
          full ? Eigen::MatrixXd(yz->Z.at(node) * tree.tilde()) : zt_zero;
      const Eigen::VectorXd& uu = u.at(node);

      Eigen::VectorXd drift = cf.b(node, t, x, y, zt, uu);
      std::vector<Eigen::RowVectorXd> rows(m);
      for (int i = 0; i < m; ++i) rows[i] = cf.sigma(node, t, i, x, y, zt, uu);
      for (int j = 1; j <= d; ++j) {
        Eigen::VectorXd mj = tree.mart_increment(node, j);
        Eigen::VectorXd next = x + drift;
        for (int i = 0; i < m; ++i) next(i) += rows[i].dot(mj);
        X.at(tree.child(node, j)) = next;
      }
    }
  }
  return X;
}

namespace {

BsdeSolution backward_given_x(const ControlProblem& p, const Control& u,
                              const VectorProcess& X) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  Generator gen = [&](NodeRef node, int t, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& zt) {
    return cf.f(node, t, X.at(node), y, zt, u.at(node));
  };
  std::vector<Eigen::VectorXd> terminal(tree.count(tree.T()), p.yT);
  return solve_bsde(tree, gen, terminal);
}

}  // namespace

SolutionTriple solve_partially_coupled(const ControlProblem& p,
                                       const Control& u) {
  if (p.coeffs->kind() != Coupling::Partial)
    throw DimensionMismatch("solve_partially_coupled: coupling kind is full");
  p.validate();
  SolutionTriple s;
  s.X = solve_forward(p, u);
  BsdeSolution yz = backward_given_x(p, u, s.X);
  s.Y = std::move(yz.Y);
  s.Z = std::move(yz.Z);
  s.iterations = 1;
  s.method = "direct";
  s.residual =
      std::max(forward_residual(p, u, s), backward_residual(p, u, s));
  return s;
}

// ---------------------------------------------------------------------------
// Fully coupled solver
// ---------------------------------------------------------------------------

namespace {

// Unknown layout of the stacked node system (m = n = 1):
// X at depths 1..T, then per node of depth 0..T-1 a block [Y, ztilde].
struct Stack {
  const ScenarioTree* tree;
  std::vector<std::int64_t> x_off;   // by depth 1..T
  std::vector<std::int64_t> yz_off;  // by depth 0..T-1
  std::int64_t size = 0;

  explicit Stack(const ScenarioTree& tr) : tree(&tr) {
    const int T = tr.T(), d = tr.d();
    x_off.resize(T + 1, -1);
    yz_off.resize(T, -1);
    std::int64_t off = 0;
    for (int t = 1; t <= T; ++t) {
      x_off[t] = off;
      off += tr.count(t);
    }
    for (int t = 0; t < T; ++t) {
      yz_off[t] = off;
      off += tr.count(t) * d;  // 1 for Y, d-1 for ztilde
    }
    size = off;
  }
  double x(const Eigen::VectorXd& v, NodeRef n) const {
    return v(x_off[n.t] + n.k);
  }
  double y(const Eigen::VectorXd& v, NodeRef n) const {
    return v(yz_off[n.t] + n.k * tree->d());
  }
  Eigen::RowVectorXd zt(const Eigen::VectorXd& v, NodeRef n) const {
    return v.segment(yz_off[n.t] + n.k * tree->d() + 1, tree->d() - 1)
        .transpose();
  }
};

Eigen::VectorXd pack(const Stack& st, const ControlProblem& p,
                     const VectorProcess& X, const VectorProcess& Y,
                     const MatrixProcess& Z) {
  const ScenarioTree& tree = *st.tree;
  Eigen::VectorXd v(st.size);
  for (int t = 1; t <= tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k)
      v(st.x_off[t] + k) = X.at(tree.node(t, k))(0);
  for (int t = 0; t < tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      v(st.yz_off[t] + k * tree.d()) = Y.at(n)(0);
      v.segment(st.yz_off[t] + k * tree.d() + 1, tree.d() - 1) =
          (Z.at(n) * tree.tilde()).row(0).transpose();
    }
  return v;
}

SolutionTriple unpack(const Stack& st, const ControlProblem& p,
                      const Eigen::VectorXd& v) {
  const ScenarioTree& tree = *st.tree;
  SolutionTriple s;
  s.X = VectorProcess(tree, 0, tree.T());
  s.Y = VectorProcess(tree, 0, tree.T());
  s.Z = MatrixProcess(tree, 0, tree.T() - 1);
  s.X.at(tree.root()) = p.x0;
  for (int t = 1; t <= tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k)
      s.X.at(tree.node(t, k)) =
          Eigen::VectorXd::Constant(1, st.x(v, tree.node(t, k)));
  for (std::int64_t k = 0; k < tree.count(tree.T()); ++k)
    s.Y.at(tree.node(tree.T(), k)) = p.yT;
  for (int t = 0; t < tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      s.Y.at(n) = Eigen::VectorXd::Constant(1, st.y(v, n));
      s.Z.at(n) = canonical_from_tilde(tree, st.zt(v, n));
    }
  return s;
}

// Residuals of both difference equations at every (node, outcome),
// in a fixed order.
Eigen::VectorXd stacked_residual(const Stack& st, const ControlProblem& p,
                                 const Control& u, const Eigen::VectorXd& v) {
  const ScenarioTree& tree = *st.tree;
  const Coefficients& cf = *p.coeffs;
  const int d = tree.d(), T = tree.T();
  Eigen::VectorXd r(st.size);
  std::int64_t row = 0;
  for (int t = 0; t < T; ++t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      const double xt = (t == 0) ? p.x0(0) : st.x(v, node);
      const double yt = st.y(v, node);
      const Eigen::RowVectorXd ztt = st.zt(v, node);
      const Eigen::MatrixXd zt_mat = ztt;
      const Eigen::RowVectorXd z_row = ztt * tree.tilde_pinv();

      Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, xt);
      Eigen::VectorXd yv = Eigen::VectorXd::Constant(1, yt);
      const double bt = cf.b(node, t, xv, yv, zt_mat, u.at(node))(0);
      const Eigen::RowVectorXd st_row =
          cf.sigma(node, t, 0, xv, yv, zt_mat, u.at(node));

      for (int j = 1; j <= d; ++j) {
        NodeRef c = tree.child(node, j);
        Eigen::VectorXd mj = tree.mart_increment(node, j);
        const double xc = st.x(v, c);
        const double yc = (t + 1 == T) ? p.yT(0) : st.y(v, c);
        Eigen::MatrixXd zt_c = Eigen::MatrixXd::Zero(1, d - 1);
        if (t + 1 < T) zt_c = st.zt(v, c);
        Eigen::VectorXd xcv = Eigen::VectorXd::Constant(1, xc);
        Eigen::VectorXd ycv = Eigen::VectorXd::Constant(1, yc);
        const double fv =
            cf.f(c, t + 1, xcv, ycv, zt_c, u.at(c))(0);
        r(row++) = xc - xt - bt - st_row.dot(mj);            // forward
        r(row++) = yc - yt + fv - z_row.dot(mj);             // backward
      }
    }
  }
  return r;
}

SolutionTriple picard(const ControlProblem& p, const Control& u,
                      const SolverOptions& opts) {
  const ScenarioTree& tree = *p.tree;
  BsdeSolution yz;
  yz.Y = VectorProcess::constant(tree, 0, tree.T(), p.yT);
  yz.Z = MatrixProcess::constant(
      tree, 0, tree.T() - 1, Eigen::MatrixXd::Zero(p.n(), tree.d()));

  double res = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    VectorProcess X = solve_forward(p, u, &yz);
    BsdeSolution next = backward_given_x(p, u, X);
    SolutionTriple cand;
    cand.X = X;
    cand.Y = next.Y;
    cand.Z = next.Z;
    res = std::max(forward_residual(p, u, cand),
                   backward_residual(p, u, cand));
    if (res <= opts.tol) {
      cand.iterations = it;
      cand.residual = res;
      cand.method = "picard";
      return cand;
    }
    for (int t = 0; t <= tree.T(); ++t)
      for (std::int64_t k = 0; k < tree.count(t); ++k) {
        NodeRef n = tree.node(t, k);
        yz.Y.at(n) = (1.0 - opts.theta) * yz.Y.at(n) +
                     opts.theta * next.Y.at(n);
        if (t < tree.T())
          yz.Z.at(n) = (1.0 - opts.theta) * yz.Z.at(n) +
                       opts.theta * next.Z.at(n);
      }
  }
  throw NoConvergence("picard: residual " + std::to_string(res) + " after " +
                          std::to_string(opts.max_iter) + " iterations",
                      res, opts.max_iter);
}

SolutionTriple newton(const ControlProblem& p, const Control& u,
                      const SolverOptions& opts) {
  const ScenarioTree& tree = *p.tree;
  Stack st(tree);

  // Start from the decoupled sweep.
  BsdeSolution yz;
  yz.Y = VectorProcess::constant(tree, 0, tree.T(), p.yT);
  yz.Z = MatrixProcess::constant(
      tree, 0, tree.T() - 1, Eigen::MatrixXd::Zero(p.n(), tree.d()));
  VectorProcess X0 = solve_forward(p, u, &yz);
  BsdeSolution bw = backward_given_x(p, u, X0);
  Eigen::VectorXd v = pack(st, p, X0, bw.Y, bw.Z);

  Eigen::VectorXd r = stacked_residual(st, p, u, v);
  double rn = r.cwiseAbs().maxCoeff();
  for (int it = 1; it <= opts.max_iter; ++it) {
    if (rn <= opts.tol) {
      SolutionTriple s = unpack(st, p, v);
      s.iterations = it - 1;
      s.residual = rn;
      s.method = "newton";
      return s;
    }
    Eigen::MatrixXd J(st.size, st.size);
    for (std::int64_t j = 0; j < st.size; ++j) {
      double h = opts.fd_step * std::max(1.0, std::abs(v(j)));
      Eigen::VectorXd vp = v, vm = v;
      vp(j) += h;
      vm(j) -= h;
      J.col(j) = (stacked_residual(st, p, u, vp) -
                  stacked_residual(st, p, u, vm)) /
                 (2.0 * h);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible())
      throw SingularJacobian("newton: jacobian is singular (rank " +
                             std::to_string(lu.rank()) + " of " +
                             std::to_string(st.size) + ")");
    Eigen::VectorXd step = lu.solve(r);
    double damp = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd vn = v - damp * step;
      Eigen::VectorXd rn_vec = stacked_residual(st, p, u, vn);
      double rnn = rn_vec.cwiseAbs().maxCoeff();
      if (rnn < rn || rnn <= opts.tol) {
        v = vn;
        r = rn_vec;
        rn = rnn;
        accepted = true;
        break;
      }
      damp *= 0.5;
    }
    if (!accepted)
      throw NoConvergence("newton: line search stalled at residual " +
                              std::to_string(rn),
                          rn, it);
  }
  if (rn <= opts.tol) {
    SolutionTriple s = unpack(st, p, v);
    s.iterations = opts.max_iter;
    s.residual = rn;
    s.method = "newton";
    return s;
  }
  throw NoConvergence("newton: residual " + std::to_string(rn) + " after " +
                          std::to_string(opts.max_iter) + " iterations",
                      rn, opts.max_iter);
}

}  // namespace

SolutionTriple solve_fully_coupled(const ControlProblem& p, const Control& u,
                                   const SolverOptions& opts) {
  if (p.coeffs->kind() != Coupling::Full)
    throw DimensionMismatch("solve_fully_coupled: coupling kind is partial");
  p.validate();
  require_admissible(p, u);
  switch (opts.method) {
    case Method::Picard:
      return picard(p, u, opts);
    case Method::Newton:
      return newton(p, u, opts);
    case Method::Auto:
    default:
      try {
        return picard(p, u, opts);
      } catch (const NoConvergence&) {
        return newton(p, u, opts);
      }
  }
}

SolutionTriple solve_state(const ControlProblem& p, const Control& u,
                           const SolverOptions& opts) {
  return p.coeffs->kind() == Coupling::Partial
             ? solve_partially_coupled(p, u)
             : solve_fully_coupled(p, u, opts);
}

double forward_residual(const ControlProblem& p, const Control& u,
                        const SolutionTriple& s) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int m = cf.m(), n = cf.n(), d = tree.d();
  const bool full = cf.kind() == Coupling::Full;
  const Eigen::VectorXd y_zero = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd zt_zero = Eigen::MatrixXd::Zero(n, d - 1);
  double worst = 0.0;
  for (int t = 0; t < tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      const Eigen::VectorXd& y = full ? s.Y.at(node) : y_zero;
      const Eigen::MatrixXd zt =
          full ? Eigen::MatrixXd(s.Z.at(node) * tree.tilde()) : zt_zero;
      Eigen::VectorXd bt = cf.b(node, t, s.X.at(node), y, zt, u.at(node));
      for (int j = 1; j <= d; ++j) {
        Eigen::VectorXd mj = tree.mart_increment(node, j);
        Eigen::VectorXd lhs =
            s.X.at(tree.child(node, j)) - s.X.at(node) - bt;
        for (int i = 0; i < m; ++i)
          lhs(i) -=
              cf.sigma(node, t, i, s.X.at(node), y, zt, u.at(node)).dot(mj);
        worst = std::max(worst, lhs.cwiseAbs().maxCoeff());
      }
    }
  return worst;
}

double backward_residual(const ControlProblem& p, const Control& u,
                         const SolutionTriple& s) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int n = cf.n(), d = tree.d();
  double worst = 0.0;
  for (int t = 0; t < tree.T(); ++t)
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      for (int j = 1; j <= d; ++j) {
        NodeRef c = tree.child(node, j);
        Eigen::MatrixXd zt_c = z_tilde_at(tree, s.Z, c, n);
        Eigen::VectorXd fv =
            cf.f(c, t + 1, s.X.at(c), s.Y.at(c), zt_c, u.at(c));
        Eigen::VectorXd lhs = s.Y.at(c) - s.Y.at(node) + fv -
                              s.Z.at(node) * tree.mart_increment(node, j);
        worst = std::max(worst, lhs.cwiseAbs().maxCoeff());
      }
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Monotone condition
// ---------------------------------------------------------------------------

namespace {

struct QuadForms {
  Eigen::MatrixXd interior;  // (d+1) x (d+1) in (x^, y^, w)
  Eigen::MatrixXd initial;   // d x d in (y^, w)
  double terminal_fx = 0.0;
};

// Exact quadratic forms of the LQ monotone inequalities at one node, in the
// quotient coordinates w = (z^ Itilde)^*.
QuadForms lq_forms(const ControlProblem& p, NodeRef node, int t,
                   const Eigen::VectorXd& u_val) {
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int d = tree.d();
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd zerozt = Eigen::MatrixXd::Zero(1, d - 1);
  Derivs dv = cf.derivs(node, t, zero1, zero1, zerozt, u_val);

  QuadForms q;
  if (t >= 1 && t < tree.T()) {
    const Eigen::MatrixXd& C = tree.cond_cov(node).matrix;
    // Maps w to the canonical z^* column.
    Eigen::MatrixXd R = tree.tilde_pinv().transpose();
    Eigen::RowVectorXd sx_cr = dv.sig_x[0].row(0) * C * R;  // x^ against w
    Eigen::RowVectorXd sy_cr = dv.sig_y.row(0) * C * R;
    Eigen::MatrixXd szt_cr = dv.sig_zt * C * R;             // (d-1) x (d-1)

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d + 1, d + 1);
    g(0, 0) = -dv.f_x(0, 0);
    g(0, 1) = -dv.f_y(0, 0);
    g.block(0, 2, 1, d - 1) = -dv.f_zt[0].row(0) + sx_cr;
    g(1, 0) = dv.b_x(0, 0);
    g(1, 1) = dv.b_y(0, 0);
    g.block(1, 2, 1, d - 1) = dv.b_zt[0].row(0) + sy_cr;
    g.block(2, 2, d - 1, d - 1) = szt_cr;
    q.interior = 0.5 * (g + g.transpose());
  }
  if (t == 0) {
    const Eigen::MatrixXd& C = tree.cond_cov(node).matrix;
    Eigen::MatrixXd R = tree.tilde_pinv().transpose();
    Eigen::RowVectorXd sy_cr = dv.sig_y.row(0) * C * R;
    Eigen::MatrixXd szt_cr = dv.sig_zt * C * R;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
    g(0, 0) = dv.b_y(0, 0);
    g.block(0, 1, 1, d - 1) = dv.b_zt[0].row(0) + sy_cr;
    g.block(1, 1, d - 1, d - 1) = szt_cr;
    q.initial = 0.5 * (g + g.transpose());
  }
  if (t == tree.T()) q.terminal_fx = dv.f_x(0, 0);
  return q;
}

double lmax(const Eigen::MatrixXd& s) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s)
      .eigenvalues()
      .maxCoeff();
}

}  // namespace

MonotoneReport check_monotone(const ControlProblem& p, const Control& u,
                              const MonotoneSpec& spec) {
  if (p.coeffs->kind() != Coupling::Full)
    throw DimensionMismatch("check_monotone: defined for fully coupled only");
  p.validate();
  const ScenarioTree& tree = *p.tree;
  const Coefficients& cf = *p.coeffs;
  const int d = tree.d(), T = tree.T();

  MonotoneReport rep;
  rep.alpha = spec.alpha;
  rep.exact = dynamic_cast<const LqCoefficients*>(&cf) != nullptr;

  const double inf = std::numeric_limits<double>::infinity();
  double est = inf;
  double m_int = inf, m_ini = inf, m_ter = inf;       // sampled margins
  double x_int = inf, x_ini = inf, x_ter = inf;       // exact margins

  if (rep.exact) {
    for (int t = 0; t <= T; ++t)
      for (std::int64_t k = 0; k < tree.count(t); ++k) {
        NodeRef node = tree.node(t, k);
        QuadForms q = lq_forms(p, node, t, u.at(node));
        if (t >= 1 && t < T)
          x_int = std::min(x_int, -spec.alpha - lmax(q.interior));
        if (t == 0) x_ini = std::min(x_ini, -spec.alpha - lmax(q.initial));
        if (t == T) x_ter = std::min(x_ter, q.terminal_fx - spec.alpha);
      }
    est = std::min({x_int + spec.alpha, x_ini + spec.alpha,
                    x_ter + spec.alpha});
  }

  // Sampled margins (always computed; the only check for non-LQ bundles).
  auto sample_margin = [&](int t, NodeRef node, std::mt19937_64& rng,
                           bool vary_x, bool vary_yz) {
    std::uniform_real_distribution<double> un(-spec.radius, spec.radius);
    auto rnd_zt = [&] {
      Eigen::MatrixXd zt(1, d - 1);
      for (int j = 0; j < d - 1; ++j) zt(0, j) = un(rng);
      return zt;
    };
    Eigen::VectorXd x1 = Eigen::VectorXd::Constant(1, un(rng));
    Eigen::VectorXd y1 = Eigen::VectorXd::Constant(1, un(rng));
    Eigen::MatrixXd zt1 = rnd_zt();
    Eigen::VectorXd x2 = vary_x ? Eigen::VectorXd::Constant(1, un(rng)) : x1;
    Eigen::VectorXd y2 = vary_yz ? Eigen::VectorXd::Constant(1, un(rng)) : y1;
    Eigen::MatrixXd zt2 = vary_yz ? rnd_zt() : zt1;
    Eigen::VectorXd uu(p.r());
    for (int j = 0; j < p.r(); ++j) {
      double lo = p.domain.lo[t](j), hi = p.domain.hi[t](j);
      uu(j) = lo + (hi - lo) * std::uniform_real_distribution<double>(0, 1)(rng);
    }

    double fhat = (cf.f(node, t, x1, y1, zt1, uu) -
                   cf.f(node, t, x2, y2, zt2, uu))(0);
    double xhat = x1(0) - x2(0), yhat = y1(0) - y2(0);
    Eigen::RowVectorXd zt_hat = zt1.row(0) - zt2.row(0);
    double ip = -fhat * xhat;
    double nrm2 = xhat * xhat + yhat * yhat + zt_hat.squaredNorm();
    if (t < T) {
      double bhat = (cf.b(node, t, x1, y1, zt1, uu) -
                     cf.b(node, t, x2, y2, zt2, uu))(0);
      Eigen::RowVectorXd shat = cf.sigma(node, t, 0, x1, y1, zt1, uu) -
                                cf.sigma(node, t, 0, x2, y2, zt2, uu);
      const Eigen::MatrixXd& C = tree.cond_cov(node).matrix;
      Eigen::RowVectorXd zhat_row = zt_hat * tree.tilde_pinv();
      ip += bhat * yhat + (shat * C).dot(zhat_row);
    }
    if (nrm2 < 1e-16) return std::pair<double, double>{inf, inf};
    // margin at alpha and implied alpha bound, both normalised
    return std::pair<double, double>{-(ip + spec.alpha * nrm2) / nrm2,
                                     -ip / nrm2};
  };

  for (int t = 0; t <= T; ++t) {
    const bool interior = t >= 1 && t < T;
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ull + t * 1000003ull +
                          k * 7919ull + 1ull);
      for (int s = 0; s < spec.samples; ++s) {
        auto [margin, bound] =
            sample_margin(t, node, rng, t > 0, t < T);
        if (margin == inf) continue;
        double& slot = interior ? m_int : (t == 0 ? m_ini : m_ter);
        if (margin < slot) {
          slot = margin;
          if (margin < 0 &&
              (!rep.witness || margin < rep.witness->margin))
            rep.witness = MonotoneViolation{t, k, margin};
        }
        if (!rep.exact) est = std::min(est, bound);
      }
    }
  }

  if (T == 1) {
    m_int = 0.0;  // no interior times
    x_int = 0.0;
  }
  rep.margin_interior = m_int;
  rep.margin_initial = m_ini;
  rep.margin_terminal = m_ter;
  rep.matrix_margin_interior = rep.exact ? x_int : 0.0;
  rep.matrix_margin_initial = rep.exact ? x_ini : 0.0;
  rep.matrix_margin_terminal = rep.exact ? x_ter : 0.0;
  rep.alpha_estimate = est;

  const double slack = 1e-12;
  if (rep.exact)
    rep.pass = x_int >= -slack && x_ini >= -slack && x_ter >= -slack;
  else
    rep.pass = m_int >= -slack && m_ini >= -slack && m_ter >= -slack;
  if (!rep.pass && !rep.witness) {
    double wm = std::min({m_int, m_ini, m_ter});
    rep.witness = MonotoneViolation{-1, -1, wm};
  }
  return rep;
}

}  // namespace fbsde
