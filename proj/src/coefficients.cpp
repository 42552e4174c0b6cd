#include "fbsde/coefficients.hpp"

#include <cmath>

#include "fbsde/errors.hpp"

namespace fbsde {

namespace {
constexpr double kFdStep = 1e-6;  // relative central-difference step

double step_for(double v) { return kFdStep * std::max(1.0, std::abs(v)); }
}  // namespace

Eigen::VectorXd Coefficients::b(NodeRef node, int t, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& zt,
                                const Eigen::VectorXd& u) const {
  if (t == T_) return Eigen::VectorXd::Zero(m_);
  return b_impl(node, t, x, y, zt, u);
}

Eigen::RowVectorXd Coefficients::sigma(NodeRef node, int t, int i,
                                       const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& zt,
                                       const Eigen::VectorXd& u) const {
  if (i < 0 || i >= m_)
    throw IndexOutOfRange("sigma: row index out of 0..m-1");
  if (t == T_) return Eigen::RowVectorXd::Zero(d_);
  return sigma_impl(node, t, i, x, y, zt, u);
}

Eigen::VectorXd Coefficients::f(NodeRef node, int t, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& zt,
                                const Eigen::VectorXd& u) const {
  if (t == 0) return Eigen::VectorXd::Zero(n_);
  if (t == T_)
    return f_impl(node, t, x, y, Eigen::MatrixXd::Zero(n_, d_ - 1), u);
  return f_impl(node, t, x, y, zt, u);
}

double Coefficients::l(NodeRef node, int t, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                       const Eigen::VectorXd& u) const {
  if (t == T_) return 0.0;
  return l_impl(node, t, x, y, zt, u);
}

Derivs Coefficients::derivs(NodeRef node, int t, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& zt,
                            const Eigen::VectorXd& u) const {
  Derivs dv = derivs_impl(node, t, x, y, zt, u);
  if (t == T_) {
    dv.b_x.setZero();
    dv.b_y.setZero();
    dv.b_u.setZero();
    for (auto& m : dv.b_zt) m.setZero();
    for (auto& m : dv.sig_x) m.setZero();
    for (auto& m : dv.sig_u) m.setZero();
    dv.sig_y.setZero();
    dv.sig_zt.setZero();
    for (auto& m : dv.f_zt) m.setZero();
    dv.l_x.setZero();
    dv.l_y.setZero();
    dv.l_u.setZero();
    dv.l_zt.setZero();
  }
  if (t == 0) {
    dv.f_x.setZero();
    dv.f_y.setZero();
    dv.f_u.setZero();
    for (auto& m : dv.f_zt) m.setZero();
  }
  return dv;
}

Derivs Coefficients::derivs_impl(NodeRef node, int t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& zt,
                                 const Eigen::VectorXd& u) const {
  // Central differences through the convention-applying public evaluators.
  Derivs dv;
  dv.b_x = Eigen::MatrixXd::Zero(m_, m_);
  dv.b_y = Eigen::MatrixXd::Zero(m_, n_);
  dv.b_u = Eigen::MatrixXd::Zero(m_, r_);
  dv.b_zt.assign(n_, Eigen::MatrixXd::Zero(m_, d_ - 1));
  dv.sig_x.assign(m_, Eigen::MatrixXd::Zero(m_, d_));
  dv.sig_u.assign(m_, Eigen::MatrixXd::Zero(r_, d_));
  dv.sig_y = Eigen::MatrixXd::Zero(1, d_);
  dv.sig_zt = Eigen::MatrixXd::Zero(d_ - 1, d_);
  dv.f_x = Eigen::MatrixXd::Zero(n_, m_);
  dv.f_y = Eigen::MatrixXd::Zero(n_, n_);
  dv.f_u = Eigen::MatrixXd::Zero(n_, r_);
  dv.f_zt.assign(n_, Eigen::MatrixXd::Zero(n_, d_ - 1));
  dv.l_x = Eigen::VectorXd::Zero(m_);
  dv.l_y = Eigen::VectorXd::Zero(n_);
  dv.l_u = Eigen::VectorXd::Zero(r_);
  dv.l_zt = Eigen::MatrixXd::Zero(n_, d_ - 1);

  auto diff_x = [&](int j, double hstep, auto&& eval) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += hstep;
    xm(j) -= hstep;
    return (eval(xp) - eval(xm)) / (2.0 * hstep);
  };

  for (int j = 0; j < m_; ++j) {
    double hs = step_for(x(j));
    dv.b_x.col(j) = diff_x(j, hs, [&](const Eigen::VectorXd& xx) {
      return b(node, t, xx, y, zt, u);
    });
    for (int i = 0; i < m_; ++i)
      dv.sig_x[i].row(j) = diff_x(j, hs, [&](const Eigen::VectorXd& xx) {
        return sigma(node, t, i, xx, y, zt, u);
      });
    dv.f_x.col(j) = diff_x(j, hs, [&](const Eigen::VectorXd& xx) {
      return f(node, t, xx, y, zt, u);
    });
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += hs;
    xm(j) -= hs;
    dv.l_x(j) = (l(node, t, xp, y, zt, u) - l(node, t, xm, y, zt, u)) /
                (2.0 * hs);
  }

  for (int j = 0; j < n_; ++j) {
    double hs = step_for(y(j));
    Eigen::VectorXd yp = y, ym = y;
    yp(j) += hs;
    ym(j) -= hs;
    dv.b_y.col(j) =
        (b(node, t, x, yp, zt, u) - b(node, t, x, ym, zt, u)) / (2.0 * hs);
    dv.f_y.col(j) =
        (f(node, t, x, yp, zt, u) - f(node, t, x, ym, zt, u)) / (2.0 * hs);
    dv.l_y(j) =
        (l(node, t, x, yp, zt, u) - l(node, t, x, ym, zt, u)) / (2.0 * hs);
    if (kind_ == Coupling::Full)
      dv.sig_y.row(0) += (sigma(node, t, 0, x, yp, zt, u) -
                          sigma(node, t, 0, x, ym, zt, u)) /
                         (2.0 * hs);
  }

  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < d_ - 1; ++j) {
      double hs = step_for(zt(i, j));
      Eigen::MatrixXd zp = zt, zm = zt;
      zp(i, j) += hs;
      zm(i, j) -= hs;
      for (int a = 0; a < n_; ++a)
        dv.f_zt[i](a, j) = (f(node, t, x, y, zp, u)(a) -
                            f(node, t, x, y, zm, u)(a)) /
                           (2.0 * hs);
      dv.l_zt(i, j) =
          (l(node, t, x, y, zp, u) - l(node, t, x, y, zm, u)) / (2.0 * hs);
      if (kind_ == Coupling::Full) {
        dv.b_zt[i].col(j) =
            (b(node, t, x, y, zp, u) - b(node, t, x, y, zm, u)) / (2.0 * hs);
        dv.sig_zt.row(j) += (sigma(node, t, 0, x, y, zp, u) -
                             sigma(node, t, 0, x, y, zm, u)) /
                            (2.0 * hs);
      }
    }
  }

  for (int j = 0; j < r_; ++j) {
    double hs = step_for(u(j));
    Eigen::VectorXd up = u, um = u;
    up(j) += hs;
    um(j) -= hs;
    dv.b_u.col(j) =
        (b(node, t, x, y, zt, up) - b(node, t, x, y, zt, um)) / (2.0 * hs);
    for (int i = 0; i < m_; ++i)
      dv.sig_u[i].row(j) = (sigma(node, t, i, x, y, zt, up) -
                            sigma(node, t, i, x, y, zt, um)) /
                           (2.0 * hs);
    dv.f_u.col(j) =
        (f(node, t, x, y, zt, up) - f(node, t, x, y, zt, um)) / (2.0 * hs);
    dv.l_u(j) =
        (l(node, t, x, y, zt, up) - l(node, t, x, y, zt, um)) / (2.0 * hs);
  }
  return dv;
}

Eigen::VectorXd Coefficients::h_x_impl(NodeRef node,
                                       const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(m_);
  for (int j = 0; j < m_; ++j) {
    double hs = step_for(x(j));
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += hs;
    xm(j) -= hs;
    g(j) = (h(node, xp) - h(node, xm)) / (2.0 * hs);
  }
  return g;
}

}  // namespace fbsde
