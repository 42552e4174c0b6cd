#include "fbsde/coefficients.hpp"
#include "fbsde/errors.hpp"

namespace fbsde {

namespace {
template <class M>
void fill(std::vector<M>& v, int count, const M& zero) {
  if (v.empty()) v.assign(count, zero);
  if (static_cast<int>(v.size()) != count)
    throw DimensionMismatch("LqData: per-time list has wrong length");
}
}  // namespace

void LqData::complete() {
  const int dm1 = d - 1;
  fill(A, T, Eigen::MatrixXd::Zero(m, m).eval());
  fill(B, T, Eigen::MatrixXd::Zero(m, r).eval());
  fill(Ay, T, Eigen::MatrixXd::Zero(m, n).eval());
  fill(az, T, Eigen::RowVectorXd::Zero(dm1).eval());
  fill(a0, T, Eigen::VectorXd::Zero(m).eval());

  fill(Sx, T, std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(m, d)));
  fill(Su, T, std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(r, d)));
  fill(sy, T, Eigen::RowVectorXd::Zero(d).eval());
  fill(Sz, T, Eigen::MatrixXd::Zero(dm1, d).eval());
  fill(s0, T, std::vector<Eigen::RowVectorXd>(m, Eigen::RowVectorXd::Zero(d)));

  // f slots are used for t = 1..T; keep T+1 entries and index by t.
  fill(Fx, T + 1, Eigen::MatrixXd::Zero(n, m).eval());
  fill(Fy, T + 1, Eigen::MatrixXd::Zero(n, n).eval());
  fill(Fz, T + 1, Eigen::VectorXd::Zero(dm1).eval());
  fill(Fu, T + 1, Eigen::MatrixXd::Zero(n, r).eval());
  fill(f0, T + 1, Eigen::VectorXd::Zero(n).eval());

  fill(Qx, T, Eigen::MatrixXd::Zero(m, m).eval());
  fill(Qy, T, Eigen::MatrixXd::Zero(n, n).eval());
  fill(Ru, T, Eigen::MatrixXd::Zero(r, r).eval());
  if (qz.empty()) qz.assign(T, 0.0);
  fill(lx, T, Eigen::VectorXd::Zero(m).eval());
  fill(ly, T, Eigen::VectorXd::Zero(n).eval());
  fill(lu, T, Eigen::VectorXd::Zero(r).eval());
  fill(Lz, T, Eigen::MatrixXd::Zero(n, dm1).eval());
  if (l0.empty()) l0.assign(T, 0.0);

  if (Qh.size() == 0) Qh = Eigen::MatrixXd::Zero(m, m);
  if (hx0.size() == 0) hx0 = Eigen::VectorXd::Zero(m);
}

LqCoefficients::LqCoefficients(LqData data)
    : Coefficients(data.kind, data.m, data.n, data.r, data.d, data.T),
      data_(std::move(data)) {
  data_.complete();
  if (data_.kind == Coupling::Full && (data_.m != 1 || data_.n != 1))
    throw DimensionMismatch("LqCoefficients: full coupling requires m=n=1");
  if (data_.kind == Coupling::Partial) {
    for (int t = 0; t < data_.T; ++t) {
      if (!data_.Ay[t].isZero(0.0) || !data_.az[t].isZero(0.0) ||
          !data_.sy[t].isZero(0.0) || !data_.Sz[t].isZero(0.0))
        throw DimensionMismatch(
            "LqCoefficients: partial coupling forbids (y,z~) blocks in b, "
            "sigma");
    }
  }
  for (int t = 0; t < data_.T; ++t) {
    if (!data_.Ru[t].isApprox(data_.Ru[t].transpose(), 1e-12))
      throw DimensionMismatch("LqCoefficients: Ru must be symmetric");
    data_.Qx[t] = 0.5 * (data_.Qx[t] + data_.Qx[t].transpose()).eval();
    data_.Qy[t] = 0.5 * (data_.Qy[t] + data_.Qy[t].transpose()).eval();
  }
  data_.Qh = 0.5 * (data_.Qh + data_.Qh.transpose()).eval();
}

bool LqCoefficients::f_depends_on_u_at_T() const {
  return !data_.Fu[data_.T].isZero(0.0);
}

Eigen::VectorXd LqCoefficients::b_impl(NodeRef, int t,
                                       const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& zt,
                                       const Eigen::VectorXd& u) const {
  Eigen::VectorXd v = data_.A[t] * x + data_.B[t] * u + data_.a0[t];
  if (data_.kind == Coupling::Full)
    v += data_.Ay[t] * y +
         Eigen::VectorXd::Constant(1, data_.az[t].dot(zt.row(0)));
  return v;
}

Eigen::RowVectorXd LqCoefficients::sigma_impl(NodeRef, int t, int i,
                                              const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& y,
                                              const Eigen::MatrixXd& zt,
                                              const Eigen::VectorXd& u) const {
  Eigen::RowVectorXd v = x.transpose() * data_.Sx[t][i] +
                         u.transpose() * data_.Su[t][i] + data_.s0[t][i];
  if (data_.kind == Coupling::Full)
    v += y(0) * data_.sy[t] + zt.row(0) * data_.Sz[t];
  return v;
}

Eigen::VectorXd LqCoefficients::f_impl(NodeRef, int t,
                                       const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& zt,
                                       const Eigen::VectorXd& u) const {
  return data_.Fx[t] * x + data_.Fy[t] * y + zt * data_.Fz[t] +
         data_.Fu[t] * u + data_.f0[t];
}

double LqCoefficients::l_impl(NodeRef, int t, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& zt,
                              const Eigen::VectorXd& u) const {
  return 0.5 * x.dot(data_.Qx[t] * x) + 0.5 * y.dot(data_.Qy[t] * y) +
         0.5 * data_.qz[t] * zt.squaredNorm() + 0.5 * u.dot(data_.Ru[t] * u) +
         data_.lx[t].dot(x) + data_.ly[t].dot(y) +
         data_.Lz[t].cwiseProduct(zt).sum() + data_.lu[t].dot(u) +
         data_.l0[t];
}

double LqCoefficients::h_impl(NodeRef, const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(data_.Qh * x) + data_.hx0.dot(x) + data_.h0;
}

Derivs LqCoefficients::derivs_impl(NodeRef, int t, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& zt,
                                   const Eigen::VectorXd& u) const {
  const int m = data_.m, n = data_.n, dm1 = data_.d - 1;
  Derivs dv;
  const bool interior = t < data_.T;  // b, sigma, l slots exist only there
  dv.b_x = interior ? data_.A[t] : Eigen::MatrixXd::Zero(m, m);
  dv.b_y = interior ? data_.Ay[t] : Eigen::MatrixXd::Zero(m, n);
  dv.b_u = interior ? data_.B[t] : Eigen::MatrixXd::Zero(m, data_.r);
  dv.b_zt.assign(n, Eigen::MatrixXd::Zero(m, dm1));
  if (interior && data_.kind == Coupling::Full) dv.b_zt[0] = data_.az[t];

  dv.sig_x.resize(m);
  dv.sig_u.resize(m);
  for (int i = 0; i < m; ++i) {
    dv.sig_x[i] =
        interior ? data_.Sx[t][i] : Eigen::MatrixXd::Zero(m, data_.d);
    dv.sig_u[i] =
        interior ? data_.Su[t][i] : Eigen::MatrixXd::Zero(data_.r, data_.d);
  }
  dv.sig_y = interior && data_.kind == Coupling::Full
                 ? Eigen::MatrixXd(data_.sy[t])
                 : Eigen::MatrixXd::Zero(1, data_.d);
  dv.sig_zt = interior && data_.kind == Coupling::Full
                  ? data_.Sz[t]
                  : Eigen::MatrixXd::Zero(dm1, data_.d);

  const bool f_active = t >= 1;  // f slots cover t = 1..T
  dv.f_x = f_active ? data_.Fx[t] : Eigen::MatrixXd::Zero(n, m);
  dv.f_y = f_active ? data_.Fy[t] : Eigen::MatrixXd::Zero(n, n);
  dv.f_u = f_active ? data_.Fu[t] : Eigen::MatrixXd::Zero(n, data_.r);
  dv.f_zt.assign(n, Eigen::MatrixXd::Zero(n, dm1));
  if (f_active)
    for (int i = 0; i < n; ++i)
      dv.f_zt[i].row(i) = data_.Fz[t].transpose();

  if (interior) {
    dv.l_x = data_.Qx[t] * x + data_.lx[t];
    dv.l_y = data_.Qy[t] * y + data_.ly[t];
    dv.l_u = data_.Ru[t] * u + data_.lu[t];
    dv.l_zt = data_.qz[t] * zt + data_.Lz[t];
  } else {
    dv.l_x = Eigen::VectorXd::Zero(m);
    dv.l_y = Eigen::VectorXd::Zero(n);
    dv.l_u = Eigen::VectorXd::Zero(data_.r);
    dv.l_zt = Eigen::MatrixXd::Zero(n, dm1);
  }
  return dv;
}

Eigen::VectorXd LqCoefficients::h_x_impl(NodeRef,
                                         const Eigen::VectorXd& x) const {
  return data_.Qh * x + data_.hx0;
}

}  // namespace fbsde
