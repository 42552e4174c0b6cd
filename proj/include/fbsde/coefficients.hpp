#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "fbsde/tree.hpp"

namespace fbsde {

enum class Coupling { Partial, Full };

// First derivatives of the coefficient bundle at one (node, t, x, y, z~, u).
// Shape conventions (column perturbations act from the right):
//   b_x m x m, b_y m x n, b_u m x r; db from z~ rows: b_zt[i] is m x (d-1).
//   sig_x[i] m x d with d sigma_i = dx^* sig_x[i]; sig_u[i] r x d likewise.
//   sig_y 1 x d and sig_zt (d-1) x d exist only for the fully coupled
//   (m = n = 1) case: d sigma = dy sig_y + dz~ sig_zt.
//   f_x n x m, f_y n x n, f_u n x r, f_zt[i] n x (d-1).
//   l gradients as columns: l_x m, l_y n, l_u r; l_zt n x (d-1) pairs with z~
//   in the Frobenius inner product.
struct Derivs {
  Eigen::MatrixXd b_x, b_y, b_u;
  std::vector<Eigen::MatrixXd> b_zt;
  std::vector<Eigen::MatrixXd> sig_x, sig_u;
  Eigen::MatrixXd sig_y, sig_zt;
  Eigen::MatrixXd f_x, f_y, f_u;
  std::vector<Eigen::MatrixXd> f_zt;
  Eigen::VectorXd l_x, l_y, l_u;
  Eigen::MatrixXd l_zt;
};

// Coefficient bundle (b, sigma_i, f, l, h) of a controlled forward-backward
// system over horizon T. Public entry points apply the boundary conventions
//   b(T,.) = sigma(T,.) = l(T,.) = 0,  f(0,.) = 0,  f independent of z~ at T,
// so implementations only ever see interior times (and z~ = 0 at t = T for
// f). For partial coupling b and sigma must ignore (y, z~); full coupling
// requires m = n = 1.
//
// Derivatives default to central finite differences (relative step 1e-6);
// override derivs_impl / h_x_impl with analytic expressions where available.
class Coefficients {
 public:
  Coefficients(Coupling kind, int m, int n, int r, int d, int T)
      : kind_(kind), m_(m), n_(n), r_(r), d_(d), T_(T) {}
  virtual ~Coefficients() = default;

  Coupling kind() const { return kind_; }
  int m() const { return m_; }
  int n() const { return n_; }
  int r() const { return r_; }
  int d() const { return d_; }
  int T() const { return T_; }

  Eigen::VectorXd b(NodeRef node, int t, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                    const Eigen::VectorXd& u) const;
  Eigen::RowVectorXd sigma(NodeRef node, int t, int i,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& zt,
                           const Eigen::VectorXd& u) const;
  Eigen::VectorXd f(NodeRef node, int t, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                    const Eigen::VectorXd& u) const;
  double l(NodeRef node, int t, const Eigen::VectorXd& x,
           const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
           const Eigen::VectorXd& u) const;
  double h(NodeRef node, const Eigen::VectorXd& x) const {
    return h_impl(node, x);
  }

  Derivs derivs(NodeRef node, int t, const Eigen::VectorXd& x,
                const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                const Eigen::VectorXd& u) const;
  Eigen::VectorXd h_x(NodeRef node, const Eigen::VectorXd& x) const {
    return h_x_impl(node, x);
  }

  // True when f still depends on u at t = T; decides whether time-T controls
  // are real decision variables.
  virtual bool f_depends_on_u_at_T() const { return true; }

 protected:
  virtual Eigen::VectorXd b_impl(NodeRef node, int t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& zt,
                                 const Eigen::VectorXd& u) const = 0;
  virtual Eigen::RowVectorXd sigma_impl(NodeRef node, int t, int i,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::MatrixXd& zt,
                                        const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd f_impl(NodeRef node, int t, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y,
                                 const Eigen::MatrixXd& zt,
                                 const Eigen::VectorXd& u) const = 0;
  virtual double l_impl(NodeRef node, int t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                        const Eigen::VectorXd& u) const = 0;
  virtual double h_impl(NodeRef node, const Eigen::VectorXd& x) const = 0;

  virtual Derivs derivs_impl(NodeRef node, int t, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& zt,
                             const Eigen::VectorXd& u) const;
  virtual Eigen::VectorXd h_x_impl(NodeRef node,
                                   const Eigen::VectorXd& x) const;

 private:
  Coupling kind_;
  int m_, n_, r_, d_, T_;
};

// Linear-quadratic family: all coefficients linear in (x, y, z~, u), running
// and terminal costs quadratic. Derivatives are exact and constant per time,
// hence uniformly bounded. Blocks absent from a problem stay zero. Per-time
// data is indexed by t directly; slot t of (b, sigma, l) covers t = 0..T-1,
// slot t of f covers t = 1..T.
struct LqData {
  int m = 1, n = 1, r = 1, d = 2, T = 1;
  Coupling kind = Coupling::Partial;

  // b = A x + B u + Ay y + az (z~)^* + a0
  std::vector<Eigen::MatrixXd> A;                // m x m
  std::vector<Eigen::MatrixXd> B;                // m x r
  std::vector<Eigen::MatrixXd> Ay;               // m x n (full only)
  std::vector<Eigen::RowVectorXd> az;            // 1 x (d-1) (full only)
  std::vector<Eigen::VectorXd> a0;               // m

  // sigma_i = x^* Sx[i] + u^* Su[i] + y sy + z~ Sz + s0[i]
  std::vector<std::vector<Eigen::MatrixXd>> Sx;  // [t][i] m x d
  std::vector<std::vector<Eigen::MatrixXd>> Su;  // [t][i] r x d
  std::vector<Eigen::RowVectorXd> sy;            // 1 x d (full only)
  std::vector<Eigen::MatrixXd> Sz;               // (d-1) x d (full only)
  std::vector<std::vector<Eigen::RowVectorXd>> s0;  // [t][i] 1 x d

  // f = Fx x + Fy y + z~ Fz + Fu u + f0
  std::vector<Eigen::MatrixXd> Fx;               // n x m
  std::vector<Eigen::MatrixXd> Fy;               // n x n
  std::vector<Eigen::VectorXd> Fz;               // d-1
  std::vector<Eigen::MatrixXd> Fu;               // n x r
  std::vector<Eigen::VectorXd> f0;               // n

  // l = .5 x^*Qx x + .5 y^*Qy y + .5 qz |z~|_F^2 + .5 u^*Ru u
  //     + lx^*x + ly^*y + <Lz, z~>_F + lu^*u + l0
  std::vector<Eigen::MatrixXd> Qx, Qy, Ru;
  std::vector<double> qz;
  std::vector<Eigen::VectorXd> lx, ly, lu;
  std::vector<Eigen::MatrixXd> Lz;               // n x (d-1)
  std::vector<double> l0;

  // h = .5 x^*Qh x + hx0^*x + h0
  Eigen::MatrixXd Qh;
  Eigen::VectorXd hx0;
  double h0 = 0.0;

  // Fills every unset block with zeros of the right shape.
  void complete();
};

class LqCoefficients : public Coefficients {
 public:
  explicit LqCoefficients(LqData data);
  const LqData& data() const { return data_; }
  bool f_depends_on_u_at_T() const override;

 protected:
  Eigen::VectorXd b_impl(NodeRef, int t, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                         const Eigen::VectorXd& u) const override;
  Eigen::RowVectorXd sigma_impl(NodeRef, int t, int i,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& zt,
                                const Eigen::VectorXd& u) const override;
  Eigen::VectorXd f_impl(NodeRef, int t, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                         const Eigen::VectorXd& u) const override;
  double l_impl(NodeRef, int t, const Eigen::VectorXd& x,
                const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                const Eigen::VectorXd& u) const override;
  double h_impl(NodeRef, const Eigen::VectorXd& x) const override;
  Derivs derivs_impl(NodeRef, int t, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y, const Eigen::MatrixXd& zt,
                     const Eigen::VectorXd& u) const override;
  Eigen::VectorXd h_x_impl(NodeRef, const Eigen::VectorXd& x) const override;

 private:
  LqData data_;
};

}  // namespace fbsde
