#include "fbsde/problem.hpp"

#include "fbsde/errors.hpp"

namespace fbsde {

void ControlDomain::validate(int T, int r) const {
  if (static_cast<int>(lo.size()) != T + 1 ||
      static_cast<int>(hi.size()) != T + 1)
    throw DimensionMismatch("ControlDomain: need bounds for every t in 0..T");
  for (int t = 0; t <= T; ++t) {
    if (lo[t].size() != r || hi[t].size() != r)
      throw DimensionMismatch("ControlDomain: bounds at t=" +
                              std::to_string(t) + " have wrong dimension");
    if ((lo[t].array() > hi[t].array()).any())
      throw DimensionMismatch("ControlDomain: lo > hi at t=" +
                              std::to_string(t));
  }
}

bool ControlDomain::contains(int t, const Eigen::VectorXd& u,
                             double tol) const {
  return (u.array() >= lo[t].array() - tol).all() &&
         (u.array() <= hi[t].array() + tol).all();
}

Eigen::VectorXd ControlDomain::clamp(int t, const Eigen::VectorXd& u) const {
  return u.cwiseMax(lo[t]).cwiseMin(hi[t]);
}

void ControlProblem::validate() const {
  if (!tree || !coeffs) throw DimensionMismatch("ControlProblem: unset parts");
  if (coeffs->d() != tree->d())
    throw DimensionMismatch("ControlProblem: coefficient d != tree d");
  if (coeffs->T() != tree->T())
    throw DimensionMismatch("ControlProblem: coefficient T != tree T");
  if (x0.size() != coeffs->m() || yT.size() != coeffs->n())
    throw DimensionMismatch("ControlProblem: x0 / yT dimension mismatch");
  if (coeffs->kind() == Coupling::Full &&
      (coeffs->m() != 1 || coeffs->n() != 1))
    throw DimensionMismatch("ControlProblem: full coupling requires m=n=1");
  domain.validate(tree->T(), coeffs->r());
}

Control constant_control(const ControlProblem& p, const Eigen::VectorXd& u) {
  return Control::constant(*p.tree, 0, p.tree->T(), u);
}

void require_admissible(const ControlProblem& p, const Control& u,
                        double tol) {
  if (u.t_lo() != 0 || u.t_hi() != p.tree->T())
    throw ControlOutOfDomain("control must live on [0, T]");
  for (int t = 0; t <= p.tree->T(); ++t)
    for (std::int64_t k = 0; k < p.tree->count(t); ++k) {
      NodeRef n = p.tree->node(t, k);
      if (u.at(n).size() != p.r())
        throw ControlOutOfDomain("control has wrong dimension at t=" +
                                 std::to_string(t));
      if (!p.domain.contains(t, u.at(n), tol))
        throw ControlOutOfDomain("control leaves U_t at t=" +
                                 std::to_string(t) +
                                 ", node=" + std::to_string(k));
    }
}

}  // namespace fbsde
