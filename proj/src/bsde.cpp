#include "fbsde/bsde.hpp"

#include <cmath>

namespace fbsde {

Eigen::MatrixXd canonicalize(const Eigen::MatrixXd& z) {
  int d = static_cast<int>(z.cols());
  Eigen::VectorXd row_means = z.rowwise().mean();
  return z - row_means * Eigen::RowVectorXd::Ones(d);
}

Eigen::MatrixXd canonical_from_tilde(const ScenarioTree& tree,
                                     const Eigen::MatrixXd& z_tilde) {
  return z_tilde * tree.tilde_pinv();
}

Eigen::MatrixXd mrep(const ScenarioTree& tree, NodeRef n,
                     const std::vector<Eigen::VectorXd>& centered,
                     double centering_tol) {
  const int d = tree.d();
  if (static_cast<int>(centered.size()) != d)
    throw MissingChild("mrep: need one value per outcome");
  const Eigen::VectorXd& p = tree.kernel(n);
  Eigen::VectorXd mean = centered[0] * p(0);
  for (int i = 1; i < d; ++i) mean += centered[i] * p(i);
  if (mean.cwiseAbs().maxCoeff() > centering_tol)
    throw NotCentered("mrep: conditional expectation is " +
                      std::to_string(mean.cwiseAbs().maxCoeff()));

  const int nn = static_cast<int>(centered[0].size());
  Eigen::MatrixXd xm = Eigen::MatrixXd::Zero(nn, d);  // E[X M^*|F_t]
  for (int i = 0; i < d; ++i)
    xm += p(i) * centered[i] * tree.mart_increment(n, i + 1).transpose();
  return xm * tree.cond_cov(n).pinv;
}

BsdeSolution solve_bsde(const ScenarioTree& tree, const Generator& f,
                        const std::vector<Eigen::VectorXd>& terminal) {
  const int d = tree.d();
  const int T = tree.T();
  if (static_cast<std::int64_t>(terminal.size()) != tree.count(T))
    throw DimensionMismatch("solve_bsde: terminal must cover every leaf");
  const int n = static_cast<int>(terminal[0].size());
  for (const auto& v : terminal)
    if (v.size() != n)
      throw DimensionMismatch("solve_bsde: terminal values have mixed sizes");

  BsdeSolution sol;
  sol.Y = VectorProcess(tree, 0, T);
  sol.Z = MatrixProcess(tree, 0, T - 1);
  for (std::int64_t k = 0; k < tree.count(T); ++k)
    sol.Y.at(tree.node(T, k)) = terminal[k];

  const Eigen::MatrixXd zero_tilde = Eigen::MatrixXd::Zero(n, d - 1);
  std::vector<Eigen::VectorXd> vals(d);
  for (int t = T - 1; t >= 0; --t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef node = tree.node(t, k);
      const Eigen::VectorXd& p = tree.kernel(node);
      for (int i = 1; i <= d; ++i) {
        NodeRef c = tree.child(node, i);
        const Eigen::MatrixXd z_tilde =
            (t + 1 <= T - 1) ? Eigen::MatrixXd(sol.Z.at(c) * tree.tilde())
                             : zero_tilde;
        Eigen::VectorXd fv = f(c, t + 1, sol.Y.at(c), z_tilde);
        if (fv.size() != n)
          throw DimensionMismatch("solve_bsde: generator returned size " +
                                  std::to_string(fv.size()) + ", expected " +
                                  std::to_string(n));
        vals[i - 1] = sol.Y.at(c) + fv;
      }
      Eigen::VectorXd y = vals[0] * p(0);
      for (int i = 1; i < d; ++i) y += vals[i] * p(i);
      sol.Y.at(node) = y;
      for (int i = 0; i < d; ++i) vals[i] -= y;
      sol.Z.at(node) = mrep(tree, node, vals, 1e-9);
    }
  }
  return sol;
}

bool equiv_m(const MatrixProcess& z1, const MatrixProcess& z2, double tol) {
  if (&z1.tree() != &z2.tree() || z1.t_lo() != z2.t_lo() ||
      z1.t_hi() != z2.t_hi())
    throw ShapeMismatch("equiv_m: processes live on different ranges/trees");
  const ScenarioTree& tree = z1.tree();
  for (int t = z1.t_lo(); t <= z1.t_hi(); ++t) {
    for (std::int64_t k = 0; k < tree.count(t); ++k) {
      NodeRef n = tree.node(t, k);
      const Eigen::MatrixXd& a = z1.at(n);
      const Eigen::MatrixXd& b = z2.at(n);
      if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("equiv_m: value shapes differ");
      for (int i = 1; i <= tree.d(); ++i) {
        Eigen::VectorXd m = tree.mart_increment(n, i);
        if (((a - b) * m).cwiseAbs().maxCoeff() > tol) return false;
      }
    }
  }
  return true;
}

double z_seminorm(const ScenarioTree& tree, NodeRef n,
                  const Eigen::MatrixXd& z) {
  const Eigen::VectorXd& p = tree.kernel(n);
  double acc = 0.0;
  for (int i = 1; i <= tree.d(); ++i)
    acc += p(i - 1) * (z * tree.mart_increment(n, i)).squaredNorm();
  return std::sqrt(acc);
}

}  // namespace fbsde
