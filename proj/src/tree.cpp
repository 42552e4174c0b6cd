#include "fbsde/tree.hpp"

#include <cmath>

namespace fbsde {

namespace {
constexpr double kSimplexTol = 1e-12;
constexpr double kPinvCutoff = 1e-12;  // relative eigenvalue threshold
}  // namespace

Eigen::MatrixXd itilde(int d) {
  if (d < 2) throw IndexOutOfRange("itilde: d must be >= 2");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d - 1);
  m.topRows(d - 1) = Eigen::MatrixXd::Identity(d - 1, d - 1);
  m.row(d - 1).setConstant(-1.0);
  return m;
}

ScenarioTree::ScenarioTree(int d, int T, const Eigen::VectorXd& kernel,
                           TreeLimits limits) {
  d_ = d;
  T_ = T;
  build([&kernel](NodeRef) { return kernel; }, limits);
}

ScenarioTree::ScenarioTree(int d, int T,
                           const std::vector<Eigen::VectorXd>& kernels,
                           TreeLimits limits) {
  d_ = d;
  T_ = T;
  if (static_cast<int>(kernels.size()) != T)
    throw DimensionMismatch("ScenarioTree: need one kernel per time 0..T-1");
  build([&kernels](NodeRef n) { return kernels[n.t]; }, limits);
}

ScenarioTree::ScenarioTree(
    int d, int T, const std::function<Eigen::VectorXd(NodeRef)>& kernel_at,
    TreeLimits limits) {
  d_ = d;
  T_ = T;
  build(kernel_at, limits);
}

void ScenarioTree::build(
    const std::function<Eigen::VectorXd(NodeRef)>& kernel_at,
    TreeLimits limits) {
  if (d_ < 2) throw LimitExceeded("ScenarioTree: d must be >= 2");
  if (T_ < 1) throw LimitExceeded("ScenarioTree: T must be >= 1");
  if (d_ > limits.max_d || T_ > limits.max_T)
    throw LimitExceeded("ScenarioTree: d=" + std::to_string(d_) +
                        ", T=" + std::to_string(T_) + " exceeds cap d<=" +
                        std::to_string(limits.max_d) +
                        ", T<=" + std::to_string(limits.max_T));

  tilde_ = itilde(d_);
  tilde_pinv_ =
      (tilde_.transpose() * tilde_).ldlt().solve(tilde_.transpose());
  centering_ = Eigen::MatrixXd::Identity(d_, d_) -
               Eigen::MatrixXd::Constant(d_, d_, 1.0 / d_);

  kernel_.resize(T_);
  cond_cov_.resize(T_);
  path_prob_.resize(T_ + 1);
  path_prob_[0] = {1.0};

  for (int t = 0; t < T_; ++t) {
    std::int64_t n_t = count(t);
    kernel_[t].reserve(n_t);
    cond_cov_[t].reserve(n_t);
    path_prob_[t + 1].resize(n_t * d_);
    for (std::int64_t k = 0; k < n_t; ++k) {
      Eigen::VectorXd p = kernel_at(NodeRef{t, k});
      if (p.size() != d_)
        throw DimensionMismatch("ScenarioTree: kernel vector has size " +
                                std::to_string(p.size()) + ", expected " +
                                std::to_string(d_));
      if (std::abs(p.sum() - 1.0) > kSimplexTol)
        throw BadSimplex("ScenarioTree: kernel at t=" + std::to_string(t) +
                         " sums to " + std::to_string(p.sum()));
      if ((p.array() <= 0.0).any())
        throw NonPositiveKernel(
            "ScenarioTree: kernel at t=" + std::to_string(t) +
            " has a non-positive entry");

      CondCov cc;
      cc.matrix = p.asDiagonal().toDenseMatrix() - p * p.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cc.matrix);
      const Eigen::VectorXd& ev = es.eigenvalues();
      double cutoff = kPinvCutoff * ev.cwiseAbs().maxCoeff();
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(d_);
      for (int i = 0; i < d_; ++i)
        if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
      cc.pinv = es.eigenvectors() * inv.asDiagonal() *
                es.eigenvectors().transpose();

      for (int i = 0; i < d_; ++i)
        path_prob_[t + 1][k * d_ + i] = path_prob_[t][k] * p(i);
      kernel_[t].push_back(std::move(p));
      cond_cov_[t].push_back(std::move(cc));
    }
  }
}

std::int64_t ScenarioTree::count(int t) const {
  if (t < 0 || t > T_) throw TimeOutOfRange("count: t out of [0,T]");
  std::int64_t n = 1;
  for (int i = 0; i < t; ++i) n *= d_;
  return n;
}

void ScenarioTree::check_node(NodeRef n) const {
  if (n.t < 0 || n.t > T_ || n.k < 0 || n.k >= count(n.t))
    throw IndexOutOfRange("invalid node {t=" + std::to_string(n.t) +
                          ", k=" + std::to_string(n.k) + "}");
}

NodeRef ScenarioTree::node(int t, std::int64_t k) const {
  NodeRef n{t, k};
  check_node(n);
  return n;
}

NodeRef ScenarioTree::child(NodeRef n, int outcome) const {
  check_node(n);
  if (n.t >= T_) throw LeafNode("child: node is at the horizon");
  if (outcome < 1 || outcome > d_)
    throw IndexOutOfRange("child: outcome " + std::to_string(outcome) +
                          " out of 1.." + std::to_string(d_));
  return {n.t + 1, n.k * d_ + (outcome - 1)};
}

NodeRef ScenarioTree::parent(NodeRef n) const {
  check_node(n);
  if (n.t == 0) throw IndexOutOfRange("parent: root has no parent");
  return {n.t - 1, n.k / d_};
}

int ScenarioTree::outcome_from_parent(NodeRef n) const {
  check_node(n);
  if (n.t == 0) throw IndexOutOfRange("outcome_from_parent: root");
  return static_cast<int>(n.k % d_) + 1;
}

std::vector<int> ScenarioTree::history(NodeRef n) const {
  check_node(n);
  std::vector<int> h(n.t);
  std::int64_t k = n.k;
  for (int i = n.t - 1; i >= 0; --i) {
    h[i] = static_cast<int>(k % d_) + 1;
    k /= d_;
  }
  return h;
}

const Eigen::VectorXd& ScenarioTree::kernel(NodeRef n) const {
  check_node(n);
  if (n.t >= T_) throw LeafNode("kernel: node is at the horizon");
  return kernel_[n.t][n.k];
}

double ScenarioTree::path_prob(NodeRef n) const {
  check_node(n);
  return path_prob_[n.t][n.k];
}

Eigen::VectorXd ScenarioTree::mart_increment(NodeRef n, int i) const {
  const Eigen::VectorXd& p = kernel(n);
  if (i < 1 || i > d_)
    throw IndexOutOfRange("mart_increment: outcome " + std::to_string(i) +
                          " out of 1.." + std::to_string(d_));
  Eigen::VectorXd m = -p;
  m(i - 1) += 1.0;
  return m;
}

const CondCov& ScenarioTree::cond_cov(NodeRef n) const {
  check_node(n);
  if (n.t >= T_) throw LeafNode("cond_cov: node is at the horizon");
  return cond_cov_[n.t][n.k];
}

std::pair<double, double> ScenarioTree::norm_equivalence_constants(
    NodeRef n) const {
  const CondCov& cc = cond_cov(n);
  // Both quadratic forms vanish on the 1_d row direction; parameterised by
  // w = z Itilde the ratio becomes an ordinary symmetric eigenproblem.
  Eigen::MatrixXd g =
      tilde_pinv_ * cc.matrix * tilde_pinv_.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

}  // namespace fbsde
