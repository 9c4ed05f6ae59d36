#include <Eigen/Dense>
#include <cmath>

#include "diffmvr/metrics/metrics.hpp"

namespace diffmvr {

namespace {

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Gaussian fit(const FeatureSet& set, std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(set.size());
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (set[i].size() != dim) throw DimensionError("feature vectors differ in length");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = set[i][j];
  }
  Gaussian g;
  g.mean = x.colwise().mean().transpose();
  if (n > 1) {
    const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
    g.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  } else {
    g.cov = Eigen::MatrixXd::Zero(d, d);
  }
  if (set.size() <= dim) g.cov.diagonal().array() += 1e-6;
  return g;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.empty() || b.empty()) throw ContractError("frechet_distance needs non-empty feature sets");
  const std::size_t dim = a.front().size();
  if (dim == 0 || b.front().size() != dim) throw DimensionError("feature sets differ in dimension");
  const Gaussian ga = fit(a, dim), gb = fit(b, dim);
  // Tr((Sa Sb)^{1/2}) = Tr((Sa^{1/2} Sb Sa^{1/2})^{1/2}); the inner matrix is symmetric PSD.
  const Eigen::MatrixXd root_a = psd_sqrt(ga.cov);
  Eigen::MatrixXd inner = root_a * gb.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (ga.mean - gb.mean).squaredNorm() + ga.cov.trace() + gb.cov.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

double frechet_gaussian_1d(double mean_a, double std_a, double mean_b, double std_b) {
  return (mean_a - mean_b) * (mean_a - mean_b) + (std_a - std_b) * (std_a - std_b);
}

}  // namespace diffmvr
