#pragma once

// Built-in fixture models. All are immutable after fitting, so concurrent
// predict_batch calls are safe.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ablate/core.hpp"
#include "ablate/error.hpp"

namespace ablate {

class ConstantModel final : public Model {
 public:
  explicit ConstantModel(double value) : value_(value) {}

  std::vector<double> predict_batch(const Matrix& rows) const override {
    return std::vector<double>(rows.rows(), value_);
  }

  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Predicts the target mean everywhere.
inline ConstantModel fit_constant(const Dataset& data) {
  double sum = 0.0;
  for (const double y : data.target()) sum += y;
  return ConstantModel(sum / static_cast<double>(data.rows()));
}

class LinearModel final : public Model {
 public:
  LinearModel(std::vector<double> weights, double intercept)
      : weights_(std::move(weights)), intercept_(intercept) {}

  std::vector<double> predict_batch(const Matrix& rows) const override {
    if (rows.cols() != weights_.size()) {
      throw ModelContractError("linear model expects " + std::to_string(weights_.size()) +
                               " features, got " + std::to_string(rows.cols()));
    }
    std::vector<double> out(rows.rows());
    for (std::size_t b = 0; b < rows.rows(); ++b) {
      const auto x = rows.row(b);
      double acc = intercept_;
      for (std::size_t c = 0; c < weights_.size(); ++c) acc += weights_[c] * x[c];
      out[b] = acc;
    }
    return out;
  }

  const std::vector<double>& weights() const noexcept { return weights_; }
  double intercept() const noexcept { return intercept_; }

 private:
  std::vector<double> weights_;
  double intercept_;
};

/// Least squares with an unpenalized intercept: minimizes
/// |y - Xw - b|^2 + lambda |w|^2. Features and target are centered, which
/// removes the intercept from the penalized system, and the ridge term is
/// folded in as sqrt(lambda) * I rows so a rank-revealing QR of the
/// augmented design can be used instead of forming the normal equations.
inline LinearModel fit_ols(const Dataset& data, double ridge_lambda = 0.0) {
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw InvalidArgument("ridge lambda must be finite and >= 0");
  }
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto m = static_cast<Eigen::Index>(data.num_features());

  Eigen::VectorXd x_mean = Eigen::VectorXd::Zero(m);
  double y_mean = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row = data.row(static_cast<std::size_t>(j));
    for (Eigen::Index c = 0; c < m; ++c) x_mean[c] += row[static_cast<std::size_t>(c)];
    y_mean += data.target(static_cast<std::size_t>(j));
  }
  x_mean /= static_cast<double>(n);
  y_mean /= static_cast<double>(n);

  const Eigen::Index extra = ridge_lambda > 0.0 ? m : 0;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n + extra, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + extra);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row = data.row(static_cast<std::size_t>(j));
    for (Eigen::Index c = 0; c < m; ++c) design(j, c) = row[static_cast<std::size_t>(c)] - x_mean[c];
    rhs[j] = data.target(static_cast<std::size_t>(j)) - y_mean;
  }
  if (extra > 0) {
    const double s = std::sqrt(ridge_lambda);
    for (Eigen::Index c = 0; c < m; ++c) design(n + c, c) = s;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < m) {
    throw SingularFit("least-squares system is singular (rank " + std::to_string(qr.rank()) +
                      " < " + std::to_string(m) + "); use a ridge lambda > 0");
  }
  const Eigen::VectorXd w = qr.solve(rhs);

  std::vector<double> weights(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < m; ++c) weights[static_cast<std::size_t>(c)] = w[c];
  const double intercept = y_mean - x_mean.dot(w);
  return LinearModel(std::move(weights), intercept);
}

/// k-nearest-neighbour regression with Euclidean distance. Ties in distance
/// go to the lower training-row index.
class KnnModel final : public Model {
 public:
  KnnModel(Matrix train, std::vector<double> target, std::size_t k)
      : train_(std::move(train)), target_(std::move(target)), k_(k) {}

  std::vector<double> predict_batch(const Matrix& rows) const override {
    if (rows.cols() != train_.cols()) {
      throw ModelContractError("knn model expects " + std::to_string(train_.cols()) +
                               " features, got " + std::to_string(rows.cols()));
    }
    const std::size_t n = train_.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    std::vector<double> out(rows.rows());
    for (std::size_t b = 0; b < rows.rows(); ++b) {
      const auto q = rows.row(b);
      for (std::size_t r = 0; r < n; ++r) {
        const auto x = train_.row(r);
        double d2 = 0.0;
        for (std::size_t c = 0; c < q.size(); ++c) {
          const double d = q[c] - x[c];
          d2 += d * d;
        }
        dist[r] = {d2, r};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
      // Sum in row-index order so the mean does not depend on sort internals.
      std::vector<std::size_t> chosen(k_);
      for (std::size_t i = 0; i < k_; ++i) chosen[i] = dist[i].second;
      std::sort(chosen.begin(), chosen.end());
      double sum = 0.0;
      for (const std::size_t r : chosen) sum += target_[r];
      out[b] = sum / static_cast<double>(k_);
    }
    return out;
  }

  std::size_t k() const noexcept { return k_; }

 private:
  Matrix train_;
  std::vector<double> target_;
  std::size_t k_;
};

inline KnnModel fit_knn(const Dataset& data, std::size_t k = 5) {
  if (k < 1 || k > data.rows()) {
    throw InvalidArgument("knn k must lie in [1, " + std::to_string(data.rows()) + "], got " +
                          std::to_string(k));
  }
  return KnnModel(data.features(), data.target(), k);
}

}  // namespace ablate
