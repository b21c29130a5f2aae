#pragma once

// Domain types shared by every stage: the row-major feature matrix, the
// dataset, loss functions, the model contract and fixed-data risk.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ablate/error.hpp"

namespace ablate {

/// Dense row-major matrix of doubles. Rows are exposed as spans so models can
/// read them without copying.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InvalidArgument("matrix data size does not match its shape");
    }
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols) throw InvalidArgument("ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// N rows of M features plus a target. Invariants are checked on
/// construction: N >= 2, M >= 1, unique names, every value finite.
class Dataset {
 public:
  Dataset(Matrix features, std::vector<double> target, std::vector<std::string> feature_names)
      : features_(std::move(features)),
        target_(std::move(target)),
        names_(std::move(feature_names)) {
    if (features_.rows() < 2) {
      throw InvalidInput("dataset needs at least 2 rows, got " + std::to_string(features_.rows()));
    }
    if (features_.cols() < 1) throw InvalidInput("dataset needs at least 1 feature");
    if (target_.size() != features_.rows()) {
      throw InvalidInput("target length " + std::to_string(target_.size()) +
                         " does not match row count " + std::to_string(features_.rows()));
    }
    if (names_.size() != features_.cols()) {
      throw InvalidInput("feature_names length does not match column count");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (!seen.insert(n).second) throw InvalidInput("duplicate feature name '" + n + "'");
    }
    for (std::size_t r = 0; r < features_.rows(); ++r) {
      for (std::size_t c = 0; c < features_.cols(); ++c) {
        if (!std::isfinite(features_(r, c))) {
          throw InvalidInput("non-finite feature value at row " + std::to_string(r) +
                             ", column '" + names_[c] + "'");
        }
      }
      if (!std::isfinite(target_[r])) {
        throw InvalidInput("non-finite target value at row " + std::to_string(r));
      }
    }
  }

  /// Convenience constructor naming features x0, x1, ...
  Dataset(Matrix features, std::vector<double> target)
      : Dataset(features, std::move(target), default_names(features.cols())) {}

  std::size_t rows() const noexcept { return features_.rows(); }
  std::size_t num_features() const noexcept { return features_.cols(); }
  const Matrix& features() const noexcept { return features_; }
  const std::vector<double>& target() const noexcept { return target_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  std::span<const double> row(std::size_t j) const noexcept { return features_.row(j); }
  double target(std::size_t j) const noexcept { return target_[j]; }
  std::vector<double> column(std::size_t c) const { return features_.column(c); }

  /// Same data with rows reordered: row j of the result is row order[j] here.
  Dataset reordered(std::span<const std::size_t> order) const {
    if (order.size() != rows()) throw InvalidArgument("row order has wrong length");
    Matrix f(rows(), num_features());
    std::vector<double> t(rows());
    for (std::size_t j = 0; j < order.size(); ++j) {
      const auto src = features_.row(order[j]);
      std::copy(src.begin(), src.end(), f.row(j).begin());
      t[j] = target_[order[j]];
    }
    return Dataset(std::move(f), std::move(t), names_);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  static std::vector<std::string> default_names(std::size_t m) {
    std::vector<std::string> names;
    names.reserve(m);
    for (std::size_t c = 0; c < m; ++c) names.push_back("x" + std::to_string(c));
    return names;
  }

  Matrix features_;
  std::vector<double> target_;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { squared, absolute, zero_one, log_loss };

struct LossSpec {
  LossKind kind = LossKind::squared;
  double threshold = 0.5;  // zero_one only
  double epsilon = 1e-12;  // log_loss clipping

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

inline std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::squared: return "squared";
    case LossKind::absolute: return "absolute";
    case LossKind::zero_one: return "zero_one";
    case LossKind::log_loss: return "log_loss";
  }
  return "unknown";
}

/// Pointwise loss l(prediction, target). Always finite and >= 0.
inline double compute_loss(const LossSpec& loss, double prediction, double target) {
  if (!std::isfinite(prediction) || !std::isfinite(target)) {
    throw InvalidInput("loss inputs must be finite");
  }
  switch (loss.kind) {
    case LossKind::squared: {
      const double d = prediction - target;
      return d * d;
    }
    case LossKind::absolute:
      return std::abs(prediction - target);
    case LossKind::zero_one:
      return ((prediction >= loss.threshold) == (target >= loss.threshold)) ? 0.0 : 1.0;
    case LossKind::log_loss: {
      if (target != 0.0 && target != 1.0) {
        throw InvalidTarget("log_loss requires target in {0,1}, got " + std::to_string(target));
      }
      const double p = std::clamp(prediction, loss.epsilon, 1.0 - loss.epsilon);
      return target == 1.0 ? -std::log(p) : -std::log1p(-p);
    }
  }
  throw InvalidArgument("unknown loss kind");
}

// ---------------------------------------------------------------------------
// Model contract

/// Anything that maps a B x M batch of rows to B predictions, deterministically
/// and without observable side effects.
template <typename M>
concept BatchModel = requires(const M& model, const Matrix& rows) {
  { model.predict_batch(rows) } -> std::convertible_to<std::vector<double>>;
};

/// Models that can only take one batch at a time advertise it through
/// `bool serial() const`.
template <BatchModel M>
bool is_serial(const M& model) {
  if constexpr (requires { { model.serial() } -> std::convertible_to<bool>; }) {
    return model.serial();
  } else {
    return false;
  }
}

/// Type-erased model base, used for runtime-selected models (CLI, exec).
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<double> predict_batch(const Matrix& rows) const = 0;
  virtual bool serial() const noexcept { return false; }
};

/// Adapts a per-row callable `double(std::span<const double>)` into a model.
template <typename Fn>
class RowFunctionModel final : public Model {
 public:
  explicit RowFunctionModel(Fn fn) : fn_(std::move(fn)) {}

  std::vector<double> predict_batch(const Matrix& rows) const override {
    std::vector<double> out(rows.rows());
    for (std::size_t b = 0; b < rows.rows(); ++b) out[b] = fn_(rows.row(b));
    return out;
  }

 private:
  Fn fn_;
};

template <typename Fn>
RowFunctionModel<Fn> make_row_model(Fn fn) {
  return RowFunctionModel<Fn>(std::move(fn));
}

/// Runs predict_batch and enforces the length and finiteness contract.
template <BatchModel M>
std::vector<double> checked_predict(const M& model, const Matrix& rows) {
  std::vector<double> preds = model.predict_batch(rows);
  if (preds.size() != rows.rows()) {
    throw ModelContractError("model returned " + std::to_string(preds.size()) +
                             " predictions for a batch of " + std::to_string(rows.rows()) +
                             " rows");
  }
  for (std::size_t b = 0; b < preds.size(); ++b) {
    if (!std::isfinite(preds[b])) {
      throw ModelContractError("model returned a non-finite prediction for batch row " +
                               std::to_string(b));
    }
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Fixed-data risk

struct RiskReport {
  double risk = 0.0;
  std::vector<double> per_point_losses;
};

/// Mean loss of the model over the dataset.
template <BatchModel M>
RiskReport fixed_data_risk(const M& model, const Dataset& data, const LossSpec& loss) {
  const std::vector<double> preds = checked_predict(model, data.features());
  RiskReport report;
  report.per_point_losses.resize(data.rows());
  double sum = 0.0;
  for (std::size_t j = 0; j < data.rows(); ++j) {
    report.per_point_losses[j] = compute_loss(loss, preds[j], data.target(j));
    sum += report.per_point_losses[j];
  }
  report.risk = sum / static_cast<double>(data.rows());
  return report;
}

}  // namespace ablate
