#pragma once

// Replacement tables, ablated rows and the N x K grid of ablation loss deltas.
//
// Indexing convention used throughout: flat position s = k * N + j addresses
// (row j, replicate k), both zero-based. A replicate block is the contiguous
// run of N values s = k*N .. k*N + N - 1.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ablate/core.hpp"
#include "ablate/error.hpp"
#include "ablate/rng.hpp"

namespace ablate {

enum class AblationMode { resample, permute, exact };

inline std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::resample: return "resample";
    case AblationMode::permute: return "permute";
    case AblationMode::exact: return "exact";
  }
  return "unknown";
}

struct ReplacementTable {
  std::size_t feature_index = 0;
  std::size_t rows = 0;        // N
  std::size_t replicates = 0;  // K
  AblationMode mode = AblationMode::resample;
  std::uint64_t seed = 0;
  std::vector<double> values;  // length N * K, flat index s = k * N + j

  double at(std::size_t j, std::size_t k) const noexcept { return values[k * rows + j]; }
  std::span<const double> block(std::size_t k) const noexcept {
    return {values.data() + k * rows, rows};
  }

  friend bool operator==(const ReplacementTable&, const ReplacementTable&) = default;
};

/// Draws the N x K replacement values for one feature from its empirical
/// column. resample: i.i.d. with replacement. permute: K independent
/// shuffles. exact: K = N and block k repeats row k's value (no randomness).
inline ReplacementTable draw_replacement_table(const Dataset& data, std::size_t feature_index,
                                               std::size_t replicates, std::uint64_t seed,
                                               AblationMode mode) {
  if (feature_index >= data.num_features()) {
    throw IndexError("feature index " + std::to_string(feature_index) + " out of range [0, " +
                     std::to_string(data.num_features()) + ")");
  }
  const std::size_t n = data.rows();
  if (mode == AblationMode::exact) {
    replicates = n;
  } else if (replicates < 1) {
    throw InvalidArgument("K must be >= 1");
  }

  const std::vector<double> column = data.column(feature_index);
  ReplacementTable table;
  table.feature_index = feature_index;
  table.rows = n;
  table.replicates = replicates;
  table.mode = mode;
  table.seed = seed;
  table.values.resize(n * replicates);

  switch (mode) {
    case AblationMode::resample: {
      Philox4x32 rng(seed);
      for (double& v : table.values) v = column[rng.uniform_below(n)];
      break;
    }
    case AblationMode::permute: {
      Philox4x32 rng(seed);
      for (std::size_t k = 0; k < replicates; ++k) {
        std::span<double> block(table.values.data() + k * n, n);
        std::copy(column.begin(), column.end(), block.begin());
        shuffle(block, rng);
      }
      break;
    }
    case AblationMode::exact:
      for (std::size_t k = 0; k < n; ++k) {
        std::fill_n(table.values.begin() + static_cast<std::ptrdiff_t>(k * n), n, column[k]);
      }
      break;
  }
  return table;
}

/// Copy of `row` with position `feature_index` set to `z`.
inline std::vector<double> ablate_row(std::span<const double> row, std::size_t feature_index,
                                      double z) {
  if (feature_index >= row.size()) {
    throw IndexError("feature index " + std::to_string(feature_index) + " out of range [0, " +
                     std::to_string(row.size()) + ")");
  }
  std::vector<double> out(row.begin(), row.end());
  out[feature_index] = z;
  return out;
}

struct DeltaMatrix {
  std::size_t feature_index = 0;
  std::size_t rows = 0;        // N
  std::size_t replicates = 0;  // K
  double baseline_risk = 0.0;
  std::vector<double> deltas;  // flat index s = k * N + j

  double operator()(std::size_t j, std::size_t k) const noexcept { return deltas[k * rows + j]; }
  std::span<const double> replicate(std::size_t k) const noexcept {
    return {deltas.data() + k * rows, rows};
  }

  /// Builds a matrix from deltas[j][k] given row by row (handy in tests).
  static DeltaMatrix from_rows(const std::vector<std::vector<double>>& grid) {
    DeltaMatrix m;
    m.rows = grid.size();
    m.replicates = grid.empty() ? 0 : grid.front().size();
    m.deltas.resize(m.rows * m.replicates);
    for (std::size_t j = 0; j < m.rows; ++j) {
      if (grid[j].size() != m.replicates) throw InvalidArgument("ragged delta grid");
      for (std::size_t k = 0; k < m.replicates; ++k) m.deltas[k * m.rows + j] = grid[j][k];
    }
    return m;
  }

  friend bool operator==(const DeltaMatrix&, const DeltaMatrix&) = default;
};

struct DeltaOptions {
  std::size_t batch_rows = 4096;  // ablated rows per predict_batch call
  std::size_t threads = 1;        // ignored for serial models
};

/// deltas[j][k] = l(f(x_j with feature i := z_s), y_j) - l(f(x_j), y_j),
/// with the baseline losses supplied by the caller so they can be shared
/// across features. Each cell is written exactly once, so batch size and
/// thread count cannot change the result.
template <BatchModel M>
DeltaMatrix compute_delta_matrix(const M& model, const Dataset& data, const LossSpec& loss,
                                 const ReplacementTable& table, const RiskReport& baseline,
                                 const DeltaOptions& options = {}) {
  const std::size_t n = data.rows();
  const std::size_t m = data.num_features();
  if (table.rows != n || table.values.size() != n * table.replicates) {
    throw InvalidArgument("replacement table shape does not match the dataset");
  }
  if (table.feature_index >= m) throw IndexError("table feature index out of range");
  if (baseline.per_point_losses.size() != n) {
    throw InvalidArgument("baseline losses do not match the dataset");
  }

  DeltaMatrix out;
  out.feature_index = table.feature_index;
  out.rows = n;
  out.replicates = table.replicates;
  out.baseline_risk = baseline.risk;
  out.deltas.resize(n * table.replicates);

  const std::size_t total = out.deltas.size();
  const std::size_t batch_rows = std::max<std::size_t>(1, options.batch_rows);
  const std::size_t num_batches = (total + batch_rows - 1) / batch_rows;

  auto run_batch = [&](std::size_t b) {
    const std::size_t begin = b * batch_rows;
    const std::size_t end = std::min(total, begin + batch_rows);
    Matrix batch(end - begin, m);
    for (std::size_t s = begin; s < end; ++s) {
      const auto src = data.row(s % n);
      auto dst = batch.row(s - begin);
      std::copy(src.begin(), src.end(), dst.begin());
      dst[table.feature_index] = table.values[s];
    }
    const std::vector<double> preds = checked_predict(model, batch);
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t j = s % n;
      out.deltas[s] =
          compute_loss(loss, preds[s - begin], data.target(j)) - baseline.per_point_losses[j];
    }
  };

  const std::size_t threads =
      is_serial(model) ? 1 : std::min(std::max<std::size_t>(1, options.threads), num_batches);
  if (threads <= 1) {
    for (std::size_t b = 0; b < num_batches; ++b) run_batch(b);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t b = next++; b < num_batches; b = next++) {
          try {
            run_batch(b);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = num_batches;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <BatchModel M>
DeltaMatrix compute_delta_matrix(const M& model, const Dataset& data, const LossSpec& loss,
                                 const ReplacementTable& table, const DeltaOptions& options = {}) {
  return compute_delta_matrix(model, data, loss, table, fixed_data_risk(model, data, loss),
                              options);
}

}  // namespace ablate
