#pragma once

// Randomness-free evaluation of the fixed-data importance under the empirical
// marginal, and a Monte-Carlo check of interval coverage against it.
//
// exact_fd_importance deliberately does not go through replacement tables or
// compute_delta_matrix: it enumerates every (row, replacement row) pair
// directly so it can serve as an independent check of that path.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/core.hpp"
#include "ablate/estimator.hpp"
#include "ablate/rng.hpp"
#include "ablate/uncertainty.hpp"

namespace ablate {

inline constexpr std::uint32_t kCoverageSeedDomain = 2;

/// (1/N^2) * sum over replacement rows r and rows j of
/// l(f(x_j with feature i := x_r,i), y_j) - l(f(x_j), y_j).
template <BatchModel M>
double exact_fd_importance(const M& model, const Dataset& data, std::size_t feature_index,
                           const LossSpec& loss) {
  if (feature_index >= data.num_features()) throw IndexError("feature index out of range");
  const std::size_t n = data.rows();

  const std::vector<double> original = checked_predict(model, data.features());
  std::vector<double> original_loss(n);
  for (std::size_t j = 0; j < n; ++j) {
    original_loss[j] = compute_loss(loss, original[j], data.target(j));
  }

  double sum = 0.0;
  Matrix ablated = data.features();
  for (std::size_t r = 0; r < n; ++r) {
    const double z = data.features()(r, feature_index);
    for (std::size_t j = 0; j < n; ++j) ablated(j, feature_index) = z;
    const std::vector<double> preds = checked_predict(model, ablated);
    for (std::size_t j = 0; j < n; ++j) {
      sum += compute_loss(loss, preds[j], data.target(j)) - original_loss[j];
    }
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n));
}

struct CoverageReport {
  std::size_t replicates = 0;
  std::size_t hits = 0;
  double coverage = 0.0;
  double target_level = 0.0;
  Formulation formulation = Formulation::fd;
  double truth = 0.0;  // exact fixed-data importance used as ground truth
};

struct CoverageOptions {
  AblationMode mode = AblationMode::resample;
  CiMethod method = CiMethod::student_t;
  VarianceKind variance = VarianceKind::mle;
  std::size_t threads = 1;  // replicate-level parallelism; ignored for serial models
};

/// Replicate r draws its table with seed derive_seed(seed, r, kCoverageSeedDomain),
/// builds the interval and counts it as a hit when the exact importance lies
/// inside [ci_low, ci_high].
template <BatchModel M>
CoverageReport simulate_coverage(const M& model, const Dataset& data, std::size_t feature_index,
                                 const LossSpec& loss, std::size_t K, double level,
                                 Formulation formulation, std::size_t replicates,
                                 std::uint64_t seed, const CoverageOptions& options = {}) {
  if (replicates < 100) throw InvalidArgument("coverage needs at least 100 replicates");
  if (options.mode == AblationMode::exact) {
    throw InvalidArgument("coverage needs a randomized ablation mode");
  }
  if (formulation == Formulation::fd && K < 2) {
    throw InvalidArgument("fd coverage needs K >= 2");
  }
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");

  const double truth = exact_fd_importance(model, data, feature_index, loss);
  const RiskReport baseline = fixed_data_risk(model, data, loss);
  const CiOptions ci{level, options.method, options.variance};

  auto replicate_hit = [&](std::size_t r) -> bool {
    const ReplacementTable table = draw_replacement_table(
        data, feature_index, K, derive_seed(seed, r, kCoverageSeedDomain), options.mode);
    const DeltaMatrix deltas = compute_delta_matrix(model, data, loss, table, baseline);
    const IntervalEstimate interval =
        confidence_interval(samples_for(deltas, formulation), ci, point_estimate(deltas));
    return interval.ci_low <= truth && truth <= interval.ci_high;
  };

  std::atomic<std::size_t> hits{0};
  const std::size_t threads =
      is_serial(model) ? 1 : std::min(std::max<std::size_t>(1, options.threads), replicates);
  if (threads <= 1) {
    for (std::size_t r = 0; r < replicates; ++r) hits += replicate_hit(r) ? 1 : 0;
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
      std::vector<std::jthread> workers;
      for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
          for (std::size_t r = next++; r < replicates; r = next++) {
            try {
              hits += replicate_hit(r) ? 1 : 0;
            } catch (...) {
              std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
              next = replicates;
            }
          }
        });
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  CoverageReport report;
  report.replicates = replicates;
  report.hits = hits;
  report.coverage = static_cast<double>(report.hits) / static_cast<double>(replicates);
  report.target_level = level;
  report.formulation = formulation;
  report.truth = truth;
  return report;
}

}  // namespace ablate
