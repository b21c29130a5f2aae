#pragma once

// End-to-end orchestration: baseline risk once, then per feature a
// replacement table, delta matrix, point estimate and the requested
// intervals.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/core.hpp"
#include "ablate/estimator.hpp"
#include "ablate/io.hpp"
#include "ablate/oracle.hpp"
#include "ablate/rng.hpp"
#include "ablate/uncertainty.hpp"

namespace ablate {

inline constexpr std::uint32_t kFeatureSeedDomain = 1;

/// Table seed for a feature. Keyed on the feature's name rather than its
/// position so that selecting a different subset of features leaves every
/// other feature's draws unchanged.
inline std::uint64_t feature_seed(std::uint64_t master, std::string_view feature_name) {
  return derive_seed(master, fnv1a64(feature_name), kFeatureSeedDomain);
}

struct EngineOptions {
  std::size_t threads = 1;
  std::size_t batch_rows = 4096;
};

inline std::vector<Formulation> formulations_of(FormulationChoice choice) {
  switch (choice) {
    case FormulationChoice::rv: return {Formulation::rv};
    case FormulationChoice::fd: return {Formulation::fd};
    case FormulationChoice::both: return {Formulation::rv, Formulation::fd};
  }
  return {};
}

/// Importance with intervals for every feature of `data`. With `both`, one
/// delta matrix per feature feeds both formulations.
template <BatchModel M>
RunResult estimate_importances(const M& model, const Dataset& data, const RunConfig& config,
                               const EngineOptions& engine = {}) {
  config.validate();
  const RiskReport baseline = fixed_data_risk(model, data, config.loss);
  const CiOptions ci{config.confidence_level, config.ci_method, config.variance};
  const DeltaOptions delta_options{engine.batch_rows, engine.threads};

  RunResult result;
  result.baseline_risk = baseline.risk;
  result.config_echo = config;

  for (std::size_t i = 0; i < data.num_features(); ++i) {
    const std::string& name = data.feature_names()[i];
    const std::uint64_t table_seed = feature_seed(config.seed, name);
    const ReplacementTable table =
        draw_replacement_table(data, i, config.K, table_seed, config.mode);
    const DeltaMatrix deltas =
        compute_delta_matrix(model, data, config.loss, table, baseline, delta_options);
    const double point = point_estimate(deltas);

    for (const Formulation f : formulations_of(config.formulation)) {
      const IntervalEstimate interval = confidence_interval(samples_for(deltas, f), ci, point);
      ImportanceEstimate e;
      e.feature_index = i;
      e.feature_name = name;
      e.point = interval.point;
      e.sem = interval.sem;
      e.ci_low = interval.ci_low;
      e.ci_high = interval.ci_high;
      e.confidence_level = config.confidence_level;
      e.formulation = f;
      e.n_samples = interval.n_samples;
      e.K = table.replicates;
      e.mode = config.mode;
      e.seed = config.seed;
      e.table_seed = table_seed;
      e.ci_method = config.ci_method;
      e.variance = config.variance;
      e.cross_product_samples = f == Formulation::rv && table.replicates > 1;
      result.estimates.push_back(std::move(e));
    }
  }
  return result;
}

/// Coverage simulation for every feature and requested formulation, each
/// feature seeded as in estimate_importances.
template <BatchModel M>
CoverageResult estimate_coverage(const M& model, const Dataset& data, const RunConfig& config,
                                 std::size_t replicates, const EngineOptions& engine = {}) {
  config.validate();
  CoverageResult result;
  result.config_echo = config;
  const CoverageOptions options{config.mode, config.ci_method, config.variance, engine.threads};
  for (std::size_t i = 0; i < data.num_features(); ++i) {
    const std::string& name = data.feature_names()[i];
    for (const Formulation f : formulations_of(config.formulation)) {
      result.entries.push_back(
          {i, name,
           simulate_coverage(model, data, i, config.loss, config.K, config.confidence_level, f,
                             replicates, feature_seed(config.seed, name), options)});
    }
  }
  return result;
}

}  // namespace ablate
