// Fits OLS to a synthetic problem where y depends on x0 strongly, x1 weakly
// and not at all on x2, then prints importances with both interval types.

#include <cstdio>

#include "ablate/ablate.hpp"

int main() {
  constexpr std::size_t n = 200;
  ablate::Philox4x32 rng(2024);
  ablate::Matrix x(n, 3);
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < 3; ++c) x(j, c) = 2.0 * rng.uniform01() - 1.0;
    y[j] = 3.0 * x(j, 0) + 0.5 * x(j, 1) + 0.1 * (rng.uniform01() - 0.5);
  }
  const ablate::Dataset data(std::move(x), std::move(y), {"strong", "weak", "noise"});
  const ablate::LinearModel model = ablate::fit_ols(data);

  ablate::RunConfig config;
  config.K = 20;
  config.seed = 7;
  const ablate::RunResult result = ablate::estimate_importances(model, data, config);

  std::printf("baseline risk %.6g\n", result.baseline_risk);
  for (const auto& e : result.estimates) {
    std::printf("%-7s %s  %10.6f  [%10.6f, %10.6f]\n", e.feature_name.c_str(),
                std::string(ablate::to_string(e.formulation)).c_str(), e.point, e.ci_low,
                e.ci_high);
  }
}
