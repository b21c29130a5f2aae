#pragma once

// Shared test datasets and models.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ablate/core.hpp"

namespace ablate::testing {

/// y = sum_c coef[c] * x_c + noise * e, x ~ U(-1, 1), e ~ N(0, 1).
inline Dataset linear_dataset(std::size_t n, const std::vector<double>& coef, double noise,
                              std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(n, coef.size());
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < coef.size(); ++c) {
      x(j, c) = unif(gen);
      acc += coef[c] * x(j, c);
    }
    y[j] = acc + noise * gauss(gen);
  }
  return Dataset(std::move(x), std::move(y));
}

/// The two-row example: x = [0, 1], y = [0, 1].
inline Dataset two_point_dataset() {
  return Dataset(Matrix::from_rows({{0.0}, {1.0}}), {0.0, 1.0});
}

/// f(x) = x_0.
inline auto identity_model() {
  return make_row_model([](std::span<const double> row) { return row[0]; });
}

/// A smooth nonlinear model that reads every feature.
inline auto smooth_model(std::vector<double> coef) {
  return make_row_model([coef = std::move(coef)](std::span<const double> row) {
    double acc = 0.0;
    for (std::size_t c = 0; c < coef.size(); ++c) acc += coef[c] * std::sin(1.3 * row[c]);
    return acc;
  });
}

}  // namespace ablate::testing
