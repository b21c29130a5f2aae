#pragma once

// Standard error of the mean, Student-t / normal quantiles and symmetric
// confidence intervals over a sample sequence.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ablate/ablation.hpp"
#include "ablate/error.hpp"
#include "ablate/estimator.hpp"

namespace ablate {

enum class VarianceKind { mle, unbiased };
enum class CiMethod { student_t, normal };

inline std::string_view to_string(VarianceKind v) {
  return v == VarianceKind::mle ? "mle" : "unbiased";
}
inline std::string_view to_string(CiMethod m) {
  return m == CiMethod::student_t ? "student_t" : "normal";
}

namespace detail {

inline double sample_mean(std::span<const double> samples) {
  double sum = 0.0;
  for (const double v : samples) sum += v;
  return sum / static_cast<double>(samples.size());
}

inline double sum_squared_deviations(std::span<const double> samples) {
  const double mean = sample_mean(samples);
  double ss = 0.0;
  for (const double v : samples) {
    const double d = v - mean;
    ss += d * d;
  }
  return ss;
}

/// Stirling remainder lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2], z >= 10.
inline double stirling_remainder(double z) {
  const double r = 1.0 / z;
  const double r2 = r * r;
  return r * (1.0 / 12.0 -
              r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))));
}

/// lgamma(a + b) - lgamma(a) without the cancellation that the direct
/// difference suffers once a is large.
inline double log_gamma_ratio(double a, double b) {
  if (a < 10.0 || a + b < 10.0) return std::lgamma(a + b) - std::lgamma(a);
  return (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b + stirling_remainder(a + b) -
         stirling_remainder(a);
}

inline double log_beta(double a, double b) {
  if (a < b) std::swap(a, b);
  return std::lgamma(b) - log_gamma_ratio(a, b);
}

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 200000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b), with y = 1 - x passed separately
/// so callers can supply it without cancellation.
inline double regularized_beta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

/// P(T > t) for t >= 0 and T ~ Student-t with `df` degrees of freedom.
inline double t_upper_tail(double t, double df) {
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  return 0.5 * regularized_beta(0.5 * df, 0.5, x, y);
}

inline double t_density(double t, double df) {
  const double log_norm =
      log_gamma_ratio(0.5 * df, 0.5) - 0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(t * t / df));
}

}  // namespace detail

/// Maximum-likelihood variance: sum of squared deviations divided by n.
inline double mle_variance(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("variance of an empty sample");
  return detail::sum_squared_deviations(samples) / static_cast<double>(samples.size());
}

/// Bias-corrected variance (divide by n - 1). Not the default.
inline double unbiased_variance(std::span<const double> samples) {
  if (samples.size() < 2) throw InsufficientSamples("unbiased variance needs n >= 2");
  return detail::sum_squared_deviations(samples) / static_cast<double>(samples.size() - 1);
}

/// sqrt(variance / n).
inline double sem(std::span<const double> samples, VarianceKind kind = VarianceKind::mle) {
  const double var = kind == VarianceKind::mle ? mle_variance(samples) : unbiased_variance(samples);
  return std::sqrt(var / static_cast<double>(samples.size()));
}

/// Standard normal quantile: rational initial guess refined by Halley steps
/// against erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile probability must lie in (0,1)");
  if (p == 0.5) return 0.0;
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;
  double x;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - kLow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double sqrt2pi = std::sqrt(2.0 * std::numbers::pi);
  for (int i = 0; i < 2; ++i) {
    // Work on the smaller tail so the residual keeps its relative precision.
    const double e = x < 0.0 ? 0.5 * std::erfc(-x / std::numbers::sqrt2) - p
                             : (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2);
    const double u = e * sqrt2pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

/// Quantile of Student's t with `df` degrees of freedom, accurate to well
/// below 1e-8. Inverts the incomplete-beta CDF with safeguarded Newton steps
/// inside a maintained bracket.
inline double t_quantile(double p, std::int64_t df) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile probability must lie in (0,1)");
  if (df < 1) throw InvalidArgument("degrees of freedom must be >= 1");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -t_quantile(1.0 - p, df);

  const double alpha = 1.0 - p;  // target upper tail
  const double nu = static_cast<double>(df);
  if (df == 1) return std::tan(std::numbers::pi * (p - 0.5));
  if (df == 2) return (2.0 * p - 1.0) / std::sqrt(2.0 * p * alpha);

  const double z = normal_quantile(p);
  double t = z + (z * z * z + z) / (4.0 * nu);  // Cornish-Fisher start
  double lo = 0.0;
  double hi = std::max(2.0 * t, 1.0);
  while (detail::t_upper_tail(hi, nu) > alpha) {
    lo = hi;
    hi *= 2.0;
  }
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);

  for (int iter = 0; iter < 200; ++iter) {
    const double f = detail::t_upper_tail(t, nu) - alpha;
    if (f == 0.0) return t;
    if (f > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    const double step = f / detail::t_density(t, nu);  // tail decreases in t
    double next = t + step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t) ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t)) {
      return next;
    }
    t = next;
  }
  return t;
}

struct IntervalEstimate {
  double point = 0.0;
  double sem = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double quantile = 0.0;  // multiplier applied to the SEM
  std::size_t n_samples = 0;
};

struct CiOptions {
  double level = 0.95;
  CiMethod method = CiMethod::student_t;
  VarianceKind variance = VarianceKind::mle;
};

/// Symmetric interval center +/- q * sem(samples). The center defaults to the
/// sample mean; callers pass the grand-mean estimate to center both
/// formulations on the same value. q is the (1+level)/2 quantile of t with
/// n - 1 degrees of freedom, or of the standard normal.
inline IntervalEstimate confidence_interval(std::span<const double> samples,
                                            const CiOptions& options = {},
                                            std::optional<double> center = std::nullopt) {
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw InvalidArgument("confidence level must lie in (0,1)");
  }
  if (samples.size() < 2) {
    throw InsufficientSamples("confidence interval needs at least 2 samples, got " +
                              std::to_string(samples.size()));
  }
  IntervalEstimate out;
  out.n_samples = samples.size();
  out.point = center.value_or(detail::sample_mean(samples));
  out.sem = sem(samples, options.variance);
  const double p = 0.5 * (1.0 + options.level);
  out.quantile = options.method == CiMethod::student_t
                     ? t_quantile(p, static_cast<std::int64_t>(samples.size()) - 1)
                     : normal_quantile(p);
  const double half_width = out.quantile * out.sem;
  out.ci_low = out.point - half_width;
  out.ci_high = out.point + half_width;
  return out;
}

inline IntervalEstimate confidence_interval(const SampleSequence& samples,
                                            const CiOptions& options = {},
                                            std::optional<double> center = std::nullopt) {
  return confidence_interval(std::span<const double>(samples.values), options, center);
}

/// One reported importance with its interval and the run metadata needed to
/// reproduce it.
struct ImportanceEstimate {
  std::size_t feature_index = 0;
  std::string feature_name;
  double point = 0.0;
  double sem = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence_level = 0.95;
  Formulation formulation = Formulation::rv;
  std::size_t n_samples = 0;
  std::size_t K = 0;
  AblationMode mode = AblationMode::resample;
  std::uint64_t seed = 0;
  std::uint64_t table_seed = 0;
  CiMethod ci_method = CiMethod::student_t;
  VarianceKind variance = VarianceKind::mle;
  // RV samples from K > 1 replicates share rows, so they are not independent.
  bool cross_product_samples = false;

  friend bool operator==(const ImportanceEstimate&, const ImportanceEstimate&) = default;
};

}  // namespace ablate
