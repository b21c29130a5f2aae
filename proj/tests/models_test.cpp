#include "ablate/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "ablate/model_spec.hpp"
#include "support/fixtures.hpp"

namespace ablate {
namespace {

TEST(ConstantModelTest, PredictsTargetMean) {
  const Dataset d(Matrix::from_rows({{1.0}, {2.0}, {3.0}, {4.0}}), {1.0, 2.0, 3.0, 6.0});
  const ConstantModel m = fit_constant(d);
  EXPECT_EQ(m.value(), 3.0);
  EXPECT_EQ(m.predict_batch(Matrix(2, 1)), (std::vector<double>{3.0, 3.0}));
}

TEST(OlsTest, RecoversExactLine) {
  Matrix x(10, 1);
  std::vector<double> y(10);
  for (std::size_t j = 0; j < 10; ++j) {
    x(j, 0) = static_cast<double>(j) - 3.5;
    y[j] = 2.0 * x(j, 0) + 1.0;
  }
  const LinearModel m = fit_ols(Dataset(std::move(x), std::move(y)));
  EXPECT_NEAR(m.weights()[0], 2.0, 1e-8);
  EXPECT_NEAR(m.intercept(), 1.0, 1e-8);
}

TEST(OlsTest, MatchesNormalEquationsOnNoisyData) {
  const Dataset d = testing::linear_dataset(200, {1.5, -0.5}, 0.3, 7);
  const LinearModel m = fit_ols(d);
  // Closed form for two centered regressors.
  double mx0 = 0, mx1 = 0, my = 0;
  for (std::size_t j = 0; j < d.rows(); ++j) {
    mx0 += d.row(j)[0];
    mx1 += d.row(j)[1];
    my += d.target(j);
  }
  const double n = static_cast<double>(d.rows());
  mx0 /= n;
  mx1 /= n;
  my /= n;
  double s00 = 0, s01 = 0, s11 = 0, s0y = 0, s1y = 0;
  for (std::size_t j = 0; j < d.rows(); ++j) {
    const double a = d.row(j)[0] - mx0, b = d.row(j)[1] - mx1, c = d.target(j) - my;
    s00 += a * a;
    s01 += a * b;
    s11 += b * b;
    s0y += a * c;
    s1y += b * c;
  }
  const double det = s00 * s11 - s01 * s01;
  EXPECT_NEAR(m.weights()[0], (s11 * s0y - s01 * s1y) / det, 1e-10);
  EXPECT_NEAR(m.weights()[1], (s00 * s1y - s01 * s0y) / det, 1e-10);
}

TEST(OlsTest, ConstantFeatureWithRidgeGetsZeroWeight) {
  const Dataset d(Matrix::from_rows({{4.0}, {4.0}, {4.0}}), {1.0, 2.0, 6.0});
  const LinearModel m = fit_ols(d, 0.5);
  EXPECT_EQ(m.weights()[0], 0.0);
  EXPECT_DOUBLE_EQ(m.intercept(), 3.0);
}

TEST(OlsTest, OrthogonalIrrelevantFeatureGetsZeroWeight) {
  // x1 is orthogonal to x0 and to y after centering.
  const Dataset d(Matrix::from_rows({{-1.0, 1.0}, {-1.0, -1.0}, {1.0, 1.0}, {1.0, -1.0}}),
                  {-2.0, -2.0, 2.0, 2.0});
  const LinearModel m = fit_ols(d);
  EXPECT_NEAR(m.weights()[0], 2.0, 1e-12);
  EXPECT_NEAR(m.weights()[1], 0.0, 1e-12);
}

TEST(OlsTest, DuplicatedColumnNeedsRidge) {
  const Dataset base = testing::linear_dataset(30, {1.0}, 0.1, 8);
  Matrix x(base.rows(), 2);
  for (std::size_t j = 0; j < base.rows(); ++j) x(j, 0) = x(j, 1) = base.row(j)[0];
  const Dataset d(std::move(x), base.target());
  EXPECT_THROW(fit_ols(d), SingularFit);
  const LinearModel m = fit_ols(d, 1e-3);
  EXPECT_TRUE(std::isfinite(m.weights()[0]));
  EXPECT_TRUE(std::isfinite(m.weights()[1]));
  EXPECT_NEAR(m.weights()[0], m.weights()[1], 1e-9);
}

TEST(OlsTest, RejectsNegativeLambda) {
  EXPECT_THROW(fit_ols(testing::two_point_dataset(), -1.0), InvalidArgument);
}

TEST(KnnTest, KEqualsNPredictsMean) {
  const Dataset d = testing::linear_dataset(12, {1.0, 1.0}, 0.5, 9);
  const KnnModel m = fit_knn(d, d.rows());
  const double mean = fit_constant(d).value();
  for (const double p : m.predict_batch(d.features())) EXPECT_NEAR(p, mean, 1e-12);
}

TEST(KnnTest, KOneReturnsOwnTarget) {
  const Dataset d = testing::linear_dataset(20, {1.0, -1.0}, 0.5, 10);
  EXPECT_EQ(fit_knn(d, 1).predict_batch(d.features()), d.target());
}

TEST(KnnTest, TiesGoToLowerRowIndex) {
  const Dataset d(Matrix::from_rows({{-1.0}, {1.0}, {3.0}}), {10.0, 20.0, 30.0});
  EXPECT_EQ(fit_knn(d, 1).predict_batch(Matrix(1, 1, 0.0)), (std::vector<double>{10.0}));
  EXPECT_EQ(fit_knn(d, 2).predict_batch(Matrix(1, 1, 2.0)), (std::vector<double>{25.0}));
}

TEST(KnnTest, KOutOfRange) {
  const Dataset d = testing::two_point_dataset();
  EXPECT_THROW(fit_knn(d, 0), InvalidArgument);
  EXPECT_THROW(fit_knn(d, 3), InvalidArgument);
}

TEST(ModelsPropertyTest, BuiltinsAreDeterministic) {
  const Dataset d = testing::linear_dataset(40, {1.0, 2.0, -1.0}, 0.3, 11);
  const Matrix probe = testing::linear_dataset(25, {0.0, 0.0, 0.0}, 0.0, 12).features();
  const ConstantModel c = fit_constant(d);
  const LinearModel ols = fit_ols(d, 0.1);
  const KnnModel knn = fit_knn(d, 3);
  EXPECT_EQ(c.predict_batch(probe), c.predict_batch(probe));
  EXPECT_EQ(ols.predict_batch(probe), ols.predict_batch(probe));
  EXPECT_EQ(knn.predict_batch(probe), knn.predict_batch(probe));
}

TEST(ModelsPropertyTest, WrongWidthIsContractError) {
  const Dataset d = testing::linear_dataset(10, {1.0, 2.0}, 0.1, 13);
  EXPECT_THROW(fit_ols(d).predict_batch(Matrix(1, 3)), ModelContractError);
  EXPECT_THROW(fit_knn(d, 2).predict_batch(Matrix(1, 1)), ModelContractError);
}

TEST(ModelSpecTest, ParsesBuiltins) {
  EXPECT_EQ(parse_model_spec("builtin:ols").kind, ModelKind::ols);
  EXPECT_EQ(parse_model_spec("builtin:ols:lambda=0.25").ridge_lambda, 0.25);
  EXPECT_FALSE(parse_model_spec("builtin:constant").constant_value.has_value());
  EXPECT_EQ(parse_model_spec("builtin:constant:v=-2").constant_value, -2.0);
  EXPECT_EQ(parse_model_spec("builtin:knn").k, 5u);
  EXPECT_EQ(parse_model_spec("builtin:knn:k=7").k, 7u);
}

TEST(ModelSpecTest, ParsesExecCommand) {
  const ModelSpec s = parse_model_spec("exec:python3  adapter.py --weights w.json");
  EXPECT_EQ(s.kind, ModelKind::exec);
  EXPECT_EQ(s.command, (std::vector<std::string>{"python3", "adapter.py", "--weights", "w.json"}));
}

TEST(ModelSpecTest, RejectsMalformed) {
  for (const char* bad : {"ols", "builtin:forest", "builtin:ols:lambda=-1", "builtin:ols:l=1",
                          "builtin:knn:k=0", "builtin:knn:k=2.5", "builtin:constant:v=abc",
                          "exec:", "exec:   "}) {
    EXPECT_THROW(parse_model_spec(bad), InvalidArgument) << bad;
  }
}

TEST(ModelSpecTest, MakeModelFitsBuiltins) {
  const Dataset d = testing::linear_dataset(20, {1.0}, 0.1, 14);
  const auto m = make_model(parse_model_spec("builtin:constant:v=4"), d);
  EXPECT_EQ(m->predict_batch(Matrix(1, 1)), (std::vector<double>{4.0}));
  const auto ols = make_model(parse_model_spec("builtin:ols"), d);
  EXPECT_EQ(ols->predict_batch(d.features()), fit_ols(d).predict_batch(d.features()));
}

}  // namespace
}  // namespace ablate
