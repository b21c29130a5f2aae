#include "ablate/ablation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <span>

#include "ablate/models.hpp"
#include "support/fixtures.hpp"

namespace ablate {
namespace {

constexpr LossSpec kSquared{LossKind::squared};
constexpr AblationMode kAllModes[] = {AblationMode::resample, AblationMode::permute,
                                      AblationMode::exact};

TEST(ReplacementTableTest, DegenerateColumnGivesConstantValues) {
  const Dataset d(Matrix::from_rows({{5.0, 1.0}, {5.0, 2.0}, {5.0, 3.0}}), {0.0, 1.0, 2.0});
  for (const AblationMode mode : kAllModes) {
    const ReplacementTable t = draw_replacement_table(d, 0, 4, 99, mode);
    EXPECT_TRUE(std::all_of(t.values.begin(), t.values.end(), [](double v) { return v == 5.0; }));
  }
}

TEST(ReplacementTableTest, PermuteBlocksArePermutations) {
  const Dataset d(Matrix::from_rows({{1.0}, {2.0}, {3.0}}), {0.0, 0.0, 0.0});
  const ReplacementTable t = draw_replacement_table(d, 0, 2, 1, AblationMode::permute);
  ASSERT_EQ(t.values.size(), 6u);
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> block(t.block(k).begin(), t.block(k).end());
    std::sort(block.begin(), block.end());
    EXPECT_EQ(block, (std::vector<double>{1.0, 2.0, 3.0}));
  }
}

TEST(ReplacementTableTest, ExactEnumeratesRowValues) {
  const Dataset d = testing::two_point_dataset();
  const ReplacementTable t = draw_replacement_table(d, 0, 17, 3, AblationMode::exact);
  EXPECT_EQ(t.replicates, 2u);
  EXPECT_EQ(t.values, (std::vector<double>{0.0, 0.0, 1.0, 1.0}));
}

TEST(ReplacementTableTest, ArgumentErrors) {
  const Dataset d = testing::two_point_dataset();
  EXPECT_THROW(draw_replacement_table(d, 1, 2, 0, AblationMode::resample), IndexError);
  EXPECT_THROW(draw_replacement_table(d, 0, 0, 0, AblationMode::resample), InvalidArgument);
  EXPECT_THROW(draw_replacement_table(d, 0, 0, 0, AblationMode::permute), InvalidArgument);
  EXPECT_NO_THROW(draw_replacement_table(d, 0, 0, 0, AblationMode::exact));
}

TEST(ReplacementTableTest, PropertyClosureOverEmpiricalColumn) {
  const Dataset d = testing::linear_dataset(40, {1.0, 2.0, 3.0}, 0.1, 21);
  for (const AblationMode mode : kAllModes) {
    for (std::size_t i = 0; i < d.num_features(); ++i) {
      const std::vector<double> col = d.column(i);
      const std::set<double> members(col.begin(), col.end());
      const ReplacementTable t = draw_replacement_table(d, i, 25, 1000 + i, mode);
      for (const double v : t.values) ASSERT_TRUE(members.count(v)) << v;
    }
  }
}

TEST(ReplacementTableTest, PropertyDeterministicPerSeed) {
  const Dataset d = testing::linear_dataset(30, {1.0, 2.0}, 0.1, 22);
  for (const AblationMode mode : {AblationMode::resample, AblationMode::permute}) {
    const auto a = draw_replacement_table(d, 1, 10, 77, mode);
    const auto b = draw_replacement_table(d, 1, 10, 77, mode);
    const auto c = draw_replacement_table(d, 1, 10, 78, mode);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.values, c.values);
  }
}

TEST(ReplacementTableTest, ResampleIsRoughlyUniformOverRows) {
  // Distinct column values so each draw identifies its source row.
  Matrix x(8, 1);
  for (std::size_t j = 0; j < 8; ++j) x(j, 0) = static_cast<double>(j);
  const Dataset d(std::move(x), std::vector<double>(8, 0.0));
  const ReplacementTable t = draw_replacement_table(d, 0, 10000, 5, AblationMode::resample);
  std::vector<int> counts(8, 0);
  for (const double v : t.values) ++counts[static_cast<std::size_t>(v)];
  for (const int c : counts) EXPECT_NEAR(c, 10000, 600);  // sd ~94
}

TEST(AblateRowTest, ReplacesOnePosition) {
  const std::vector<double> row{1.0, 2.0, 3.0};
  EXPECT_EQ(ablate_row(row, 1, 9.0), (std::vector<double>{1.0, 9.0, 3.0}));
  EXPECT_EQ(row, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(AblateRowTest, IdentityAndInvolution) {
  const std::vector<double> row{1.0, 2.0, 3.0};
  EXPECT_EQ(ablate_row(row, 2, 3.0), row);
  const auto once = ablate_row(row, 0, -4.0);
  EXPECT_EQ(ablate_row(once, 0, row[0]), row);
}

TEST(AblateRowTest, IndexOutOfRange) {
  const std::vector<double> row{1.0, 2.0};
  EXPECT_THROW(ablate_row(row, 2, 0.0), IndexError);
}

TEST(DeltaMatrixTest, ConstantModelGivesZeros) {
  const Dataset d = testing::linear_dataset(20, {1.0, 1.0}, 0.1, 31);
  const ConstantModel model(0.25);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto t = draw_replacement_table(d, i, 7, i, AblationMode::resample);
    const DeltaMatrix m = compute_delta_matrix(model, d, kSquared, t);
    EXPECT_TRUE(std::all_of(m.deltas.begin(), m.deltas.end(), [](double v) { return v == 0.0; }));
  }
}

TEST(DeltaMatrixTest, TwoPointExactEnumeration) {
  // Row j under replicate k takes z = x_k, so delta = (x_k - y_j)^2 - 0.
  const Dataset d = testing::two_point_dataset();
  const auto model = testing::identity_model();
  const auto t = draw_replacement_table(d, 0, 1, 0, AblationMode::exact);
  const DeltaMatrix m = compute_delta_matrix(model, d, kSquared, t);
  ASSERT_EQ(m.rows, 2u);
  ASSERT_EQ(m.replicates, 2u);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(0, 1), 1.0);
  EXPECT_EQ(m(1, 0), 1.0);
  EXPECT_EQ(m(1, 1), 0.0);
  EXPECT_EQ(m.baseline_risk, 0.0);
}

TEST(DeltaMatrixTest, IgnoredFeatureIsExactlyZero) {
  const Dataset d = testing::linear_dataset(50, {2.0, -1.0, 0.5}, 0.3, 32);
  const auto reads_only_first =
      make_row_model([](std::span<const double> r) { return std::exp(r[0]) - 3.0 * r[0]; });
  for (const AblationMode mode : kAllModes) {
    for (std::size_t i = 1; i < 3; ++i) {
      const auto t = draw_replacement_table(d, i, 9, 40 + i, mode);
      const DeltaMatrix m = compute_delta_matrix(reads_only_first, d, kSquared, t);
      for (const double v : m.deltas) ASSERT_EQ(v, 0.0);
    }
  }
}

TEST(DeltaMatrixTest, SignConventionMatchesIndependentRisks) {
  const Dataset d = testing::linear_dataset(60, {1.5, -0.7}, 0.2, 33);
  const LinearModel model = fit_ols(d);
  const auto t = draw_replacement_table(d, 1, 12, 8, AblationMode::resample);
  const DeltaMatrix m = compute_delta_matrix(model, d, kSquared, t);

  // Ablated risk computed row by row through ablate_row, independently of the
  // batched path.
  double ablated = 0.0;
  for (std::size_t k = 0; k < t.replicates; ++k) {
    for (std::size_t j = 0; j < d.rows(); ++j) {
      const auto row = ablate_row(d.row(j), 1, t.at(j, k));
      ablated += compute_loss(kSquared, model.predict_batch(Matrix(1, 2, row))[0], d.target(j));
    }
  }
  ablated /= static_cast<double>(d.rows() * t.replicates);
  const double baseline = fixed_data_risk(model, d, kSquared).risk;

  double mean = 0.0;
  for (const double v : m.deltas) mean += v;
  mean /= static_cast<double>(m.deltas.size());
  EXPECT_NEAR(mean, ablated - baseline, 1e-12 * std::abs(ablated - baseline));
  EXPECT_GT(mean, 0.0);
}

TEST(DeltaMatrixTest, BatchSizeAndThreadsDoNotChangeResult) {
  const Dataset d = testing::linear_dataset(45, {1.0, 0.5, -2.0}, 0.2, 34);
  const auto model = testing::smooth_model({1.0, 2.0, 0.5});
  const auto t = draw_replacement_table(d, 2, 13, 3, AblationMode::permute);
  const DeltaMatrix ref = compute_delta_matrix(model, d, kSquared, t);
  for (const std::size_t batch : {1u, 7u, 45u, 100u, 10000u}) {
    for (const std::size_t threads : {1u, 3u, 8u}) {
      EXPECT_EQ(compute_delta_matrix(model, d, kSquared, t, DeltaOptions{batch, threads}), ref)
          << "batch " << batch << " threads " << threads;
    }
  }
}

TEST(DeltaMatrixTest, PropertyDeterministic) {
  const Dataset d = testing::linear_dataset(25, {1.0, 0.5}, 0.2, 35);
  const LinearModel model = fit_ols(d);
  for (const AblationMode mode : kAllModes) {
    const auto t1 = draw_replacement_table(d, 0, 6, 123, mode);
    const auto t2 = draw_replacement_table(d, 0, 6, 123, mode);
    EXPECT_EQ(compute_delta_matrix(model, d, kSquared, t1),
              compute_delta_matrix(model, d, kSquared, t2));
  }
}

TEST(DeltaMatrixTest, ModelContractViolationsPropagate) {
  struct Broken {
    std::vector<double> predict_batch(const Matrix& rows) const {
      if (rows.rows() == 2) return std::vector<double>(2, 0.0);  // baseline call
      return {};
    }
  };
  const Dataset d = testing::two_point_dataset();
  const auto t = draw_replacement_table(d, 0, 3, 0, AblationMode::resample);
  EXPECT_THROW(compute_delta_matrix(Broken{}, d, kSquared, t), ModelContractError);
  EXPECT_THROW(compute_delta_matrix(Broken{}, d, kSquared, t, DeltaOptions{1, 4}),
               ModelContractError);
}

TEST(DeltaMatrixTest, RejectsMismatchedTable) {
  const Dataset d = testing::two_point_dataset();
  const Dataset other = testing::linear_dataset(5, {1.0}, 0.0, 1);
  const auto t = draw_replacement_table(other, 0, 2, 0, AblationMode::resample);
  EXPECT_THROW(compute_delta_matrix(testing::identity_model(), d, kSquared, t), InvalidArgument);
}

}  // namespace
}  // namespace ablate
