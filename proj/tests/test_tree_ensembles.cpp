#include "mlcast/dataset.hpp"
#include "mlcast/tree_ensembles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mlcast;

namespace {

std::pair<Matrix, std::vector<double>> synthetic_nonlinear(std::uint64_t seed, std::size_t n) {
    const auto schema = default_schema();
    const auto r = synth_generate(seed, n, schema, {});
    return {r.frame.matrix(schema.features), r.frame.column(schema.target)};
}

double train_rmse(const auto& model, const Matrix& x, std::span<const double> y) {
    const auto pred = predict_ensemble(model, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += (pred[i] - y[i]) * (pred[i] - y[i]);
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace

TEST(RegressionTree, ConstantTargetIsSingleLeaf) {
    const Matrix x = Matrix::from_rows({{1, 5}, {2, 4}, {3, 3}, {4, 2}});
    const std::vector<double> y(4, 2.5);
    const auto t = fit_regression_tree(x, y, {});
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].value, 2.5);
}

TEST(RegressionTree, StepTargetSplitsAtStraddlingMidpoint) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (double v : {0.05, 0.2, 0.3, 0.45, 0.55, 0.7, 0.85, 0.95}) {
        rows.push_back({v});
        y.push_back(v < 0.5 ? 0.0 : 1.0);
    }
    TreeParams params;
    params.max_depth = 1;
    const auto t = fit_regression_tree(Matrix::from_rows(rows), y, params);
    ASSERT_EQ(t.nodes.size(), 3u);
    // candidate thresholds are midpoints of adjacent sorted values; only
    // (0.45 + 0.55) / 2 separates the classes perfectly
    EXPECT_EQ(t.nodes[0].feature, 0);
    EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.5);
    EXPECT_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].value, 0.0);
    EXPECT_EQ(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].value, 1.0);
}

TEST(RegressionTree, DepthZeroIsMean) {
    const Matrix x = Matrix::from_rows({{1}, {2}, {3}});
    const std::vector<double> y{1, 2, 6};
    TreeParams params;
    params.max_depth = 0;
    const auto t = fit_regression_tree(x, y, params);
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_DOUBLE_EQ(t.nodes[0].value, 3.0);
}

TEST(RegressionTree, TiesGoToLowestFeature) {
    // features 0 and 1 are identical, so every split ties
    const Matrix x = Matrix::from_rows({{1, 1}, {2, 2}, {3, 3}, {4, 4}});
    const std::vector<double> y{0, 0, 1, 1};
    TreeParams params;
    params.max_depth = 1;
    const auto t = fit_regression_tree(x, y, params);
    EXPECT_EQ(t.nodes[0].feature, 0);
}

TEST(RegressionTree, EmptyInputThrows) {
    EXPECT_THROW((void)fit_regression_tree(Matrix(0, 2), {}, {}), std::invalid_argument);
}

TEST(RegressionTree, LeavesPartitionTheInputAndRespectDepth) {
    const auto [x, y] = synthetic_nonlinear(3, 60);
    TreeParams params;
    params.max_depth = 4;
    const auto t = fit_regression_tree(x, y, params);
    EXPECT_LE(t.depth(), 4u);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto leaf = t.leaf_index(x.row(i));
        EXPECT_TRUE(t.nodes[leaf].is_leaf());
        EXPECT_EQ(t.predict_row(x.row(i)), t.nodes[leaf].value);
    }
}

TEST(RandomForest, ConstantTarget) {
    const auto [x, y0] = synthetic_nonlinear(4, 50);
    const std::vector<double> y(y0.size(), -1.5);
    ForestParams params;
    params.n_estimators = 7;
    params.max_features = 3;
    params.seed = 9;
    const auto f = fit_random_forest(x, y, params);
    for (double v : predict_ensemble(f, x)) {
        EXPECT_DOUBLE_EQ(v, -1.5);
    }
}

TEST(RandomForest, DeterministicGivenSeed) {
    const auto [x, y] = synthetic_nonlinear(5, 50);
    ForestParams params;
    params.n_estimators = 10;
    params.max_features = 4;
    params.seed = 21;
    EXPECT_EQ(fit_random_forest(x, y, params), fit_random_forest(x, y, params));
    auto other = params;
    other.seed = 22;
    EXPECT_NE(fit_random_forest(x, y, params), fit_random_forest(x, y, other));
}

TEST(RandomForest, DeeperTreesFitTrainingDataBetter) {
    const auto [x, y] = synthetic_nonlinear(6, 84);
    ForestParams shallow;
    shallow.n_estimators = 50;
    shallow.max_depth = 2;
    shallow.seed = 1;
    auto deep = shallow;
    deep.max_depth = 9;
    EXPECT_LE(train_rmse(fit_random_forest(x, y, deep), x, y), train_rmse(fit_random_forest(x, y, shallow), x, y));
}

TEST(RandomForest, PredictionWithinTreeRange) {
    const auto [x, y] = synthetic_nonlinear(7, 50);
    ForestParams params;
    params.n_estimators = 15;
    params.max_features = 5;
    params.seed = 3;
    const auto f = fit_random_forest(x, y, params);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double lo = INFINITY;
        double hi = -INFINITY;
        for (const auto& t : f.trees) {
            lo = std::min(lo, t.predict_row(x.row(i)));
            hi = std::max(hi, t.predict_row(x.row(i)));
        }
        EXPECT_GE(f.predict_row(x.row(i)), lo - 1e-12);
        EXPECT_LE(f.predict_row(x.row(i)), hi + 1e-12);
    }
}

TEST(RandomForest, RejectsTooManyFeatures) {
    const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}});
    ForestParams params;
    params.max_features = 3;
    EXPECT_THROW((void)fit_random_forest(x, std::vector<double>{1, 2}, params), std::invalid_argument);
}

TEST(Boosting, ZeroRoundsPredictsMean) {
    const auto [x, y] = synthetic_nonlinear(8, 45);
    BoostParams params;
    params.n_estimators = 0;
    const auto m = fit_gradient_boosting(x, y, params);
    for (double v : predict_ensemble(m, x)) {
        EXPECT_DOUBLE_EQ(v, mean(y));
    }
}

TEST(Boosting, OneUnregularizedRoundInterpolates) {
    const auto [x, y] = synthetic_nonlinear(9, 40);
    BoostParams params;
    params.n_estimators = 1;
    params.learning_rate = 1.0;
    params.reg_lambda = 0.0;
    params.max_depth = 12;  // >= log2(n)
    const auto m = fit_gradient_boosting(x, y, params);
    const auto pred = predict_ensemble(m, x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_NEAR(pred[i], y[i], 1e-9);
    }
}

TEST(Boosting, TrainingLossNonIncreasing) {
    const auto [x, y] = synthetic_nonlinear(10, 60);
    BoostParams params;
    params.n_estimators = 40;
    params.learning_rate = 0.2;
    params.max_depth = 3;
    const auto m = fit_gradient_boosting(x, y, params);
    ASSERT_EQ(m.train_loss.size(), 40u);
    for (std::size_t t = 1; t < m.train_loss.size(); ++t) {
        EXPECT_LE(m.train_loss[t], m.train_loss[t - 1] + 1e-12);
    }
}

TEST(Boosting, PredictionIsBasePlusScaledTreeSum) {
    const auto [x, y] = synthetic_nonlinear(11, 50);
    BoostParams params;
    params.n_estimators = 25;
    params.learning_rate = 0.15;
    params.subsample = 0.7;
    params.colsample_bytree = 0.5;
    params.seed = 4;
    const auto m = fit_gradient_boosting(x, y, params);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (const auto& t : m.trees) {
            s += t.predict_row(x.row(i));
        }
        EXPECT_NEAR(m.predict_row(x.row(i)), m.base_score + 0.15 * s, 1e-12);
    }
    EXPECT_EQ(m, fit_gradient_boosting(x, y, params));
}

TEST(Boosting, ParameterValidation) {
    const Matrix x = Matrix::from_rows({{1}, {2}});
    const std::vector<double> y{1, 2};
    BoostParams bad;
    bad.subsample = 0.0;
    EXPECT_THROW((void)fit_gradient_boosting(x, y, bad), std::invalid_argument);
    bad = {};
    bad.learning_rate = 0.0;
    EXPECT_THROW((void)fit_gradient_boosting(x, y, bad), std::invalid_argument);
}

TEST(PredictEnsemble, StumpAndEdgeCases) {
    RegressionTree stump;
    stump.nodes = {{0, 0.0, 1, 2, 0.0, 2.0}, {-1, 0.0, -1, -1, -1.0, 1.0}, {-1, 0.0, -1, -1, 1.0, 1.0}};
    ForestModel f{{stump}, 1};
    const auto pred = predict_ensemble(f, Matrix::from_rows({{-2}, {0}, {0.5}}));
    EXPECT_EQ(pred, (std::vector<double>{-1, -1, 1}));
    EXPECT_TRUE(predict_ensemble(f, Matrix(0, 1)).empty());
    EXPECT_THROW((void)predict_ensemble(f, Matrix::from_rows({{1, 2}})), std::invalid_argument);
}

TEST(TreeJson, RoundTrip) {
    const auto [x, y] = synthetic_nonlinear(12, 50);
    BoostParams params;
    params.n_estimators = 5;
    params.seed = 2;
    const auto m = fit_gradient_boosting(x, y, params);
    const nlohmann::json j = m;
    EXPECT_EQ(j.at("trees").size(), 5u);
    EXPECT_TRUE(j.at("trees")[0].contains("threshold"));
    const auto back = j.get<BoostedModel>();
    EXPECT_EQ(back, m);
    EXPECT_EQ(predict_ensemble(back, x), predict_ensemble(m, x));
}
