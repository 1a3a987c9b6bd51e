#include <gtest/gtest.h>

#include "mousedyn/knn.hpp"
#include "test_support.hpp"

using namespace mousedyn;
using mdtest::table;

namespace {

KnnModel four_points(std::size_t k) {
    return knn_fit(table({{0, 0}, {0, 1}, {5, 5}, {5, 6}}, {1, 1, 0, 0}), k);
}

}  // namespace

TEST(Knn, NearestPoint) {
    const auto p = knn_predict(four_points(1), std::vector<double>{0, 0.5});
    EXPECT_EQ(p.label, 1);
    EXPECT_EQ(p.score, 1.0);
}

TEST(Knn, SplitVoteGoesNegative) {
    const auto p = knn_predict(four_points(4), std::vector<double>{0, 0.5});
    EXPECT_EQ(p.score, 0.5);
    EXPECT_EQ(p.label, 0);
}

TEST(Knn, DistanceTieGoesToLowerIndex) {
    // Index 2 (positive) and index 5 (negative) both sit at distance 1.
    const auto m = knn_fit(table({{9, 9}, {8, 8}, {1, 0}, {7, 7}, {6, 6}, {-1, 0}}, {0, 0, 1, 0, 0, 0}), 1);
    EXPECT_EQ(knn_predict(m, std::vector<double>{0, 0}).label, 1);
    const auto flipped = knn_fit(table({{9, 9}, {8, 8}, {1, 0}, {7, 7}, {6, 6}, {-1, 0}}, {0, 0, 0, 0, 0, 1}), 1);
    EXPECT_EQ(knn_predict(flipped, std::vector<double>{0, 0}).label, 0);
}

TEST(Knn, Errors) {
    const auto m = four_points(3);
    EXPECT_THROW(knn_predict(m, std::vector<double>{1, 2, 3}), DataError);
    EXPECT_THROW(knn_fit(table({{0}, {1}}, {1, 0}), 3), DataError);
    EXPECT_THROW(knn_fit(table({{0}, {1}}, {1, 0}), 0), ConfigError);
    EXPECT_THROW(knn_fit(table({{0}, {1, 2}}, {1, 0}), 1), DataError);
}

TEST(KnnProperty, MatchesExhaustiveOracleWithTies) {
    Rng rng(50);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        // Small integer grid: many exact distance ties.
        for (int i = 0; i < 200; ++i) {
            rows.push_back({double(rng.index(5)), double(rng.index(5)), double(rng.index(3))});
            labels.push_back(static_cast<int>(rng.index(2)));
        }
        const auto ds = table(rows, labels);
        for (std::size_t k : {1u, 3u, 13u}) {
            const auto model = knn_fit(ds, k);
            for (int q = 0; q < 40; ++q) {
                const std::vector<double> query = {double(rng.index(5)), double(rng.index(5)), double(rng.index(3))};
                const auto got = knn_predict(model, query);
                const auto [label, score] = mdtest::knn_oracle(rows, labels, query, k);
                ASSERT_EQ(got.label, label) << "trial " << trial << " k " << k;
                ASSERT_EQ(got.score, score);
            }
        }
    }
}

TEST(KnnJson, RoundTrip) {
    const auto m = four_points(3);
    const auto back = knn_from_json(nlohmann::json::parse(to_json(m).dump()));
    EXPECT_EQ(back.rows, m.rows);
    EXPECT_EQ(back.labels, m.labels);
    EXPECT_EQ(back.k, 3u);
    auto bad = to_json(m);
    bad["k"] = 10;
    EXPECT_THROW(knn_from_json(bad), ModelError);
}
