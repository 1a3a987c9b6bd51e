#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"
#include "mousedyn/datasets.hpp"

namespace mousedyn {

inline constexpr std::size_t kDefaultK = 13;

/// Stores the (already scaled) training rows.
struct KnnModel {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;  // 1 genuine, anything else negative
    std::size_t k = kDefaultK;
};

struct BinaryPrediction {
    int label = 0;
    double score = 0;  // in [0, 1], higher = more genuine
};

inline KnnModel knn_fit(const LabeledDataset<std::vector<double>>& train, std::size_t k = kDefaultK) {
    if (k < 1) throw ConfigError("knn: K must be >= 1");
    if (train.size() < k) throw DataError("knn: K exceeds the number of training rows");
    const std::size_t d = train.rows.front().size();
    for (const auto& r : train.rows)
        if (r.size() != d) throw DataError("knn: ragged training matrix");
    return KnnModel{train.rows, train.labels, k};
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Majority vote over the K nearest rows (Euclidean). Distance ties go to
/// the lower training index; a split vote resolves toward negative.
inline BinaryPrediction knn_predict(const KnnModel& model, std::span<const double> query) {
    if (model.rows.empty() || query.size() != model.rows.front().size())
        throw DataError("knn: query dimension does not match training dimension");
    std::vector<std::pair<double, std::size_t>> dist(model.rows.size());
    for (std::size_t i = 0; i < model.rows.size(); ++i) dist[i] = {squared_distance(model.rows[i], query), i};
    const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(model.k);
    std::partial_sort(dist.begin(), kth, dist.end());
    std::size_t positive = 0;
    for (auto it = dist.begin(); it != kth; ++it) positive += model.labels[it->second] == 1;
    const double score = static_cast<double>(positive) / static_cast<double>(model.k);
    return {2 * positive > model.k ? 1 : 0, score};
}

inline nlohmann::json to_json(const KnnModel& m) {
    return {{"k", m.k}, {"rows", m.rows}, {"labels", m.labels}};
}

inline KnnModel knn_from_json(const nlohmann::json& j) {
    KnnModel m;
    m.k = j.at("k").get<std::size_t>();
    m.rows = j.at("rows").get<std::vector<std::vector<double>>>();
    m.labels = j.at("labels").get<std::vector<int>>();
    if (m.k < 1 || m.k > m.rows.size() || m.labels.size() != m.rows.size()) throw ModelError("knn artifact is inconsistent");
    return m;
}

}  // namespace mousedyn
