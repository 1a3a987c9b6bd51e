#pragma once

// Random forest of Gini decision trees. Bootstrap is off: every tree sees the
// full training set and randomness comes only from per-node feature sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"
#include "mousedyn/datasets.hpp"

namespace mousedyn {

struct ForestConfig {
    std::size_t tree_count = 1600;
    std::size_t max_depth = 30;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    std::size_t max_features = 0;  // 0 = ceil(sqrt(d))
    std::size_t workers = 1;

    static ForestConfig release() { return {}; }
    static ForestConfig ci() {
        ForestConfig c;
        c.tree_count = 200;
        return c;
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double positive_fraction = 0;
    std::size_t samples = 0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].positive_fraction;
    }

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            const auto& n = nodes[static_cast<std::size_t>(i)];
            if (n.feature >= 0) {
                stack.push_back({n.left, d + 1});
                stack.push_back({n.right, d + 1});
            }
        }
        return best;
    }
};

struct ForestModel {
    ForestConfig config;
    std::size_t dimension = 0;
    std::vector<DecisionTree> trees;
};

namespace detail {

struct SplitCandidate {
    int feature = -1;
    double threshold = 0;
    double gain = -1;
};

inline double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<std::vector<double>>& rows, const std::vector<char>& positive, const ForestConfig& cfg,
                std::size_t mtry, std::uint64_t seed)
        : rows_(rows), positive_(positive), cfg_(cfg), mtry_(mtry), rng_(seed) {}

    DecisionTree build() {
        std::vector<std::size_t> idx(rows_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        grow(idx, 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t>& idx, std::size_t depth) {
        const std::size_t n = idx.size();
        std::size_t pos = 0;
        for (std::size_t i : idx) pos += positive_[i];
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(TreeNode{-1, 0, -1, -1, static_cast<double>(pos) / static_cast<double>(n), n});

        if (depth >= cfg_.max_depth || n < cfg_.min_samples_split || pos == 0 || pos == n ||
            n < 2 * cfg_.min_samples_leaf)
            return id;

        const auto split = best_split(idx, pos);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx)
            (rows_[i][static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    // Samples features in random order; after the first mtry, keeps drawing
    // only until some valid (non-constant) split has been found.
    SplitCandidate best_split(const std::vector<std::size_t>& idx, std::size_t pos) {
        const std::size_t d = rows_.front().size();
        const auto order = rng_.sample_without_replacement(d, d);
        SplitCandidate best;
        const double parent = gini(pos, idx.size());
        std::vector<std::pair<double, char>> column(idx.size());
        for (std::size_t k = 0; k < d; ++k) {
            if (k >= mtry_ && best.feature >= 0) break;
            const std::size_t f = order[k];
            for (std::size_t j = 0; j < idx.size(); ++j) column[j] = {rows_[idx[j]][f], positive_[idx[j]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            const std::size_t n = column.size();
            std::size_t left_pos = 0;
            for (std::size_t j = 0; j + 1 < n; ++j) {
                left_pos += column[j].second;
                if (column[j].first == column[j + 1].first) continue;
                const std::size_t nl = j + 1, nr = n - nl;
                if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
                const double weighted = (static_cast<double>(nl) * gini(left_pos, nl) +
                                         static_cast<double>(nr) * gini(pos - left_pos, nr)) /
                                        static_cast<double>(n);
                const double gain = parent - weighted;
                if (gain > best.gain) {
                    double t = 0.5 * (column[j].first + column[j + 1].first);
                    if (t >= column[j + 1].first) t = column[j].first;
                    best = {static_cast<int>(f), t, gain};
                }
            }
        }
        return best;
    }

    const std::vector<std::vector<double>>& rows_;
    const std::vector<char>& positive_;
    const ForestConfig& cfg_;
    std::size_t mtry_;
    Rng rng_;
    DecisionTree tree_;
};

}  // namespace detail

/// Fits tree_count trees; tree t uses Rng(derive_seed(seed, t)) so the
/// result is independent of config.workers.
inline ForestModel rf_fit(const LabeledDataset<std::vector<double>>& train, const ForestConfig& config,
                          std::uint64_t seed) {
    if (train.size() < 2) throw DataError("rf: need at least 2 training rows");
    std::vector<char> positive(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) positive[i] = train.labels[i] == 1;
    const auto pos = std::count(positive.begin(), positive.end(), 1);
    if (pos == 0 || static_cast<std::size_t>(pos) == train.size())
        throw DataError("rf: training data must contain both classes");
    if (config.tree_count == 0) throw ConfigError("rf: tree_count must be >= 1");
    if (config.min_samples_leaf < 1 || config.min_samples_split < 2)
        throw ConfigError("rf: min_samples_leaf >= 1 and min_samples_split >= 2 required");

    const std::size_t d = train.rows.front().size();
    const std::size_t mtry = config.max_features > 0
                                 ? std::min(config.max_features, d)
                                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    ForestModel model{config, d, std::vector<DecisionTree>(config.tree_count)};
    const auto fit_range = [&](std::size_t worker, std::size_t workers) {
        for (std::size_t t = worker; t < config.tree_count; t += workers)
            model.trees[t] = detail::TreeBuilder(train.rows, positive, config, mtry, derive_seed(seed, t)).build();
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, config.tree_count));
    if (workers == 1) {
        fit_range(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fit_range, w, workers);
    }
    return model;
}

/// Mean positive-class fraction of the leaves the query lands in.
inline double rf_predict_proba(const ForestModel& model, std::span<const double> query) {
    if (query.size() != model.dimension) throw DataError("rf: query dimension mismatch");
    double sum = 0;
    for (const auto& tree : model.trees) sum += tree.predict(query);
    return sum / static_cast<double>(model.trees.size());
}

inline nlohmann::json to_json(const ForestModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                       left = nlohmann::json::array(), right = nlohmann::json::array(),
                       value = nlohmann::json::array(), samples = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.positive_fraction);
            samples.push_back(n.samples);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                         {"right", right},     {"value", value},         {"samples", samples}});
    }
    return {{"tree_count", m.config.tree_count},
            {"max_depth", m.config.max_depth},
            {"min_samples_split", m.config.min_samples_split},
            {"min_samples_leaf", m.config.min_samples_leaf},
            {"max_features", m.config.max_features},
            {"dimension", m.dimension},
            {"trees", trees}};
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    ForestModel m;
    m.config.tree_count = j.at("tree_count").get<std::size_t>();
    m.config.max_depth = j.at("max_depth").get<std::size_t>();
    m.config.min_samples_split = j.at("min_samples_split").get<std::size_t>();
    m.config.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    m.config.max_features = j.at("max_features").get<std::size_t>();
    m.dimension = j.at("dimension").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        DecisionTree t;
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto value = jt.at("value").get<std::vector<double>>();
        const auto samples = jt.at("samples").get<std::vector<std::size_t>>();
        for (std::size_t i = 0; i < feature.size(); ++i)
            t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i], samples[i]});
        if (t.nodes.empty()) throw ModelError("forest artifact has an empty tree");
        m.trees.push_back(std::move(t));
    }
    if (m.trees.empty()) throw ModelError("forest artifact has no trees");
    return m;
}

}  // namespace mousedyn
