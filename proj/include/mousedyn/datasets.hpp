#pragma once

// Balanced one-vs-rest datasets, the multi-class dataset, and seeded splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"
#include "mousedyn/features.hpp"

namespace mousedyn {

inline constexpr int kGenuine = 1;
inline constexpr int kImposter = 0;

struct Provenance {
    int subject = 0;
    std::size_t action_index = 0;

    auto operator<=>(const Provenance&) const = default;
};

/// Rows share one representation (feature vectors, speed signals, or coord
/// vectors). Binary labels: 1 genuine, 0 imposter. Multi-class labels are
/// subject ids.
template <typename Row>
struct LabeledDataset {
    std::vector<Row> rows;
    std::vector<int> labels;
    std::vector<Provenance> provenance;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    void push_back(Row row, int label, Provenance prov) {
        rows.push_back(std::move(row));
        labels.push_back(label);
        provenance.push_back(prov);
    }
};

/// Re-materializes the same rows (by provenance) in another representation.
template <typename Row, typename Fn>
auto map_rows(const LabeledDataset<Row>& ds, Fn&& fn) {
    using Out = std::decay_t<decltype(fn(ds.provenance.front()))>;
    LabeledDataset<Out> out;
    out.rows.reserve(ds.size());
    for (const auto& p : ds.provenance) out.rows.push_back(fn(p));
    out.labels = ds.labels;
    out.provenance = ds.provenance;
    return out;
}

/// Keeps rows selected by index, in the given order.
template <typename Row>
LabeledDataset<Row> subset(const LabeledDataset<Row>& ds, const std::vector<std::size_t>& idx) {
    LabeledDataset<Row> out;
    out.rows.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(ds.rows[i], ds.labels[i], ds.provenance[i]);
    return out;
}

template <typename Row>
using SamplesByUser = std::map<int, std::vector<Row>>;

/// Balanced one-vs-rest dataset for `target`.
///
/// All n target samples are positives. Each of the k-1 imposters contributes
/// floor(n/(k-1)) samples drawn without replacement; the remaining
/// r = n mod (k-1) negatives come one each from r distinct imposters (chosen
/// uniformly among those with spare samples), so per-imposter counts differ by
/// at most one. Sampling for imposter u uses Rng(derive_seed(seed, u, target)).
template <typename Row>
LabeledDataset<Row> build_binary_dataset(int target, const SamplesByUser<Row>& by_user, std::uint64_t seed) {
    const auto target_it = by_user.find(target);
    if (target_it == by_user.end()) throw DataError("binary dataset: target user " + std::to_string(target) + " not present");
    if (by_user.size() < 2) throw DataError("binary dataset: need at least 2 users");
    const std::size_t n = target_it->second.size();
    if (n == 0) throw DataError("binary dataset: target user " + std::to_string(target) + " has no samples");
    const std::size_t imposters = by_user.size() - 1;
    const std::size_t per_user = n / imposters;
    std::size_t remainder = n - imposters * per_user;

    for (const auto& [user, rows] : by_user)
        if (user != target && rows.size() < per_user)
            throw DataError("binary dataset: imposter user " + std::to_string(user) + " has " +
                            std::to_string(rows.size()) + " samples, needs " + std::to_string(per_user));

    std::map<int, std::vector<std::size_t>> picked;
    std::map<int, std::vector<std::size_t>> spare;
    for (const auto& [user, rows] : by_user) {
        if (user == target) continue;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(user), static_cast<std::uint64_t>(target)));
        auto perm = rng.sample_without_replacement(rows.size(), rows.size());
        picked[user].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(per_user));
        spare[user].assign(perm.begin() + static_cast<std::ptrdiff_t>(per_user), perm.end());
    }

    if (remainder > 0) {
        Rng rng(derive_seed(seed, 0xfeedfaceULL, static_cast<std::uint64_t>(target)));
        std::vector<int> candidates;
        for (const auto& [user, idx] : spare)
            if (!idx.empty()) candidates.push_back(user);
        rng.shuffle(candidates);
        for (std::size_t i = 0; i < candidates.size() && remainder > 0; ++i, --remainder) {
            auto& s = spare[candidates[i]];
            picked[candidates[i]].push_back(s.front());
            s.erase(s.begin());
        }
        // Fewer imposters with spares than needed: draw from the pooled rest.
        if (remainder > 0) {
            std::vector<Provenance> pool;
            for (const auto& [user, idx] : spare)
                for (std::size_t i : idx) pool.push_back({user, i});
            if (pool.size() < remainder)
                throw DataError("binary dataset: not enough imposter samples to balance target " + std::to_string(target));
            for (std::size_t i : rng.sample_without_replacement(pool.size(), remainder))
                picked[pool[i].subject].push_back(pool[i].action_index);
        }
    }

    LabeledDataset<Row> ds;
    ds.rows.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) ds.push_back(target_it->second[i], kGenuine, {target, i});
    for (auto& [user, idx] : picked) {
        std::sort(idx.begin(), idx.end());
        const auto& rows = by_user.at(user);
        for (std::size_t i : idx) ds.push_back(rows[i], kImposter, {user, i});
    }
    return ds;
}

/// Every sample of every user, labeled with its subject id.
template <typename Row>
LabeledDataset<Row> build_multiclass_dataset(const SamplesByUser<Row>& by_user) {
    if (by_user.size() < 2) throw DataError("multi-class dataset: need at least 2 users");
    LabeledDataset<Row> ds;
    for (const auto& [user, rows] : by_user)
        for (std::size_t i = 0; i < rows.size(); ++i) ds.push_back(rows[i], user, {user, i});
    return ds;
}

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

template <typename Row>
struct Split {
    LabeledDataset<Row> train;
    LabeledDataset<Row> test;
};

/// Seeded partition. Stratified mode shuffles each class with
/// Rng(derive_seed(seed, label)) and sends round(fraction * n_c) rows (at
/// least one, leaving at least one) to train. Both partitions keep the
/// original row order.
template <typename Row>
Split<Row> train_test_split(const LabeledDataset<Row>& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0, 1)");
    std::vector<char> in_train(ds.size(), 0);
    if (spec.stratified) {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
        for (auto& [label, idx] : by_class) {
            if (idx.size() < 2)
                throw DataError("split: class " + std::to_string(label) + " has fewer than 2 rows");
            Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(label))));
            rng.shuffle(idx);
            auto take = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
            take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
            for (std::size_t i = 0; i < take; ++i) in_train[idx[i]] = 1;
        }
    } else {
        if (ds.size() < 2) throw DataError("split: need at least 2 rows");
        std::vector<std::size_t> idx(ds.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(derive_seed(spec.seed, 0x5b117ULL));
        rng.shuffle(idx);
        auto take = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        for (std::size_t i = 0; i < take; ++i) in_train[idx[i]] = 1;
    }
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.size(); ++i) (in_train[i] ? train_idx : test_idx).push_back(i);
    return {subset(ds, train_idx), subset(ds, test_idx)};
}

/// Reproducibility record emitted alongside every dataset.
struct DatasetManifest {
    std::string kind;  // "binary" or "multiclass"
    std::optional<int> target;
    std::uint64_t seed = 0;
    SplitSpec split;
    std::size_t block_len = kDefaultBlockLen;
    std::map<int, std::size_t> per_user_counts;  // rows contributed per subject
    std::size_t rows = 0;
    int feature_order_version = kFeatureOrderVersion;
    std::string source_fingerprint;  // identifies the ingested session store
};

template <typename Row>
DatasetManifest describe_dataset(const LabeledDataset<Row>& ds, std::string kind, std::optional<int> target,
                                 std::uint64_t seed, const SplitSpec& split, std::size_t block_len,
                                 std::string fingerprint) {
    DatasetManifest m;
    m.kind = std::move(kind);
    m.target = target;
    m.seed = seed;
    m.split = split;
    m.block_len = block_len;
    m.rows = ds.size();
    for (const auto& p : ds.provenance) ++m.per_user_counts[p.subject];
    m.source_fingerprint = std::move(fingerprint);
    return m;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [user, c] : m.per_user_counts) counts[std::to_string(user)] = c;
    nlohmann::json j = {
        {"kind", m.kind},
        {"seed", m.seed},
        {"split", {{"train_fraction", m.split.train_fraction}, {"seed", m.split.seed}, {"stratified", m.split.stratified}}},
        {"block_len", m.block_len},
        {"per_user_counts", counts},
        {"rows", m.rows},
        {"feature_order_version", m.feature_order_version},
        {"source_fingerprint", m.source_fingerprint},
    };
    j["target"] = m.target ? nlohmann::json(*m.target) : nlohmann::json(nullptr);
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.kind = j.at("kind").get<std::string>();
    if (!j.at("target").is_null()) m.target = j.at("target").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split.train_fraction = j.at("split").at("train_fraction").get<double>();
    m.split.seed = j.at("split").at("seed").get<std::uint64_t>();
    m.split.stratified = j.at("split").at("stratified").get<bool>();
    m.block_len = j.at("block_len").get<std::size_t>();
    for (const auto& [user, c] : j.at("per_user_counts").items()) m.per_user_counts[std::stoi(user)] = c.get<std::size_t>();
    m.rows = j.at("rows").get<std::size_t>();
    m.feature_order_version = j.at("feature_order_version").get<int>();
    m.source_fingerprint = j.at("source_fingerprint").get<std::string>();
    return m;
}

inline nlohmann::json provenance_to_json(const std::vector<Provenance>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back({p.subject, p.action_index});
    return arr;
}

inline std::vector<Provenance> provenance_from_json(const nlohmann::json& arr) {
    std::vector<Provenance> out;
    out.reserve(arr.size());
    for (const auto& e : arr) out.push_back({e.at(0).get<int>(), e.at(1).get<std::size_t>()});
    return out;
}

}  // namespace mousedyn
