#pragma once

// End-to-end glue: sessions -> actions -> per-representation samples ->
// datasets -> fitted models -> model artifacts -> evaluation.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mousedyn/actions.hpp"
#include "mousedyn/datasets.hpp"
#include "mousedyn/events.hpp"
#include "mousedyn/features.hpp"
#include "mousedyn/forest.hpp"
#include "mousedyn/knn.hpp"
#include "mousedyn/metrics.hpp"
#include "mousedyn/neural.hpp"
#include "mousedyn/svm.hpp"

namespace mousedyn {

inline constexpr int kArtifactFormatVersion = 1;
inline constexpr const char* kArtifactFormat = "mousedyn-model";

enum class ModelKind { knn, rf, svm, cnn, ann };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::knn: return "knn";
        case ModelKind::rf: return "rf";
        case ModelKind::svm: return "svm";
        case ModelKind::cnn: return "cnn";
        case ModelKind::ann: return "ann";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "knn") return ModelKind::knn;
    if (s == "rf") return ModelKind::rf;
    if (s == "svm") return ModelKind::svm;
    if (s == "cnn") return ModelKind::cnn;
    if (s == "ann") return ModelKind::ann;
    throw ConfigError("unknown model kind '" + s + "' (expected knn|rf|svm|cnn|ann)");
}

inline bool is_binary(ModelKind k) { return k != ModelKind::ann; }
inline bool is_classical(ModelKind k) { return k == ModelKind::knn || k == ModelKind::rf || k == ModelKind::svm; }

enum class Preset { release, ci };

inline Preset preset_from_string(const std::string& s) {
    if (s == "release") return Preset::release;
    if (s == "ci") return Preset::ci;
    throw ConfigError("unknown preset '" + s + "' (expected release|ci)");
}

inline std::string to_string(Preset p) { return p == Preset::release ? "release" : "ci"; }

struct PipelineConfig {
    ModelKind kind = ModelKind::rf;
    Preset preset = Preset::release;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    std::size_t knn_k = kDefaultK;
    ForestConfig forest = ForestConfig::release();
    SvmConfig svm;
    TrainConfig neural;
    CnnSpec cnn;
    AnnSpec ann;

    /// release: 1600 trees, 100 epochs. ci: 200 trees, 20 epochs.
    static PipelineConfig make(ModelKind kind, Preset preset, std::uint64_t seed) {
        PipelineConfig c;
        c.kind = kind;
        c.preset = preset;
        c.seed = seed;
        c.forest = preset == Preset::release ? ForestConfig::release() : ForestConfig::ci();
        c.neural.epochs = preset == Preset::release ? 100 : 20;
        c.neural.batch_size = 64;
        c.neural.seed = seed;
        return c;
    }
};

/// FNV-1a over a byte string, as 16 hex digits.
inline std::string fingerprint(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return out;
}

inline std::string fingerprint(const std::vector<Session>& sessions) {
    std::ostringstream os;
    serialize_events(os, sessions);
    return fingerprint(os.str());
}

/// All mouse actions of every user with their three model representations.
struct Corpus {
    std::size_t block_len = kDefaultBlockLen;
    std::string fingerprint;
    std::map<int, std::vector<MouseAction>> actions;
    SamplesByUser<std::vector<double>> features;  // unscaled 33-slot vectors
    SamplesByUser<Matrix> speed_signals;          // block_len x 2
    SamplesByUser<std::vector<double>> coords;    // 2 * block_len

    static Corpus build(const std::vector<Session>& sessions, std::size_t block_len = kDefaultBlockLen) {
        Corpus c;
        c.block_len = block_len;
        c.fingerprint = mousedyn::fingerprint(sessions);
        for (const auto& s : sessions) {
            auto acts = segment(s, block_len);
            if (acts.empty()) continue;
            auto& f = c.features[s.subject];
            auto& sig = c.speed_signals[s.subject];
            auto& xy = c.coords[s.subject];
            for (const auto& a : acts) {
                const auto kin = compute_kinematics(a);
                f.push_back(extract_features(kin, a).to_vector());
                sig.push_back(to_speed_signal(kin));
                xy.push_back(to_coord_vector(a));
            }
            c.actions[s.subject] = std::move(acts);
        }
        return c;
    }

    std::vector<int> users() const {
        std::vector<int> out;
        for (const auto& [u, _] : actions) out.push_back(u);
        return out;
    }

    const std::vector<double>& feature(const Provenance& p) const { return lookup(features, p); }
    const Matrix& speed_signal(const Provenance& p) const { return lookup(speed_signals, p); }
    const std::vector<double>& coord(const Provenance& p) const { return lookup(coords, p); }

private:
    template <typename Row>
    static const Row& lookup(const SamplesByUser<Row>& m, const Provenance& p) {
        const auto it = m.find(p.subject);
        if (it == m.end() || p.action_index >= it->second.size())
            throw DataError("no action " + std::to_string(p.action_index) + " for subject " + std::to_string(p.subject));
        return it->second[p.action_index];
    }
};

inline nlohmann::json to_json(const ScalerParams& s) { return {{"min", s.min}, {"max", s.max}}; }

inline ScalerParams scaler_from_json(const nlohmann::json& j) {
    ScalerParams s{j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>()};
    if (s.min.size() != s.max.size()) throw ModelError("scaler params are inconsistent");
    return s;
}

inline Matrix as_row_matrix(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

/// The balanced dataset for `target` and its train/test partition. Sampling
/// uses the run seed; the split seed is derived from (seed, target).
struct BinaryPartition {
    LabeledDataset<std::vector<double>> dataset;
    Split<std::vector<double>> split;
    SplitSpec spec;
};

inline BinaryPartition binary_partition(const Corpus& corpus, int target, const PipelineConfig& cfg) {
    BinaryPartition p;
    p.dataset = build_binary_dataset(target, corpus.features, cfg.seed);
    p.spec = SplitSpec{cfg.train_fraction, derive_seed(cfg.seed, static_cast<std::uint64_t>(target), 0x5b1175ULL), true};
    p.split = train_test_split(p.dataset, p.spec);
    return p;
}

inline nlohmann::json artifact_header(const PipelineConfig& cfg, const Corpus& corpus) {
    return {{"format", kArtifactFormat},
            {"format_version", kArtifactFormatVersion},
            {"kind", to_string(cfg.kind)},
            {"preset", to_string(cfg.preset)},
            {"seed", cfg.seed},
            {"block_len", corpus.block_len},
            {"feature_order_version", kFeatureOrderVersion}};
}

inline nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
    nlohmann::json h = nlohmann::json::array();
    for (const auto& r : history) h.push_back(to_json(r));
    return h;
}

/// Trains one binary (one-vs-rest) model for `target` and returns its
/// artifact document.
inline nlohmann::json train_binary(const Corpus& corpus, int target, const PipelineConfig& cfg) {
    if (!is_binary(cfg.kind)) throw ConfigError("train_binary: model kind must be binary");
    const auto part = binary_partition(corpus, target, cfg);
    const auto& train_part = part.split.train;
    auto artifact = artifact_header(cfg, corpus);
    artifact["target"] = target;
    artifact["dataset_manifest"] = to_json(describe_dataset(part.dataset, "binary", target, cfg.seed, part.spec,
                                                            corpus.block_len, corpus.fingerprint));
    artifact["test_provenance"] = provenance_to_json(part.split.test.provenance);

    try {
        if (is_classical(cfg.kind)) {
            const auto scaler = fit_scaler(train_part.rows);
            LabeledDataset<std::vector<double>> scaled = train_part;
            for (auto& r : scaled.rows) r = apply_scaler(scaler, r);
            artifact["scaler"] = to_json(scaler);
            switch (cfg.kind) {
                case ModelKind::knn:
                    artifact["hyperparameters"] = {{"k", cfg.knn_k}, {"metric", "euclidean"}};
                    artifact["model"] = to_json(knn_fit(scaled, cfg.knn_k));
                    break;
                case ModelKind::rf:
                    artifact["hyperparameters"] = {{"tree_count", cfg.forest.tree_count},
                                                   {"max_depth", cfg.forest.max_depth},
                                                   {"min_samples_split", cfg.forest.min_samples_split},
                                                   {"min_samples_leaf", cfg.forest.min_samples_leaf},
                                                   {"max_features", "sqrt"},
                                                   {"bootstrap", false},
                                                   {"criterion", "gini"}};
                    artifact["model"] = to_json(rf_fit(scaled, cfg.forest, derive_seed(cfg.seed, static_cast<std::uint64_t>(target))));
                    break;
                case ModelKind::svm: {
                    const auto model = svm_fit(scaled, cfg.svm);
                    artifact["hyperparameters"] = {{"c", cfg.svm.c}, {"gamma", model.gamma}, {"kernel", "rbf"},
                                                   {"tol", cfg.svm.tol}, {"max_passes", cfg.svm.max_passes}};
                    artifact["model"] = to_json(model);
                    break;
                }
                default: break;
            }
        } else {
            const auto train_sig = map_rows(train_part, [&](const Provenance& p) { return corpus.speed_signal(p); });
            const auto test_sig = map_rows(part.split.test, [&](const Provenance& p) { return corpus.speed_signal(p); });
            CnnSpec spec = cfg.cnn;
            spec.timesteps = corpus.block_len;
            TrainConfig tc = cfg.neural;
            tc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(target), 0xc77ULL);
            auto net = build_cnn(spec, derive_seed(tc.seed, 0x1417ULL));
            auto result = mousedyn::train(std::move(net), tc, train_sig.rows, train_sig.labels, test_sig.rows, test_sig.labels);
            artifact["hyperparameters"] = {{"filters1", spec.filters1}, {"width1", spec.width1},
                                           {"filters2", spec.filters2}, {"width2", spec.width2},
                                           {"dense", spec.dense},       {"epochs", tc.epochs},
                                           {"batch_size", tc.batch_size}, {"learning_rate", tc.adam.learning_rate},
                                           {"decay", tc.adam.decay}};
            artifact["model"] = to_json(result.network);
            artifact["history"] = history_to_json(result.history);
            artifact["best_epoch"] = result.best_epoch;
            artifact["training_seed"] = tc.seed;
        }
    } catch (const Error& e) {
        throw ModelError("user " + std::to_string(target) + ": " + e.what());
    }
    return artifact;
}

/// Multi-class coordinate network over every user; class = subject id.
inline nlohmann::json train_multiclass(const Corpus& corpus, const PipelineConfig& cfg) {
    if (cfg.kind != ModelKind::ann) throw ConfigError("train_multiclass: model kind must be ann");
    const auto ds = build_multiclass_dataset(corpus.coords);
    const SplitSpec spec{cfg.train_fraction, derive_seed(cfg.seed, 0xa22ULL), true};
    const auto split = train_test_split(ds, spec);
    const auto to_matrix = [](const LabeledDataset<std::vector<double>>& d) {
        std::vector<Matrix> m;
        m.reserve(d.size());
        for (const auto& r : d.rows) m.push_back(as_row_matrix(r));
        return m;
    };
    AnnSpec spec_net = cfg.ann;
    spec_net.input = 2 * corpus.block_len;
    spec_net.classes = static_cast<std::size_t>(corpus.users().back()) + 1;
    TrainConfig tc = cfg.neural;
    tc.seed = derive_seed(cfg.seed, 0xa22ULL, 1);
    auto net = build_ann(spec_net, derive_seed(tc.seed, 0x1417ULL));
    TrainResult result;
    try {
        result = mousedyn::train(std::move(net), tc, to_matrix(split.train), split.train.labels, to_matrix(split.test), split.test.labels);
    } catch (const Error& e) {
        throw ModelError(std::string("ann: ") + e.what());
    }

    auto artifact = artifact_header(cfg, corpus);
    artifact["target"] = nullptr;
    artifact["classes"] = spec_net.classes;
    artifact["dataset_manifest"] =
        to_json(describe_dataset(ds, "multiclass", std::nullopt, cfg.seed, spec, corpus.block_len, corpus.fingerprint));
    artifact["test_provenance"] = provenance_to_json(split.test.provenance);
    artifact["train_provenance"] = provenance_to_json(split.train.provenance);
    artifact["hyperparameters"] = {{"hidden", spec_net.hidden},   {"classes", spec_net.classes},
                                   {"epochs", tc.epochs},          {"batch_size", tc.batch_size},
                                   {"learning_rate", tc.adam.learning_rate}, {"decay", tc.adam.decay}};
    artifact["model"] = to_json(result.network);
    artifact["history"] = history_to_json(result.history);
    artifact["best_epoch"] = result.best_epoch;
    artifact["training_seed"] = tc.seed;
    return artifact;
}

/// Checks format and version fields of a loaded artifact.
inline void validate_artifact(const nlohmann::json& a) {
    if (!a.is_object() || a.value("format", "") != kArtifactFormat) throw ModelError("not a model artifact");
    if (a.at("format_version").get<int>() != kArtifactFormatVersion)
        throw DataError("artifact format version " + std::to_string(a.at("format_version").get<int>()) +
                        " is not supported (expected " + std::to_string(kArtifactFormatVersion) + ")");
    if (a.at("feature_order_version").get<int>() != kFeatureOrderVersion)
        throw DataError("artifact feature order version does not match this build");
}

/// Scores single mouse actions with a binary model artifact (genuine
/// probability-like value in [0, 1]).
class BinaryScorer {
public:
    explicit BinaryScorer(const nlohmann::json& artifact) {
        validate_artifact(artifact);
        kind_ = model_kind_from_string(artifact.at("kind").get<std::string>());
        if (!is_binary(kind_)) throw ModelError("artifact of kind ann is not a binary model");
        block_len_ = artifact.at("block_len").get<std::size_t>();
        const auto& m = artifact.at("model");
        switch (kind_) {
            case ModelKind::knn: knn_ = knn_from_json(m); break;
            case ModelKind::rf: forest_ = forest_from_json(m); break;
            case ModelKind::svm: svm_ = svm_from_json(m); break;
            case ModelKind::cnn: cnn_ = network_from_json(m); break;
            case ModelKind::ann: break;
        }
        if (is_classical(kind_)) scaler_ = scaler_from_json(artifact.at("scaler"));
    }

    ModelKind kind() const { return kind_; }
    std::size_t block_len() const { return block_len_; }

    double score_features(const std::vector<double>& raw) const {
        const auto x = apply_scaler(scaler_, raw);
        switch (kind_) {
            case ModelKind::knn: return knn_predict(knn_, x).score;
            case ModelKind::rf: return rf_predict_proba(forest_, x);
            case ModelKind::svm: return svm_score(svm_, x);
            default: throw ModelError("score_features: not a feature-based model");
        }
    }

    double score_signal(const Matrix& signal) const { return predict(cnn_, signal).data()[0]; }

    double score(const MouseAction& action) const {
        if (action.events.size() != block_len_)
            throw DataError("action has " + std::to_string(action.events.size()) + " events, model expects " +
                            std::to_string(block_len_));
        const auto kin = compute_kinematics(action);
        if (kind_ == ModelKind::cnn) return score_signal(to_speed_signal(kin));
        return score_features(extract_features(kin, action).to_vector());
    }

private:
    ModelKind kind_ = ModelKind::rf;
    std::size_t block_len_ = kDefaultBlockLen;
    ScalerParams scaler_;
    KnnModel knn_;
    ForestModel forest_;
    SvmModel svm_;
    Network cnn_;
};

inline void check_artifact_matches(const nlohmann::json& artifact, const Corpus& corpus) {
    validate_artifact(artifact);
    const auto manifest = manifest_from_json(artifact.at("dataset_manifest"));
    if (manifest.source_fingerprint != corpus.fingerprint)
        throw DataError("artifact was trained on a different session store (fingerprint " + manifest.source_fingerprint +
                        ", data has " + corpus.fingerprint + ")");
    if (manifest.block_len != corpus.block_len || artifact.at("block_len").get<std::size_t>() != corpus.block_len)
        throw DataError("artifact block length does not match the data");
    if (manifest.feature_order_version != kFeatureOrderVersion)
        throw DataError("artifact dataset manifest has a different feature order version");
}

struct UserEvaluation {
    UserMetrics metrics;
    RocCurve roc;
};

/// Scores the artifact's held-out partition.
inline UserEvaluation evaluate_binary(const nlohmann::json& artifact, const Corpus& corpus) {
    check_artifact_matches(artifact, corpus);
    const BinaryScorer scorer(artifact);
    const int target = artifact.at("target").get<int>();
    const auto test = provenance_from_json(artifact.at("test_provenance"));
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : test) {
        scores.push_back(scorer.kind() == ModelKind::cnn ? scorer.score_signal(corpus.speed_signal(p))
                                                          : scorer.score_features(corpus.feature(p)));
        labels.push_back(p.subject == target ? kGenuine : kImposter);
    }
    UserEvaluation ev;
    ev.metrics = evaluate_scores(target, scores, labels);
    ev.roc = roc(scores, labels);
    return ev;
}

struct MulticlassEvaluation {
    double peak_train_accuracy = 0;  // best train accuracy seen in any epoch
    double peak_test_accuracy = 0;   // test accuracy of the checkpointed network
    double final_train_accuracy = 0;  // checkpointed network on the train partition
    std::size_t classes = 0;
    std::size_t test_rows = 0;
};

inline MulticlassEvaluation evaluate_multiclass(const nlohmann::json& artifact, const Corpus& corpus) {
    check_artifact_matches(artifact, corpus);
    if (artifact.at("kind").get<std::string>() != "ann") throw ModelError("evaluate_multiclass: not an ann artifact");
    const auto net = network_from_json(artifact.at("model"));
    const auto accuracy = [&](const std::vector<Provenance>& ps) {
        std::size_t correct = 0;
        for (const auto& p : ps)
            correct += predicted_label(net, predict(net, as_row_matrix(corpus.coord(p)))) == p.subject;
        return ps.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(ps.size());
    };
    MulticlassEvaluation ev;
    const auto test = provenance_from_json(artifact.at("test_provenance"));
    ev.peak_test_accuracy = accuracy(test);
    ev.final_train_accuracy = accuracy(provenance_from_json(artifact.at("train_provenance")));
    for (const auto& r : artifact.at("history")) ev.peak_train_accuracy = std::max(ev.peak_train_accuracy, r.at("train_accuracy").get<double>());
    ev.classes = artifact.at("classes").get<std::size_t>();
    ev.test_rows = test.size();
    return ev;
}

/// Runs fn(0..n-1) over `workers` threads. Exceptions are collected and the
/// one from the lowest index is rethrown, so failures do not depend on
/// scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    workers = std::max<std::size_t>(1, std::min(workers, n));
    const auto run = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// One binary artifact per user, keyed by user id.
inline std::map<int, nlohmann::json> train_all_binary(const Corpus& corpus, const PipelineConfig& cfg,
                                                      std::size_t workers = 1) {
    const auto users = corpus.users();
    if (users.size() < 2) throw DataError("binary training needs at least 2 users with complete actions");
    std::vector<nlohmann::json> out(users.size());
    PipelineConfig per_user = cfg;
    if (workers > 1) per_user.forest.workers = 1;
    parallel_for(users.size(), workers, [&](std::size_t i) { out[i] = train_binary(corpus, users[i], per_user); });
    std::map<int, nlohmann::json> by_user;
    for (std::size_t i = 0; i < users.size(); ++i) by_user[users[i]] = std::move(out[i]);
    return by_user;
}

inline std::vector<UserEvaluation> evaluate_all_binary(const std::map<int, nlohmann::json>& artifacts,
                                                       const Corpus& corpus, std::size_t workers = 1) {
    std::vector<const nlohmann::json*> list;
    for (const auto& [_, a] : artifacts) list.push_back(&a);
    std::vector<UserEvaluation> out(list.size());
    parallel_for(list.size(), workers, [&](std::size_t i) { out[i] = evaluate_binary(*list[i], corpus); });
    return out;
}

}  // namespace mousedyn
