#pragma once

// Confusion-based rates, ROC/AUC, equal error rate and top-10 aggregation.
// Positive class = genuine user, so FPR is the fraction of imposters accepted.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mousedyn/common.hpp"

namespace mousedyn {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Predicts genuine iff score >= threshold.
inline ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    if (scores.size() != labels.size()) throw DataError("confusion: scores and labels differ in length");
    if (scores.empty()) throw DataError("confusion: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool accept = scores[i] >= threshold;
        if (labels[i] == 1)
            accept ? ++c.tp : ++c.fn;
        else
            accept ? ++c.fp : ++c.tn;
    }
    return c;
}

struct Rates {
    double acc = 0, fpr = 0, fnr = 0, precision = 0, recall = 0, f1 = 0;
    // Set when the corresponding ratio was 0/0 and has been reported as 0.
    bool fpr_degenerate = false, fnr_degenerate = false, precision_degenerate = false, recall_degenerate = false,
         f1_degenerate = false;
};

inline Rates rates(const ConfusionCounts& c) {
    Rates r;
    const auto ratio = [](std::size_t num, std::size_t den, bool& flag) {
        if (den == 0) {
            flag = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    bool acc_flag = false;
    r.acc = ratio(c.tp + c.tn, c.total(), acc_flag);
    r.fpr = ratio(c.fp, c.fp + c.tn, r.fpr_degenerate);
    r.fnr = ratio(c.fn, c.fn + c.tp, r.fnr_degenerate);
    r.precision = ratio(c.tp, c.tp + c.fp, r.precision_degenerate);
    r.recall = ratio(c.tp, c.tp + c.fn, r.recall_degenerate);
    if (r.precision + r.recall > 0)
        r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.f1_degenerate = true;
    return r;
}

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    // Ascending threshold; the last point uses +inf and sits at (0, 0).
    std::vector<RocPoint> points;
    double auc = 0;
};

namespace detail {

inline void require_both_classes(std::span<const double> scores, std::span<const int> labels, const char* who) {
    if (scores.size() != labels.size()) throw DataError(std::string(who) + ": scores and labels differ in length");
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || static_cast<std::size_t>(pos) == labels.size())
        throw DataError(std::string(who) + ": both classes must be present");
}

/// (threshold, #neg >= t, #pos >= t) at each unique score plus +inf.
struct SweepStep {
    double threshold;
    std::size_t neg_accepted;
    std::size_t pos_accepted;
};

inline std::vector<SweepStep> sweep(std::span<const double> scores, std::span<const int> labels, std::size_t& pos,
                                    std::size_t& neg) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    neg = labels.size() - pos;
    std::vector<SweepStep> steps;
    std::size_t neg_acc = neg, pos_acc = pos;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = scores[order[i]];
        steps.push_back({t, neg_acc, pos_acc});
        while (i < order.size() && scores[order[i]] == t) {
            labels[order[i]] == 1 ? --pos_acc : --neg_acc;
            ++i;
        }
    }
    steps.push_back({std::numeric_limits<double>::infinity(), 0, 0});
    return steps;
}

}  // namespace detail

/// ROC over unique-score thresholds; AUC by the trapezoidal rule, which
/// equals the pair-counting probability with ties weighted 1/2.
inline RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "roc");
    std::size_t pos = 0, neg = 0;
    const auto steps = detail::sweep(scores, labels, pos, neg);
    RocCurve curve;
    curve.points.reserve(steps.size());
    for (const auto& s : steps)
        curve.points.push_back({s.threshold, static_cast<double>(s.neg_accepted) / static_cast<double>(neg),
                                static_cast<double>(s.pos_accepted) / static_cast<double>(pos)});
    // Integrate in counts, normalize once: keeps the result exact for small n.
    double area2 = 0;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        const double dn = static_cast<double>(steps[i].neg_accepted - steps[i + 1].neg_accepted);
        area2 += dn * static_cast<double>(steps[i].pos_accepted + steps[i + 1].pos_accepted);
    }
    curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

/// Equal error rate: sweeps thresholds and linearly interpolates between the
/// adjacent operating points where FPR - FNR changes sign.
inline double eer(std::span<const double> scores, std::span<const int> labels) {
    detail::require_both_classes(scores, labels, "eer");
    std::size_t pos = 0, neg = 0;
    const auto steps = detail::sweep(scores, labels, pos, neg);
    const auto fpr = [&](const detail::SweepStep& s) { return static_cast<double>(s.neg_accepted) / static_cast<double>(neg); };
    const auto fnr = [&](const detail::SweepStep& s) {
        return static_cast<double>(pos - s.pos_accepted) / static_cast<double>(pos);
    };
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const double d = fpr(steps[i]) - fnr(steps[i]);
        if (d == 0.0) return fpr(steps[i]);
        if (d < 0.0) {
            // i > 0 because the first step has FNR = 0.
            const double f0 = fpr(steps[i - 1]), n0 = fnr(steps[i - 1]);
            const double f1 = fpr(steps[i]), n1 = fnr(steps[i]);
            const double lambda = (f0 - n0) / ((f0 - n0) - (f1 - n1));
            return f0 + lambda * (f1 - f0);
        }
    }
    return 1.0;  // unreachable: the +inf step has FPR 0, FNR 1
}

/// Metrics of one user's binary model on its evaluation partition.
struct UserMetrics {
    int user = 0;
    double acc = 0, fpr = 0, fnr = 0, precision = 0, recall = 0, f1 = 0, auc = 0, eer = 0;
};

inline UserMetrics evaluate_scores(int user, std::span<const double> scores, std::span<const int> labels) {
    const auto r = rates(confusion(scores, labels));
    UserMetrics m{user, r.acc, r.fpr, r.fnr, r.precision, r.recall, r.f1, 0, 0};
    m.auc = roc(scores, labels).auc;
    m.eer = eer(scores, labels);
    return m;
}

struct MetricSummary {
    double mean = 0;
    double stddev = 0;  // population
};

struct Aggregate {
    std::vector<int> users;  // selected, by descending ACC
    bool fewer_than_ten = false;
    std::map<std::string, MetricSummary> metrics;
};

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"acc", "fpr", "fnr", "precision", "recall", "f1", "auc", "eer"};
    return names;
}

inline double metric_value(const UserMetrics& m, const std::string& name) {
    if (name == "acc") return m.acc;
    if (name == "fpr") return m.fpr;
    if (name == "fnr") return m.fnr;
    if (name == "precision") return m.precision;
    if (name == "recall") return m.recall;
    if (name == "f1") return m.f1;
    if (name == "auc") return m.auc;
    if (name == "eer") return m.eer;
    throw ConfigError("unknown metric '" + name + "'");
}

/// Sorts by ACC descending (ties: lower user id first).
inline std::vector<UserMetrics> rank_by_accuracy(std::vector<UserMetrics> per_user) {
    std::sort(per_user.begin(), per_user.end(), [](const UserMetrics& a, const UserMetrics& b) {
        return a.acc != b.acc ? a.acc > b.acc : a.user < b.user;
    });
    return per_user;
}

/// Mean and population std of every metric over the 10 most accurate users.
inline Aggregate aggregate_top10(std::span<const UserMetrics> per_user) {
    if (per_user.empty()) throw DataError("aggregate_top10: no users");
    auto ranked = rank_by_accuracy({per_user.begin(), per_user.end()});
    Aggregate agg;
    agg.fewer_than_ten = ranked.size() < 10;
    if (ranked.size() > 10) ranked.resize(10);
    for (const auto& m : ranked) agg.users.push_back(m.user);
    const auto n = static_cast<double>(ranked.size());
    for (const auto& name : metric_names()) {
        // Shifted by the first value so identical records give exactly std 0.
        const double origin = metric_value(ranked.front(), name);
        double shifted = 0;
        for (const auto& m : ranked) shifted += metric_value(m, name) - origin;
        const double mean = origin + shifted / n;
        double ss = 0;
        for (const auto& m : ranked) ss += (metric_value(m, name) - mean) * (metric_value(m, name) - mean);
        agg.metrics[name] = {mean, std::sqrt(ss / n)};
    }
    return agg;
}

inline nlohmann::json to_json(const UserMetrics& m) {
    return {{"user", m.user}, {"acc", m.acc}, {"fpr", m.fpr},   {"fnr", m.fnr},
            {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"auc", m.auc}, {"eer", m.eer}};
}

inline UserMetrics user_metrics_from_json(const nlohmann::json& j) {
    UserMetrics m;
    m.user = j.at("user").get<int>();
    for (const auto& name : metric_names()) {
        const double v = j.at(name).get<double>();
        if (name == "acc") m.acc = v;
        else if (name == "fpr") m.fpr = v;
        else if (name == "fnr") m.fnr = v;
        else if (name == "precision") m.precision = v;
        else if (name == "recall") m.recall = v;
        else if (name == "f1") m.f1 = v;
        else if (name == "auc") m.auc = v;
        else if (name == "eer") m.eer = v;
    }
    return m;
}

inline nlohmann::json to_json(const Aggregate& a) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [name, s] : a.metrics) metrics[name] = {{"mean", s.mean}, {"std", s.stddev}};
    return {{"users", a.users},
            {"fewer_than_ten", a.fewer_than_ten},
            {"std_kind", "population"},
            {"metrics", metrics}};
}

}  // namespace mousedyn
