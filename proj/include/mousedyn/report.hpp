#pragma once

// Evaluation reports: structured documents, text tables, ROC point files and
// SVG overlays, plus the cross-model comparison table.

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mousedyn/metrics.hpp"
#include "mousedyn/pipeline.hpp"

namespace mousedyn {

inline constexpr int kReportFormatVersion = 1;
inline constexpr const char* kReportFormat = "mousedyn-report";

struct UserRoc {
    int user = 0;
    RocCurve curve;
};

struct EvalReport {
    ModelKind kind = ModelKind::rf;
    std::string preset;
    std::uint64_t seed = 0;
    std::string partition = "test";
    std::string source_fingerprint;
    std::vector<UserMetrics> users;  // by descending ACC
    std::optional<Aggregate> aggregate;
    std::vector<UserRoc> rocs;
    std::optional<MulticlassEvaluation> multiclass;
};

inline nlohmann::json to_json(const RocCurve& c) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : c.points)
        pts.push_back({std::isinf(p.threshold) ? nlohmann::json(nullptr) : nlohmann::json(p.threshold), p.fpr, p.tpr});
    return {{"auc", c.auc}, {"points", pts}};
}

inline RocCurve roc_from_json(const nlohmann::json& j) {
    RocCurve c;
    c.auc = j.at("auc").get<double>();
    for (const auto& p : j.at("points"))
        c.points.push_back({p.at(0).is_null() ? std::numeric_limits<double>::infinity() : p.at(0).get<double>(),
                            p.at(1).get<double>(), p.at(2).get<double>()});
    return c;
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j = {{"format", kReportFormat},
                        {"format_version", kReportFormatVersion},
                        {"kind", to_string(r.kind)},
                        {"preset", r.preset},
                        {"seed", r.seed},
                        {"partition", r.partition},
                        {"source_fingerprint", r.source_fingerprint}};
    if (r.multiclass) {
        j["peak_train_accuracy"] = r.multiclass->peak_train_accuracy;
        j["peak_test_accuracy"] = r.multiclass->peak_test_accuracy;
        j["final_train_accuracy"] = r.multiclass->final_train_accuracy;
        j["classes"] = r.multiclass->classes;
        j["test_rows"] = r.multiclass->test_rows;
        return j;
    }
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : r.users) users.push_back(to_json(u));
    j["users"] = users;
    j["aggregate"] = r.aggregate ? to_json(*r.aggregate) : nlohmann::json(nullptr);
    nlohmann::json rocs = nlohmann::json::object();
    for (const auto& u : r.rocs) rocs[std::to_string(u.user)] = to_json(u.curve);
    j["roc"] = rocs;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != kReportFormat) throw DataError("not an evaluation report");
    if (j.at("format_version").get<int>() != kReportFormatVersion) throw DataError("unsupported report format version");
    EvalReport r;
    r.kind = model_kind_from_string(j.at("kind").get<std::string>());
    r.preset = j.at("preset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.partition = j.at("partition").get<std::string>();
    r.source_fingerprint = j.at("source_fingerprint").get<std::string>();
    if (r.kind == ModelKind::ann) {
        MulticlassEvaluation m;
        m.peak_train_accuracy = j.at("peak_train_accuracy").get<double>();
        m.peak_test_accuracy = j.at("peak_test_accuracy").get<double>();
        m.final_train_accuracy = j.at("final_train_accuracy").get<double>();
        m.classes = j.at("classes").get<std::size_t>();
        m.test_rows = j.at("test_rows").get<std::size_t>();
        r.multiclass = m;
        return r;
    }
    for (const auto& u : j.at("users")) r.users.push_back(user_metrics_from_json(u));
    if (!r.users.empty()) r.aggregate = aggregate_top10(r.users);
    for (const auto& [user, curve] : j.at("roc").items()) r.rocs.push_back({std::stoi(user), roc_from_json(curve)});
    return r;
}

/// Builds the binary-kind report from per-user evaluations.
inline EvalReport make_binary_report(ModelKind kind, const std::string& preset, std::uint64_t seed,
                                     const std::string& fingerprint, const std::vector<UserEvaluation>& evals) {
    EvalReport r;
    r.kind = kind;
    r.preset = preset;
    r.seed = seed;
    r.source_fingerprint = fingerprint;
    std::vector<UserMetrics> per_user;
    for (const auto& e : evals) {
        per_user.push_back(e.metrics);
        r.rocs.push_back({e.metrics.user, e.roc});
    }
    r.users = rank_by_accuracy(per_user);
    if (!per_user.empty()) r.aggregate = aggregate_top10(per_user);
    return r;
}

inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

/// Columns shown per kind: classical models report FNR, deep binary models
/// omit it.
inline std::vector<std::pair<std::string, std::string>> table_columns(ModelKind kind) {
    if (kind == ModelKind::cnn) return {{"acc", "ACC"}, {"fpr", "FPR"}, {"f1", "F1 Score"}};
    return {{"acc", "ACC"}, {"fpr", "FPR"}, {"fnr", "FNR"}, {"f1", "F1 Score"}};
}

/// Per-user rows by descending ACC, then Average and Standard Deviation rows
/// over the top 10.
inline void write_report_table(std::ostream& out, const EvalReport& r) {
    out << "Model: " << to_string(r.kind) << "  (partition: " << r.partition << ", seed " << r.seed << ")\n";
    if (r.multiclass) {
        out << pad("Peak Training Accuracy", 26) << "Peak Testing Accuracy\n";
        out << pad(fixed4(r.multiclass->peak_train_accuracy), 26) << fixed4(r.multiclass->peak_test_accuracy) << '\n';
        return;
    }
    const auto cols = table_columns(r.kind);
    out << pad("User", 20);
    for (const auto& [_, title] : cols) out << pad(title, 10);
    out << '\n';
    for (const auto& u : r.users) {
        out << pad(std::to_string(u.user), 20);
        for (const auto& [key, _] : cols) out << pad(fixed4(metric_value(u, key)), 10);
        out << '\n';
    }
    if (!r.aggregate) return;
    out << pad("Average", 20);
    for (const auto& [key, _] : cols) out << pad(fixed4(r.aggregate->metrics.at(key).mean), 10);
    out << '\n' << pad("Standard Deviation", 20);
    for (const auto& [key, _] : cols) out << pad(fixed4(r.aggregate->metrics.at(key).stddev), 10);
    out << '\n';
    if (r.aggregate->fewer_than_ten)
        out << "(fewer than 10 users; aggregate covers all " << r.aggregate->users.size() << ")\n";
    out << "(std is the population standard deviation over the top " << r.aggregate->users.size() << " users)\n";
}

inline void write_roc_csv(std::ostream& out, const std::vector<UserRoc>& rocs) {
    out << "user,threshold,fpr,tpr\n";
    for (const auto& u : rocs)
        for (const auto& p : u.curve.points)
            out << u.user << ',' << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << ','
                << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
}

/// FPR on x, TPR on y; one polyline per user and a dashed chance diagonal.
inline void write_roc_svg(std::ostream& out, const std::vector<UserRoc>& rocs, const std::string& title) {
    constexpr double size = 400, margin = 50;
    const auto px = [&](double fpr) { return margin + fpr * size; };
    const auto py = [&](double tpr) { return margin + (1.0 - tpr) * size; };
    const double total = size + 2 * margin;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total
        << "\" viewBox=\"0 0 " << total << ' ' << total << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << total << "\" height=\"" << total << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << total / 2 << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = i / 4.0;
        out << "<text x=\"" << px(v) << "\" y=\"" << margin + size + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
            << v << "</text>\n";
        out << "<text x=\"" << margin - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << v
            << "</text>\n";
    }
    out << "<text x=\"" << total / 2 << "\" y=\"" << total - 8
        << "\" text-anchor=\"middle\" font-size=\"13\">False Positive Rate</text>\n";
    out << "<text x=\"14\" y=\"" << total / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 14 "
        << total / 2 << ")\">True Positive Rate</text>\n";
    out << "<line class=\"chance\" x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
        << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    for (std::size_t k = 0; k < rocs.size(); ++k) {
        const double hue = rocs.empty() ? 0 : 360.0 * static_cast<double>(k) / static_cast<double>(rocs.size());
        out << "<polyline data-user=\"" << rocs[k].user << "\" fill=\"none\" stroke=\"hsl(" << hue
            << ",70%,45%)\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < rocs[k].curve.points.size(); ++i) {
            const auto& p = rocs[k].curve.points[i];
            out << (i ? " " : "") << px(p.fpr) << ',' << py(p.tpr);
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
}

struct ComparisonRow {
    std::string model;
    std::size_t users = 0;
    double acc_mean = 0, acc_std = 0;
    std::optional<double> fpr, fnr, f1, auc, eer;
};

/// One row per report, ranked by mean top-10 ACC (peak test accuracy for the
/// multi-class network).
inline std::vector<ComparisonRow> compare_reports(const std::vector<EvalReport>& reports) {
    std::vector<ComparisonRow> rows;
    for (const auto& r : reports) {
        ComparisonRow row;
        row.model = to_string(r.kind);
        if (r.multiclass) {
            row.users = r.multiclass->classes;
            row.acc_mean = r.multiclass->peak_test_accuracy;
        } else if (r.aggregate) {
            const auto& m = r.aggregate->metrics;
            row.users = r.aggregate->users.size();
            row.acc_mean = m.at("acc").mean;
            row.acc_std = m.at("acc").stddev;
            row.fpr = m.at("fpr").mean;
            row.fnr = m.at("fnr").mean;
            row.f1 = m.at("f1").mean;
            row.auc = m.at("auc").mean;
            row.eer = m.at("eer").mean;
        } else {
            continue;
        }
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.acc_mean > b.acc_mean; });
    return rows;
}

inline void write_comparison_table(std::ostream& out, const std::vector<ComparisonRow>& rows) {
    const auto cell = [](const std::optional<double>& v) { return v ? fixed4(*v) : std::string("-"); };
    out << pad("Model", 8) << pad("Users", 7) << pad("ACC", 10) << pad("ACC std", 10) << pad("FPR", 10) << pad("FNR", 10)
        << pad("F1 Score", 10) << pad("AUC", 10) << "EER\n";
    for (const auto& r : rows)
        out << pad(r.model, 8) << pad(std::to_string(r.users), 7) << pad(fixed4(r.acc_mean), 10)
            << pad(r.fpr ? fixed4(r.acc_std) : "-", 10) << pad(cell(r.fpr), 10) << pad(cell(r.fnr), 10)
            << pad(cell(r.f1), 10) << pad(cell(r.auc), 10) << cell(r.eer) << '\n';
}

}  // namespace mousedyn
