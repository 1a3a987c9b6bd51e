#pragma once

// Per-action feature vectors, min-max scaling, and neural input encodings.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mousedyn/actions.hpp"
#include "mousedyn/common.hpp"

namespace mousedyn {

/// Bumped whenever the slot order or definitions below change; stored in
/// manifests and model artifacts.
inline constexpr int kFeatureOrderVersion = 1;
inline constexpr std::size_t kFeatureCount = 33;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "speed_mean",     "speed_std",     "speed_min",     "speed_max",
    "vx_mean",        "vx_std",        "vx_min",        "vx_max",
    "vy_mean",        "vy_std",        "vy_min",        "vy_max",
    "accel_mean",     "accel_std",     "accel_min",     "accel_max",
    "jerk_mean",      "jerk_std",      "jerk_min",      "jerk_max",
    "ang_vel_mean",   "ang_vel_std",   "ang_vel_min",   "ang_vel_max",
    "curvature_mean", "curvature_std", "curvature_min", "curvature_max",
    "trajectory_length", "end_to_end_distance", "straightness", "elapsed_time", "overall_direction",
};

namespace slot {
// Offsets of the stat groups; add 0..3 for mean/std/min/max.
inline constexpr std::size_t speed = 0, vx = 4, vy = 8, accel = 12, jerk = 16, ang_vel = 20, curvature = 24;
inline constexpr std::size_t trajectory_length = 28, end_to_end = 29, straightness = 30, elapsed_time = 31,
                             overall_direction = 32;
}  // namespace slot

struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    std::vector<double> to_vector() const { return {values.begin(), values.end()}; }
};

struct SummaryStats {
    double mean = 0, std = 0, min = 0, max = 0;
};

/// Mean, population standard deviation, min and max. An empty sequence
/// yields all zeros.
inline SummaryStats summarize(std::span<const double> xs) {
    SummaryStats s;
    if (xs.empty()) return s;
    const auto n = static_cast<double>(xs.size());
    s.min = xs[0];
    s.max = xs[0];
    double sum = 0;
    for (double x : xs) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    // Rounding can push the mean a hair outside [min, max] for constant input.
    s.mean = std::clamp(sum / n, s.min, s.max);
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = s.min == s.max ? 0.0 : std::sqrt(ss / n);
    return s;
}

inline FeatureVector extract_features(const Kinematics& kin, const MouseAction& action) {
    FeatureVector f;
    const auto put = [&f](std::size_t offset, const std::vector<double>& seq) {
        const auto s = summarize(seq);
        f[offset] = s.mean;
        f[offset + 1] = s.std;
        f[offset + 2] = s.min;
        f[offset + 3] = s.max;
    };
    put(slot::speed, kin.speed);
    put(slot::vx, kin.vx);
    put(slot::vy, kin.vy);
    put(slot::accel, kin.accel);
    put(slot::jerk, kin.jerk);
    put(slot::ang_vel, kin.ang_vel);
    put(slot::curvature, kin.curvature);

    double length = 0;
    for (double d : kin.dist) length += d;
    const auto& first = action.events.front();
    const auto& last = action.events.back();
    const double ex = last.x - first.x, ey = last.y - first.y;
    const double end_to_end = std::hypot(ex, ey);
    f[slot::trajectory_length] = length;
    f[slot::end_to_end] = end_to_end;
    f[slot::straightness] = std::clamp(end_to_end / std::max(length, kMinDist), 0.0, 1.0);
    f[slot::elapsed_time] = last.timestamp - first.timestamp;
    f[slot::overall_direction] = std::atan2(ey, ex);
    return f;
}

inline FeatureVector extract_features(const MouseAction& action) {
    return extract_features(compute_kinematics(action), action);
}

/// Per-slot min/max learned on training rows.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t dimension() const { return min.size(); }
};

inline ScalerParams fit_scaler(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw DataError("fit_scaler: empty matrix");
    const std::size_t d = rows.front().size();
    ScalerParams p{rows.front(), rows.front()};
    for (const auto& row : rows) {
        if (row.size() != d) throw DataError("fit_scaler: ragged matrix");
        for (std::size_t j = 0; j < d; ++j) {
            p.min[j] = std::min(p.min[j], row[j]);
            p.max[j] = std::max(p.max[j], row[j]);
        }
    }
    return p;
}

/// (x - min) / (max - min); constant slots map to 0, out-of-range values
/// extrapolate.
inline std::vector<double> apply_scaler(const ScalerParams& p, std::span<const double> v) {
    if (v.size() != p.dimension()) throw DataError("apply_scaler: dimension mismatch");
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double range = p.max[j] - p.min[j];
        out[j] = range > 0 ? (v[j] - p.min[j]) / range : 0.0;
    }
    return out;
}

/// block_len x 2 matrix of (vx, vy); the first timestep has no predecessor
/// and is zero.
inline Matrix to_speed_signal(const Kinematics& kin) {
    Matrix m(kin.vx.size() + 1, 2);
    for (std::size_t i = 0; i < kin.vx.size(); ++i) {
        m(i + 1, 0) = kin.vx[i];
        m(i + 1, 1) = kin.vy[i];
    }
    return m;
}

/// Interleaved absolute coordinates (x1, y1, ..., xn, yn).
inline std::vector<double> to_coord_vector(const MouseAction& action) {
    std::vector<double> out;
    out.reserve(action.events.size() * 2);
    for (const auto& e : action.events) {
        out.push_back(e.x);
        out.push_back(e.y);
    }
    return out;
}

/// One row of a feature file.
struct FeatureRecord {
    FeatureVector features;
    int label = 0;
    int subject = 0;
    std::size_t action_index = 0;
};

inline void write_feature_file(std::ostream& out, std::span<const FeatureRecord> records) {
    for (const auto name : kFeatureNames) out << name << ',';
    out << "label,subject,action_index\n";
    for (const auto& r : records) {
        for (double v : r.features.values) out << format_double(v) << ',';
        out << r.label << ',' << r.subject << ',' << r.action_index << '\n';
    }
}

inline std::vector<FeatureRecord> read_feature_file(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("feature file: missing header");
    auto header = detail::split(detail::trim(line), ',');
    if (header.size() != kFeatureCount + 3) throw DataError("feature file: expected 36 columns", 1);
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (header[i] != kFeatureNames[i])
            throw DataError("feature file: column " + std::to_string(i) + " is '" + std::string(header[i]) +
                                "', expected '" + std::string(kFeatureNames[i]) + "'",
                            1);
    if (header[kFeatureCount] != "label" || header[kFeatureCount + 1] != "subject" ||
        header[kFeatureCount + 2] != "action_index")
        throw DataError("feature file: trailing columns must be label,subject,action_index", 1);

    std::vector<FeatureRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = detail::trim(line);
        if (view.empty()) continue;
        auto fields = detail::split(view, ',');
        if (fields.size() != kFeatureCount + 3) throw DataError("feature file: wrong column count", line_no);
        FeatureRecord r;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const auto v = detail::parse_real(fields[i]);
            if (!v || !std::isfinite(*v)) throw DataError("feature file: bad value", line_no);
            r.features[i] = *v;
        }
        const auto label = detail::parse_real(fields[kFeatureCount]);
        const auto subject = detail::parse_subject(fields[kFeatureCount + 1]);
        const auto index = detail::parse_subject(fields[kFeatureCount + 2]);
        if (!label || !subject || !index) throw DataError("feature file: bad label/subject/index", line_no);
        r.label = static_cast<int>(*label);
        r.subject = *subject;
        r.action_index = static_cast<std::size_t>(*index);
        records.push_back(r);
    }
    return records;
}

}  // namespace mousedyn
