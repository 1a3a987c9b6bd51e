#pragma once

// Fixed-length mouse actions and their kinematic sequences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mousedyn/common.hpp"
#include "mousedyn/events.hpp"

namespace mousedyn {

inline constexpr std::size_t kDefaultBlockLen = 10;
inline constexpr double kMinDt = 1e-4;    // s, lower clamp on inter-event time
inline constexpr double kMinDist = 1e-9;  // px, lower clamp on step length
inline constexpr double kPi = 3.14159265358979323846;

struct MouseAction {
    int subject = 0;
    std::size_t action_index = 0;  // ordinal within the session
    std::vector<RawEvent> events;
};

/// Per-action kinematic sequences. For a block of n events the step
/// sequences hold n-1 values, accel/ang_vel/curvature n-2 and jerk n-3.
struct Kinematics {
    std::vector<double> dt, dx, dy, dist;
    std::vector<double> vx, vy, speed;
    std::vector<double> accel, jerk;
    std::vector<double> angle, ang_vel, curvature;
};

/// Maps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

/// Non-overlapping consecutive blocks; a trailing partial block is dropped.
inline std::vector<MouseAction> segment(const Session& session, std::size_t block_len = kDefaultBlockLen) {
    if (block_len < 2) throw ConfigError("segment: block_len must be >= 2");
    std::vector<MouseAction> actions;
    const std::size_t count = session.events.size() / block_len;
    actions.reserve(count);
    for (std::size_t a = 0; a < count; ++a) {
        const auto first = session.events.begin() + static_cast<std::ptrdiff_t>(a * block_len);
        actions.push_back(MouseAction{session.subject, a, {first, first + static_cast<std::ptrdiff_t>(block_len)}});
    }
    return actions;
}

inline Kinematics compute_kinematics(const MouseAction& action) {
    const auto& ev = action.events;
    const std::size_t steps = ev.size() < 2 ? 0 : ev.size() - 1;
    Kinematics k;
    k.dt.resize(steps);
    k.dx.resize(steps);
    k.dy.resize(steps);
    k.dist.resize(steps);
    k.vx.resize(steps);
    k.vy.resize(steps);
    k.speed.resize(steps);
    k.angle.resize(steps);

    double previous_angle = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        k.dt[i] = std::max(ev[i + 1].timestamp - ev[i].timestamp, kMinDt);
        k.dx[i] = ev[i + 1].x - ev[i].x;
        k.dy[i] = ev[i + 1].y - ev[i].y;
        k.dist[i] = std::hypot(k.dx[i], k.dy[i]);
        k.vx[i] = k.dx[i] / k.dt[i];
        k.vy[i] = k.dy[i] / k.dt[i];
        k.speed[i] = k.dist[i] / k.dt[i];
        // Zero displacement has no direction; carry the previous heading.
        k.angle[i] = k.dist[i] > 0.0 ? std::atan2(k.dy[i], k.dx[i]) : previous_angle;
        if (k.angle[i] == -kPi) k.angle[i] = kPi;
        previous_angle = k.angle[i];
    }

    const std::size_t second = steps < 1 ? 0 : steps - 1;
    k.accel.resize(second);
    k.ang_vel.resize(second);
    k.curvature.resize(second);
    for (std::size_t i = 0; i < second; ++i) {
        k.accel[i] = (k.speed[i + 1] - k.speed[i]) / k.dt[i + 1];
        const double turn = wrap_angle(k.angle[i + 1] - k.angle[i]);
        k.ang_vel[i] = turn / k.dt[i + 1];
        k.curvature[i] = turn / std::max(k.dist[i], kMinDist);
    }

    const std::size_t third = second < 1 ? 0 : second - 1;
    k.jerk.resize(third);
    for (std::size_t i = 0; i < third; ++i) k.jerk[i] = (k.accel[i + 1] - k.accel[i]) / k.dt[i + 2];
    return k;
}

}  // namespace mousedyn
