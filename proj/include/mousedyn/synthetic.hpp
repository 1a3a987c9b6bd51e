#pragma once

// Multi-user synthetic corpora for demos and end-to-end tests.

#include <cstdint>
#include <vector>

#include "mousedyn/events.hpp"

namespace mousedyn {

/// Four base profiles on a 2x2 design: motion along the horizontal or the
/// vertical axis, and steady or erratic step length. On top of that each
/// profile has its own speed (2, 6, 10, 14 px per event) and its own quadrant
/// of a 1920x1080 screen. Profiles past the fourth reuse the base four with
/// a heading drift.
inline MotionProfile separable_profile(std::size_t i) {
    constexpr double half_pi = 1.57079632679489661923;
    MotionProfile p;
    const std::size_t base = i % 4;
    p.mean_step = 2.0 + 4.0 * static_cast<double>(base);
    p.step_jitter = (base / 2 ? 0.5 : 0.05) * p.mean_step;
    p.axis = base % 2 ? half_pi : 0.0;
    p.axis_pull = 0.3;
    p.turn_mean = 0.05 * static_cast<double>(i / 4) * (i % 2 ? 1.0 : -1.0);
    p.turn_std = 0.1;
    p.tick = 0.008;
    p.tick_jitter = 0.05;
    p.width = 960.0;
    p.height = 540.0;
    p.left = base % 2 ? 960.0 : 0.0;
    p.top = base / 2 ? 540.0 : 0.0;
    p.start_x = p.left + 480.0;
    p.start_y = p.top + 270.0;
    return p;
}

/// One session per user, subjects 0..users-1, each with `events` events.
inline std::vector<Session> synthesize_corpus(std::size_t users, std::size_t events, std::uint64_t seed) {
    std::vector<Session> out;
    out.reserve(users);
    for (std::size_t u = 0; u < users; ++u) {
        auto p = separable_profile(u);
        p.start_time = 1.6e9 + 3600.0 * static_cast<double>(u);
        out.push_back(synthesize_session(p, seed, events, static_cast<int>(u)));
    }
    return out;
}

}  // namespace mousedyn
