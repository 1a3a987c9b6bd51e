#include <gtest/gtest.h>

#include <cmath>

#include "mousedyn/actions.hpp"
#include "test_support.hpp"

using namespace mousedyn;
using mdtest::make_action;

namespace {

Session session_of(std::size_t n) {
    Session s{3, {}};
    for (std::size_t i = 0; i < n; ++i) s.events.push_back({double(i), double(i), 0.0, 3});
    return s;
}

void expect_all(const std::vector<double>& v, double value, double tol = 0) {
    for (double x : v) EXPECT_NEAR(x, value, tol);
}

void expect_lengths(const Kinematics& k, std::size_t n) {
    for (const auto* seq : {&k.dt, &k.dx, &k.dy, &k.dist, &k.vx, &k.vy, &k.speed, &k.angle}) EXPECT_EQ(seq->size(), n - 1);
    for (const auto* seq : {&k.accel, &k.ang_vel, &k.curvature}) EXPECT_EQ(seq->size(), n - 2);
    EXPECT_EQ(k.jerk.size(), n - 3);
}

}  // namespace

TEST(Segment, DiscardsTrailingPartialBlock) {
    const auto acts = segment(session_of(25), 10);
    ASSERT_EQ(acts.size(), 2u);
    EXPECT_EQ(acts[0].events.front().x, 0);
    EXPECT_EQ(acts[0].events.back().x, 9);
    EXPECT_EQ(acts[1].events.front().x, 10);
    EXPECT_EQ(acts[1].events.back().x, 19);
    EXPECT_EQ(acts[1].action_index, 1u);
    EXPECT_EQ(acts[1].subject, 3);
}

TEST(Segment, ExactAndShortSessions) {
    EXPECT_EQ(segment(session_of(10)).size(), 1u);
    EXPECT_TRUE(segment(session_of(9)).empty());
    EXPECT_TRUE(segment(session_of(0)).empty());
    EXPECT_EQ(segment(session_of(95)).size(), 9u);
}

TEST(Segment, RejectsTinyBlocks) {
    EXPECT_THROW(segment(session_of(10), 1), ConfigError);
    EXPECT_EQ(segment(session_of(5), 2).size(), 2u);
}

TEST(Kinematics, ConstantVelocityLine) {
    const auto k = compute_kinematics(mdtest::line_action());
    expect_lengths(k, 10);
    expect_all(k.speed, 1);
    expect_all(k.vx, 1);
    expect_all(k.vy, 0);
    expect_all(k.accel, 0);
    expect_all(k.jerk, 0);
    expect_all(k.ang_vel, 0);
    expect_all(k.curvature, 0);
    expect_all(k.angle, 0);
}

TEST(Kinematics, StationaryCarriesAngleForward) {
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({double(i), 4, 7});
    const auto k = compute_kinematics(make_action(pts));
    expect_all(k.speed, 0);
    expect_all(k.angle, 0);
    expect_all(k.curvature, 0);
    expect_all(k.ang_vel, 0);
}

TEST(Kinematics, ZeroStepKeepsPreviousHeading) {
    // North, then a pause, then north again: no spurious turn.
    const auto k = compute_kinematics(make_action({{0, 0, 0}, {1, 0, 1}, {2, 0, 1}, {3, 0, 2}}));
    EXPECT_DOUBLE_EQ(k.angle[0], kPi / 2);
    EXPECT_DOUBLE_EQ(k.angle[1], kPi / 2);
    EXPECT_DOUBLE_EQ(k.angle[2], kPi / 2);
    expect_all(k.ang_vel, 0);
}

TEST(Kinematics, SquareCornerAngularVelocity) {
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i <= 5; ++i) pts.push_back({double(i), double(i), 0});
    for (int j = 1; j <= 4; ++j) pts.push_back({double(5 + j), 5, double(j)});
    const auto action = make_action(pts);
    const auto k = compute_kinematics(action);

    // Scripted reference: headings from atan2 of each step, differences
    // folded into (-pi, pi], divided by the next step's duration.
    std::vector<double> heading;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        heading.push_back(std::atan2(pts[i + 1][2] - pts[i][2], pts[i + 1][1] - pts[i][1]));
    for (std::size_t i = 0; i + 1 < heading.size(); ++i) {
        double d = heading[i + 1] - heading[i];
        while (d > kPi) d -= 2 * kPi;
        while (d <= -kPi) d += 2 * kPi;
        const double dt = pts[i + 2][0] - pts[i + 1][0];
        EXPECT_NEAR(k.ang_vel[i], d / dt, 1e-15) << "step " << i;
    }
    EXPECT_NEAR(k.ang_vel[4], kPi / 2, 1e-15);
    for (std::size_t i = 0; i < k.ang_vel.size(); ++i)
        if (i != 4) {
            EXPECT_EQ(k.ang_vel[i], 0.0);
        }
}

TEST(Kinematics, DuplicateTimestampsAreClamped) {
    const auto k = compute_kinematics(make_action({{1, 0, 0}, {1, 3, 4}, {1, 6, 8}, {2, 9, 12}}));
    EXPECT_DOUBLE_EQ(k.dt[0], kMinDt);
    EXPECT_DOUBLE_EQ(k.speed[0], 5 / kMinDt);
    for (const auto* seq : {&k.speed, &k.accel, &k.jerk, &k.ang_vel, &k.curvature})
        for (double v : *seq) EXPECT_TRUE(std::isfinite(v));
}

TEST(Kinematics, WrapAngleRange) {
    EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
    EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
    EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
    EXPECT_NEAR(wrap_angle(-3 * kPi / 2), kPi / 2, 1e-15);
    EXPECT_DOUBLE_EQ(wrap_angle(0.25), 0.25);
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double a = wrap_angle(rng.uniform(-50, 50));
        EXPECT_GT(a, -kPi);
        EXPECT_LE(a, kPi);
    }
}

TEST(Kinematics, HeadingReversalIsPi) {
    const auto k = compute_kinematics(make_action({{0, 0, 0}, {1, 1, 0}, {2, 0, 0}}));
    EXPECT_DOUBLE_EQ(k.angle[1], kPi);
    EXPECT_DOUBLE_EQ(k.ang_vel[0], kPi);
}

TEST(KinematicsProperty, TranslationInvariant) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = mdtest::random_action(rng);
        auto b = a;
        const double sx = std::round(rng.uniform(-500, 500)), sy = std::round(rng.uniform(-500, 500));
        for (auto& e : b.events) {
            e.x += sx;
            e.y += sy;
        }
        const auto ka = compute_kinematics(a), kb = compute_kinematics(b);
        EXPECT_EQ(ka.speed, kb.speed);
        EXPECT_EQ(ka.vx, kb.vx);
        EXPECT_EQ(ka.vy, kb.vy);
        EXPECT_EQ(ka.accel, kb.accel);
        EXPECT_EQ(ka.jerk, kb.jerk);
        EXPECT_EQ(ka.angle, kb.angle);
        EXPECT_EQ(ka.ang_vel, kb.ang_vel);
        EXPECT_EQ(ka.curvature, kb.curvature);
    }
}

TEST(KinematicsProperty, RotationInvariant) {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = mdtest::random_action(rng);
        const double phi = rng.uniform(-kPi, kPi);
        auto b = a;
        for (auto& e : b.events) {
            const double x = e.x, y = e.y;
            e.x = x * std::cos(phi) - y * std::sin(phi);
            e.y = x * std::sin(phi) + y * std::cos(phi);
        }
        const auto ka = compute_kinematics(a), kb = compute_kinematics(b);
        const auto close = [](const std::vector<double>& u, const std::vector<double>& v) {
            double mag = 1;
            for (double x : u) mag = std::max(mag, std::abs(x));
            for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i], v[i], 1e-9 * mag) << "index " << i;
        };
        close(ka.speed, kb.speed);
        close(ka.accel, kb.accel);
        close(ka.jerk, kb.jerk);
        close(ka.ang_vel, kb.ang_vel);
        close(ka.curvature, kb.curvature);
        for (std::size_t i = 0; i < ka.angle.size(); ++i)
            EXPECT_NEAR(wrap_angle(kb.angle[i] - ka.angle[i] - phi), 0.0, 1e-9);
    }
}

TEST(KinematicsProperty, TimeScaling) {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = mdtest::random_action(rng);
        const double c = rng.uniform(0.5, 4.0);
        auto b = a;
        const double t0 = a.events.front().timestamp;
        for (auto& e : b.events) e.timestamp = (e.timestamp - t0) * c;
        auto a0 = a;
        for (auto& e : a0.events) e.timestamp -= t0;
        const auto ka = compute_kinematics(a0), kb = compute_kinematics(b);
        // Relative to the sequence's magnitude: differences of differences
        // cancel, so single small entries carry absolute rounding error.
        const auto scaled = [](const std::vector<double>& u, const std::vector<double>& v, double f) {
            double mag = 0;
            for (double x : u) mag = std::max(mag, std::abs(x * f));
            for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(v[i], u[i] * f, 1e-9 * mag) << "index " << i;
        };
        scaled(ka.speed, kb.speed, 1 / c);
        scaled(ka.accel, kb.accel, 1 / (c * c));
        scaled(ka.jerk, kb.jerk, 1 / (c * c * c));
    }
}

TEST(KinematicsProperty, LengthsMatchForAnyBlock) {
    Rng rng(24);
    for (std::size_t n : {3u, 4u, 10u, 25u}) expect_lengths(compute_kinematics(mdtest::random_action(rng, n)), n);
}
