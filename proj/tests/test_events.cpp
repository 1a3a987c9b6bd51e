#include <gtest/gtest.h>

#include <sstream>

#include "mousedyn/events.hpp"
#include "mousedyn/synthetic.hpp"

using namespace mousedyn;

namespace {

ParseResult parse(const std::string& text, ParseOptions opts = {}) {
    std::istringstream in(text);
    return parse_events(in, opts);
}

}  // namespace

TEST(ParseEvents, SingleRowWithDefaultColumns) {
    const auto r = parse("1612345678.123,450,300,7\n");
    ASSERT_EQ(r.sessions.size(), 1u);
    ASSERT_EQ(r.sessions[0].events.size(), 1u);
    const auto& e = r.sessions[0].events[0];
    EXPECT_EQ(e.timestamp, 1612345678.123);
    EXPECT_EQ(e.x, 450);
    EXPECT_EQ(e.y, 300);
    EXPECT_EQ(e.subject, 7);
    EXPECT_EQ(r.sessions[0].subject, 7);
}

TEST(ParseEvents, SortsEachSessionByTimestamp) {
    const auto r = parse("timestamp,x,y,subject\n5.0,1,1,2\n3.0,2,2,2\n");
    ASSERT_EQ(r.sessions.size(), 1u);
    EXPECT_EQ(r.sessions[0].events[0].timestamp, 3.0);
    EXPECT_EQ(r.sessions[0].events[1].timestamp, 5.0);
}

TEST(ParseEvents, TiesKeepFileOrder) {
    const auto r = parse("1.0,10,0,0\n1.0,20,0,0\n0.5,30,0,0\n1.0,40,0,0\n");
    const auto& ev = r.sessions[0].events;
    ASSERT_EQ(ev.size(), 4u);
    EXPECT_EQ(ev[0].x, 30);
    EXPECT_EQ(ev[1].x, 10);
    EXPECT_EQ(ev[2].x, 20);
    EXPECT_EQ(ev[3].x, 40);
}

TEST(ParseEvents, StrictModeReportsLineNumber) {
    try {
        parse("abc,1,2,3\n");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        ASSERT_TRUE(e.line().has_value());
        EXPECT_EQ(*e.line(), 1u);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(ParseEvents, StrictModeLineNumberCountsHeaderAndBlanks) {
    try {
        parse("timestamp,x,y,subject\n1,2,3,4\n\n1,2,oops,4\n");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_EQ(e.line().value(), 4u);
    }
}

TEST(ParseEvents, LenientModeSkipsAndCounts) {
    ParseOptions opts;
    opts.lenient = true;
    const auto r = parse("1,2,3,0\nabc,1,2,3\n2,3,4,0\n3,4\n4,5,6,-1\n5,nan,1,0\n", opts);
    EXPECT_EQ(r.accepted, 2u);
    EXPECT_EQ(r.rejected, 4u);
    std::size_t total = 0;
    for (const auto& s : r.sessions) total += s.events.size();
    EXPECT_EQ(total, r.accepted);
}

TEST(ParseEvents, HeaderMissingColumnIsConfigError) {
    EXPECT_THROW(parse("timestamp,x,y\n1,2,3\n"), ConfigError);
}

TEST(ParseEvents, HeaderResolvesReorderedColumns) {
    const auto r = parse("subject,y,x,timestamp\n3,20,10,1.5\n");
    const auto& e = r.sessions.at(0).events.at(0);
    EXPECT_EQ(e.subject, 3);
    EXPECT_EQ(e.x, 10);
    EXPECT_EQ(e.y, 20);
    EXPECT_EQ(e.timestamp, 1.5);
}

TEST(ParseEvents, CustomNamesAndDelimiter) {
    ParseOptions opts;
    opts.delimiter = ';';
    opts.names = ColumnNames{"time", "px", "py", "user"};
    const auto r = parse("user;time;px;py\n4;2.0;7;8\n", opts);
    const auto& e = r.sessions.at(0).events.at(0);
    EXPECT_EQ(e.subject, 4);
    EXPECT_EQ(e.timestamp, 2.0);
    EXPECT_EQ(e.x, 7);
    EXPECT_EQ(e.y, 8);
}

TEST(ParseEvents, ExplicitColumnMap) {
    ParseOptions opts;
    opts.columns = ColumnMap{3, 1, 2, 0};
    const auto r = parse("9,5,6,1.25\n", opts);
    const auto& e = r.sessions.at(0).events.at(0);
    EXPECT_EQ(e.subject, 9);
    EXPECT_EQ(e.timestamp, 1.25);
}

TEST(ParseEvents, RejectsNegativeTimestampAndFractionalSubject) {
    EXPECT_THROW(parse("-1,2,3,0\n"), DataError);
    EXPECT_THROW(parse("1,2,3,0.5\n"), DataError);
    EXPECT_NO_THROW(parse("1,2,3,7.0\n"));
}

TEST(ParseEvents, GroupsSubjectsAscending) {
    const auto r = parse("1,0,0,5\n1,0,0,2\n2,0,0,5\n");
    ASSERT_EQ(r.sessions.size(), 2u);
    EXPECT_EQ(r.sessions[0].subject, 2);
    EXPECT_EQ(r.sessions[1].subject, 5);
    for (const auto& s : r.sessions)
        for (const auto& e : s.events) EXPECT_EQ(e.subject, s.subject);
}

TEST(ParseEvents, EmptyInputYieldsNoSessions) {
    const auto r = parse("");
    EXPECT_TRUE(r.sessions.empty());
    EXPECT_EQ(r.accepted, 0u);
}

TEST(SerializeEvents, RoundTripsExactly) {
    Rng rng(11);
    std::vector<Session> sessions;
    for (int s = 0; s < 3; ++s) {
        Session sess{s, {}};
        double t = rng.uniform(0, 2e9);
        for (int i = 0; i < 50; ++i) {
            t += rng.uniform(0, 0.1);
            sess.events.push_back({t, rng.uniform(-5, 2000), rng.uniform(-5, 1200), s});
        }
        sessions.push_back(sess);
    }
    std::stringstream buf;
    serialize_events(buf, sessions);
    const auto back = parse_events(buf);
    EXPECT_EQ(back.sessions, sessions);
}

TEST(SynthesizeSession, DeterministicForFixedSeed) {
    MotionProfile p;
    p.step_jitter = 0.3;
    p.turn_std = 0.2;
    p.tick_jitter = 0.1;
    EXPECT_EQ(synthesize_session(p, 7, 500), synthesize_session(p, 7, 500));
    EXPECT_NE(synthesize_session(p, 7, 500), synthesize_session(p, 8, 500));
}

TEST(SynthesizeSession, ZeroJitterUnitSpeed) {
    MotionProfile p;
    p.mean_step = 1.0;
    p.tick = 0.008;
    p.start_time = 0.0;
    const auto s = synthesize_session(p, 3, 200);
    ASSERT_EQ(s.events.size(), 200u);
    for (std::size_t i = 1; i < s.events.size(); ++i) {
        const auto& a = s.events[i - 1];
        const auto& b = s.events[i];
        EXPECT_NEAR(std::hypot(b.x - a.x, b.y - a.y), 1.0, 1e-9);
        EXPECT_NEAR(b.timestamp - a.timestamp, 0.008, 1e-12);
    }
}

TEST(SynthesizeSession, TimestampsStrictlyIncrease) {
    MotionProfile p;
    p.tick = 1e-6;
    p.tick_jitter = 2.0;
    p.start_time = 1.6e9;  // large magnitude stresses rounding
    const auto s = synthesize_session(p, 5, 2000);
    for (std::size_t i = 1; i < s.events.size(); ++i) EXPECT_LT(s.events[i - 1].timestamp, s.events[i].timestamp);
}

TEST(SynthesizeSession, MeanSpeedsFollowProfiles) {
    const auto mean_speed = [](const Session& s) {
        double d = 0, t = 0;
        for (std::size_t i = 1; i < s.events.size(); ++i) {
            d += std::hypot(s.events[i].x - s.events[i - 1].x, s.events[i].y - s.events[i - 1].y);
            t += s.events[i].timestamp - s.events[i - 1].timestamp;
        }
        return d / t;
    };
    MotionProfile slow, fast;
    slow.mean_step = 1;
    fast.mean_step = 10;
    slow.step_jitter = fast.step_jitter = 0.5;
    EXPECT_LT(mean_speed(synthesize_session(slow, 1, 3000)), mean_speed(synthesize_session(fast, 1, 3000)));
}

TEST(SynthesizeSession, StaysOnScreen) {
    MotionProfile p;
    p.mean_step = 40;
    p.turn_std = 0.5;
    const auto s = synthesize_session(p, 9, 5000);
    for (const auto& e : s.events) {
        EXPECT_GE(e.x, 0);
        EXPECT_LE(e.x, p.width);
        EXPECT_GE(e.y, 0);
        EXPECT_LE(e.y, p.height);
    }
}

TEST(SynthesizeSession, StaysInsideOffsetRegion) {
    MotionProfile p;
    p.mean_step = 25;
    p.turn_std = 0.7;
    p.left = 960;
    p.top = 540;
    p.width = 300;
    p.height = 200;
    p.start_x = 1000;
    p.start_y = 600;
    const auto s = synthesize_session(p, 4, 5000);
    for (const auto& e : s.events) {
        EXPECT_GE(e.x, 960);
        EXPECT_LE(e.x, 1260);
        EXPECT_GE(e.y, 540);
        EXPECT_LE(e.y, 740);
    }
}

TEST(SynthesizeSession, AxisPullKeepsMotionOnTheAxis) {
    for (const double axis : {0.0, 1.5707963267948966}) {
        MotionProfile p;
        p.mean_step = 5;
        p.turn_std = 0.1;
        p.axis = axis;
        p.axis_pull = 0.3;
        const auto s = synthesize_session(p, 2, 4000);
        std::size_t along = 0;
        for (std::size_t i = 1; i < s.events.size(); ++i) {
            const double dx = std::abs(s.events[i].x - s.events[i - 1].x);
            const double dy = std::abs(s.events[i].y - s.events[i - 1].y);
            along += axis == 0.0 ? dx > dy : dy > dx;
        }
        EXPECT_GT(along, 0.95 * double(s.events.size())) << "axis " << axis;
    }
}

TEST(SynthesizeSession, RejectsBadParameters) {
    MotionProfile p;
    p.tick = 0;
    EXPECT_THROW(synthesize_session(p, 1, 10), ConfigError);
    p.tick = -1;
    EXPECT_THROW(synthesize_session(p, 1, 10), ConfigError);
    MotionProfile q;
    q.step_jitter = -1;
    EXPECT_THROW(synthesize_session(q, 1, 10), ConfigError);
    EXPECT_THROW(synthesize_session(MotionProfile{}, 1, 0), ConfigError);
    MotionProfile r;
    r.axis_pull = 1.5;
    EXPECT_THROW(synthesize_session(r, 1, 10), ConfigError);
    MotionProfile outside;
    outside.left = 1000;
    EXPECT_THROW(synthesize_session(outside, 1, 10), ConfigError);
}

TEST(SynthesizeCorpus, ProfilesAreDistinctAndSubjectsNumbered) {
    const auto corpus = synthesize_corpus(4, 100, 1);
    ASSERT_EQ(corpus.size(), 4u);
    for (std::size_t u = 0; u < 4; ++u) {
        EXPECT_EQ(corpus[u].subject, static_cast<int>(u));
        if (u) {
            EXPECT_GT(separable_profile(u).mean_step, separable_profile(u - 1).mean_step);
        }
        // Each base profile works in its own quadrant.
        const auto p = separable_profile(u);
        for (const auto& e : corpus[u].events) {
            EXPECT_GE(e.x, p.left);
            EXPECT_LE(e.x, p.left + p.width);
            EXPECT_GE(e.y, p.top);
            EXPECT_LE(e.y, p.top + p.height);
        }
    }
}
