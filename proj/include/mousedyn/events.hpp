#pragma once

// Raw mouse-event ingestion and synthetic session generation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mousedyn/common.hpp"

namespace mousedyn {

struct RawEvent {
    double timestamp = 0.0;  // seconds since UNIX epoch
    double x = 0.0;          // pixels
    double y = 0.0;
    int subject = 0;

    bool operator==(const RawEvent&) const = default;
};

struct Session {
    int subject = 0;
    std::vector<RawEvent> events;  // ascending timestamp, stable for ties

    bool operator==(const Session&) const = default;
};

/// Column positions of the four event fields within a delimited row.
struct ColumnMap {
    std::size_t timestamp = 0;
    std::size_t x = 1;
    std::size_t y = 2;
    std::size_t subject = 3;

    std::size_t max_position() const { return std::max({timestamp, x, y, subject}); }
};

/// Column names looked up in a header row.
struct ColumnNames {
    std::string timestamp = "timestamp";
    std::string x = "x";
    std::string y = "y";
    std::string subject = "subject";
};

struct ParseOptions {
    char delimiter = ',';
    ColumnNames names;
    // Explicit positions; when unset they are resolved from the header row,
    // or default to timestamp,x,y,subject if the input has no header.
    std::optional<ColumnMap> columns;
    bool lenient = false;
};

struct ParseResult {
    std::vector<Session> sessions;  // ascending subject id
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_real(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

inline std::optional<int> parse_subject(std::string_view s) {
    // Accept "7" and "7.0"; reject fractional or negative ids.
    const auto real = parse_real(s);
    if (!real || !std::isfinite(*real) || *real < 0 || *real != std::floor(*real) || *real > 2147483647.0)
        return std::nullopt;
    return static_cast<int>(*real);
}

}  // namespace detail

/// Incremental row parser shared by batch ingestion and streaming. The first
/// non-empty line is taken as a header when it names any of the configured
/// columns.
class EventLineReader {
public:
    explicit EventLineReader(ParseOptions options = {}) : options_(std::move(options)), columns_(options_.columns) {}

    enum class Outcome { event, header, blank, rejected };

    /// Parses one line (1-based `line_no` for error messages). Strict mode
    /// throws DataError for malformed rows; lenient mode returns `rejected`.
    Outcome read(std::string_view line, std::size_t line_no, RawEvent& out) {
        const std::string_view view = detail::trim(line);
        if (view.empty()) return Outcome::blank;
        const auto fields = detail::split(view, options_.delimiter);
        if (first_) {
            first_ = false;
            if (is_header(fields)) return Outcome::header;
            if (!columns_) columns_ = ColumnMap{};
        }
        const ColumnMap& cm = *columns_;
        if (fields.size() > cm.max_position()) {
            const auto t = detail::parse_real(fields[cm.timestamp]);
            const auto x = detail::parse_real(fields[cm.x]);
            const auto y = detail::parse_real(fields[cm.y]);
            const auto s = detail::parse_subject(fields[cm.subject]);
            if (t && x && y && s && std::isfinite(*t) && *t >= 0 && std::isfinite(*x) && std::isfinite(*y)) {
                out = RawEvent{*t, *x, *y, *s};
                return Outcome::event;
            }
        }
        if (!options_.lenient)
            throw DataError("malformed event row at line " + std::to_string(line_no) + ": '" + std::string(view) + "'",
                            line_no);
        return Outcome::rejected;
    }

private:
    bool is_header(const std::vector<std::string_view>& fields) {
        const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (fields[i] == name) return i;
            return std::nullopt;
        };
        const auto& n = options_.names;
        const auto t = find(n.timestamp), x = find(n.x), y = find(n.y), s = find(n.subject);
        if (!(t || x || y || s)) return false;
        if (!(t && x && y && s)) {
            std::string missing;
            if (!t) missing += " " + n.timestamp;
            if (!x) missing += " " + n.x;
            if (!y) missing += " " + n.y;
            if (!s) missing += " " + n.subject;
            throw ConfigError("header is missing column(s):" + missing);
        }
        if (!columns_) columns_ = ColumnMap{*t, *x, *y, *s};
        return true;
    }

    ParseOptions options_;
    std::optional<ColumnMap> columns_;
    bool first_ = true;
};

/// Parses delimited event text into per-subject sessions.
///
/// Strict mode throws DataError carrying the 1-based line number of the first
/// malformed row; lenient mode skips such rows and counts them. A header that
/// lacks one of the configured columns raises ConfigError.
inline ParseResult parse_events(std::istream& in, const ParseOptions& options = {}) {
    std::map<int, std::vector<RawEvent>> by_subject;
    ParseResult result;
    EventLineReader reader(options);
    std::string line;
    std::size_t line_no = 0;
    RawEvent ev;
    while (std::getline(in, line)) {
        ++line_no;
        switch (reader.read(line, line_no, ev)) {
            case EventLineReader::Outcome::event:
                by_subject[ev.subject].push_back(ev);
                ++result.accepted;
                break;
            case EventLineReader::Outcome::rejected: ++result.rejected; break;
            default: break;
        }
    }
    for (auto& [subject, events] : by_subject) {
        std::stable_sort(events.begin(), events.end(),
                         [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });
        result.sessions.push_back(Session{subject, std::move(events)});
    }
    return result;
}

/// Writes sessions in the default `timestamp,x,y,subject` format. Values are
/// printed in shortest round-trip form so parse_events reproduces them exactly.
inline void serialize_events(std::ostream& out, const std::vector<Session>& sessions) {
    out << "timestamp,x,y,subject\n";
    for (const auto& session : sessions)
        for (const auto& e : session.events)
            out << format_double(e.timestamp) << ',' << format_double(e.x) << ',' << format_double(e.y) << ','
                << e.subject << '\n';
}

/// Kinematic parameters of a synthetic user.
struct MotionProfile {
    double mean_step = 1.0;    // mean displacement per event, px
    double step_jitter = 0.0;  // std of displacement per event, px
    double turn_mean = 0.0;    // mean heading change per event, rad
    double turn_std = 0.0;     // std of heading change per event, rad
    double axis = 0.0;         // preferred line of motion, rad
    double axis_pull = 0.0;    // fraction of the deviation from `axis` removed per event
    double tick = 0.008;       // mean inter-event time, s
    double tick_jitter = 0.0;  // lognormal sigma applied to tick
    double start_time = 0.0;
    double start_x = 960.0;
    double start_y = 540.0;
    double left = 0.0;  // region the pointer reflects inside
    double top = 0.0;
    double width = 1920.0;
    double height = 1080.0;
};

/// Deterministic random-walk session. Heading is uniformly random at the
/// start and drifts by N(turn_mean, turn_std) per event; step length is
/// max(0, N(mean_step, step_jitter)).
inline Session synthesize_session(const MotionProfile& p, std::uint64_t seed, std::size_t n_events,
                                  int subject = 0) {
    if (n_events < 1) throw ConfigError("synthesize_session: n_events must be >= 1");
    if (!(p.tick > 0.0)) throw ConfigError("synthesize_session: inter-event time must be positive");
    if (!(p.axis_pull >= 0 && p.axis_pull <= 1)) throw ConfigError("synthesize_session: axis_pull must be in [0, 1]");
    if (p.step_jitter < 0 || p.turn_std < 0 || p.tick_jitter < 0)
        throw ConfigError("synthesize_session: variances must be non-negative");
    if (!(p.width > 0 && p.height > 0)) throw ConfigError("synthesize_session: screen bounds must be positive");
    if (p.start_x < p.left || p.start_x > p.left + p.width || p.start_y < p.top || p.start_y > p.top + p.height)
        throw ConfigError("synthesize_session: start point outside the region");

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(subject)));
    constexpr double pi = 3.14159265358979323846;
    Session session{subject, {}};
    session.events.reserve(n_events);
    double t = p.start_time, x = p.start_x, y = p.start_y;
    double heading = rng.uniform(-pi, pi);
    session.events.push_back({t, x, y, subject});
    for (std::size_t i = 1; i < n_events; ++i) {
        double dt = p.tick;
        if (p.tick_jitter > 0) dt *= std::exp(rng.normal(0.0, p.tick_jitter));
        const double step = std::max(0.0, p.step_jitter > 0 ? rng.normal(p.mean_step, p.step_jitter) : p.mean_step);
        if (p.turn_std > 0 || p.turn_mean != 0) heading += p.turn_std > 0 ? rng.normal(p.turn_mean, p.turn_std) : p.turn_mean;
        if (p.axis_pull > 0) {
            // Deviation from the nearer of the two directions along the axis.
            double dev = std::remainder(heading - p.axis, pi);
            heading -= p.axis_pull * dev;
        }
        double nx = x + step * std::cos(heading);
        double ny = y + step * std::sin(heading);
        const double right = p.left + p.width, bottom = p.top + p.height;
        if (nx < p.left || nx > right) {
            nx = nx < p.left ? 2 * p.left - nx : 2 * right - nx;
            heading = pi - heading;
        }
        if (ny < p.top || ny > bottom) {
            ny = ny < p.top ? 2 * p.top - ny : 2 * bottom - ny;
            heading = -heading;
        }
        const double t_next = t + dt;
        t = t_next > t ? t_next : std::nextafter(t, INFINITY);
        x = std::clamp(nx, p.left, right);
        y = std::clamp(ny, p.top, bottom);
        session.events.push_back({t, x, y, subject});
    }
    return session;
}

}  // namespace mousedyn
