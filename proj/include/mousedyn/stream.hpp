#pragma once

// Continuous authentication over a live event stream: every completed block
// is scored and folded into an exponentially weighted trust value.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mousedyn/actions.hpp"
#include "mousedyn/common.hpp"

namespace mousedyn {

struct TrustPolicy {
    double initial_trust = 0.7;
    double lambda = 0.2;     // weight of the newest score
    double threshold = 0.5;  // trust below this counts as a low update
    std::size_t consecutive = 3;

    void validate() const {
        if (!(initial_trust >= 0 && initial_trust <= 1)) throw ConfigError("trust policy: initial trust must be in [0, 1]");
        if (!(lambda > 0 && lambda <= 1)) throw ConfigError("trust policy: lambda must be in (0, 1]");
        if (!(threshold >= 0 && threshold <= 1)) throw ConfigError("trust policy: threshold must be in [0, 1]");
        if (consecutive < 1) throw ConfigError("trust policy: consecutive count must be >= 1");
    }
};

enum class TrustStatus { ok, suspect, alarm };

inline std::string to_string(TrustStatus s) {
    switch (s) {
        case TrustStatus::ok: return "ok";
        case TrustStatus::suspect: return "suspect";
        case TrustStatus::alarm: return "alarm";
    }
    return "ok";
}

struct Decision {
    std::size_t action_index = 0;
    double score = 0;
    double trust = 0;
    TrustStatus status = TrustStatus::ok;
};

/// trust <- (1 - lambda) * trust + lambda * s. An alarm is raised once trust
/// has been below the threshold for `consecutive` updates in a row, and
/// stays raised while it remains low.
class TrustMonitor {
public:
    explicit TrustMonitor(TrustPolicy policy = {}) : policy_(policy), trust_(policy.initial_trust) {
        policy_.validate();
    }

    Decision update(double score) {
        const double s = std::clamp(score, 0.0, 1.0);
        trust_ = std::clamp((1.0 - policy_.lambda) * trust_ + policy_.lambda * s, 0.0, 1.0);
        if (trust_ < policy_.threshold)
            low_count_ = std::min(low_count_ + 1, policy_.consecutive);
        else
            low_count_ = 0;
        TrustStatus status = TrustStatus::ok;
        if (low_count_ >= policy_.consecutive)
            status = TrustStatus::alarm;
        else if (low_count_ > 0)
            status = TrustStatus::suspect;
        return Decision{updates_++, s, trust_, status};
    }

    double trust() const { return trust_; }
    std::size_t low_count() const { return low_count_; }
    const TrustPolicy& policy() const { return policy_; }

private:
    TrustPolicy policy_;
    double trust_;
    std::size_t low_count_ = 0;
    std::size_t updates_ = 0;
};

struct StreamSummary {
    std::size_t events = 0;
    std::size_t actions = 0;
    std::size_t discarded_events = 0;  // partial trailing block
    std::size_t alarms = 0;            // updates with alarm status
    double final_trust = 0;
};

/// Buffers events into blocks of block_len; block alignment persists across
/// push() calls, so several inputs stream as one sequence.
class StreamAuthenticator {
public:
    using Scorer = std::function<double(const MouseAction&)>;

    StreamAuthenticator(Scorer scorer, TrustPolicy policy = {}, std::size_t block_len = kDefaultBlockLen)
        : scorer_(std::move(scorer)), monitor_(policy), block_len_(block_len) {
        if (block_len_ < 2) throw ConfigError("stream: block_len must be >= 2");
    }

    std::optional<Decision> push(const RawEvent& event) {
        if (last_timestamp_ && event.timestamp < *last_timestamp_)
            throw DataError("stream: events must arrive in time order");
        last_timestamp_ = event.timestamp;
        buffer_.push_back(event);
        ++summary_.events;
        if (buffer_.size() < block_len_) return std::nullopt;
        MouseAction action{buffer_.front().subject, summary_.actions, std::move(buffer_)};
        buffer_.clear();
        ++summary_.actions;
        const auto decision = monitor_.update(scorer_(action));
        if (decision.status == TrustStatus::alarm) ++summary_.alarms;
        return decision;
    }

    StreamSummary finish() {
        summary_.discarded_events = buffer_.size();
        buffer_.clear();
        summary_.final_trust = monitor_.trust();
        return summary_;
    }

private:
    Scorer scorer_;
    TrustMonitor monitor_;
    std::size_t block_len_;
    std::vector<RawEvent> buffer_;
    std::optional<double> last_timestamp_;
    StreamSummary summary_;
};

}  // namespace mousedyn
