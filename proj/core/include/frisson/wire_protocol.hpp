#pragma once

// Line-delimited JSON frames exchanged between sensors, viewers, feedback
// devices and the stream server. PROTOCOL.md is the normative description;
// this header is its implementation.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "frisson/session_align.hpp"
#include "frisson/signal_core.hpp"

namespace frisson::wire {

enum class Op { pub, sub, msg, get_aggregate, aggregate, err };

std::string_view to_string(Op op) noexcept;

struct EdaPayload {
    std::int64_t t = 0;  // wall ms
    double v = 0.0;      // conductance
    friend bool operator==(const EdaPayload&, const EdaPayload&) = default;
};

struct PlaybackPayload {
    std::int64_t t = 0;
    PlaybackKind e = PlaybackKind::play;
    friend bool operator==(const PlaybackPayload&, const PlaybackPayload&) = default;
};

struct FeedbackPayload {
    std::int64_t t = 0;
    double a = 0.0;
    double duty = 0.0;
    friend bool operator==(const FeedbackPayload&, const FeedbackPayload&) = default;
};

struct SubscribePayload {
    friend bool operator==(const SubscribePayload&, const SubscribePayload&) = default;
};

struct GetAggregatePayload {
    std::string video;
    friend bool operator==(const GetAggregatePayload&, const GetAggregatePayload&) = default;
};

struct ErrorPayload {
    std::string code;
    std::string msg;
    friend bool operator==(const ErrorPayload&, const ErrorPayload&) = default;
};

using Payload = std::variant<SubscribePayload, EdaPayload, PlaybackPayload, FeedbackPayload,
                             GetAggregatePayload, AggregateSeries, ErrorPayload>;

struct Frame {
    Op op = Op::sub;
    std::string topic;  // empty for get_aggregate / aggregate / err
    Payload data;

    friend bool operator==(const Frame&, const Frame&) = default;
};

enum class TopicKind { eda, playback, feedback };

struct TopicInfo {
    TopicKind kind;
    std::string session;
    std::string participant;  // empty for feedback topics
};

/// Parses a concrete topic of the scheme eda/{session}/{participant},
/// playback/{session}/{participant} or feedback/{session}.
std::optional<TopicInfo> classify_topic(std::string_view topic);

std::string eda_topic(std::string_view session, std::string_view participant);
std::string playback_topic(std::string_view session, std::string_view participant);
std::string feedback_topic(std::string_view session);

/// True when `topic` matches the wire grammar `^[a-z_]+(/[A-Za-z0-9_-]+)*$`.
/// With `allow_wildcards`, any segment after the first may also be `+`.
bool valid_topic(std::string_view topic, bool allow_wildcards = false);

/// Segment-wise equality; `+` in the pattern matches exactly one segment.
bool topic_match(std::string_view pattern, std::string_view topic);

/// Checks op/topic/payload consistency. Throws Error(encode_error) on failure.
void validate(const Frame& frame);

/// One line of JSON terminated by '\n'. Throws Error(encode_error).
std::string encode(const Frame& frame);

/// Inverse of encode. Accepts the line with or without its trailing '\n'.
/// Throws Error(parse_error) for malformed JSON and Error(protocol_violation)
/// for well-formed text that is not a valid frame.
Frame decode(std::string_view line);

Frame make_eda(std::string_view session, std::string_view participant, std::int64_t t, double v);
Frame make_playback(std::string_view session, std::string_view participant, std::int64_t t, PlaybackKind e);
Frame make_subscribe(std::string pattern);
Frame make_error(std::string_view code, std::string msg);

/// Splits a byte stream into lines. Lines longer than the limit are discarded
/// up to the next newline and reported as overflowed.
class LineBuffer {
public:
    explicit LineBuffer(std::size_t max_line = 4u << 20) : max_line_(max_line) {}

    struct Line {
        std::string text;
        bool overflowed = false;
    };

    std::vector<Line> feed(std::string_view bytes);
    std::size_t pending() const noexcept { return partial_.size(); }

private:
    std::size_t max_line_;
    std::string partial_;
    bool discarding_ = false;
};

}  // namespace frisson::wire
