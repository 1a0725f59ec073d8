#pragma once

// Text formats for recorded sessions, per-viewer frisson series, aggregates,
// keyframe timelines and event-time lists. FORMATS.md documents each one.
//
// Every reader is strict: rows that do not parse raise Error(parse_error)
// with the offending line number, and content that parses but violates an
// invariant raises Error(format_error). Writers go through a temporary file
// and a rename, so readers never observe a half-written file.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frisson/feedback_map.hpp"
#include "frisson/session_align.hpp"
#include "frisson/signal_core.hpp"

namespace frisson::storage {

namespace fs = std::filesystem;

/// One viewer watching one video: raw timestamped EDA plus the play/stop log.
struct SessionRecord {
    std::string participant_id;
    std::string video_id;
    double sample_rate_hz = 5.0;
    std::vector<EdaSample> eda;
    std::vector<PlaybackEvent> events;

    friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

inline constexpr std::string_view kMetaFile = "meta.json";
inline constexpr std::string_view kEdaFile = "eda.csv";
inline constexpr std::string_view kEventsFile = "events.jsonl";

std::string format_meta(const SessionRecord& rec);
std::string format_eda_csv(std::span<const EdaSample> eda);
std::string format_events(std::span<const PlaybackEvent> events);

void parse_meta(std::string_view text, SessionRecord& rec);
std::vector<EdaSample> parse_eda_csv(std::string_view text);
std::vector<PlaybackEvent> parse_events(std::string_view text);

/// Writes meta.json, eda.csv and events.jsonl into `dir` (created if needed).
void write_session(const fs::path& dir, const SessionRecord& rec);
SessionRecord read_session(const fs::path& dir);

/// A single viewer's binary series with its identifiers.
struct FrissonRecord {
    std::string participant_id;
    std::string video_id;
    FrissonSeries series;

    friend bool operator==(const FrissonRecord&, const FrissonRecord&) = default;
};

std::string format_frisson(const FrissonRecord& rec);
FrissonRecord parse_frisson(std::string_view text);
void write_frisson(const fs::path& file, const FrissonRecord& rec);
FrissonRecord read_frisson(const fs::path& file);

/// Values are written with at most nine fractional digits.
std::string format_aggregate(const AggregateSeries& agg);
AggregateSeries parse_aggregate(std::string_view text);
void write_aggregate(const fs::path& file, const AggregateSeries& agg);
AggregateSeries read_aggregate(const fs::path& file);

std::string format_keyframes(FeedbackDesign design, std::span<const FeedbackKeyframe> keyframes);
void write_keyframes(const fs::path& file, FeedbackDesign design, std::span<const FeedbackKeyframe> keyframes);

/// One time in seconds per line; used for detected peaks and ground truth.
std::string format_times(std::span<const double> times);
std::vector<double> parse_times(std::string_view text);
void write_times(const fs::path& file, std::span<const double> times);
std::vector<double> read_times(const fs::path& file);

/// `index,value` rows with a header, for external plotting.
std::string format_aggregate_csv(const AggregateSeries& agg);

std::string read_text(const fs::path& file);
void write_text(const fs::path& file, std::string_view content);

}  // namespace frisson::storage
