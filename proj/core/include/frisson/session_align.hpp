#pragma once

// Maps wall-clock EDA samples onto the video-time grid using the viewer's
// play/stop log. Video position is accumulated play time; seeks are not
// representable.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "frisson/signal_core.hpp"

namespace frisson {

enum class PlaybackKind { play, stop };

std::string_view to_string(PlaybackKind kind) noexcept;
/// "play" / "stop"; anything else throws Error(protocol_violation).
PlaybackKind parse_playback_kind(std::string_view text);

struct PlaybackEvent {
    std::int64_t t_wall_ms = 0;
    PlaybackKind kind = PlaybackKind::play;

    friend bool operator==(const PlaybackEvent&, const PlaybackEvent&) = default;
};

/// A timestamped raw EDA sample as it arrives from a sensor.
struct EdaSample {
    std::int64_t t_wall_ms = 0;
    double value = 0.0;

    friend bool operator==(const EdaSample&, const EdaSample&) = default;
};

/// Validated play/stop log. Construct through build_timeline().
class PlaybackTimeline {
public:
    const std::vector<PlaybackEvent>& events() const noexcept { return events_; }
    std::optional<double> video_duration_s() const noexcept { return duration_s_; }

    /// True when the last event is a play (the viewer has not stopped yet).
    bool open_ended() const noexcept;
    bool playing_at(std::int64_t t_wall_ms) const noexcept;

    /// Closes a trailing play at `t_wall_ms`; a no-op when already closed.
    /// Throws Error(protocol_violation) if `t_wall_ms` precedes the last play.
    PlaybackTimeline closed_at(std::int64_t t_wall_ms) const;

    /// Total played time, in milliseconds. Open timelines count up to the
    /// last event only.
    std::int64_t played_ms() const noexcept;

    /// Play intervals as half-open [begin, end) wall-clock ranges; an open
    /// trailing interval ends at INT64_MAX.
    struct Interval {
        std::int64_t begin_ms;
        std::int64_t end_ms;
    };
    std::vector<Interval> play_intervals() const;

private:
    friend PlaybackTimeline build_timeline(std::span<const PlaybackEvent>, std::optional<double>);
    std::vector<PlaybackEvent> events_;
    std::optional<double> duration_s_;
};

/// Validates alternation (starting with play) and strictly increasing
/// timestamps. Throws Error(protocol_violation) otherwise, or
/// Error(invalid_input) for an empty list.
PlaybackTimeline build_timeline(std::span<const PlaybackEvent> events,
                                std::optional<double> video_duration_s = std::nullopt);

/// Elapsed play time up to `t_wall_ms`, in seconds; clamped to the video
/// duration when the timeline carries one.
double video_time(const PlaybackTimeline& timeline, std::int64_t t_wall_ms);
std::int64_t video_time_ms(const PlaybackTimeline& timeline, std::int64_t t_wall_ms);

struct GridSeries {
    double grid_hz = 5.0;
    std::vector<double> values;

    /// View as an EdaSeries anchored at video time zero.
    EdaSeries as_eda() const { return EdaSeries{0, grid_hz, values}; }
};

/// Nearest-sample gridding. Only samples taken inside a play interval are
/// eligible. A grid point whose nearest eligible sample is more than one grid
/// step away repeats the previous grid value. The grid covers the played
/// duration; an open trailing play is closed one sample period after the last
/// sample.
GridSeries to_grid(std::span<const EdaSample> samples, double sample_rate_hz,
                   const PlaybackTimeline& timeline, double grid_hz);
GridSeries to_grid(const EdaSeries& eda, const PlaybackTimeline& timeline, double grid_hz);

/// Expands a uniform series into timestamped samples.
std::vector<EdaSample> to_samples(const EdaSeries& eda);

}  // namespace frisson
