#include "frisson/session_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "frisson/error.hpp"

namespace frisson {

namespace {

constexpr std::int64_t kOpenEnd = std::numeric_limits<std::int64_t>::max();

[[noreturn]] void violation(const std::string& msg) { throw Error(ErrorCode::protocol_violation, msg); }

}  // namespace

std::string_view to_string(PlaybackKind kind) noexcept {
    return kind == PlaybackKind::play ? "play" : "stop";
}

PlaybackKind parse_playback_kind(std::string_view text) {
    if (text == "play") return PlaybackKind::play;
    if (text == "stop") return PlaybackKind::stop;
    violation("unknown playback event '" + std::string(text) + "'");
}

PlaybackTimeline build_timeline(std::span<const PlaybackEvent> events,
                                std::optional<double> video_duration_s) {
    if (events.empty()) throw Error(ErrorCode::invalid_input, "playback event list is empty");
    if (video_duration_s && !(*video_duration_s >= 0.0))
        throw Error(ErrorCode::invalid_parameter, "video duration must be >= 0");
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].t_wall_ms < 0) violation("negative event timestamp");
        const PlaybackKind expected = i % 2 == 0 ? PlaybackKind::play : PlaybackKind::stop;
        if (events[i].kind != expected) {
            std::ostringstream msg;
            if (i == 0) {
                msg << "timeline starts with stop";
            } else {
                msg << "event " << i << " repeats '" << to_string(events[i].kind) << "'";
            }
            violation(msg.str());
        }
        if (i > 0 && events[i].t_wall_ms <= events[i - 1].t_wall_ms) {
            std::ostringstream msg;
            msg << "event " << i << " at " << events[i].t_wall_ms << " ms does not follow "
                << events[i - 1].t_wall_ms << " ms";
            violation(msg.str());
        }
    }
    PlaybackTimeline tl;
    tl.events_.assign(events.begin(), events.end());
    tl.duration_s_ = video_duration_s;
    return tl;
}

bool PlaybackTimeline::open_ended() const noexcept {
    return !events_.empty() && events_.back().kind == PlaybackKind::play;
}

bool PlaybackTimeline::playing_at(std::int64_t t) const noexcept {
    for (const auto& iv : play_intervals()) {
        if (t >= iv.begin_ms && t < iv.end_ms) return true;
    }
    return false;
}

PlaybackTimeline PlaybackTimeline::closed_at(std::int64_t t_wall_ms) const {
    if (!open_ended()) return *this;
    std::vector<PlaybackEvent> ev = events_;
    ev.push_back({t_wall_ms, PlaybackKind::stop});
    return build_timeline(ev, duration_s_);
}

std::int64_t PlaybackTimeline::played_ms() const noexcept {
    std::int64_t total = 0;
    for (std::size_t i = 0; i + 1 < events_.size(); i += 2) {
        total += events_[i + 1].t_wall_ms - events_[i].t_wall_ms;
    }
    return total;
}

std::vector<PlaybackTimeline::Interval> PlaybackTimeline::play_intervals() const {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < events_.size(); i += 2) {
        const std::int64_t end = i + 1 < events_.size() ? events_[i + 1].t_wall_ms : kOpenEnd;
        out.push_back({events_[i].t_wall_ms, end});
    }
    return out;
}

std::int64_t video_time_ms(const PlaybackTimeline& timeline, std::int64_t t) {
    std::int64_t total = 0;
    for (const auto& iv : timeline.play_intervals()) {
        if (t <= iv.begin_ms) break;
        total += std::min(t, iv.end_ms) - iv.begin_ms;
    }
    if (const auto dur = timeline.video_duration_s()) {
        total = std::min<std::int64_t>(total, std::llround(*dur * 1000.0));
    }
    return total;
}

double video_time(const PlaybackTimeline& timeline, std::int64_t t_wall_ms) {
    return static_cast<double>(video_time_ms(timeline, t_wall_ms)) / 1000.0;
}

std::vector<EdaSample> to_samples(const EdaSeries& eda) {
    eda.validate();
    std::vector<EdaSample> out;
    out.reserve(eda.size());
    for (std::size_t i = 0; i < eda.size(); ++i) {
        const auto offset = std::llround(static_cast<double>(i) * 1000.0 / eda.sample_rate_hz);
        out.push_back({eda.start_wall_ms + offset, eda.values[i]});
    }
    return out;
}

GridSeries to_grid(std::span<const EdaSample> samples, double sample_rate_hz,
                   const PlaybackTimeline& timeline, double grid_hz) {
    if (!(grid_hz > 0.0)) throw Error(ErrorCode::invalid_parameter, "grid rate must be > 0");
    if (!(sample_rate_hz > 0.0)) throw Error(ErrorCode::invalid_parameter, "sample rate must be > 0");
    if (samples.empty()) throw Error(ErrorCode::insufficient_data, "no EDA samples");

    PlaybackTimeline tl = timeline;
    if (tl.open_ended()) {
        const auto period_ms = std::llround(1000.0 / sample_rate_hz);
        const std::int64_t close_at = samples.back().t_wall_ms + period_ms;
        if (close_at <= tl.events().back().t_wall_ms)
            throw Error(ErrorCode::insufficient_data, "no EDA sample during any play interval");
        tl = tl.closed_at(close_at);
    }

    // Eligible samples with their video times; input timestamps are
    // nondecreasing, so video times are too.
    std::vector<double> vt;
    std::vector<double> value;
    const auto intervals = tl.play_intervals();
    std::size_t iv = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!std::isfinite(s.value)) throw Error(ErrorCode::invalid_input, "non-finite EDA value");
        if (i > 0 && s.t_wall_ms < samples[i - 1].t_wall_ms)
            throw Error(ErrorCode::invalid_input, "EDA timestamps are not monotone");
        while (iv < intervals.size() && s.t_wall_ms >= intervals[iv].end_ms) ++iv;
        if (iv == intervals.size()) break;
        if (s.t_wall_ms < intervals[iv].begin_ms) continue;
        vt.push_back(video_time(tl, s.t_wall_ms));
        value.push_back(s.value);
    }
    if (vt.empty()) throw Error(ErrorCode::insufficient_data, "no EDA sample during any play interval");

    double covered_s = static_cast<double>(tl.played_ms()) / 1000.0;
    if (const auto dur = tl.video_duration_s()) covered_s = std::min(covered_s, *dur);
    const auto n = static_cast<std::size_t>(std::ceil(covered_s * grid_hz - 1e-9));

    GridSeries out{grid_hz, std::vector<double>(n)};
    const double step = 1.0 / grid_hz;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / grid_hz;
        // Nearest eligible sample; on equal distance the earliest one wins.
        const auto above = std::lower_bound(vt.begin(), vt.end(), t);
        auto best = vt.end();
        if (above != vt.begin()) best = std::lower_bound(vt.begin(), above, *std::prev(above));
        if (above != vt.end() && (best == vt.end() || *above - t < t - *best)) best = above;
        const double dist = std::abs(*best - t);
        out.values[k] = (k > 0 && dist > step) ? out.values[k - 1]
                                               : value[static_cast<std::size_t>(best - vt.begin())];
    }
    return out;
}

GridSeries to_grid(const EdaSeries& eda, const PlaybackTimeline& timeline, double grid_hz) {
    return to_grid(to_samples(eda), eda.sample_rate_hz, timeline, grid_hz);
}

}  // namespace frisson
