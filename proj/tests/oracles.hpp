#pragma once

// Brute-force reference implementations. Deliberately naive: every value is
// recomputed from the definition without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "frisson/feedback_map.hpp"
#include "frisson/session_align.hpp"
#include "frisson/signal_core.hpp"

namespace oracle {

// Mean of x[lo..hi], summed left to right.
inline double mean_range(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) s += x[k];
    return s / static_cast<double>(hi - lo + 1);
}

inline std::vector<double> smooth(const std::vector<double>& x, int window) {
    const std::size_t n = x.size();
    const std::size_t half = static_cast<std::size_t>(window / 2);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        out[i] = mean_range(x, i - h, i + h);
    }
    return out;
}

inline std::vector<double> remove_baseline(const std::vector<double>& x, int window) {
    const std::size_t n = x.size();
    const std::size_t half = static_cast<std::size_t>(window / 2);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        out[i] = x[i] - mean_range(x, lo, hi);
    }
    return out;
}

struct Peak {
    std::size_t index;
    double height;
    double prominence;
    std::size_t left_base;
    std::size_t right_base;
};

// O(n^2): every candidate scans outward for its bases.
inline std::vector<Peak> peaks(const std::vector<double>& x, double min_prominence, std::size_t spacing) {
    const std::size_t n = x.size();
    std::vector<Peak> cand;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(x[i] > x[i - 1])) continue;
        std::size_t j = i + 1;
        while (j < n && x[j] == x[i]) ++j;
        if (j == n || !(x[j] < x[i])) continue;

        // Scan outward to the nearest strictly higher sample on each side.
        // Strict < keeps the minimum closest to the peak.
        double lmin = x[i];
        std::size_t lbase = i;
        for (std::size_t k = i; k-- > 0;) {
            if (x[k] > x[i]) break;
            if (x[k] < lmin) {
                lmin = x[k];
                lbase = k;
            }
        }
        double rmin = x[i];
        std::size_t rbase = i;
        for (std::size_t k = i + 1; k < n; ++k) {
            if (x[k] > x[i]) break;
            if (x[k] < rmin) {
                rmin = x[k];
                rbase = k;
            }
        }
        cand.push_back({i, x[i], x[i] - std::max(lmin, rmin), lbase, rbase});
    }

    std::vector<Peak> strong;
    for (const auto& p : cand)
        if (p.prominence >= min_prominence) strong.push_back(p);

    std::vector<std::size_t> order(strong.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return strong[a].height > strong[b].height; });
    std::vector<Peak> kept;
    for (std::size_t k : order) {
        bool ok = true;
        for (const auto& q : kept) {
            const std::size_t d = q.index > strong[k].index ? q.index - strong[k].index : strong[k].index - q.index;
            if (d < spacing) ok = false;
        }
        if (ok) kept.push_back(strong[k]);
    }
    std::sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.index < b.index; });
    return kept;
}

inline bool playing(const std::vector<frisson::PlaybackEvent>& events, std::int64_t t) {
    bool on = false;
    for (const auto& e : events)
        if (e.t_wall_ms <= t) on = e.kind == frisson::PlaybackKind::play;
    return on;
}

// Accumulated play time in ms, summed interval by interval.
inline std::int64_t video_ms(const std::vector<frisson::PlaybackEvent>& events, std::int64_t t) {
    std::int64_t total = 0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (events[k].kind != frisson::PlaybackKind::play) continue;
        const std::int64_t begin = events[k].t_wall_ms;
        const std::int64_t end = k + 1 < events.size() ? events[k + 1].t_wall_ms : std::numeric_limits<std::int64_t>::max();
        if (t > begin) total += std::min(t, end) - begin;
    }
    return total;
}

// Exhaustive nearest eligible sample for every grid point. `events` must be
// closed (ending with stop).
inline std::vector<double> to_grid(const std::vector<frisson::EdaSample>& samples,
                                   const std::vector<frisson::PlaybackEvent>& events, double grid_hz) {
    std::int64_t played = 0;
    for (std::size_t k = 0; k + 1 < events.size(); k += 2) played += events[k + 1].t_wall_ms - events[k].t_wall_ms;
    const auto n = static_cast<std::size_t>(std::ceil(static_cast<double>(played) / 1000.0 * grid_hz - 1e-9));
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / grid_hz;
        double best = std::numeric_limits<double>::infinity();
        double value = 0.0;
        for (const auto& s : samples) {
            if (!playing(events, s.t_wall_ms)) continue;
            const double d = std::abs(static_cast<double>(video_ms(events, s.t_wall_ms)) / 1000.0 - t);
            if (d < best) {
                best = d;
                value = s.value;
            }
        }
        out[k] = (k > 0 && best > 1.0 / grid_hz) ? out[k - 1] : value;
    }
    return out;
}

inline std::vector<double> column_means(const std::vector<std::vector<std::uint8_t>>& rows) {
    std::vector<double> out(rows.front().size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        std::size_t ones = 0;
        for (const auto& r : rows) ones += r[c];
        out[c] = static_cast<double>(ones) / static_cast<double>(rows.size());
    }
    return out;
}

// Step function through the keyframes, sampled at grid point k.
inline double reconstruct(const std::vector<frisson::FeedbackKeyframe>& kf, std::size_t k, double grid_hz) {
    const double t = static_cast<double>(k) / grid_hz;
    double a = kf.front().magnitude;
    for (const auto& f : kf)
        if (f.video_t_s <= t + 1e-9) a = f.magnitude;
    return a;
}

}  // namespace oracle
