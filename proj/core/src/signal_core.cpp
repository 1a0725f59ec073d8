#include "frisson/signal_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "frisson/error.hpp"

namespace frisson {

namespace {

// Guards floor/round of products such as 2.3 * 10 that land a hair below an
// integer.
constexpr double kIndexEps = 1e-9;

double window_mean(std::span<const double> v, std::size_t lo, std::size_t hi) {
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += v[k];
    return sum / static_cast<double>(hi - lo + 1);
}

// Sparse table answering "index of the minimum on [lo, hi]". Ties resolve to
// the larger index when prefer_right is set, otherwise to the smaller one.
class MinIndexTable {
public:
    MinIndexTable(std::span<const double> v, bool prefer_right) : v_(v), prefer_right_(prefer_right) {
        const std::size_t n = v.size();
        levels_.emplace_back(n);
        std::iota(levels_[0].begin(), levels_[0].end(), std::size_t{0});
        for (std::size_t width = 2; width <= n; width *= 2) {
            const auto& prev = levels_.back();
            std::vector<std::size_t> next(n - width + 1);
            for (std::size_t i = 0; i + width <= n; ++i) {
                next[i] = pick(prev[i], prev[i + width / 2]);
            }
            levels_.push_back(std::move(next));
        }
    }

    std::size_t query(std::size_t lo, std::size_t hi) const {
        const std::size_t len = hi - lo + 1;
        std::size_t level = 0;
        while ((std::size_t{2} << level) <= len) ++level;
        return pick(levels_[level][lo], levels_[level][hi + 1 - (std::size_t{1} << level)]);
    }

private:
    std::size_t pick(std::size_t a, std::size_t b) const {
        if (v_[a] < v_[b]) return a;
        if (v_[b] < v_[a]) return b;
        return prefer_right_ ? std::max(a, b) : std::min(a, b);
    }

    std::span<const double> v_;
    bool prefer_right_;
    std::vector<std::vector<std::size_t>> levels_;
};

std::vector<std::size_t> local_maxima(std::span<const double> v) {
    std::vector<std::size_t> out;
    const std::size_t n = v.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (v[i] > v[i - 1]) {
            std::size_t j = i;
            while (j + 1 < n && v[j + 1] == v[i]) ++j;
            if (j + 1 < n && v[j + 1] < v[i]) out.push_back(i);
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

}  // namespace

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_parameter, msg); };
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) fail("sample_rate_hz must be > 0");
    if (smooth_window_samples < 1 || smooth_window_samples % 2 == 0)
        fail("smooth_window_samples must be odd and >= 1");
    if (baseline_window_samples < 1) fail("baseline_window_samples must be >= 1");
    if (!(peak_min_distance_s > 0.0) || !std::isfinite(peak_min_distance_s))
        fail("peak_min_distance_s must be > 0");
    if (!(peak_min_prominence > 0.0 && peak_min_prominence <= 1.0))
        fail("peak_min_prominence must be in (0, 1]");
    if (!(quantize_halfwidth_s >= 0.0) || !std::isfinite(quantize_halfwidth_s))
        fail("quantize_halfwidth_s must be >= 0");
}

std::size_t PipelineConfig::min_peak_spacing() const {
    return static_cast<std::size_t>(std::llround(peak_min_distance_s * sample_rate_hz));
}

std::size_t PipelineConfig::quantize_halfwidth() const {
    return static_cast<std::size_t>(std::floor(quantize_halfwidth_s * sample_rate_hz + kIndexEps));
}

void EdaSeries::validate() const {
    if (values.empty()) throw Error(ErrorCode::invalid_input, "EDA series is empty");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
        throw Error(ErrorCode::invalid_input, "EDA sample rate must be > 0");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            std::ostringstream msg;
            msg << "non-finite EDA value at index " << i;
            throw Error(ErrorCode::invalid_input, msg.str());
        }
    }
}

std::size_t grid_index(double t_s, double hz) {
    return static_cast<std::size_t>(std::floor(t_s * hz + kIndexEps));
}

EdaSeries smooth(const EdaSeries& series, int window) {
    if (window < 1 || window % 2 == 0)
        throw Error(ErrorCode::invalid_parameter, "smoothing window must be odd and >= 1");
    series.validate();
    const std::size_t n = series.size();
    if (static_cast<std::size_t>(window) > n)
        throw Error(ErrorCode::invalid_parameter, "smoothing window longer than series");

    const std::size_t half = static_cast<std::size_t>(window) / 2;
    EdaSeries out{series.start_wall_ms, series.sample_rate_hz, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = std::min({half, i, n - 1 - i});
        out.values[i] = window_mean(series.values, i - r, i + r);
    }
    return out;
}

EdaSeries remove_baseline(const EdaSeries& series, int window) {
    if (window < 1) throw Error(ErrorCode::invalid_parameter, "baseline window must be >= 1");
    if (series.values.empty()) throw Error(ErrorCode::invalid_input, "EDA series is empty");
    series.validate();
    const std::size_t n = series.size();
    const std::size_t half = static_cast<std::size_t>(window) / 2;
    EdaSeries out{series.start_wall_ms, series.sample_rate_hz, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        out.values[i] = series.values[i] - window_mean(series.values, lo, hi);
    }
    return out;
}

EdaSeries normalize(const EdaSeries& series) {
    series.validate();
    const auto [lo_it, hi_it] = std::minmax_element(series.values.begin(), series.values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    EdaSeries out{series.start_wall_ms, series.sample_rate_hz, std::vector<double>(series.size(), 0.0)};
    if (range > 0.0) {
        for (std::size_t i = 0; i < series.size(); ++i) {
            // Clamp guards the rare 1 ulp overshoot of (x - lo) / range.
            out.values[i] = std::clamp((series.values[i] - lo) / range, 0.0, 1.0);
        }
    }
    return out;
}

std::vector<PeakDescriptor> detect_peaks(std::span<const double> v, const PipelineConfig& cfg) {
    cfg.validate();
    const std::size_t n = v.size();
    const auto candidates = local_maxima(v);
    if (candidates.empty()) return {};

    // Nearest strictly higher sample on each side, via monotonic stacks.
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> higher_left(n, none), higher_right(n, none);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        while (!stack.empty() && v[stack.back()] <= v[i]) stack.pop_back();
        if (!stack.empty()) higher_left[i] = stack.back();
        stack.push_back(i);
    }
    stack.clear();
    for (std::size_t i = n; i-- > 0;) {
        while (!stack.empty() && v[stack.back()] <= v[i]) stack.pop_back();
        if (!stack.empty()) higher_right[i] = stack.back();
        stack.push_back(i);
    }

    const MinIndexTable left_min(v, /*prefer_right=*/true);
    const MinIndexTable right_min(v, /*prefer_right=*/false);

    std::vector<PeakDescriptor> prominent;
    for (const std::size_t i : candidates) {
        const std::size_t lo = higher_left[i] == none ? 0 : higher_left[i] + 1;
        const std::size_t hi = higher_right[i] == none ? n - 1 : higher_right[i] - 1;
        PeakDescriptor p;
        p.index = i;
        p.height = v[i];
        p.left_base = left_min.query(lo, i);
        p.right_base = right_min.query(i, hi);
        p.prominence = v[i] - std::max(v[p.left_base], v[p.right_base]);
        if (p.prominence >= cfg.peak_min_prominence) prominent.push_back(p);
    }

    std::vector<std::size_t> order(prominent.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return prominent[a].height > prominent[b].height;
    });

    const std::size_t spacing = cfg.min_peak_spacing();
    std::set<std::size_t> kept_index;
    std::vector<PeakDescriptor> kept;
    for (const std::size_t k : order) {
        const std::size_t idx = prominent[k].index;
        auto above = kept_index.lower_bound(idx);
        if (above != kept_index.end() && *above - idx < spacing) continue;
        if (above != kept_index.begin() && idx - *std::prev(above) < spacing) continue;
        kept_index.insert(idx);
        kept.push_back(prominent[k]);
    }
    std::sort(kept.begin(), kept.end(),
              [](const PeakDescriptor& a, const PeakDescriptor& b) { return a.index < b.index; });
    return kept;
}

std::vector<PeakDescriptor> detect_peaks(const EdaSeries& series, const PipelineConfig& cfg) {
    series.validate();
    return detect_peaks(std::span<const double>(series.values), cfg);
}

FrissonSeries quantize(std::size_t length, std::span<const PeakDescriptor> peaks,
                       const PipelineConfig& cfg) {
    cfg.validate();
    FrissonSeries out{cfg.sample_rate_hz, std::vector<std::uint8_t>(length, 0)};
    const std::size_t h = cfg.quantize_halfwidth();
    for (const auto& p : peaks) {
        if (p.index >= length) {
            std::ostringstream msg;
            msg << "peak index " << p.index << " outside series of length " << length;
            throw Error(ErrorCode::invalid_input, msg.str());
        }
        const std::size_t lo = p.index >= h ? p.index - h : 0;
        const std::size_t hi = std::min(length - 1, p.index + h);
        std::fill(out.values.begin() + static_cast<std::ptrdiff_t>(lo),
                  out.values.begin() + static_cast<std::ptrdiff_t>(hi) + 1, std::uint8_t{1});
    }
    return out;
}

SessionResult run_session(const EdaSeries& series, const PipelineConfig& cfg) {
    cfg.validate();
    const EdaSeries smoothed = smooth(series, cfg.smooth_window_samples);
    const EdaSeries detrended = remove_baseline(smoothed, cfg.baseline_window_samples);
    SessionResult result;
    result.normalized = normalize(detrended);
    result.peaks = detect_peaks(std::span<const double>(result.normalized.values), cfg);
    result.frisson = quantize(series.size(), result.peaks, cfg);
    return result;
}

FrissonSeries process_session(const EdaSeries& series, const PipelineConfig& cfg) {
    return run_session(series, cfg).frisson;
}

AggregateSeries aggregate(const std::string& video_id, std::span<const FrissonSeries> series) {
    if (series.empty()) throw Error(ErrorCode::invalid_input, "cannot aggregate zero series");
    const double hz = series.front().grid_hz;
    const std::size_t len = series.front().size();
    for (std::size_t s = 0; s < series.size(); ++s) {
        if (series[s].grid_hz != hz || series[s].size() != len) {
            std::ostringstream msg;
            msg << "series " << s << " has shape (" << series[s].size() << " @ " << series[s].grid_hz
                << " Hz), expected (" << len << " @ " << hz << " Hz)";
            throw Error(ErrorCode::shape_mismatch, msg.str());
        }
    }

    std::vector<std::size_t> counts(len, 0);
    for (const auto& s : series) {
        for (std::size_t k = 0; k < len; ++k) {
            if (s.values[k] > 1) throw Error(ErrorCode::invalid_input, "frisson series is not binary");
            counts[k] += s.values[k];
        }
    }
    AggregateSeries out{video_id, hz, series.size(), std::vector<double>(len)};
    const double n = static_cast<double>(series.size());
    for (std::size_t k = 0; k < len; ++k) out.values[k] = static_cast<double>(counts[k]) / n;
    return out;
}

}  // namespace frisson
