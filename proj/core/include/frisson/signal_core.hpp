#pragma once

// EDA-to-frisson pipeline: smoothing, baseline removal, normalization, peak
// detection, quantization, and cross-viewer aggregation. Everything here is a
// pure function of its arguments.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace frisson {

struct PipelineConfig {
    double sample_rate_hz = 5.0;
    int smooth_window_samples = 5;
    int baseline_window_samples = 50;
    double peak_min_distance_s = 5.0;
    double peak_min_prominence = 0.6;
    double quantize_halfwidth_s = 2.5;

    /// Throws Error(invalid_parameter) if any field is out of range.
    void validate() const;

    /// round(peak_min_distance_s * sample_rate_hz)
    std::size_t min_peak_spacing() const;
    /// floor(quantize_halfwidth_s * sample_rate_hz)
    std::size_t quantize_halfwidth() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Uniformly sampled skin conductance anchored at a wall-clock instant.
struct EdaSeries {
    std::int64_t start_wall_ms = 0;
    double sample_rate_hz = 5.0;
    std::vector<double> values;

    /// Non-empty, finite, positive rate. Throws Error(invalid_input).
    void validate() const;
    std::size_t size() const noexcept { return values.size(); }
};

struct PeakDescriptor {
    std::size_t index = 0;
    double height = 0.0;
    double prominence = 0.0;
    std::size_t left_base = 0;
    std::size_t right_base = 0;

    friend bool operator==(const PeakDescriptor&, const PeakDescriptor&) = default;
};

struct FrissonSeries {
    double grid_hz = 5.0;
    std::vector<std::uint8_t> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const FrissonSeries&, const FrissonSeries&) = default;
};

struct AggregateSeries {
    std::string video_id;
    double grid_hz = 5.0;
    std::size_t n_viewers = 0;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const AggregateSeries&, const AggregateSeries&) = default;
};

/// Centered moving average. The window shrinks symmetrically near the edges,
/// so output[0] and output[n-1] equal the input samples.
EdaSeries smooth(const EdaSeries& series, int window);

/// Subtracts a centered moving-average baseline of half-width window/2. Near
/// the edges the window is cut at the series bounds (asymmetric).
EdaSeries remove_baseline(const EdaSeries& series, int window);

/// Min-max scaling to [0, 1]. A constant series maps to all zeros.
EdaSeries normalize(const EdaSeries& series);

/// Prominence-thresholded peaks with greedy minimum-distance pruning, sorted
/// by index.
///
/// Candidates are strict local maxima; a flat top counts once, at its leftmost
/// sample, provided both neighbours of the plateau are lower. Prominence is the
/// height minus the higher of the two bases, where each base is the minimum
/// between the peak and the nearest strictly higher sample on that side (or the
/// series end). Candidates below `cfg.peak_min_prominence` are dropped first;
/// the rest are visited tallest first (ties: lower index first) and kept only
/// if no kept peak lies closer than `cfg.min_peak_spacing()` samples.
std::vector<PeakDescriptor> detect_peaks(std::span<const double> values,
                                         const PipelineConfig& cfg);
std::vector<PeakDescriptor> detect_peaks(const EdaSeries& series, const PipelineConfig& cfg);

/// Marks [index - h, index + h] around each peak, clipped and merged.
FrissonSeries quantize(std::size_t length, std::span<const PeakDescriptor> peaks,
                       const PipelineConfig& cfg);

/// Intermediate stages, kept for diagnostics and the CLI's `--peaks` output.
struct SessionResult {
    EdaSeries normalized;
    std::vector<PeakDescriptor> peaks;
    FrissonSeries frisson;
};

SessionResult run_session(const EdaSeries& series, const PipelineConfig& cfg);

/// smooth -> remove_baseline -> normalize -> detect_peaks -> quantize.
FrissonSeries process_session(const EdaSeries& series, const PipelineConfig& cfg);

/// Per-index mean of binary series. All inputs must share grid rate and length.
AggregateSeries aggregate(const std::string& video_id, std::span<const FrissonSeries> series);

/// floor(t * hz + 1e-9). 0.2 s at 5 Hz is index 1.
std::size_t grid_index(double t_s, double hz);

}  // namespace frisson
