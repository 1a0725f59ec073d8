#pragma once

// Aggregate magnitude -> rendering parameters for the three feedback designs,
// and the keyframe timeline that drives playback-synchronized animation.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "frisson/signal_core.hpp"

namespace frisson {

enum class FeedbackDesign { ambient_light, icon, vibration };

std::string_view to_string(FeedbackDesign design) noexcept;
/// Accepts "ambient_light", "icon", "vibration"; returns nullopt otherwise.
std::optional<FeedbackDesign> parse_design(std::string_view name) noexcept;

struct DesignParams {
    // Fraction of the motor's maximum (6000 RPM) reached at a = 1.
    double vibration_duty_max = 0.7;
    double ambient_radius_min_px = 8.0;
    double ambient_radius_span_px = 72.0;
    double icon_visibility_threshold = 0.01;
    double icon_scale_min = 0.4;
    double icon_scale_span = 0.6;

    void validate() const;
};

struct AmbientState {
    double opacity = 0.0;
    double halo_radius_px = 0.0;
};

struct IconState {
    bool visible = false;
    /// Fraction of the configured maximum icon size.
    double scale = 0.0;
};

/// Magnitudes outside [0, 1] throw Error(invalid_parameter).
double map_vibration(double a, const DesignParams& params = {});
AmbientState map_ambient(double a, const DesignParams& params = {});
IconState map_icon(double a, const DesignParams& params = {});

struct FeedbackKeyframe {
    double video_t_s = 0.0;
    double magnitude = 0.0;

    friend bool operator==(const FeedbackKeyframe&, const FeedbackKeyframe&) = default;
};

/// Run-length compressed step timeline: each run of equal magnitudes becomes
/// a keyframe at its first grid point, plus one at its last grid point when
/// the run spans more than one point.
std::vector<FeedbackKeyframe> build_keyframes(const AggregateSeries& agg, FeedbackDesign design);

/// Piecewise-constant reconstruction: magnitude of the last keyframe at or
/// before `video_t_s` (the first keyframe's magnitude before it).
double keyframe_magnitude_at(const std::vector<FeedbackKeyframe>& keyframes, double video_t_s);

/// values[min(floor(t * grid_hz), len - 1)]. Negative time throws
/// Error(invalid_parameter); an empty aggregate throws Error(invalid_input).
double magnitude_at(const AggregateSeries& agg, double video_t_s);

}  // namespace frisson
