#include "frisson/feedback_map.hpp"

#include <algorithm>
#include <cmath>

#include "frisson/error.hpp"

namespace frisson {

namespace {

void check_magnitude(double a) {
    if (!(a >= 0.0 && a <= 1.0)) {
        throw Error(ErrorCode::invalid_parameter, "feedback magnitude must be in [0, 1], got " + std::to_string(a));
    }
}

}  // namespace

std::string_view to_string(FeedbackDesign design) noexcept {
    switch (design) {
        case FeedbackDesign::ambient_light: return "ambient_light";
        case FeedbackDesign::icon: return "icon";
        case FeedbackDesign::vibration: return "vibration";
    }
    return "";
}

std::optional<FeedbackDesign> parse_design(std::string_view name) noexcept {
    if (name == "ambient_light") return FeedbackDesign::ambient_light;
    if (name == "icon") return FeedbackDesign::icon;
    if (name == "vibration") return FeedbackDesign::vibration;
    return std::nullopt;
}

void DesignParams::validate() const {
    if (!(vibration_duty_max > 0.0 && vibration_duty_max <= 1.0))
        throw Error(ErrorCode::invalid_parameter, "vibration_duty_max must be in (0, 1]");
    if (ambient_radius_min_px < 0.0 || ambient_radius_span_px < 0.0 || icon_scale_min < 0.0 ||
        icon_scale_span < 0.0 || icon_visibility_threshold < 0.0)
        throw Error(ErrorCode::invalid_parameter, "design constants must be nonnegative");
}

double map_vibration(double a, const DesignParams& params) {
    check_magnitude(a);
    return params.vibration_duty_max * a;
}

AmbientState map_ambient(double a, const DesignParams& params) {
    check_magnitude(a);
    return {a, params.ambient_radius_min_px + params.ambient_radius_span_px * a};
}

IconState map_icon(double a, const DesignParams& params) {
    check_magnitude(a);
    return {a >= params.icon_visibility_threshold, params.icon_scale_min + params.icon_scale_span * a};
}

std::vector<FeedbackKeyframe> build_keyframes(const AggregateSeries& agg, FeedbackDesign /*design*/) {
    // All three designs share the magnitude timeline; renderers apply the
    // design-specific map.
    std::vector<FeedbackKeyframe> out;
    const std::size_t n = agg.values.size();
    std::size_t run_start = 0;
    while (run_start < n) {
        std::size_t run_end = run_start;
        while (run_end + 1 < n && agg.values[run_end + 1] == agg.values[run_start]) ++run_end;
        const double m = agg.values[run_start];
        out.push_back({static_cast<double>(run_start) / agg.grid_hz, m});
        if (run_end > run_start) out.push_back({static_cast<double>(run_end) / agg.grid_hz, m});
        run_start = run_end + 1;
    }
    return out;
}

double keyframe_magnitude_at(const std::vector<FeedbackKeyframe>& keyframes, double video_t_s) {
    if (keyframes.empty()) throw Error(ErrorCode::invalid_input, "empty keyframe list");
    auto it = std::upper_bound(keyframes.begin(), keyframes.end(), video_t_s,
                               [](double t, const FeedbackKeyframe& k) { return t < k.video_t_s; });
    if (it == keyframes.begin()) return keyframes.front().magnitude;
    return std::prev(it)->magnitude;
}

double magnitude_at(const AggregateSeries& agg, double video_t_s) {
    if (!(video_t_s >= 0.0)) throw Error(ErrorCode::invalid_parameter, "video time must be >= 0");
    if (agg.values.empty()) throw Error(ErrorCode::invalid_input, "aggregate is empty");
    const double last = static_cast<double>(agg.values.size() - 1);
    const double pos = std::floor(video_t_s * agg.grid_hz + 1e-9);
    return pos >= last ? agg.values.back() : agg.values[static_cast<std::size_t>(pos)];
}

}  // namespace frisson
