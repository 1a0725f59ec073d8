#include "frisson/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "frisson/error.hpp"

namespace frisson::sim {

namespace {

[[noreturn]] void bad_param(const std::string& msg) { throw Error(ErrorCode::invalid_parameter, msg); }

std::string participant_name(std::size_t index, std::size_t count) {
    const std::size_t width = std::max<std::size_t>(2, std::to_string(count).size());
    std::string num = std::to_string(index + 1);
    return "p" + std::string(width - num.size(), '0') + num;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

double Rng::gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void ScrParams::validate() const {
    if (!(amplitude > 0.0)) bad_param("SCR amplitude must be > 0");
    if (!(rise_tau_s > 0.0 && rise_tau_s < decay_tau_s)) bad_param("SCR time constants need 0 < rise < decay");
}

double ScrParams::peak_time_s() const {
    return std::log(decay_tau_s / rise_tau_s) * rise_tau_s * decay_tau_s / (decay_tau_s - rise_tau_s);
}

double scr_kernel(double t, const ScrParams& p) {
    p.validate();
    if (t < 0.0) return 0.0;
    auto bracket = [&p](double x) { return std::exp(-x / p.decay_tau_s) - std::exp(-x / p.rise_tau_s); };
    return p.amplitude * bracket(t) / bracket(p.peak_time_s());
}

void SimSpec::validate() const {
    if (!(duration_s > 0.0)) bad_param("duration must be > 0");
    if (!(sample_rate_hz > 0.0)) bad_param("sample rate must be > 0");
    if (!(noise_sigma >= 0.0) || !(drift_amplitude >= 0.0)) bad_param("noise and drift must be >= 0");
    scr.validate();
    for (double e : event_times_s) {
        if (!(e >= 0.0 && e < duration_s)) bad_param("event time outside [0, duration)");
    }
}

double clean_signal(const SimSpec& spec, double t) {
    double v = spec.drift_amplitude * std::sin(2.0 * std::numbers::pi * t / spec.duration_s);
    for (double e : spec.event_times_s) v += scr_kernel(t - e, spec.scr);
    return v;
}

Generated generate(const SimSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
    Generated out;
    out.eda = EdaSeries{0, spec.sample_rate_hz, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / spec.sample_rate_hz;
        double v = clean_signal(spec, t);
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.gaussian();
        out.eda.values[i] = v;
    }
    out.truth_s = spec.event_times_s;
    std::sort(out.truth_s.begin(), out.truth_s.end());
    return out;
}

Evaluation evaluate(std::span<const double> detected, std::span<const double> truth, double tol_s) {
    Evaluation ev;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < detected.size() && j < truth.size()) {
        if (std::abs(detected[i] - truth[j]) <= tol_s) {
            ++ev.matches;
            ++i;
            ++j;
        } else if (detected[i] < truth[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    ev.precision = detected.empty() ? 1.0 : static_cast<double>(ev.matches) / static_cast<double>(detected.size());
    ev.recall = truth.empty() ? 1.0 : static_cast<double>(ev.matches) / static_cast<double>(truth.size());
    return ev;
}

void CohortSpec::validate() const {
    if (video_id.empty()) bad_param("video id must be non-empty");
    if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0)) bad_param("duration and sample rate must be > 0");
    if (participants == 0) bad_param("need at least one participant");
    if (!(min_gap_s > 0.0) || edge_margin_s < 0.0 || onset_jitter_s < 0.0) bad_param("bad event spacing");
    if (!(pause_probability >= 0.0 && pause_probability <= 1.0)) bad_param("pause probability must be in [0, 1]");
    if (!(noise_sigma >= 0.0) || !(drift_amplitude >= 0.0)) bad_param("noise and drift must be >= 0");
    scr.validate();
    if (events_per_viewer > pool_capacity(*this)) {
        std::ostringstream msg;
        msg << events_per_viewer << " events at " << min_gap_s << " s spacing do not fit in " << duration_s << " s";
        bad_param(msg.str());
    }
}

std::size_t pool_capacity(const CohortSpec& spec) {
    const double span = spec.duration_s - 2.0 * spec.edge_margin_s;
    if (span < 0.0) return 0;
    const double gap = spec.min_gap_s + 2.0 * spec.onset_jitter_s;
    return static_cast<std::size_t>(std::floor(span / gap)) + 1;
}

Cohort simulate_cohort(const CohortSpec& spec) {
    spec.validate();
    Cohort cohort;

    // Shared pool of frisson moments, min_gap_s + 2 * jitter apart.
    Rng pool_rng(splitmix64(spec.seed));
    const std::size_t pool_size =
        std::min(pool_capacity(spec), 2 * spec.events_per_viewer);
    const double gap = spec.min_gap_s + 2.0 * spec.onset_jitter_s;
    const double span = spec.duration_s - 2.0 * spec.edge_margin_s;
    const double slack = pool_size > 0 ? span - static_cast<double>(pool_size - 1) * gap : 0.0;
    std::vector<double> offsets(pool_size);
    for (auto& u : offsets) u = pool_rng.uniform(0.0, slack);
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t i = 0; i < pool_size; ++i) {
        cohort.pool_s.push_back(spec.edge_margin_s + offsets[i] + static_cast<double>(i) * gap);
    }

    const auto period_ms = std::llround(1000.0 / spec.sample_rate_hz);
    const auto duration_ms = std::llround(spec.duration_s * 1000.0);

    for (std::size_t v = 0; v < spec.participants; ++v) {
        Rng rng(splitmix64(spec.seed ^ splitmix64(v + 1)));

        std::vector<std::size_t> idx(pool_size);
        for (std::size_t i = 0; i < pool_size; ++i) idx[i] = i;
        for (std::size_t i = 0; i < spec.events_per_viewer; ++i) std::swap(idx[i], idx[i + rng.below(pool_size - i)]);
        idx.resize(spec.events_per_viewer);
        std::sort(idx.begin(), idx.end());

        SimSpec viewer;
        viewer.duration_s = spec.duration_s;
        viewer.sample_rate_hz = spec.sample_rate_hz;
        viewer.scr = spec.scr;
        viewer.drift_amplitude = spec.drift_amplitude;
        viewer.noise_sigma = spec.noise_sigma;
        for (std::size_t i : idx) {
            const double jitter = spec.onset_jitter_s > 0.0 ? rng.uniform(-spec.onset_jitter_s, spec.onset_jitter_s) : 0.0;
            viewer.event_times_s.push_back(std::clamp(cohort.pool_s[i] + jitter, 0.0, spec.duration_s));
        }

        // Viewers start at different wall times; some pause once.
        const std::int64_t start = spec.start_wall_ms + static_cast<std::int64_t>(v) * 37'000 +
                                   static_cast<std::int64_t>(rng.below(1000));
        std::vector<PlaybackEvent> events{{start, PlaybackKind::play}};
        std::int64_t pause_ms = 0;
        if (rng.uniform() < spec.pause_probability) {
            const auto pause_at = static_cast<std::int64_t>(
                std::llround(rng.uniform(spec.edge_margin_s, spec.duration_s - spec.edge_margin_s) * 1000.0));
            pause_ms = 3000 + static_cast<std::int64_t>(rng.below(12'000));
            if (pause_at > 0 && pause_at < duration_ms) {
                events.push_back({start + pause_at, PlaybackKind::stop});
                events.push_back({start + pause_at + pause_ms, PlaybackKind::play});
            } else {
                pause_ms = 0;
            }
        }
        const std::int64_t end = start + duration_ms + pause_ms;
        events.push_back({end, PlaybackKind::stop});
        const PlaybackTimeline tl = build_timeline(events);

        SimulatedViewer out;
        out.record.participant_id = participant_name(v, spec.participants);
        out.record.video_id = spec.video_id;
        out.record.sample_rate_hz = spec.sample_rate_hz;
        out.record.events = events;
        for (std::int64_t t = start; t < end; t += period_ms) {
            double value = clean_signal(viewer, video_time(tl, t));
            if (spec.noise_sigma > 0.0) value += spec.noise_sigma * rng.gaussian();
            out.record.eda.push_back({t, value});
        }
        out.truth_s = viewer.event_times_s;
        cohort.viewers.push_back(std::move(out));
    }
    return cohort;
}

}  // namespace frisson::sim
