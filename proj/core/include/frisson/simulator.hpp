#pragma once

// Synthetic EDA with known frisson onsets, used in place of sensors and
// human participants.
//
// Randomness is fully determined by the seed. Uniform variates come from
// std::mt19937_64 (whose output sequence the C++ standard fixes) as
// (x >> 11) * 2^-53; Gaussian variates use the Box-Muller transform on two
// such uniforms. Per-viewer seeds are derived with SplitMix64. No standard
// <random> distributions.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "frisson/session_align.hpp"
#include "frisson/signal_core.hpp"
#include "frisson/storage.hpp"

namespace frisson::sim {

struct ScrParams {
    double amplitude = 1.0;
    double rise_tau_s = 0.75;
    double decay_tau_s = 2.0;

    void validate() const;
    /// ln(decay/rise) * rise * decay / (decay - rise): where the kernel peaks.
    double peak_time_s() const;
};

/// Difference-of-exponentials SCR response, scaled so its peak equals the
/// amplitude. Zero before onset.
double scr_kernel(double t_since_onset_s, const ScrParams& p);

struct SimSpec {
    double duration_s = 300.0;
    double sample_rate_hz = 5.0;
    std::vector<double> event_times_s;
    ScrParams scr;
    double drift_amplitude = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Generated {
    EdaSeries eda;
    std::vector<double> truth_s;  // sorted onsets
};

/// Noise-free signal at video time `t_s`: slow sinusoidal drift with period
/// equal to the duration plus the SCR responses of every event.
double clean_signal(const SimSpec& spec, double t_s);

/// Samples clean_signal on the uniform grid and adds seeded Gaussian noise.
Generated generate(const SimSpec& spec);

struct Evaluation {
    double precision = 1.0;
    double recall = 1.0;
    std::size_t matches = 0;
};

/// Greedy one-to-one matching in increasing time within +-tol_s.
Evaluation evaluate(std::span<const double> detected, std::span<const double> truth, double tol_s = 2.5);

/// Deterministic random source shared by the generators.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::size_t below(std::size_t n);
    double gaussian();

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// A cohort of viewers watching the same video asynchronously. Frisson
/// moments are drawn from a shared pool; each viewer
/// reacts to `events_per_viewer` of them with a small onset jitter.
struct CohortSpec {
    std::string video_id = "sim";
    double duration_s = 300.0;
    double sample_rate_hz = 5.0;
    std::size_t participants = 20;
    std::size_t events_per_viewer = 8;
    double min_gap_s = 20.0;
    double edge_margin_s = 10.0;
    double onset_jitter_s = 0.5;
    ScrParams scr;
    double drift_amplitude = 0.5;
    double noise_sigma = 0.02;
    /// Probability that a viewer pauses once mid-video.
    double pause_probability = 0.5;
    std::int64_t start_wall_ms = 1'700'000'000'000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SimulatedViewer {
    storage::SessionRecord record;
    std::vector<double> truth_s;  // onsets in video time
};

struct Cohort {
    std::vector<double> pool_s;
    std::vector<SimulatedViewer> viewers;
};

/// Participant ids are p01, p02, ... (zero-padded to the cohort size).
Cohort simulate_cohort(const CohortSpec& spec);

/// Largest pool of onsets that fits the spacing constraints.
std::size_t pool_capacity(const CohortSpec& spec);

}  // namespace frisson::sim
