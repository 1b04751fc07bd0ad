#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qbeat/feedback.hpp"
#include "qbeat/model.hpp"
#include "qbeat/operators.hpp"
#include "qbeat/records.hpp"

namespace qbeat {

enum class AtomModelKind { fixed_max_coupled, transit };

struct AtomModel {
    AtomModelKind kind = AtomModelKind::fixed_max_coupled;
    // Full transit time; the Gaussian coupling envelope has sigma = mean_transit / 4.
    double mean_transit = 5e-6;
    // Poisson arrival rate of atoms (1/s). Zero gives an empty cavity.
    double arrival_rate = 0.0;
    // Transit mode: the first atom enters at recorded time 0.
    bool start_with_atom = false;
};

// Gaussian coupling profile of an atom that enters at `atom_arrival` and is
// centred one transit time later. Scaled to g_max = 1.
double transit_coupling(double t, double atom_arrival, double mean_transit);

// Records starts on H detections and integrates the conditional H intensity
// 2 kappa <b_H' b_H> after each start into bins. Averaging these integrals
// over starts estimates the same g2 as counting stop clicks, with far less
// shot noise. Side-emission counts after each start allow the jump-count
// selection to be applied to the same starts.
struct ObserverConfig {
    bool enabled = false;
    double bin_width = 10e-9;
    double tau_max = 6e-6;
    // Side emissions are counted over (t_start, t_start + jump_window];
    // zero means 300 / gamma.
    double jump_window = 0.0;
    // Starts with at most this many side emissions enter the selected sums.
    int max_jumps = 13;
};

struct ConditionalIntensity {
    double bin_width = 0.0;
    std::vector<double> sum;
    std::vector<double> sum_sq;
    std::vector<double> sum_selected;
    std::vector<double> sum_sq_selected;
    std::uint64_t n_starts = 0;
    std::uint64_t n_starts_selected = 0;
    // Integrated stop intensity and the recorded time it was integrated over.
    double stop_integral = 0.0;
    double observed_time = 0.0;

    void resize(std::size_t bins, double width);
    void merge(const ConditionalIntensity& other);
    double mean_rate() const { return observed_time > 0.0 ? stop_integral / observed_time : 0.0; }
};

struct TrajectoryConfig {
    double duration = 20e-6;
    // Evolution before recording starts, so the record begins near steady state.
    double warmup = 1e-6;
    double dt_max = 1e-9;
    std::uint64_t seed = 1;
    int n_max_v = 2;
    int n_max_h = 2;
    AtomModel atom_model;
    // Weights of g-, g0, g+ for the initial atomic level (sampled per atom).
    std::array<double, 3> initial_ground{0.0, 1.0, 0.0};
    FeedbackProtocol feedback;
    ObserverConfig observer;

    // Throws ConfigError; also enforces dt_max * (fastest rate) < 0.05.
    void validate(const PhysicalParams& params) const;
};

struct TrajectoryResult {
    DetectionRecord record;
    ConditionalIntensity intensity;
    // Integral of <c'c> over the recorded time per channel.
    std::array<double, channel_count> expected_counts{};
    double n_v_integral = 0.0;
    double n_h_integral = 0.0;
    std::size_t atoms = 0;
};

// Immutable operators and propagators shared by every trajectory of a run.
class TrajectoryEngine {
public:
    TrajectoryEngine(const TrajectoryConfig& config, const PhysicalParams& params);
    ~TrajectoryEngine();
    TrajectoryEngine(const TrajectoryEngine&) = delete;
    TrajectoryEngine& operator=(const TrajectoryEngine&) = delete;

    // Trajectory k of the ensemble, on substream k of the configured seed.
    TrajectoryResult run(std::uint64_t k) const;

    const TrajectoryConfig& config() const { return config_; }
    const PhysicalParams& params() const { return params_; }

private:
    struct Impl;
    TrajectoryConfig config_;
    PhysicalParams params_;
    std::unique_ptr<Impl> impl_;
};

DetectionRecord evolve_trajectory(const TrajectoryConfig& config, const PhysicalParams& params);

struct EnsembleResult {
    std::vector<DetectionRecord> records;
    ConditionalIntensity intensity;
    std::array<double, channel_count> expected_counts{};
    double n_v_integral = 0.0;
    double n_h_integral = 0.0;
    double recorded_time = 0.0;
    std::map<std::string, std::string> metadata;
};

// Runs n_traj trajectories on `jobs` worker threads (0: hardware
// concurrency). Results are combined in trajectory order, so the output
// does not depend on the number of workers.
EnsembleResult run_ensemble(const TrajectoryConfig& config, const PhysicalParams& params, std::size_t n_traj,
                            unsigned jobs = 1, bool keep_records = true);

// Parameter snapshot written into record metadata.
std::map<std::string, std::string> describe(const TrajectoryConfig& config, const PhysicalParams& params);

}  // namespace qbeat
