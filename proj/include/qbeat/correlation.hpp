#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbeat/analytic.hpp"
#include "qbeat/feedback.hpp"
#include "qbeat/records.hpp"
#include "qbeat/trajectory.hpp"

namespace qbeat {

enum class Conditioning { all_pairs, start_stop };

struct CorrelationOptions {
    ChannelSet start = {Channel::h_det_a};
    ChannelSet stop = {Channel::h_det_b};
    double bin_width = 10e-9;
    double tau_max = 6e-6;
    Conditioning conditioning = Conditioning::all_pairs;
};

// Binned g2. Bin i covers [tau_bins[i], tau_bins[i+1]).
struct CorrelationResult {
    std::vector<double> tau_bins;
    std::vector<std::uint64_t> counts;
    std::vector<double> g2;
    std::vector<double> stderr_;
    std::uint64_t n_starts = 0;
    double stop_rate = 0.0;
    std::map<std::string, std::string> normalization;

    std::size_t size() const { return g2.size(); }
    double tau_center(std::size_t i) const { return 0.5 * (tau_bins[i] + tau_bins[i + 1]); }
    double bin_width() const { return tau_bins.size() > 1 ? tau_bins[1] - tau_bins[0] : 0.0; }
};

// Pair histogram of stop clicks after start clicks. A pair is any two
// distinct events (start i, stop j) with 0 <= t_j - t_i < tau_max; with
// start_stop conditioning only the first stop after each start counts.
// Normalization divides by stop_rate times the time each start actually
// observes inside the record, so starts near the end do not bias the tail.
// `start_mask`, when given, has one flag per record event.
CorrelationResult g2_estimate(const DetectionRecord& record, const CorrelationOptions& options,
                              const std::vector<bool>* start_mask = nullptr);

// Pairs are formed within each record only; counts and exposure are summed.
CorrelationResult g2_estimate(std::span<const DetectionRecord> records, const CorrelationOptions& options,
                              const std::vector<std::vector<bool>>* start_masks = nullptr);

// g2 from the conditional-intensity observer of the trajectory engine.
CorrelationResult intensity_g2(const ConditionalIntensity& intensity, bool selected = false);

// Starts that open a feedback epoch, replaying the drive-gating loop on the
// record's trigger clicks.
std::vector<bool> feedback_epoch_starts(const DetectionRecord& record, const FeedbackProtocol& protocol);

struct Spectrum {
    std::vector<double> freq_hz;
    std::vector<double> power;
};

struct SpectrumOptions {
    // Only bins with tau_min <= tau centre < tau_max enter the transform.
    double tau_min = 0.0;
    double tau_max = std::numeric_limits<double>::infinity();
    int zero_pad = 4;
    bool window = true;
};

// Power spectrum of (g2 - mean) under a one-sided Hann taper
// w(tau) = (1 + cos(pi tau / L)) / 2 that is 1 at the first bin and falls to
// 0 at the end, zero padded. Frequencies in Hz; bin 0 is DC.
Spectrum fft_spectrum(const CorrelationResult& correlation, const SpectrumOptions& options = {});

struct SpectrumPeak {
    double freq_hz = 0.0;
    double power = 0.0;
    // Disagreement between log-power and linear-power parabolic interpolation.
    double interpolation_error_hz = 0.0;
    // Half width at half maximum, linearly interpolated between bins.
    double half_width_hz = 0.0;
};

// Highest non-DC peak above min_freq_hz, located by a parabola through the
// log power of the maximum bin and its neighbours.
SpectrumPeak find_peak(const Spectrum& spectrum, double min_freq_hz = 0.0);

struct FitResult {
    BeatParams params;
    std::array<std::array<double, 5>, 5> covariance{};
    double residual_norm = 0.0;
    double reduced_chi2 = 0.0;
    int iterations = 0;
    bool decay_fixed = false;

    // Order: amplitude, freq, phase, decay, offset.
    double sigma(int i) const;
};

struct FitOptions {
    double tau_min = 0.0;
    double tau_max = std::numeric_limits<double>::infinity();
    // Intervals [lo, hi) of tau left out of the fit.
    std::vector<std::pair<double, double>> exclude;
    int max_iterations = 400;
    // Weight residuals by 1/stderr when every stderr is positive.
    bool weighted = true;
};

// Least-squares fit of beat_model with Levenberg-Marquardt. The returned
// freq is positive and phase wrapped into (-pi, pi]; a negative decay is
// refitted with decay held at zero. Covariance is (J'WJ)^-1 scaled by the
// reduced chi-square. Throws FitError after the iteration cap.
FitResult fit_damped_cosine(const CorrelationResult& correlation, const BeatParams& initial_guess,
                            const FitOptions& options = {});

// Guess from the spectrum peak and moments, then fits from four starting
// phases and keeps the smallest residual.
FitResult fit_beats(const CorrelationResult& correlation, const FitOptions& options = {});

inline constexpr int unlimited_jumps = std::numeric_limits<int>::max();

// Start selection: keeps a start when the side-channel truth events in
// (t_s, t_s + window] number at most max_jumps. With a finite max_jumps,
// starts whose window runs past the record end are dropped. Throws
// UnsupportedInputError when the record carries no truth tags.
std::vector<bool> filter_by_jump_count(const DetectionRecord& record, int max_jumps, double window,
                                       ChannelSet start = ChannelSet::h_detectors(),
                                       const std::vector<bool>* start_mask = nullptr);

// High-pass time filter over the events of `channels` (others pass
// untouched). Scanning in time order, when the next event is closer than
// coincidence_window both are dropped along with every event in
// [t_second, t_second + skip_duration); scanning resumes after that.
DetectionRecord time_filter(const DetectionRecord& record, double coincidence_window, double skip_duration,
                            ChannelSet channels = ChannelSet::h_detectors());

// The same scan on bare times, returned as keep flags.
std::vector<bool> time_filter_mask(std::span<const Nanos> times, Nanos coincidence_window, Nanos skip_duration);

}  // namespace qbeat
