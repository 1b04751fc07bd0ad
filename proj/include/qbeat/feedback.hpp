#pragma once

#include <deque>
#include <span>
#include <utility>

#include "qbeat/channel.hpp"

namespace qbeat {

// Drive gating loop: a detection on a trigger channel attenuates the drive
// amplitude over [t + latency + delay, t + latency + delay + window]. A
// trigger that arrives while a window is pending or open restarts it, so
// overlapping windows merge into one attenuated interval.
struct FeedbackProtocol {
    bool enabled = false;
    ChannelSet trigger_channels = ChannelSet::h_detectors();
    double electronic_latency = 50e-9;
    double delay_after_detection = 0.0;
    double window_duration = 3e-6;
    // Multiplies the drive amplitude (0.05 intensity is sqrt(0.05) here).
    double attenuation_factor = 0.05;

    double window_offset() const { return electronic_latency + delay_after_detection; }
    void validate() const;
};

class FeedbackController {
public:
    explicit FeedbackController(const FeedbackProtocol& protocol) : protocol_(protocol) {}

    // Registers a trigger detection at time t. Returns true when the
    // detection opens a new feedback epoch (no window pending or open).
    bool on_detection(double t);

    // Drive amplitude multiplier at time t.
    double scale(double t) const;

    // First window edge strictly after t, or +infinity.
    double next_edge_after(double t) const;

    // Forgets intervals that ended before t.
    void discard_before(double t);

    bool enabled() const { return protocol_.enabled; }

private:
    FeedbackProtocol protocol_;
    std::deque<std::pair<double, double>> intervals_;
    double epoch_end_ = -1.0;
    bool any_ = false;
};

// Envelope for a complete, sorted list of trigger times.
double feedback_envelope(const FeedbackProtocol& protocol, std::span<const double> detection_times, double t);

}  // namespace qbeat
