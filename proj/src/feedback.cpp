#include "qbeat/feedback.hpp"

#include <cmath>
#include <limits>

#include "qbeat/errors.hpp"

namespace qbeat {

void FeedbackProtocol::validate() const {
    if (!(attenuation_factor >= 0.0 && attenuation_factor <= 1.0)) {
        throw ConfigError("feedback attenuation_factor must lie in [0, 1]");
    }
    if (electronic_latency < 0.0 || delay_after_detection < 0.0 || window_duration < 0.0) {
        throw ConfigError("feedback durations must be non-negative");
    }
    if (enabled && trigger_channels.empty()) throw ConfigError("feedback needs a trigger channel");
}

bool FeedbackController::on_detection(double t) {
    if (!protocol_.enabled) return true;
    const bool new_epoch = !any_ || t > epoch_end_;
    any_ = true;
    const double start = t + protocol_.window_offset();
    const double end = start + protocol_.window_duration;
    epoch_end_ = std::max(epoch_end_, end);
    if (!intervals_.empty() && start <= intervals_.back().second) {
        intervals_.back().second = std::max(intervals_.back().second, end);
    } else {
        intervals_.emplace_back(start, end);
    }
    return new_epoch;
}

double FeedbackController::scale(double t) const {
    if (!protocol_.enabled) return 1.0;
    for (const auto& [a, b] : intervals_) {
        if (t < a) break;
        if (t <= b) return protocol_.attenuation_factor;
    }
    return 1.0;
}

double FeedbackController::next_edge_after(double t) const {
    for (const auto& [a, b] : intervals_) {
        if (a > t) return a;
        if (b > t) return b;
    }
    return std::numeric_limits<double>::infinity();
}

void FeedbackController::discard_before(double t) {
    while (!intervals_.empty() && intervals_.front().second < t) intervals_.pop_front();
}

double feedback_envelope(const FeedbackProtocol& protocol, std::span<const double> detection_times, double t) {
    FeedbackController c(protocol);
    for (double d : detection_times) {
        if (d > t) break;
        c.on_detection(d);
    }
    return c.scale(t);
}

}  // namespace qbeat
