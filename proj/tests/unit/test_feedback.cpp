#include <doctest.h>

#include <vector>

#include "qbeat/errors.hpp"
#include "qbeat/feedback.hpp"

using namespace qbeat;

namespace {

FeedbackProtocol hand_protocol() {
    FeedbackProtocol p;
    p.enabled = true;
    p.electronic_latency = 0.05e-6;
    p.delay_after_detection = 0.05e-6;
    p.window_duration = 3e-6;
    p.attenuation_factor = 0.05;
    return p;
}

}  // namespace

TEST_CASE("no detections leave the drive on") {
    const FeedbackProtocol p = hand_protocol();
    const std::vector<double> none;
    for (double t : {0.0, 1e-6, 1.0}) CHECK(feedback_envelope(p, none, t) == 1.0);
}

TEST_CASE("single detection opens one window") {
    const FeedbackProtocol p = hand_protocol();
    const std::vector<double> d{0.0};
    CHECK(feedback_envelope(p, d, 0.05e-6) == 1.0);
    CHECK(feedback_envelope(p, d, 1e-6) == 0.05);
    CHECK(feedback_envelope(p, d, 3.05e-6) == 0.05);
    CHECK(feedback_envelope(p, d, 3.2e-6) == 1.0);
}

TEST_CASE("retrigger merges into one interval") {
    const FeedbackProtocol p = hand_protocol();
    const std::vector<double> d{0.0, 1e-6};
    // Second window runs [1.1, 4.1] us; together one attenuated span [0.1, 4.1].
    for (double t = 0.15e-6; t < 4.05e-6; t += 0.1e-6) CHECK(feedback_envelope(p, d, t) == 0.05);
    CHECK(feedback_envelope(p, d, 4.2e-6) == 1.0);
    FeedbackController c(p);
    CHECK(c.on_detection(0.0));
    CHECK_FALSE(c.on_detection(1e-6));
    CHECK(c.next_edge_after(0.0) == doctest::Approx(0.1e-6));
    CHECK(c.next_edge_after(0.2e-6) == doctest::Approx(4.1e-6));
    CHECK(c.on_detection(5e-6));
    c.discard_before(4.5e-6);
    CHECK(c.scale(2e-6) == 1.0);
    CHECK(c.scale(5.5e-6) == 0.05);
}

TEST_CASE("disabled protocol") {
    FeedbackProtocol p = hand_protocol();
    p.enabled = false;
    FeedbackController c(p);
    CHECK(c.on_detection(0.0));
    CHECK(c.on_detection(1e-9));
    CHECK(c.scale(1e-6) == 1.0);
    CHECK_FALSE(c.enabled());
}

TEST_CASE("protocol validation") {
    FeedbackProtocol p = hand_protocol();
    CHECK_NOTHROW(p.validate());
    p.attenuation_factor = 1.2;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = hand_protocol();
    p.window_duration = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = hand_protocol();
    p.trigger_channels = ChannelSet{};
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
