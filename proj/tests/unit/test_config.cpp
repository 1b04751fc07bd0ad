#include <doctest.h>

#include <string>

#include "qbeat/config.hpp"
#include "qbeat/errors.hpp"

using namespace qbeat;

TEST_CASE("parse keys with unit conversion") {
    const RunConfig c = parse_config(
        "# default drive point\n"
        "g = 1.5e6\n"
        "delta_g = 0.8e6   # Hz\n"
        "drive_amplitude = 0.5,0.25\n"
        "seed = 99\n"
        "atom_model = transit\n"
        "initial_ground = 1,0,1\n"
        "max_jumps = 13\n"
        "time_filter = 100e-9, 5e-6\n"
        "start_channel = H\n"
        "record_format = binary\n");
    CHECK(c.physics.g == doctest::Approx(hz(1.5e6)));
    CHECK(c.physics.delta_g == doctest::Approx(hz(0.8e6)));
    CHECK(c.physics.drive_amplitude == cplx(0.5, 0.25));
    CHECK(c.trajectory.seed == 99);
    CHECK(c.trajectory.atom_model.kind == AtomModelKind::transit);
    CHECK(c.trajectory.initial_ground[1] == 0.0);
    REQUIRE(c.analysis.max_jumps.has_value());
    CHECK(*c.analysis.max_jumps == 13);
    REQUIRE(c.analysis.time_filter.has_value());
    CHECK(c.analysis.time_filter->second == doctest::Approx(5e-6));
    CHECK(c.analysis.correlation.start == ChannelSet::h_detectors());
    CHECK(c.record_format == RecordFormat::binary);
}

TEST_CASE("errors name the line") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("g = 1e6\nbogus = 3\n").find("line 2") != std::string::npos);
    CHECK(message("\n\nno equals sign\n").find("line 3") != std::string::npos);
    CHECK(message("seed = -1\n").find("line 1") != std::string::npos);
    CHECK(message("geometry = sideways\n").find("line 1") != std::string::npos);
    CHECK(message("kappa = 0\n") != "");
    CHECK_THROWS_AS(load_config("/nonexistent/qbeat.cfg"), IoError);
}

TEST_CASE("canonical form is sorted and round-trips") {
    RunConfig c = parse_config("drive_amplitude = 0.74\nn_traj = 4\nfeedback_enabled = true\nlo_mix = 0.1,-0.05\n");
    const std::string text = canonical_config(c);
    std::string prev;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const std::string key = text.substr(pos, text.find(' ', pos) - pos);
        CHECK(prev < key);
        prev = key;
        pos = end + 1;
    }
    const RunConfig back = parse_config(text);
    CHECK(canonical_config(back) == text);
    CHECK(back.n_traj == 4);
    CHECK(back.trajectory.feedback.enabled);
    CHECK(back.physics.kappa == doctest::Approx(c.physics.kappa).epsilon(1e-15));
    apply_config_value(c, "seed", "5");
    CHECK(canonical_config(c) != text);
}

TEST_CASE("hashing") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}
