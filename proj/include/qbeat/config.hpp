#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbeat/correlation.hpp"
#include "qbeat/model.hpp"
#include "qbeat/records.hpp"
#include "qbeat/trajectory.hpp"

namespace qbeat {

struct AnalysisConfig {
    CorrelationOptions correlation;
    double fit_tau_min = 0.1e-6;
    // Jump-count selection; unset means no selection.
    std::optional<int> max_jumps;
    double jump_window = 0.0;  // 0: 300 / gamma
    // Time filter (window, skip) in seconds; unset means no filter.
    std::optional<std::pair<double, double>> time_filter;
};

struct CompareConfig {
    double freq_tolerance = 0.10;
    double decay_tolerance = 0.25;
    // auto, plus_minus or pm_zero: which coherence sets the compared beat.
    std::string geometry = "auto";
};

struct RunConfig {
    PhysicalParams physics;
    TrajectoryConfig trajectory;
    std::size_t n_traj = 1;
    AnalysisConfig analysis;
    CompareConfig compare;
    DetectorModel detector;
    RecordFormat record_format = RecordFormat::text;
};

// `key = value` lines; `#` starts a comment. Frequencies (g, kappa, gamma,
// delta_g, delta_e, drive_detuning) are given in Hz and stored as rad/s.
// Complex values are `re` or `re,im`. Unknown keys are a ConfigError
// naming the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Applies one key as if it appeared last in the file.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

// Every key with its value in file units, sorted by key. Parsing the
// result gives back the same configuration up to the Hz <-> rad/s rounding.
std::string canonical_config(const RunConfig& config);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

}  // namespace qbeat
