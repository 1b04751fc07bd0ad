// qbeat command-line entry point: simulate, analyze, predict, compare and
// record utilities driven by one key = value configuration file.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "qbeat/analytic.hpp"
#include "qbeat/config.hpp"
#include "qbeat/correlation.hpp"
#include "qbeat/errors.hpp"
#include "qbeat/records.hpp"
#include "qbeat/trajectory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qbeat;

namespace {

constexpr const char* tool_version = "qbeat 1.0.0";

enum Exit { ok = 0, comparison_failed = 1, failure = 2 };

struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 0;
    std::string out = "qbeat_out";
};

unsigned default_jobs() {
    if (const char* env = std::getenv("QBEAT_JOBS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig load(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (c.seed_set) cfg.trajectory.seed = c.seed;
    return cfg;
}

std::string manifest_hash(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& inputs) {
    std::string s = canonical_config(cfg) + "command=" + command + "\n";
    for (const auto& in : inputs) s += "input=" + in + "\n";
    return hex64(fnv1a64(s));
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const std::string& command, const std::string& hash,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs, double seconds) {
    json m;
    m["tool"] = tool_version;
    m["command"] = command;
    m["manifest_hash"] = hash;
    m["seed"] = cfg.trajectory.seed;
    m["config"] = canonical_config(cfg);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["wall_clock_s"] = seconds;
    write_text(dir / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

void write_correlation_csv(const fs::path& path, const CorrelationResult& r, const std::string& hash) {
    std::ostringstream s;
    s << "# manifest_hash=" << hash << "\n";
    for (const auto& [k, v] : r.normalization) s << "# " << k << "=" << v << "\n";
    s << "tau_s,g2,stderr\n";
    for (std::size_t i = 0; i < r.size(); ++i) s << fmt(r.tau_center(i)) << "," << fmt(r.g2[i]) << "," << fmt(r.stderr_[i]) << "\n";
    write_text(path, s.str());
}

void write_spectrum_csv(const fs::path& path, const Spectrum& sp, const std::string& hash) {
    std::ostringstream s;
    s << "# manifest_hash=" << hash << "\nfreq_hz,power\n";
    for (std::size_t i = 0; i < sp.freq_hz.size(); ++i) s << fmt(sp.freq_hz[i]) << "," << fmt(sp.power[i]) << "\n";
    write_text(path, s.str());
}

json fit_json(const FitResult& f) {
    json j;
    j["amplitude"] = f.params.amplitude;
    j["freq_rad_s"] = f.params.freq;
    j["freq_hz"] = f.params.freq / two_pi;
    j["phase"] = f.params.phase;
    j["decay"] = f.params.decay;
    j["offset"] = f.params.offset;
    j["sigma"] = {{"amplitude", f.sigma(0)}, {"freq_rad_s", f.sigma(1)}, {"phase", f.sigma(2)},
                  {"decay", f.sigma(3)}, {"offset", f.sigma(4)}};
    json cov = json::array();
    for (const auto& row : f.covariance) cov.push_back(row);
    j["covariance"] = cov;
    j["residual_norm"] = f.residual_norm;
    j["reduced_chi2"] = f.reduced_chi2;
    j["iterations"] = f.iterations;
    j["decay_fixed"] = f.decay_fixed;
    return j;
}

json prediction_json(const PhysicalParams& p) {
    const cplx alpha = steady_alpha(p);
    const ShiftReport r = shift_report(p, alpha);
    json j;
    j["alpha_squared"] = r.alpha_squared;
    j["delta_ac"] = r.delta_ac;
    j["gamma_jump"] = r.gamma_jump;
    j["delta_jump"] = r.delta_jump;
    j["delta_light"] = r.delta_light;
    j["gamma_decoh"] = r.gamma_decoh;
    j["phi_per_jump"] = r.phi_per_jump;
    j["r_per_jump"] = r.r_per_jump;
    j["delta_g"] = p.delta_g;
    j["lo_mix_abs"] = std::abs(p.lo_mix);
    j["beat_freq_plus_minus"] = beat_frequency(p, alpha, CoherencePair::ground_plus_minus);
    j["beat_freq_pm_zero"] = beat_frequency(p, alpha, CoherencePair::ground_pm_zero);
    j["beat_decay_plus_minus"] = beat_decay(p, alpha, CoherencePair::ground_plus_minus);
    j["beat_decay_pm_zero"] = beat_decay(p, alpha, CoherencePair::ground_pm_zero);
    return j;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& paths) {
    std::vector<std::string> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<std::string> inner;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file()) inner.push_back(e.path().string());
            }
            std::sort(inner.begin(), inner.end());
            files.insert(files.end(), inner.begin(), inner.end());
        } else {
            files.push_back(p);
        }
    }
    if (files.empty()) throw IoError("no record files given");
    return files;
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---- simulate ----

struct SimulateArgs {
    std::size_t n_traj = 0;
    double fb_delay = -1.0, fb_window = -1.0, fb_atten = -1.0;
    std::string format;
};

int cmd_simulate(const Common& common, const SimulateArgs& a) {
    const double t0 = now_seconds();
    RunConfig cfg = load(common);
    if (a.n_traj > 0) cfg.n_traj = a.n_traj;
    if (a.fb_delay >= 0.0 || a.fb_window >= 0.0 || a.fb_atten >= 0.0) cfg.trajectory.feedback.enabled = true;
    if (a.fb_delay >= 0.0) cfg.trajectory.feedback.delay_after_detection = a.fb_delay;
    if (a.fb_window >= 0.0) cfg.trajectory.feedback.window_duration = a.fb_window;
    if (a.fb_atten >= 0.0) cfg.trajectory.feedback.attenuation_factor = a.fb_atten;
    if (!a.format.empty()) apply_config_value(cfg, "record_format", a.format);

    const std::string hash = manifest_hash(cfg, "simulate", {});
    EnsembleResult ens = run_ensemble(cfg.trajectory, cfg.physics, cfg.n_traj, common.jobs, true);

    const fs::path out(common.out);
    std::vector<std::string> outputs;
    std::array<std::size_t, channel_count> counts{};
    const bool detector_ideal = cfg.detector.efficiency == 1.0 && cfg.detector.dead_time.count() == 0 && cfg.detector.dark_rate_hz == 0.0;
    for (std::size_t k = 0; k < ens.records.size(); ++k) {
        DetectionRecord& r = ens.records[k];
        if (!detector_ideal) {
            Rng rng(cfg.trajectory.seed, (std::uint64_t{1} << 63) + k);
            r = apply_detector_model(r, cfg.detector, rng);
        }
        r.metadata["manifest_hash"] = hash;
        for (int c = 0; c < channel_count; ++c) counts[static_cast<std::size_t>(c)] += r.count(static_cast<Channel>(c));
        char name[64];
        std::snprintf(name, sizeof(name), "traj_%06zu.qrec", k);
        const fs::path path = out / "records" / name;
        fs::create_directories(path.parent_path());
        write_record(r, path, cfg.record_format);
        outputs.push_back(path.string());
    }

    json summary;
    summary["command"] = "simulate";
    summary["manifest_hash"] = hash;
    summary["n_traj"] = cfg.n_traj;
    summary["recorded_time_s"] = ens.recorded_time;
    json ch;
    for (int c = 0; c < channel_count; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        ch[channel_name(static_cast<Channel>(c))] = {{"count", counts[idx]},
                                                     {"rate_hz", static_cast<double>(counts[idx]) / ens.recorded_time},
                                                     {"expected", ens.expected_counts[idx]}};
    }
    summary["channels"] = ch;
    summary["mean_n_v"] = ens.n_v_integral / ens.recorded_time;
    summary["mean_n_h"] = ens.n_h_integral / ens.recorded_time;
    if (cfg.trajectory.observer.enabled && ens.intensity.n_starts > 0) {
        const fs::path p = out / "observer_g2.csv";
        write_correlation_csv(p, intensity_g2(ens.intensity, false), hash);
        outputs.push_back(p.string());
        if (ens.intensity.n_starts_selected > 0) {
            const fs::path ps = out / "observer_g2_selected.csv";
            write_correlation_csv(ps, intensity_g2(ens.intensity, true), hash);
            outputs.push_back(ps.string());
        }
        summary["observer_starts"] = ens.intensity.n_starts;
        summary["observer_starts_selected"] = ens.intensity.n_starts_selected;
    }
    write_text(out / "simulate_summary.json", summary.dump(2) + "\n");
    write_manifest(out, cfg, "simulate", hash, {}, outputs, now_seconds() - t0);
    std::cout << summary.dump(2) << "\n";
    return ok;
}

// ---- analyze ----

struct AnalyzeArgs {
    std::vector<std::string> records;
    double bin_ns = 0.0;
    double tau_max_us = 0.0;
    std::string start_channel, stop_channel, conditioning;
    std::vector<std::string> filters;
};

void apply_filter_spec(RunConfig& cfg, const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError("filter must be jump-count:N[,window_s] or time:window_ns,skip_us");
    const std::string kind = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);
    const auto comma = rest.find(',');
    if (kind == "jump-count") {
        apply_config_value(cfg, "max_jumps", rest.substr(0, comma));
        if (comma != std::string::npos) apply_config_value(cfg, "jump_window", rest.substr(comma + 1));
    } else if (kind == "time") {
        if (comma == std::string::npos) throw ConfigError("time filter needs window_ns,skip_us");
        const double w = std::stod(rest.substr(0, comma)) * 1e-9;
        const double s = std::stod(rest.substr(comma + 1)) * 1e-6;
        cfg.analysis.time_filter = std::make_pair(w, s);
    } else {
        throw ConfigError("unknown filter kind '" + kind + "'");
    }
}

int cmd_analyze(const Common& common, const AnalyzeArgs& a) {
    const double t0 = now_seconds();
    RunConfig cfg = load(common);
    if (a.bin_ns > 0.0) apply_config_value(cfg, "bin_width", fmt(a.bin_ns * 1e-9));
    if (a.tau_max_us > 0.0) apply_config_value(cfg, "tau_max", fmt(a.tau_max_us * 1e-6));
    if (!a.start_channel.empty()) apply_config_value(cfg, "start_channel", a.start_channel);
    if (!a.stop_channel.empty()) apply_config_value(cfg, "stop_channel", a.stop_channel);
    if (!a.conditioning.empty()) apply_config_value(cfg, "conditioning", a.conditioning);
    for (const auto& f : a.filters) apply_filter_spec(cfg, f);

    const auto files = expand_inputs(a.records);
    const std::string hash = manifest_hash(cfg, "analyze", files);
    std::vector<DetectionRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) records.push_back(read_record(f));

    if (cfg.analysis.time_filter) {
        for (auto& r : records) r = time_filter(r, cfg.analysis.time_filter->first, cfg.analysis.time_filter->second);
    }
    std::vector<std::vector<bool>> masks;
    const bool use_masks = cfg.trajectory.feedback.enabled || cfg.analysis.max_jumps.has_value();
    if (use_masks) {
        const double window = cfg.analysis.jump_window > 0.0 ? cfg.analysis.jump_window : 300.0 / cfg.physics.gamma;
        for (const auto& r : records) {
            std::vector<bool> m(r.events.size(), true);
            if (cfg.trajectory.feedback.enabled) m = feedback_epoch_starts(r, cfg.trajectory.feedback);
            if (cfg.analysis.max_jumps) {
                m = filter_by_jump_count(r, *cfg.analysis.max_jumps, window, cfg.analysis.correlation.start, &m);
            }
            masks.push_back(std::move(m));
        }
    }
    const CorrelationResult g2 = g2_estimate(records, cfg.analysis.correlation, use_masks ? &masks : nullptr);

    const fs::path out(common.out);
    std::vector<std::string> outputs;
    write_correlation_csv(out / "g2.csv", g2, hash);
    outputs.push_back((out / "g2.csv").string());

    SpectrumOptions so;
    so.tau_min = cfg.analysis.fit_tau_min;
    const Spectrum sp = fft_spectrum(g2, so);
    write_spectrum_csv(out / "spectrum.csv", sp, hash);
    outputs.push_back((out / "spectrum.csv").string());

    json summary;
    summary["command"] = "analyze";
    summary["manifest_hash"] = hash;
    summary["n_records"] = records.size();
    summary["n_starts"] = g2.n_starts;
    summary["stop_rate_hz"] = g2.stop_rate;
    const SpectrumPeak peak = find_peak(sp);
    summary["spectrum_peak_hz"] = peak.freq_hz;
    summary["spectrum_peak_error_hz"] = peak.interpolation_error_hz;

    FitOptions fo;
    fo.tau_min = cfg.analysis.fit_tau_min;
    if (cfg.trajectory.feedback.enabled) {
        const auto& fb = cfg.trajectory.feedback;
        fo.exclude.push_back({fb.window_offset(), fb.window_offset() + fb.window_duration});
    }
    json fit;
    int status = ok;
    try {
        fit = fit_json(fit_beats(g2, fo));
        fit["status"] = "ok";
    } catch (const FitError& e) {
        fit["status"] = "error";
        fit["message"] = e.what();
        fit["best_residual"] = e.best_residual();
        status = failure;
    }
    fit["manifest_hash"] = hash;
    write_text(out / "fit.json", fit.dump(2) + "\n");
    outputs.push_back((out / "fit.json").string());
    summary["fit"] = fit;
    write_text(out / "analyze_summary.json", summary.dump(2) + "\n");
    write_manifest(out, cfg, "analyze", hash, files, outputs, now_seconds() - t0);
    std::cout << summary.dump(2) << "\n";
    return status;
}

// ---- predict ----

int cmd_predict(const Common& common) {
    const double t0 = now_seconds();
    const RunConfig cfg = load(common);
    const std::string hash = manifest_hash(cfg, "predict", {});
    json j = prediction_json(cfg.physics);
    for (const auto& [k, v] : j.items()) std::cout << k << " = " << std::setprecision(12) << v.get<double>() << "\n";
    j["manifest_hash"] = hash;
    const fs::path out(common.out);
    write_text(out / "predict.json", j.dump(2) + "\n");
    write_manifest(out, cfg, "predict", hash, {}, {(out / "predict.json").string()}, now_seconds() - t0);
    return ok;
}

// ---- compare ----

struct CompareArgs {
    std::string fit_path;
    std::string prediction_path;
    double freq_tol = -1.0;
    double decay_tol = -1.0;
    std::string geometry;
};

int cmd_compare(const Common& common, const CompareArgs& a) {
    const double t0 = now_seconds();
    RunConfig cfg = load(common);
    if (a.freq_tol >= 0.0) cfg.compare.freq_tolerance = a.freq_tol;
    if (a.decay_tol >= 0.0) cfg.compare.decay_tolerance = a.decay_tol;
    if (!a.geometry.empty()) apply_config_value(cfg, "geometry", a.geometry);

    const json fit = read_json(a.fit_path);
    if (fit.value("status", "ok") != "ok") throw NumericalError("fit file reports a failed fit");
    const json pred = a.prediction_path.empty() ? prediction_json(cfg.physics) : read_json(a.prediction_path);
    const double f_fit = fit.at("freq_rad_s").get<double>();
    const double d_fit = fit.at("decay").get<double>();

    std::string geometry = cfg.compare.geometry;
    if (geometry == "auto") {
        // Without a local oscillator only the (g+, g-) beat exists; with one,
        // compare against whichever predicted component the fit found.
        const double fpm = pred.at("beat_freq_plus_minus").get<double>();
        const double fz = pred.at("beat_freq_pm_zero").get<double>();
        geometry = (pred.value("lo_mix_abs", 0.0) == 0.0 || std::abs(f_fit - fpm) <= std::abs(f_fit - fz)) ? "plus_minus" : "pm_zero";
    }
    const double f_pred = pred.at(geometry == "plus_minus" ? "beat_freq_plus_minus" : "beat_freq_pm_zero").get<double>();
    const double d_pred = pred.at(geometry == "plus_minus" ? "beat_decay_plus_minus" : "beat_decay_pm_zero").get<double>();
    const double f_dev = (f_fit - f_pred) / f_pred;
    const double d_dev = d_pred != 0.0 ? (d_fit - d_pred) / d_pred : std::numeric_limits<double>::infinity();
    const bool f_pass = std::abs(f_dev) <= cfg.compare.freq_tolerance;
    const bool d_pass = std::abs(d_dev) <= cfg.compare.decay_tolerance;

    const std::string hash = manifest_hash(cfg, "compare", {a.fit_path, a.prediction_path});
    json r;
    r["command"] = "compare";
    r["manifest_hash"] = hash;
    r["geometry"] = geometry;
    r["freq"] = {{"fitted", f_fit}, {"predicted", f_pred}, {"relative_deviation", f_dev},
                 {"tolerance", cfg.compare.freq_tolerance}, {"pass", f_pass}};
    r["decay"] = {{"fitted", d_fit}, {"predicted", d_pred}, {"relative_deviation", d_dev},
                  {"tolerance", cfg.compare.decay_tolerance}, {"pass", d_pass}};
    r["pass"] = f_pass && d_pass;
    const fs::path out(common.out);
    write_text(out / "compare.json", r.dump(2) + "\n");
    write_manifest(out, cfg, "compare", hash, {a.fit_path, a.prediction_path}, {(out / "compare.json").string()},
                   now_seconds() - t0);
    std::cout << r.dump(2) << "\n";
    return f_pass && d_pass ? ok : comparison_failed;
}

// ---- records ----

int cmd_validate(const std::vector<std::string>& files) {
    json r;
    r["command"] = "records validate";
    json items = json::array();
    bool all_ok = true;
    for (const auto& f : files) {
        json item;
        item["file"] = f;
        try {
            const DetectionRecord rec = read_record(f);
            item["valid"] = true;
            item["events"] = rec.events.size();
            item["duration_ns"] = rec.duration.count();
        } catch (const ParseError& e) {
            item["valid"] = false;
            item["error"] = e.what();
            item["line"] = e.line();
            all_ok = false;
        } catch (const ValidationError& e) {
            item["valid"] = false;
            item["error"] = e.what();
            item["line"] = e.line();
            all_ok = false;
        }
        items.push_back(item);
    }
    r["records"] = items;
    r["valid"] = all_ok;
    std::cout << r.dump(2) << "\n";
    return all_ok ? ok : failure;
}

int cmd_merge(const std::vector<std::string>& files, const std::vector<double>& offsets_ns, const std::string& output,
              const std::string& format) {
    if (!offsets_ns.empty() && offsets_ns.size() != files.size()) throw ConfigError("one offset per record file required");
    std::vector<DetectionRecord> records;
    std::vector<Nanos> offsets;
    for (std::size_t k = 0; k < files.size(); ++k) {
        records.push_back(read_record(files[k]));
        offsets.push_back(Nanos{offsets_ns.empty() ? 0 : static_cast<std::int64_t>(std::llround(offsets_ns[k]))});
    }
    DetectionRecord merged = merge_records(records, offsets);
    write_record(merged, output, format == "binary" ? RecordFormat::binary : RecordFormat::text);
    json r;
    r["command"] = "records merge";
    r["output"] = output;
    r["events"] = merged.events.size();
    r["duration_ns"] = merged.duration.count();
    std::cout << r.dump(2) << "\n";
    return ok;
}

void report_error(const char* type, const std::string& message) {
    json e;
    e["status"] = "error";
    e["type"] = type;
    e["message"] = message;
    std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional quantum-beat simulator and photon-record analysis"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    Common common;
    common.jobs = default_jobs();
    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", common.config_path, "Configuration file (key = value)");
        if (with_seed) {
            sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) {
                common.seed = s;
                common.seed_set = true;
            }, "Override the configured seed");
        }
        sub->add_option("--jobs", common.jobs, "Worker threads (default: QBEAT_JOBS or all cores)");
        sub->add_option("--out", common.out, "Output directory");
    };

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a trajectory ensemble and write detection records");
    add_common(simulate, true);
    simulate->add_option("--n-traj", sim.n_traj, "Number of trajectories");
    simulate->add_option("--fb-delay", sim.fb_delay, "Feedback delay after detection (s); enables feedback");
    simulate->add_option("--fb-window", sim.fb_window, "Feedback window duration (s); enables feedback");
    simulate->add_option("--fb-atten", sim.fb_atten, "Feedback drive amplitude factor; enables feedback");
    simulate->add_option("--format", sim.format, "Record format: text or binary");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Correlate, transform and fit detection records");
    add_common(analyze, true);
    analyze->add_option("--records", an.records, "Record files or directories")->required();
    analyze->add_option("--bin-ns", an.bin_ns, "Bin width (ns)");
    analyze->add_option("--tau-max-us", an.tau_max_us, "Largest lag (us)");
    analyze->add_option("--start-channel", an.start_channel, "Start channel(s)");
    analyze->add_option("--stop-channel", an.stop_channel, "Stop channel(s)");
    analyze->add_option("--conditioning", an.conditioning, "all_pairs or start_stop");
    analyze->add_option("--filter", an.filters, "jump-count:N[,window_s] or time:window_ns,skip_us");

    auto* predict = app.add_subcommand("predict", "Print the closed-form shifts and rates");
    add_common(predict, false);

    CompareArgs cmp;
    auto* compare = app.add_subcommand("compare", "Compare a beat fit with the closed-form prediction");
    add_common(compare, false);
    compare->add_option("--fit", cmp.fit_path, "fit.json from analyze")->required();
    compare->add_option("--prediction", cmp.prediction_path, "predict.json (default: computed from --config)");
    compare->add_option("--freq-tol", cmp.freq_tol, "Relative frequency tolerance");
    compare->add_option("--decay-tol", cmp.decay_tol, "Relative decay tolerance");
    compare->add_option("--geometry", cmp.geometry, "auto, plus_minus or pm_zero");

    auto* records = app.add_subcommand("records", "Record file utilities");
    records->require_subcommand(1);
    std::vector<std::string> validate_files;
    auto* validate = records->add_subcommand("validate", "Check record files");
    validate->add_option("files", validate_files, "Record files")->required();
    std::vector<std::string> merge_files;
    std::vector<double> merge_offsets;
    std::string merge_out;
    std::string merge_format = "text";
    auto* merge = records->add_subcommand("merge", "Overlay record files");
    merge->add_option("files", merge_files, "Record files")->required();
    merge->add_option("--offsets-ns", merge_offsets, "Time offset per file (ns)")->delimiter(',');
    merge->add_option("-o,--output", merge_out, "Merged record path")->required();
    merge->add_option("--format", merge_format, "text or binary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : failure;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim);
        if (*analyze) return cmd_analyze(common, an);
        if (*predict) return cmd_predict(common);
        if (*compare) return cmd_compare(common, cmp);
        if (*validate) return cmd_validate(validate_files);
        if (*merge) return cmd_merge(merge_files, merge_offsets, merge_out, merge_format);
    } catch (const ConfigError& e) {
        report_error("config", e.what());
    } catch (const ParseError& e) {
        report_error("parse", e.what());
    } catch (const ValidationError& e) {
        report_error("validation", e.what());
    } catch (const IoError& e) {
        report_error("io", e.what());
    } catch (const UnsupportedInputError& e) {
        report_error("unsupported_input", e.what());
    } catch (const Error& e) {
        report_error("error", e.what());
    } catch (const std::exception& e) {
        report_error("internal", e.what());
    }
    return failure;
}
