#include "qbeat/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "qbeat/errors.hpp"

namespace qbeat {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

double to_double(const std::string& s) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

long long to_int(const std::string& s) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) throw ConfigError("not an integer: '" + s + "'");
    return v;
}

std::uint64_t to_uint(const std::string& s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) throw ConfigError("not an unsigned integer: '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("not a boolean: '" + s + "'");
}

cplx to_complex(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() == 1) return {to_double(parts[0]), 0.0};
    if (parts.size() == 2) return {to_double(parts[0]), to_double(parts[1])};
    throw ConfigError("not a complex number: '" + s + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fmt(cplx z) { return z.imag() == 0.0 ? fmt(z.real()) : fmt(z.real()) + "," + fmt(z.imag()); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// Angular frequency stored, Hz in the file.
Key freq_key(const char* name, double PhysicalParams::*field) {
    return {name, [field](RunConfig& c, const std::string& v) { c.physics.*field = hz(to_double(v)); },
            [field](const RunConfig& c) { return fmt(c.physics.*field / two_pi); }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        k.push_back(freq_key("g", &PhysicalParams::g));
        k.push_back(freq_key("kappa", &PhysicalParams::kappa));
        k.push_back(freq_key("gamma", &PhysicalParams::gamma));
        k.push_back(freq_key("delta_g", &PhysicalParams::delta_g));
        k.push_back(freq_key("delta_e", &PhysicalParams::delta_e));
        k.push_back(freq_key("drive_detuning", &PhysicalParams::drive_detuning));
        k.push_back({"drive_amplitude", [](RunConfig& c, const std::string& v) { c.physics.drive_amplitude = to_complex(v); },
                     [](const RunConfig& c) { return fmt(c.physics.drive_amplitude); }});
        k.push_back({"lo_mix", [](RunConfig& c, const std::string& v) { c.physics.lo_mix = to_complex(v); },
                     [](const RunConfig& c) { return fmt(c.physics.lo_mix); }});
        k.push_back({"pi_branch", [](RunConfig& c, const std::string& v) { c.physics.pi_branch = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.physics.pi_branch); }});
        k.push_back({"sigma_branch", [](RunConfig& c, const std::string& v) { c.physics.sigma_branch = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.physics.sigma_branch); }});
        k.push_back({"n_max_v", [](RunConfig& c, const std::string& v) { c.trajectory.n_max_v = static_cast<int>(to_int(v)); },
                     [](const RunConfig& c) { return std::to_string(c.trajectory.n_max_v); }});
        k.push_back({"n_max_h", [](RunConfig& c, const std::string& v) { c.trajectory.n_max_h = static_cast<int>(to_int(v)); },
                     [](const RunConfig& c) { return std::to_string(c.trajectory.n_max_h); }});
        k.push_back({"duration", [](RunConfig& c, const std::string& v) { c.trajectory.duration = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.duration); }});
        k.push_back({"warmup", [](RunConfig& c, const std::string& v) { c.trajectory.warmup = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.warmup); }});
        k.push_back({"dt_max", [](RunConfig& c, const std::string& v) { c.trajectory.dt_max = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.dt_max); }});
        k.push_back({"seed", [](RunConfig& c, const std::string& v) { c.trajectory.seed = to_uint(v); },
                     [](const RunConfig& c) { return std::to_string(c.trajectory.seed); }});
        k.push_back({"n_traj", [](RunConfig& c, const std::string& v) { c.n_traj = static_cast<std::size_t>(to_uint(v)); },
                     [](const RunConfig& c) { return std::to_string(c.n_traj); }});
        k.push_back({"atom_model",
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "fixed_max_coupled") c.trajectory.atom_model.kind = AtomModelKind::fixed_max_coupled;
                         else if (t == "transit") c.trajectory.atom_model.kind = AtomModelKind::transit;
                         else throw ConfigError("atom_model must be fixed_max_coupled or transit");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.trajectory.atom_model.kind == AtomModelKind::transit ? "transit" : "fixed_max_coupled");
                     }});
        k.push_back({"mean_transit", [](RunConfig& c, const std::string& v) { c.trajectory.atom_model.mean_transit = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.atom_model.mean_transit); }});
        k.push_back({"arrival_rate", [](RunConfig& c, const std::string& v) { c.trajectory.atom_model.arrival_rate = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.atom_model.arrival_rate); }});
        k.push_back({"start_with_atom", [](RunConfig& c, const std::string& v) { c.trajectory.atom_model.start_with_atom = to_bool(v); },
                     [](const RunConfig& c) { return fmt_bool(c.trajectory.atom_model.start_with_atom); }});
        k.push_back({"initial_ground",
                     [](RunConfig& c, const std::string& v) {
                         const auto parts = split(v, ',');
                         if (parts.size() != 3) throw ConfigError("initial_ground needs three weights (g-, g0, g+)");
                         for (std::size_t i = 0; i < 3; ++i) c.trajectory.initial_ground[i] = to_double(parts[i]);
                     },
                     [](const RunConfig& c) {
                         const auto& w = c.trajectory.initial_ground;
                         return fmt(w[0]) + "," + fmt(w[1]) + "," + fmt(w[2]);
                     }});
        k.push_back({"feedback_enabled", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.enabled = to_bool(v); },
                     [](const RunConfig& c) { return fmt_bool(c.trajectory.feedback.enabled); }});
        k.push_back({"trigger_channel", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.trigger_channels = ChannelSet::parse(trim(v)); },
                     [](const RunConfig& c) { return c.trajectory.feedback.trigger_channels.to_string(); }});
        k.push_back({"electronic_latency", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.electronic_latency = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.feedback.electronic_latency); }});
        k.push_back({"delay_after_detection", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.delay_after_detection = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.feedback.delay_after_detection); }});
        k.push_back({"window_duration", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.window_duration = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.feedback.window_duration); }});
        k.push_back({"attenuation_factor", [](RunConfig& c, const std::string& v) { c.trajectory.feedback.attenuation_factor = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.trajectory.feedback.attenuation_factor); }});
        k.push_back({"observer", [](RunConfig& c, const std::string& v) { c.trajectory.observer.enabled = to_bool(v); },
                     [](const RunConfig& c) { return fmt_bool(c.trajectory.observer.enabled); }});
        k.push_back({"bin_width",
                     [](RunConfig& c, const std::string& v) {
                         c.analysis.correlation.bin_width = to_double(v);
                         c.trajectory.observer.bin_width = c.analysis.correlation.bin_width;
                     },
                     [](const RunConfig& c) { return fmt(c.analysis.correlation.bin_width); }});
        k.push_back({"tau_max",
                     [](RunConfig& c, const std::string& v) {
                         c.analysis.correlation.tau_max = to_double(v);
                         c.trajectory.observer.tau_max = c.analysis.correlation.tau_max;
                     },
                     [](const RunConfig& c) { return fmt(c.analysis.correlation.tau_max); }});
        k.push_back({"start_channel", [](RunConfig& c, const std::string& v) { c.analysis.correlation.start = ChannelSet::parse(trim(v)); },
                     [](const RunConfig& c) { return c.analysis.correlation.start.to_string(); }});
        k.push_back({"stop_channel", [](RunConfig& c, const std::string& v) { c.analysis.correlation.stop = ChannelSet::parse(trim(v)); },
                     [](const RunConfig& c) { return c.analysis.correlation.stop.to_string(); }});
        k.push_back({"conditioning",
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "all_pairs") c.analysis.correlation.conditioning = Conditioning::all_pairs;
                         else if (t == "start_stop") c.analysis.correlation.conditioning = Conditioning::start_stop;
                         else throw ConfigError("conditioning must be all_pairs or start_stop");
                     },
                     [](const RunConfig& c) {
                         return std::string(c.analysis.correlation.conditioning == Conditioning::all_pairs ? "all_pairs" : "start_stop");
                     }});
        k.push_back({"fit_tau_min", [](RunConfig& c, const std::string& v) { c.analysis.fit_tau_min = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.analysis.fit_tau_min); }});
        k.push_back({"max_jumps",
                     [](RunConfig& c, const std::string& v) {
                         if (trim(v) == "none") {
                             c.analysis.max_jumps.reset();
                         } else {
                             c.analysis.max_jumps = static_cast<int>(to_int(v));
                             c.trajectory.observer.max_jumps = *c.analysis.max_jumps;
                         }
                     },
                     [](const RunConfig& c) { return c.analysis.max_jumps ? std::to_string(*c.analysis.max_jumps) : std::string("none"); }});
        k.push_back({"jump_window",
                     [](RunConfig& c, const std::string& v) {
                         c.analysis.jump_window = to_double(v);
                         c.trajectory.observer.jump_window = c.analysis.jump_window;
                     },
                     [](const RunConfig& c) { return fmt(c.analysis.jump_window); }});
        k.push_back({"time_filter",
                     [](RunConfig& c, const std::string& v) {
                         if (trim(v) == "none") {
                             c.analysis.time_filter.reset();
                             return;
                         }
                         const auto parts = split(v, ',');
                         if (parts.size() != 2) throw ConfigError("time_filter is none or window_s,skip_s");
                         c.analysis.time_filter = std::make_pair(to_double(parts[0]), to_double(parts[1]));
                     },
                     [](const RunConfig& c) {
                         return c.analysis.time_filter ? fmt(c.analysis.time_filter->first) + "," + fmt(c.analysis.time_filter->second)
                                                       : std::string("none");
                     }});
        k.push_back({"freq_tolerance", [](RunConfig& c, const std::string& v) { c.compare.freq_tolerance = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.compare.freq_tolerance); }});
        k.push_back({"decay_tolerance", [](RunConfig& c, const std::string& v) { c.compare.decay_tolerance = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.compare.decay_tolerance); }});
        k.push_back({"geometry",
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t != "auto" && t != "plus_minus" && t != "pm_zero") throw ConfigError("geometry must be auto, plus_minus or pm_zero");
                         c.compare.geometry = t;
                     },
                     [](const RunConfig& c) { return c.compare.geometry; }});
        k.push_back({"detector_efficiency", [](RunConfig& c, const std::string& v) { c.detector.efficiency = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.detector.efficiency); }});
        k.push_back({"dead_time", [](RunConfig& c, const std::string& v) { c.detector.dead_time = to_nanos(to_double(v)); },
                     [](const RunConfig& c) { return fmt(to_seconds(c.detector.dead_time)); }});
        k.push_back({"dark_rate", [](RunConfig& c, const std::string& v) { c.detector.dark_rate_hz = to_double(v); },
                     [](const RunConfig& c) { return fmt(c.detector.dark_rate_hz); }});
        k.push_back({"record_format",
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "text") c.record_format = RecordFormat::text;
                         else if (t == "binary") c.record_format = RecordFormat::binary;
                         else throw ConfigError("record_format must be text or binary");
                     },
                     [](const RunConfig& c) { return std::string(c.record_format == RecordFormat::text ? "text" : "binary"); }});
        std::sort(k.begin(), k.end(), [](const Key& a, const Key& b) { return std::string(a.name) < b.name; });
        return k;
    }();
    return table;
}

}  // namespace

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    for (const Key& k : keys()) {
        if (key == k.name) {
            k.set(config, value);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_config_value(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(n) + ": " + e.what());
        }
    }
    c.physics.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_config(const RunConfig& config) {
    std::string out;
    for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
    return out;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace qbeat
