#include "qbeat/records.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qbeat/errors.hpp"

namespace qbeat {
namespace {

constexpr std::array<char, 8> binary_magic{'Q', 'B', 'E', 'A', 'T', 'R', 'E', 'C'};
constexpr const char* format_tag = "qbeat-record-v1";
constexpr const char* column_line = "t_ns,channel,truth";

std::string header_text(const DetectionRecord& r) {
    std::ostringstream out;
    out << "# format=" << format_tag << '\n';
    out << "# duration_ns=" << r.duration.count() << '\n';
    out << "# truth_tags=" << (r.truth_tags ? 1 : 0) << '\n';
    for (const auto& [k, v] : r.metadata) out << "# " << k << '=' << v << '\n';
    return out.str();
}

void apply_header(DetectionRecord& r, const std::string& key, const std::string& value, std::size_t line) {
    if (key == "format") {
        if (value != format_tag) throw ParseError("unsupported record format '" + value + "'", line);
    } else if (key == "duration_ns") {
        try {
            std::size_t used = 0;
            r.duration = Nanos{std::stoll(value, &used)};
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw ParseError("bad duration_ns '" + value + "'", line);
        }
    } else if (key == "truth_tags") {
        if (value != "0" && value != "1") throw ParseError("truth_tags must be 0 or 1", line);
        r.truth_tags = value == "1";
    } else {
        r.metadata[key] = value;
    }
}

// Returns the key that was set.
std::string parse_header_line(DetectionRecord& r, const std::string& text, std::size_t line) {
    // "# key=value"
    std::string body = text.substr(1);
    if (!body.empty() && body.front() == ' ') body.erase(0, 1);
    const auto eq = body.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("header line is not key=value", line);
    std::string key = body.substr(0, eq);
    apply_header(r, key, body.substr(eq + 1), line);
    return key;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad integer '" + s + "'", line);
    }
}

// Validation shared by both readers; `line_of(k)` maps event k to the
// position reported in errors.
template <class LineOf>
void check_events(const DetectionRecord& r, LineOf line_of) {
    for (std::size_t k = 0; k < r.events.size(); ++k) {
        const JumpEvent& e = r.events[k];
        if (e.time < Nanos{0} || e.time > r.duration) {
            throw ValidationError("timestamp outside [0, duration]", line_of(k));
        }
        if (e.truth() && !r.truth_tags) {
            throw ValidationError("truth event in a record without truth tags", line_of(k));
        }
        if (k > 0 && !(r.events[k - 1] < e)) {
            throw ValidationError("timestamps not increasing", line_of(k));
        }
    }
}

}  // namespace

void DetectionRecord::validate() const {
    if (duration < Nanos{0}) throw ValidationError("negative duration", 0);
    check_events(*this, [](std::size_t k) { return k + 1; });
}

std::size_t DetectionRecord::count(Channel c) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [c](const JumpEvent& e) { return e.channel == c; }));
}

std::size_t DetectionRecord::count(ChannelSet s) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [s](const JumpEvent& e) { return s.contains(e.channel); }));
}

std::vector<Nanos> DetectionRecord::times(ChannelSet s) const {
    std::vector<Nanos> out;
    for (const JumpEvent& e : events) {
        if (s.contains(e.channel)) out.push_back(e.time);
    }
    return out;
}

std::string format_record_text(const DetectionRecord& record) {
    std::ostringstream out;
    out << header_text(record) << column_line << '\n';
    for (const JumpEvent& e : record.events) {
        out << e.time.count() << ',' << channel_name(e.channel) << ',' << (e.truth() ? 1 : 0) << '\n';
    }
    return out.str();
}

DetectionRecord parse_record_text(const std::string& text) {
    DetectionRecord r;
    r.truth_tags = false;
    bool saw_format = false;
    bool saw_columns = false;
    std::vector<std::size_t> lines;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_columns && line.front() == '#') {
            if (parse_header_line(r, line, n) == "format") saw_format = true;
            continue;
        }
        if (!saw_columns) {
            if (line != column_line) throw ParseError("expected column line '" + std::string(column_line) + "'", n);
            saw_columns = true;
            continue;
        }
        std::array<std::string, 3> f;
        std::istringstream fields(line);
        std::size_t nf = 0;
        std::string item;
        while (std::getline(fields, item, ',')) {
            if (nf == 3) throw ParseError("too many fields", n);
            f[nf++] = item;
        }
        if (nf != 3) throw ParseError("expected 3 fields", n);
        JumpEvent e;
        e.time = Nanos{parse_int(f[0], n)};
        try {
            e.channel = channel_from_name(f[1]);
        } catch (const ConfigError&) {
            throw ParseError("unknown channel '" + f[1] + "'", n);
        }
        if (f[2] != "0" && f[2] != "1") throw ParseError("truth flag must be 0 or 1", n);
        if ((f[2] == "1") != e.truth()) throw ParseError("truth flag does not match channel", n);
        r.events.push_back(e);
        lines.push_back(n);
    }
    if (!saw_format) throw ParseError("missing format header", 1);
    if (!saw_columns) throw ParseError("missing column line", n + 1);
    check_events(r, [&](std::size_t k) { return lines[k]; });
    return r;
}

void write_record(const DetectionRecord& record, const std::filesystem::path& path, RecordFormat format) {
    record.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    if (format == RecordFormat::text) {
        out << format_record_text(record);
    } else {
        const std::string header = header_text(record);
        out.write(binary_magic.data(), binary_magic.size());
        auto put = [&](std::uint64_t v, int bytes) {
            for (int b = 0; b < bytes; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xffu));
        };
        put(header.size(), 4);
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        put(record.events.size(), 8);
        for (const JumpEvent& e : record.events) {
            put(static_cast<std::uint64_t>(e.time.count()), 8);
            put(static_cast<std::uint64_t>(e.channel), 1);
        }
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

DetectionRecord read_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < binary_magic.size() ||
        std::memcmp(bytes.data(), binary_magic.data(), binary_magic.size()) != 0) {
        return parse_record_text(bytes);
    }

    std::size_t pos = binary_magic.size();
    auto get = [&](int n) {
        if (pos + static_cast<std::size_t>(n) > bytes.size()) throw ParseError("truncated binary record", 0);
        std::uint64_t v = 0;
        for (int b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
        pos += static_cast<std::size_t>(n);
        return v;
    };
    const auto header_len = static_cast<std::size_t>(get(4));
    if (pos + header_len > bytes.size()) throw ParseError("truncated binary header", 0);
    DetectionRecord r = parse_record_text(bytes.substr(pos, header_len) + column_line + "\n");
    pos += header_len;
    const std::uint64_t count = get(8);
    r.events.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        JumpEvent e;
        e.time = Nanos{static_cast<std::int64_t>(get(8))};
        const auto c = get(1);
        if (c >= static_cast<std::uint64_t>(channel_count)) throw ParseError("bad channel code", k + 1);
        e.channel = static_cast<Channel>(c);
        r.events.push_back(e);
    }
    if (pos != bytes.size()) throw ParseError("trailing bytes after binary record", count + 1);
    r.validate();
    return r;
}

bool insert_event(std::vector<JumpEvent>& events, JumpEvent e) {
    if (events.empty() || events.back() < e) {
        events.push_back(e);
        return true;
    }
    const auto it = std::lower_bound(events.begin(), events.end(), e);
    if (it != events.end() && *it == e) return false;
    events.insert(it, e);
    return true;
}

DetectionRecord merge_records(std::span<const DetectionRecord> records, std::span<const Nanos> offsets) {
    if (records.size() != offsets.size()) throw DomainError("one offset per record required");
    DetectionRecord out;
    out.truth_tags = true;
    std::size_t total = 0;
    for (std::size_t k = 0; k < records.size(); ++k) {
        out.duration = std::max(out.duration, records[k].duration + offsets[k]);
        out.truth_tags = out.truth_tags && records[k].truth_tags;
        total += records[k].events.size();
    }
    out.events.reserve(total);
    for (std::size_t k = 0; k < records.size(); ++k) {
        for (const JumpEvent& e : records[k].events) {
            const JumpEvent shifted{e.time + offsets[k], e.channel};
            if (shifted.time < Nanos{0}) continue;
            if (shifted.truth() && !out.truth_tags) continue;
            out.events.push_back(shifted);
        }
    }
    std::sort(out.events.begin(), out.events.end());
    const auto last = std::unique(out.events.begin(), out.events.end());
    const auto merged = static_cast<std::size_t>(std::distance(last, out.events.end()));
    out.events.erase(last, out.events.end());
    out.metadata["merged_records"] = std::to_string(records.size());
    if (merged > 0) out.metadata["merged_coincidences"] = std::to_string(merged);
    return out;
}

DetectionRecord poisson_record(std::span<const std::pair<Channel, double>> rates_hz, Nanos duration, Rng& rng) {
    DetectionRecord r;
    r.duration = duration;
    const double end = to_seconds(duration);
    for (const auto& [channel, rate] : rates_hz) {
        if (rate <= 0.0) continue;
        for (double t = rng.exponential(rate); t <= end; t += rng.exponential(rate)) {
            const Nanos tn = to_nanos(t);
            if (tn > duration) break;
            insert_event(r.events, {tn, channel});
        }
    }
    r.truth_tags = true;
    return r;
}

OverlayResult overlay_atom_records(std::span<const DetectionRecord> atoms, double arrival_rate_hz,
                                   Nanos duration, Rng& rng, double dwell_time) {
    if (atoms.empty()) throw DomainError("no atom records to overlay");
    OverlayResult result;
    double mean_len = 0.0;
    for (const DetectionRecord& a : atoms) mean_len += to_seconds(a.duration);
    mean_len /= static_cast<double>(atoms.size());
    result.mean_atom_number = arrival_rate_hz * (dwell_time > 0.0 ? dwell_time : mean_len);

    std::vector<DetectionRecord> picked;
    std::vector<Nanos> offsets;
    // Atoms already inside the cavity at t = 0 arrived up to one transit earlier.
    const double start = -mean_len;
    const double end = to_seconds(duration);
    if (arrival_rate_hz > 0.0) {
        for (double t = start + rng.exponential(arrival_rate_hz); t < end; t += rng.exponential(arrival_rate_hz)) {
            picked.push_back(atoms[static_cast<std::size_t>(rng.below(atoms.size()))]);
            offsets.push_back(to_nanos(t));
        }
    }
    result.arrivals = picked.size();
    result.record = merge_records(picked, offsets);
    result.record.duration = duration;
    std::erase_if(result.record.events, [&](const JumpEvent& e) { return e.time > duration; });
    result.record.metadata["atom_arrivals"] = std::to_string(result.arrivals);
    if (picked.empty()) result.record.truth_tags = true;
    return result;
}

DetectionRecord apply_detector_model(const DetectionRecord& record, const DetectorModel& model, Rng& rng) {
    if (model.efficiency < 0.0 || model.efficiency > 1.0) throw DomainError("efficiency must lie in [0, 1]");
    DetectionRecord out = record;
    out.events.clear();
    std::array<Nanos, channel_count> last{};
    std::array<bool, channel_count> seen{};
    auto accept = [&](const JumpEvent& e) {
        if (e.truth()) return true;
        const auto k = static_cast<std::size_t>(e.channel);
        if (seen[k] && e.time - last[k] < model.dead_time) return false;
        seen[k] = true;
        last[k] = e.time;
        return true;
    };
    std::vector<JumpEvent> candidates;
    candidates.reserve(record.events.size());
    for (const JumpEvent& e : record.events) {
        if (!e.truth() && rng.uniform() >= model.efficiency) continue;
        candidates.push_back(e);
    }
    if (model.dark_rate_hz > 0.0) {
        const std::array<std::pair<Channel, double>, 3> dark{
            {{Channel::h_det_a, model.dark_rate_hz}, {Channel::h_det_b, model.dark_rate_hz}, {Channel::v_out, model.dark_rate_hz}}};
        const DetectionRecord noise = poisson_record(dark, record.duration, rng);
        candidates.insert(candidates.end(), noise.events.begin(), noise.events.end());
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    }
    for (const JumpEvent& e : candidates) {
        if (accept(e)) out.events.push_back(e);
    }
    return out;
}

DetectionRecord strip_truth(const DetectionRecord& record) {
    DetectionRecord out = record;
    std::erase_if(out.events, [](const JumpEvent& e) { return e.truth(); });
    out.truth_tags = false;
    return out;
}

}  // namespace qbeat
