#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qbeat/channel.hpp"
#include "qbeat/rng.hpp"

namespace qbeat {

// Time-tagger resolution. All record timestamps are integer nanoseconds.
using Nanos = std::chrono::nanoseconds;

constexpr Nanos to_nanos(double seconds) { return Nanos{static_cast<std::int64_t>(seconds * 1e9 + (seconds >= 0 ? 0.5 : -0.5))}; }
constexpr double to_seconds(Nanos t) { return static_cast<double>(t.count()) * 1e-9; }

struct JumpEvent {
    Nanos time{0};
    Channel channel = Channel::h_det_a;

    bool truth() const { return is_truth_channel(channel); }
    // Record order: time first, channel ordinal breaks ties.
    auto operator<=>(const JumpEvent&) const = default;
};

// A time-ordered detection record. Events are strictly increasing in
// (time, channel); two clicks on one channel within the same nanosecond
// tick are a single click. `truth_tags` says whether the simulation-only
// side emissions are present.
struct DetectionRecord {
    std::vector<JumpEvent> events;
    Nanos duration{0};
    bool truth_tags = true;
    std::map<std::string, std::string> metadata;

    // Throws ValidationError naming the 1-based event number.
    void validate() const;

    std::size_t count(Channel c) const;
    std::size_t count(ChannelSet s) const;
    std::vector<Nanos> times(ChannelSet s) const;
};

enum class RecordFormat { text, binary };

// Text: `# key=value` header lines, then `t_ns,channel,truth` CSV.
// Binary: magic "QBEATREC", u32 header length, the same header text,
// u64 event count, then per event little-endian u64 t_ns + u8 channel.
// read_record detects the format from the first bytes.
void write_record(const DetectionRecord& record, const std::filesystem::path& path,
                  RecordFormat format = RecordFormat::text);
DetectionRecord read_record(const std::filesystem::path& path);

std::string format_record_text(const DetectionRecord& record);
DetectionRecord parse_record_text(const std::string& text);

// Time-sorted union after shifting record k by offsets[k]. Events that fall
// outside [0, duration of the result] are dropped; the result duration is
// the largest shifted end time. Same-tick same-channel coincidences merge.
DetectionRecord merge_records(std::span<const DetectionRecord> records, std::span<const Nanos> offsets);

// Inserts an event keeping the (time, channel) order. Returns false when an
// identical event is already present.
bool insert_event(std::vector<JumpEvent>& events, JumpEvent e);

// Homogeneous Poisson clicks on the given channels.
DetectionRecord poisson_record(std::span<const std::pair<Channel, double>> rates_hz, Nanos duration, Rng& rng);

// Overlays independent single-atom records at Poisson arrival times. Each
// arrival picks a record uniformly from `atoms`. The implied mean atom
// number is arrival_rate * dwell_time, where dwell_time defaults to the
// mean atom record duration.
struct OverlayResult {
    DetectionRecord record;
    std::size_t arrivals = 0;
    double mean_atom_number = 0.0;
};
OverlayResult overlay_atom_records(std::span<const DetectionRecord> atoms, double arrival_rate_hz,
                                   Nanos duration, Rng& rng, double dwell_time = 0.0);

// Optional detector imperfections applied to the H and V detector
// channels. Truth events pass unchanged. Defaults are ideal detectors.
struct DetectorModel {
    double efficiency = 1.0;
    Nanos dead_time{0};
    double dark_rate_hz = 0.0;
};
DetectionRecord apply_detector_model(const DetectionRecord& record, const DetectorModel& model, Rng& rng);

// Drops every truth event and clears truth_tags, as an experimental record
// would look.
DetectionRecord strip_truth(const DetectionRecord& record);

}  // namespace qbeat
