#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

namespace qbeat {

// Every collapse channel of the unraveling. The ordinal is also the
// tie-break order for events sharing a timestamp.
enum class Channel : int {
    h_det_a = 0,
    h_det_b,
    v_out,
    side_pi,
    side_sigma_plus,
    side_sigma_minus,
};

inline constexpr int channel_count = 6;

// Side emissions never reach a detector; they exist only as simulation
// ground truth.
constexpr bool is_truth_channel(Channel c) { return static_cast<int>(c) >= 3; }
constexpr bool is_h_detector(Channel c) { return c == Channel::h_det_a || c == Channel::h_det_b; }

const char* channel_name(Channel c);
Channel channel_from_name(const std::string& name);

class ChannelSet {
public:
    constexpr ChannelSet() = default;
    constexpr ChannelSet(std::initializer_list<Channel> channels) {
        for (Channel c : channels) bits_ |= bit(c);
    }

    constexpr bool contains(Channel c) const { return (bits_ & bit(c)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr void insert(Channel c) { bits_ |= bit(c); }
    constexpr bool operator==(const ChannelSet&) const = default;

    static constexpr ChannelSet h_detectors() { return {Channel::h_det_a, Channel::h_det_b}; }
    static constexpr ChannelSet side() {
        return {Channel::side_pi, Channel::side_sigma_plus, Channel::side_sigma_minus};
    }

    // Accepts a channel name, "H" (both H detectors) or "side".
    static ChannelSet parse(const std::string& spec);
    std::string to_string() const;

private:
    static constexpr std::uint8_t bit(Channel c) { return static_cast<std::uint8_t>(1u << static_cast<int>(c)); }
    std::uint8_t bits_ = 0;
};

}  // namespace qbeat
