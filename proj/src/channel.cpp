#include "qbeat/channel.hpp"

#include <sstream>

#include "qbeat/errors.hpp"

namespace qbeat {

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::h_det_a: return "H_det_A";
        case Channel::h_det_b: return "H_det_B";
        case Channel::v_out: return "V_out";
        case Channel::side_pi: return "side_pi";
        case Channel::side_sigma_plus: return "side_sigma_plus";
        case Channel::side_sigma_minus: return "side_sigma_minus";
    }
    return "?";
}

Channel channel_from_name(const std::string& name) {
    for (int k = 0; k < channel_count; ++k) {
        const auto c = static_cast<Channel>(k);
        if (name == channel_name(c)) return c;
    }
    throw ConfigError("unknown channel '" + name + "'");
}

ChannelSet ChannelSet::parse(const std::string& spec) {
    ChannelSet out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, '+')) {
        if (item == "H") {
            out.insert(Channel::h_det_a);
            out.insert(Channel::h_det_b);
        } else if (item == "side") {
            for (Channel c : {Channel::side_pi, Channel::side_sigma_plus, Channel::side_sigma_minus}) out.insert(c);
        } else {
            out.insert(channel_from_name(item));
        }
    }
    if (out.empty()) throw ConfigError("empty channel selection '" + spec + "'");
    return out;
}

std::string ChannelSet::to_string() const {
    if (*this == h_detectors()) return "H";
    std::string s;
    for (int k = 0; k < channel_count; ++k) {
        const auto c = static_cast<Channel>(k);
        if (!contains(c)) continue;
        if (!s.empty()) s += '+';
        s += channel_name(c);
    }
    return s;
}

}  // namespace qbeat
