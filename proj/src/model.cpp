#include "qbeat/model.hpp"

#include <cmath>

#include "qbeat/errors.hpp"

namespace qbeat {

const char* level_name(Level l) {
    switch (l) {
        case Level::g_minus: return "g-";
        case Level::g_zero: return "g0";
        case Level::g_plus: return "g+";
        case Level::e_minus: return "e-";
        case Level::e_zero: return "e0";
        case Level::e_plus: return "e+";
    }
    return "?";
}

void PhysicalParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string(name) + " must be positive and finite");
        }
    };
    positive(g, "g");
    positive(kappa, "kappa");
    positive(gamma, "gamma");
    for (double v : {delta_g, delta_e, drive_detuning, drive_amplitude.real(),
                     drive_amplitude.imag(), lo_mix.real(), lo_mix.imag()}) {
        if (!std::isfinite(v)) throw ConfigError("non-finite parameter value");
    }
    if (pi_branch < 0.0 || sigma_branch < 0.0) {
        throw ConfigError("branching weights must be non-negative");
    }
    if (std::abs(pi_branch + sigma_branch - 1.0) > 1e-12) {
        throw ConfigError("pi_branch + sigma_branch must equal 1");
    }
    if (std::abs(lo_mix) > 1.0) throw ConfigError("|lo_mix| must not exceed 1");
}

HilbertSpace::HilbertSpace(int n_max_v, int n_max_h) : n_max_v_(n_max_v), n_max_h_(n_max_h) {
    if (n_max_v < 1 || n_max_h < 1) {
        throw ConfigError("photon truncation must be at least 1 per mode");
    }
    dim_ = static_cast<std::size_t>(atom_dim) * static_cast<std::size_t>(n_max_v + 1) *
           static_cast<std::size_t>(n_max_h + 1);
}

std::size_t HilbertSpace::index(const BasisState& s) const {
    return (static_cast<std::size_t>(s.level) * static_cast<std::size_t>(n_max_v_ + 1) +
            static_cast<std::size_t>(s.n_v)) *
               static_cast<std::size_t>(n_max_h_ + 1) +
           static_cast<std::size_t>(s.n_h);
}

BasisState HilbertSpace::state(std::size_t index) const {
    const auto dh = static_cast<std::size_t>(n_max_h_ + 1);
    const auto dv = static_cast<std::size_t>(n_max_v_ + 1);
    const int n_h = static_cast<int>(index % dh);
    index /= dh;
    const int n_v = static_cast<int>(index % dv);
    index /= dv;
    return {static_cast<Level>(index), n_v, n_h};
}

HilbertSpace build_space(int n_max_v, int n_max_h) { return HilbertSpace(n_max_v, n_max_h); }

}  // namespace qbeat
