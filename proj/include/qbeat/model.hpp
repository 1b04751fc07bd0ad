#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>

namespace qbeat {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Convert a frequency in Hz to an angular frequency in rad/s.
constexpr double hz(double f) { return two_pi * f; }

// Reduced level scheme of the F=3 -> F=4 D2 line: three ground and three
// excited Zeeman sublevels. The ordinal is the atomic factor's basis index.
enum class Level : int { g_minus = 0, g_zero, g_plus, e_minus, e_zero, e_plus };

inline constexpr int atom_dim = 6;

// Magnetic quantum number of a level (-1, 0, +1).
constexpr int magnetic_number(Level l) { return static_cast<int>(l) % 3 - 1; }
constexpr bool is_excited(Level l) { return static_cast<int>(l) >= 3; }
constexpr Level ground_level(int m) { return static_cast<Level>(m + 1); }
constexpr Level excited_level(int m) { return static_cast<Level>(m + 4); }

const char* level_name(Level l);

// Relative strengths of the individual atomic transitions. All ones
// reproduces the uniform-coupling model; Clebsch-Gordan factors can be
// supplied here without touching the operator builder.
struct CouplingWeights {
    // pi transitions e_m -> g_m, indexed by m + 1.
    std::array<double, 3> pi{1.0, 1.0, 1.0};
    // sigma+ lowering e_m -> g_(m-1) for m = 0, +1 (index m).
    std::array<double, 2> sigma_plus{1.0, 1.0};
    // sigma- lowering e_m -> g_(m+1) for m = -1, 0 (index m + 1).
    std::array<double, 2> sigma_minus{1.0, 1.0};
};

// All rates and shifts of the two-mode cavity model. Angular frequencies
// are in rad/s.
struct PhysicalParams {
    double g = hz(1.5e6);
    double kappa = hz(3.0e6);
    double gamma = hz(6.07e6);
    double delta_g = hz(0.8e6);
    double delta_e = hz(1.2e6);
    // Cavity input term; the empty-cavity steady state of the V mode is
    // exactly this amplitude.
    cplx drive_amplitude{0.0, 0.0};
    double drive_detuning = 0.0;
    // Fraction of the V output folded into the H detection path.
    cplx lo_mix{0.0, 0.0};
    double pi_branch = 1.0;
    double sigma_branch = 0.0;
    std::optional<CouplingWeights> coupling_override;

    // Difference of excited and ground Zeeman splittings.
    double delta() const { return delta_e - delta_g; }

    // Throws ConfigError when an invariant is broken.
    void validate() const;
};

// Truncated Hilbert space atom (x) V-Fock (x) H-Fock. Basis index is
// row-major in that order:
//   index = (level * (n_max_v + 1) + n_v) * (n_max_h + 1) + n_h
struct BasisState {
    Level level;
    int n_v;
    int n_h;
    bool operator==(const BasisState&) const = default;
};

class HilbertSpace {
public:
    HilbertSpace(int n_max_v, int n_max_h);

    int n_max_v() const { return n_max_v_; }
    int n_max_h() const { return n_max_h_; }
    std::size_t dim() const { return dim_; }

    std::size_t index(const BasisState& s) const;
    BasisState state(std::size_t index) const;

private:
    int n_max_v_;
    int n_max_h_;
    std::size_t dim_;
};

HilbertSpace build_space(int n_max_v, int n_max_h);

}  // namespace qbeat
