#pragma once

#include <complex>

#include "qbeat/model.hpp"

namespace qbeat {

// Ground-state superposition prepared by an H detection. c0 weights the
// (g-, g+) pair, c1 the g0 level.
struct ConditionalState {
    cplx c0;
    cplx c1;
    cplx g_minus;
    cplx g_zero;
    cplx g_plus;
    int n_jumps = 0;
    double time = 0.0;

    double norm_squared() const { return std::norm(g_minus) + std::norm(g_zero) + std::norm(g_plus); }
};

struct ExcitedAmplitudes {
    cplx e_minus;
    cplx e_zero;
    cplx e_plus;
};

// Closed-form shifts and rates, all in rad/s, plus the per-jump factor
// r * exp(i phi) that a Rayleigh jump applies to the g-/g+ amplitudes
// relative to g0.
struct ShiftReport {
    double alpha_squared = 0.0;
    double delta_ac = 0.0;
    double gamma_jump = 0.0;
    double delta_jump = 0.0;
    double delta_light = 0.0;
    double gamma_decoh = 0.0;
    double phi_per_jump = 0.0;
    double r_per_jump = 1.0;
};

enum class CoherencePair { ground_pm_zero, ground_plus_minus };

double ac_stark_shift(const PhysicalParams& p, cplx alpha);
double jump_rate(const PhysicalParams& p, cplx alpha);
double jump_shift(const PhysicalParams& p, cplx alpha);
double light_shift(const PhysicalParams& p, cplx alpha);
double decoherence_rate(const PhysicalParams& p, cplx alpha);

// phi = atan(2 Delta / gamma), r = (gamma/2) / sqrt((gamma/2)^2 + Delta^2).
double phase_per_jump(const PhysicalParams& p);
double contraction_per_jump(const PhysicalParams& p);

ShiftReport shift_report(const PhysicalParams& p, cplx alpha);

// Superposition at time t after preparation with no intervening jumps.
// The AC Stark shift uses steady_alpha(p).
ConditionalState ground_state_at(cplx c0, cplx c1, double t, const PhysicalParams& p);

// Same state after n Rayleigh jumps; n = 0 reduces to ground_state_at.
ConditionalState n_jump_state(cplx c0, cplx c1, int n, double t, const PhysicalParams& p);

// One jump applied to an already prepared state.
ConditionalState apply_jump(const ConditionalState& s, const PhysicalParams& p);

ExcitedAmplitudes excited_state_at(cplx c0, cplx c1, double t, const PhysicalParams& p);

// Poisson average (mean Gamma t) of the per-jump factor acting on the
// chosen coherence.
cplx poisson_coherence(double t, const PhysicalParams& p, cplx alpha, CoherencePair pair);

// Frequency of the H-conditioned beat for each coherence:
// 2(Delta_g + Delta_light) for (g+, g-), Delta_g + Delta_light for (g+-, g0).
double beat_frequency(const PhysicalParams& p, cplx alpha, CoherencePair pair);

// Decay of the beat amplitude predicted by the Poisson average; the
// (g+, g-) coherence decays at roughly twice Gamma_decoh.
double beat_decay(const PhysicalParams& p, cplx alpha, CoherencePair pair);

// (c0, c1) for a given local-oscillator mix. c1 = gain * eps, c0 carries
// the remaining weight; without a local oscillator c1 = 0.
struct ConditionalAmplitudes {
    cplx c0;
    cplx c1;
};
ConditionalAmplitudes conditional_amplitudes(const PhysicalParams& p, double lo_gain = 1.0);

struct BeatParams {
    double amplitude = 0.0;
    double freq = 0.0;  // rad/s
    double phase = 0.0;
    double decay = 0.0;  // 1/s
    double offset = 0.0;
};

double beat_model(double t, const BeatParams& b);

}  // namespace qbeat
