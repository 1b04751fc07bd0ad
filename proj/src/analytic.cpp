#include "qbeat/analytic.hpp"

#include <cmath>

#include "qbeat/errors.hpp"
#include "qbeat/operators.hpp"

namespace qbeat {
namespace {

double half_gamma(const PhysicalParams& p) {
    if (!(p.gamma > 0.0)) throw DomainError("gamma must be positive");
    return p.gamma / 2.0;
}

void normalize(ConditionalState& s) {
    const double n = std::sqrt(s.norm_squared());
    if (!(n > 0.0)) throw DomainError("conditional state has zero norm");
    s.g_minus /= n;
    s.g_zero /= n;
    s.g_plus /= n;
}

}  // namespace

double ac_stark_shift(const PhysicalParams& p, cplx alpha) {
    const double hg = half_gamma(p);
    const double d = p.delta();
    return -p.g * p.g * std::norm(alpha) * d / (hg * hg + d * d);
}

double jump_rate(const PhysicalParams& p, cplx alpha) {
    return 2.0 * p.g * p.g * std::norm(alpha) / half_gamma(p);
}

double jump_shift(const PhysicalParams& p, cplx alpha) {
    half_gamma(p);
    return 8.0 * p.g * p.g * std::norm(alpha) * p.delta() / (p.gamma * p.gamma);
}

double light_shift(const PhysicalParams& p, cplx alpha) { return ac_stark_shift(p, alpha) + jump_shift(p, alpha); }

double decoherence_rate(const PhysicalParams& p, cplx alpha) {
    const double hg = half_gamma(p);
    const double d = p.delta();
    return jump_rate(p, alpha) * d * d / (hg * hg);
}

double phase_per_jump(const PhysicalParams& p) { return std::atan(2.0 * p.delta() / p.gamma); }

double contraction_per_jump(const PhysicalParams& p) {
    const double hg = half_gamma(p);
    return hg / std::hypot(hg, p.delta());
}

ShiftReport shift_report(const PhysicalParams& p, cplx alpha) {
    ShiftReport r;
    r.alpha_squared = std::norm(alpha);
    r.delta_ac = ac_stark_shift(p, alpha);
    r.gamma_jump = jump_rate(p, alpha);
    r.delta_jump = jump_shift(p, alpha);
    r.delta_light = r.delta_ac + r.delta_jump;
    r.gamma_decoh = decoherence_rate(p, alpha);
    r.phi_per_jump = phase_per_jump(p);
    r.r_per_jump = contraction_per_jump(p);
    return r;
}

ConditionalState ground_state_at(cplx c0, cplx c1, double t, const PhysicalParams& p) {
    return n_jump_state(c0, c1, 0, t, p);
}

ConditionalState n_jump_state(cplx c0, cplx c1, int n, double t, const PhysicalParams& p) {
    if (n < 0) throw DomainError("number of jumps must be non-negative");
    if (c0 == cplx(0.0) && c1 == cplx(0.0)) throw DomainError("zero conditional state");
    const double theta = (p.delta_g + ac_stark_shift(p, steady_alpha(p))) * t;
    const double r_n = std::pow(contraction_per_jump(p), n);
    const double phase = n * phase_per_jump(p) + theta;
    ConditionalState s{c0, c1, {}, c1, {}, n, t};
    s.g_minus = c0 / std::sqrt(2.0) * r_n * std::polar(1.0, phase);
    s.g_plus = c0 / std::sqrt(2.0) * r_n * std::polar(1.0, -phase);
    normalize(s);
    return s;
}

ConditionalState apply_jump(const ConditionalState& s, const PhysicalParams& p) {
    const cplx f = std::polar(contraction_per_jump(p), phase_per_jump(p));
    ConditionalState out = s;
    out.g_minus *= f;
    out.g_plus *= std::conj(f);
    out.n_jumps += 1;
    normalize(out);
    return out;
}

ExcitedAmplitudes excited_state_at(cplx c0, cplx c1, double t, const PhysicalParams& p) {
    const double hg = half_gamma(p);
    const cplx alpha = steady_alpha(p);
    const double theta = (p.delta_g + ac_stark_shift(p, alpha)) * t;
    const cplx i(0.0, 1.0);
    const cplx ga = p.g * alpha;
    ExcitedAmplitudes e;
    e.e_minus = c0 * ga / std::sqrt(2.0) * std::polar(1.0, theta) / (hg - i * p.delta());
    e.e_plus = c0 * ga / std::sqrt(2.0) * std::polar(1.0, -theta) / (hg + i * p.delta());
    e.e_zero = c1 * ga / hg;
    return e;
}

cplx poisson_coherence(double t, const PhysicalParams& p, cplx alpha, CoherencePair pair) {
    if (t < 0.0) throw DomainError("time must be non-negative");
    const double mean = jump_rate(p, alpha) * t;
    const cplx factor = pair == CoherencePair::ground_pm_zero
                            ? std::polar(contraction_per_jump(p), phase_per_jump(p))
                            : std::polar(1.0, 2.0 * phase_per_jump(p));
    return std::exp(mean * (factor - 1.0));
}

double beat_frequency(const PhysicalParams& p, cplx alpha, CoherencePair pair) {
    const double f = p.delta_g + light_shift(p, alpha);
    return pair == CoherencePair::ground_plus_minus ? 2.0 * f : f;
}

double beat_decay(const PhysicalParams& p, cplx alpha, CoherencePair pair) {
    // -d/dt log|poisson_coherence|
    const double rate = jump_rate(p, alpha);
    const double phi = phase_per_jump(p);
    if (pair == CoherencePair::ground_plus_minus) return rate * (1.0 - std::cos(2.0 * phi));
    return rate * (1.0 - contraction_per_jump(p) * std::cos(phi));
}

ConditionalAmplitudes conditional_amplitudes(const PhysicalParams& p, double lo_gain) {
    const cplx c1 = lo_gain * p.lo_mix;
    const double rest = 1.0 - std::norm(c1);
    if (rest <= 0.0) throw DomainError("local-oscillator weight exceeds unity");
    return {cplx(std::sqrt(rest)), c1};
}

double beat_model(double t, const BeatParams& b) {
    return b.offset + b.amplitude * std::exp(-b.decay * t) * std::cos(b.freq * t + b.phase);
}

}  // namespace qbeat
