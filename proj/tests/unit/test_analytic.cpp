#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qbeat/analytic.hpp"
#include "qbeat/errors.hpp"
#include "qbeat/operators.hpp"
#include "qbeat/rng.hpp"

using namespace qbeat;

namespace {

// g|alpha| = 0.1 gamma and Delta = 0.1 gamma with gamma = 1.
PhysicalParams tenth_params() {
    PhysicalParams p;
    p.gamma = 1.0;
    p.g = 0.1;
    p.delta_g = 0.0;
    p.delta_e = 0.1;
    p.drive_amplitude = 1.0;
    return p;
}

}  // namespace

TEST_CASE("shift formulas at g|alpha| = Delta = 0.1 gamma") {
    const PhysicalParams p = tenth_params();
    const cplx a = p.drive_amplitude;
    CHECK(ac_stark_shift(p, a) == doctest::Approx(-0.01 * 0.1 / 0.26).epsilon(1e-12));
    CHECK(ac_stark_shift(p, a) == doctest::Approx(-3.846e-3).epsilon(1e-3));
    CHECK(jump_rate(p, a) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(jump_shift(p, a) == doctest::Approx(8e-3).epsilon(1e-12));
    CHECK(decoherence_rate(p, a) == doctest::Approx(1.6e-3).epsilon(1e-12));
    CHECK(light_shift(p, a) == doctest::Approx(8e-3 - 0.001 / 0.26).epsilon(1e-12));
    // Gamma = gamma * p_e with p_e = (g|alpha| / (gamma/2))^2.
    const double pe = std::pow(0.1 / 0.5, 2);
    CHECK(jump_rate(p, a) == doctest::Approx(p.gamma * pe).epsilon(1e-14));
}

TEST_CASE("zero drive or zero detuning") {
    PhysicalParams p = tenth_params();
    for (auto f : {ac_stark_shift, jump_rate, jump_shift, light_shift, decoherence_rate}) CHECK(f(p, 0.0) == 0.0);
    p.delta_e = p.delta_g;
    CHECK(ac_stark_shift(p, 1.0) == 0.0);
    CHECK(jump_shift(p, 1.0) == 0.0);
    p.gamma = 0.0;
    CHECK_THROWS_AS(jump_rate(p, 1.0), DomainError);
    CHECK_THROWS_AS(excited_state_at(1.0, 0.0, 0.0, p), DomainError);
}

TEST_CASE("jump shift is minus twice the AC Stark shift to leading order") {
    PhysicalParams p;
    p.gamma = 1.0;
    p.g = 0.05;
    p.delta_g = 0.0;
    p.drive_amplitude = 0.8;
    for (double d = 0.001; d <= 0.2; d += 0.001) {
        p.delta_e = d;
        const double dj = jump_shift(p, p.drive_amplitude);
        const double dac = ac_stark_shift(p, p.drive_amplitude);
        CHECK(std::abs(dj + 2.0 * dac) <= std::pow(2.0 * d / p.gamma, 2) * std::abs(dj));
    }
}

TEST_CASE("per-jump factor") {
    PhysicalParams p = tenth_params();
    p.delta_e = 0.5;  // Delta = gamma / 2
    CHECK(phase_per_jump(p) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-14));
    CHECK(contraction_per_jump(p) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    const ConditionalState s0 = n_jump_state(1.0, 1.0, 0, 0.0, p);
    const ConditionalState s1 = n_jump_state(1.0, 1.0, 1, 0.0, p);
    // Relative to g0: amplitude ratio shrinks by r and gains phase phi.
    const cplx ratio = (s1.g_minus / s1.g_zero) / (s0.g_minus / s0.g_zero);
    CHECK(std::abs(ratio) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::arg(ratio) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
    CHECK_THROWS_AS(n_jump_state(1.0, 0.0, -1, 0.0, p), DomainError);
    CHECK_THROWS_AS(n_jump_state(0.0, 0.0, 0, 0.0, p), DomainError);
}

TEST_CASE("n-jump state equals n single jumps and stays normalized") {
    PhysicalParams p;
    p.drive_amplitude = 0.7;
    const cplx c0(0.8, 0.1), c1(0.3, -0.2);
    for (int n = 0; n <= 40; n += 7) {
        ConditionalState seq = ground_state_at(c0, c1, 1.3e-6, p);
        for (int k = 0; k < n; ++k) seq = apply_jump(seq, p);
        const ConditionalState direct = n_jump_state(c0, c1, n, 1.3e-6, p);
        CHECK(std::abs(seq.g_minus - direct.g_minus) < 1e-12);
        CHECK(std::abs(seq.g_zero - direct.g_zero) < 1e-12);
        CHECK(std::abs(seq.g_plus - direct.g_plus) < 1e-12);
        CHECK(direct.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // c1 = 0: norm independent of n, relative phase advanced by 2 n phi.
    const ConditionalState a = n_jump_state(1.0, 0.0, 0, 0.0, p);
    const ConditionalState b = n_jump_state(1.0, 0.0, 5, 0.0, p);
    CHECK(std::abs(b.g_minus) == doctest::Approx(std::abs(a.g_minus)).epsilon(1e-12));
    const double rel = std::arg(b.g_minus / b.g_plus) - std::arg(a.g_minus / a.g_plus);
    CHECK(std::remainder(rel - 10.0 * phase_per_jump(p), 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ground state evolution") {
    PhysicalParams p;
    p.drive_amplitude = 0.5;
    const cplx c0(0.6, 0.0), c1(0.8, 0.0);
    const ConditionalState s = ground_state_at(c0, c1, 0.0, p);
    CHECK(std::abs(s.g_minus - c0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(s.g_zero - c1) < 1e-15);
    const double w = p.delta_g + ac_stark_shift(p, steady_alpha(p));
    const ConditionalState q = ground_state_at(1.0, 0.0, std::numbers::pi / 2 / w, p);
    CHECK(std::abs(q.g_minus - cplx(0.0, 1.0) / std::sqrt(2.0)) < 1e-12);
    CHECK(std::abs(q.g_plus - cplx(0.0, -1.0) / std::sqrt(2.0)) < 1e-12);
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 2e-6);
    for (int k = 0; k < 10; ++k) {
        const double t = u(gen);
        const ConditionalState r = ground_state_at(1.0, 0.3, t, p);
        const double rel = std::arg(r.g_minus) - std::arg(r.g_plus);
        CHECK(std::remainder(rel - 2.0 * w * t, 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("excited amplitudes") {
    PhysicalParams p = tenth_params();
    p.drive_amplitude = 0.0;
    ExcitedAmplitudes e = excited_state_at(1.0, 0.5, 0.3, p);
    CHECK(std::abs(e.e_minus) == 0.0);
    CHECK(std::abs(e.e_zero) == 0.0);
    p = tenth_params();
    p.delta_e = p.delta_g;
    e = excited_state_at(1.0, 0.5, 0.0, p);
    CHECK(std::abs(e.e_minus - e.e_plus) < 1e-15);
    const ExcitedAmplitudes e0 = e;
    p.delta_e = 0.5;
    e = excited_state_at(1.0, 0.5, 0.0, p);
    // 1/(gamma/2 - i Delta) at Delta = gamma/2: magnitude / sqrt 2, phase +pi/4.
    CHECK(std::abs(e.e_minus) == doctest::Approx(std::abs(e0.e_minus) / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::arg(e.e_minus / e0.e_minus) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
}

TEST_CASE("Poisson coherence closed form") {
    PhysicalParams p = tenth_params();
    CHECK(poisson_coherence(0.0, p, 1.0, CoherencePair::ground_pm_zero) == cplx(1.0));
    p.delta_e = 0.5;
    const double t = 1.0 / jump_rate(p, 1.0);
    const cplx c = poisson_coherence(t, p, 1.0, CoherencePair::ground_pm_zero);
    CHECK(std::abs(c - std::exp(cplx(-0.5, 0.5))) < 1e-12);
    CHECK(std::abs(c) == doctest::Approx(0.6065).epsilon(1e-4));
    PhysicalParams flat = tenth_params();
    flat.delta_e = flat.delta_g;
    for (double tt : {0.0, 3.0, 50.0}) {
        CHECK(std::abs(poisson_coherence(tt, flat, 1.0, CoherencePair::ground_plus_minus) - 1.0) < 1e-15);
    }
    CHECK_THROWS_AS(poisson_coherence(-1.0, p, 1.0, CoherencePair::ground_pm_zero), DomainError);
}

TEST_CASE("Poisson coherence matches sampled jump numbers") {
    PhysicalParams p = tenth_params();
    p.delta_e = 0.3;
    const double mean = 2.5;
    const double t = mean / jump_rate(p, 1.0);
    Rng rng(11);
    std::poisson_distribution<int> pois(mean);
    for (auto pair : {CoherencePair::ground_pm_zero, CoherencePair::ground_plus_minus}) {
        const cplx f = pair == CoherencePair::ground_pm_zero ? std::polar(contraction_per_jump(p), phase_per_jump(p))
                                                             : std::polar(1.0, 2.0 * phase_per_jump(p));
        const int draws = 200000;
        cplx sum = 0.0;
        double sq_re = 0.0, sq_im = 0.0;
        for (int k = 0; k < draws; ++k) {
            const cplx v = std::pow(f, pois(rng.engine()));
            sum += v;
            sq_re += v.real() * v.real();
            sq_im += v.imag() * v.imag();
        }
        const cplx m = sum / static_cast<double>(draws);
        const double se_re = std::sqrt((sq_re / draws - m.real() * m.real()) / draws);
        const double se_im = std::sqrt((sq_im / draws - m.imag() * m.imag()) / draws);
        const cplx exact = poisson_coherence(t, p, 1.0, pair);
        CHECK(std::abs(m.real() - exact.real()) < 3.0 * se_re + 1e-12);
        CHECK(std::abs(m.imag() - exact.imag()) < 3.0 * se_im + 1e-12);
    }
}

TEST_CASE("Poisson coherence rates reduce to the shift and decoherence formulas") {
    PhysicalParams p;
    p.gamma = 1.0;
    p.g = 0.05;
    p.delta_g = 0.0;
    p.drive_amplitude = 1.0;
    for (double x : {0.02, 0.05, 0.1}) {  // 2 Delta / gamma
        p.delta_e = x / 2.0;
        const double t = 1.0;
        const cplx c = poisson_coherence(t, p, 1.0, CoherencePair::ground_pm_zero);
        const double phase_rate = std::arg(c) / t;
        const double decay_rate = -std::log(std::abs(c)) / t;
        CHECK(std::abs(phase_rate - jump_shift(p, 1.0)) <= 0.05 * jump_shift(p, 1.0));
        CHECK(std::abs(phase_rate - jump_rate(p, 1.0) * 2.0 * p.delta() / p.gamma) <= 0.05 * std::abs(phase_rate));
        CHECK(std::abs(decay_rate - decoherence_rate(p, 1.0)) <= 0.05 * decoherence_rate(p, 1.0));
        CHECK(beat_decay(p, 1.0, CoherencePair::ground_pm_zero) == doctest::Approx(decay_rate).epsilon(1e-9));
    }
}

TEST_CASE("beat model") {
    BeatParams b{0.0, 3.0, 0.4, 0.2, 1.1};
    CHECK(beat_model(0.7, b) == 1.1);
    b = {0.5, 2.0, 0.3, 0.0, 1.0};
    CHECK(beat_model(2.0 * std::numbers::pi / 2.0, b) == doctest::Approx(beat_model(0.0, b)).epsilon(1e-14));
    PhysicalParams p;
    p.drive_amplitude = 0.7;
    CHECK(beat_frequency(p, 0.7, CoherencePair::ground_plus_minus) ==
          doctest::Approx(2.0 * (p.delta_g + light_shift(p, 0.7))));
}

TEST_CASE("conditional amplitudes") {
    PhysicalParams p;
    auto a = conditional_amplitudes(p);
    CHECK(a.c1 == cplx(0.0));
    CHECK(std::abs(a.c0) == 1.0);
    p.lo_mix = {0.3, 0.1};
    a = conditional_amplitudes(p, 2.0);
    CHECK(std::abs(a.c1 - cplx(0.6, 0.2)) < 1e-15);
    CHECK(std::norm(a.c0) + std::norm(a.c1) == doctest::Approx(1.0));
}
