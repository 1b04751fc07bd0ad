#include "qbeat/trajectory.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "qbeat/errors.hpp"
#include "qbeat/rng.hpp"

namespace qbeat {

namespace {

// Each step of dt_max is split into 2^7 sub-steps for locating jump times.
constexpr int bisection_depth = 7;
constexpr std::int64_t units_per_step = std::int64_t{1} << bisection_depth;
// Transit coupling is piecewise constant on this many levels.
constexpr int coupling_levels = 64;

std::string num(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

std::string num(cplx z) { return num(z.real()) + "," + num(z.imag()); }

int largest_pow2_at_most(std::int64_t n) {
    int p = 1;
    while (static_cast<std::int64_t>(p) * 2 <= n) p *= 2;
    return p;
}

int log2_exact(int p) {
    int k = 0;
    while ((1 << k) < p) ++k;
    return k;
}

// Unnormalized channel weights <psi|c'c|psi> and photon numbers.
struct Diag {
    double norm2 = 0.0;
    std::array<double, channel_count> w{};
    double n_v = 0.0;
    double n_h = 0.0;
};

struct OpenStart {
    std::int64_t tick = 0;
    std::vector<double> bins;
    int side = 0;
};

}  // namespace

double transit_coupling(double t, double atom_arrival, double mean_transit) {
    if (!(mean_transit > 0.0)) throw DomainError("mean_transit must be positive");
    const double sigma = mean_transit / 4.0;
    const double x = (t - (atom_arrival + mean_transit)) / sigma;
    return std::exp(-0.5 * x * x);
}

void ConditionalIntensity::resize(std::size_t bins, double width) {
    bin_width = width;
    sum.assign(bins, 0.0);
    sum_sq.assign(bins, 0.0);
    sum_selected.assign(bins, 0.0);
    sum_sq_selected.assign(bins, 0.0);
}

void ConditionalIntensity::merge(const ConditionalIntensity& o) {
    if (sum.empty()) resize(o.sum.size(), o.bin_width);
    if (o.sum.size() == sum.size()) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sum_sq[i] += o.sum_sq[i];
            sum_selected[i] += o.sum_selected[i];
            sum_sq_selected[i] += o.sum_sq_selected[i];
        }
    }
    n_starts += o.n_starts;
    n_starts_selected += o.n_starts_selected;
    stop_integral += o.stop_integral;
    observed_time += o.observed_time;
}

void TrajectoryConfig::validate(const PhysicalParams& p) const {
    p.validate();
    feedback.validate();
    if (!(duration > 0.0)) throw ConfigError("duration must be positive");
    if (!(warmup >= 0.0)) throw ConfigError("warmup must be non-negative");
    if (!(dt_max > 0.0)) throw ConfigError("dt_max must be positive");
    if (n_max_v < 1 || n_max_h < 1) throw ConfigError("photon truncation must be at least 1");
    double total = 0.0;
    for (double w : initial_ground) {
        if (!(w >= 0.0)) throw ConfigError("initial_ground weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("initial_ground weights sum to zero");
    if (atom_model.kind == AtomModelKind::transit) {
        if (!(atom_model.mean_transit > 0.0)) throw ConfigError("mean_transit must be positive");
        if (!(atom_model.arrival_rate >= 0.0)) throw ConfigError("arrival_rate must be non-negative");
    }
    if (observer.enabled) {
        if (!(observer.bin_width > 0.0) || !(observer.tau_max >= observer.bin_width)) {
            throw ConfigError("observer needs bin_width > 0 and tau_max >= bin_width");
        }
        if (observer.jump_window < 0.0) throw ConfigError("observer jump_window must be non-negative");
    }
    const double fastest = std::max({p.g, 2.0 * p.kappa, p.gamma, std::abs(p.delta_g), std::abs(p.delta_e),
                                     std::abs(p.drive_detuning), std::abs(p.drive_amplitude) * p.kappa});
    if (!(dt_max * fastest < 0.05)) {
        throw ConfigError("dt_max too large: dt_max * fastest rate = " + num(dt_max * fastest) + " (limit 0.05)");
    }
}

struct TrajectoryEngine::Impl {
    HilbertSpace space;
    std::array<SparseMatrix, channel_count> collapse;
    // Columns hold diag(c'c) for channels whose c'c is diagonal, plus n_V, n_H.
    Eigen::MatrixXd diag_weights;
    std::array<bool, channel_count> diagonal{};
    std::vector<double> scales;
    int levels = 1;
    // Index ((level * scales + s) * (depth + 1) + k): step of dt / 2^k.
    std::vector<DenseMatrix> props;
    double tick_dt = 0.0;
    StateVector field;  // empty-cavity V coherent state, H vacuum

    Impl(const TrajectoryConfig& c, const PhysicalParams& p) : space(c.n_max_v, c.n_max_h) {
        const auto ops = build_collapse_operators(space, p);
        for (int i = 0; i < channel_count; ++i) collapse[static_cast<std::size_t>(i)] = ops[static_cast<std::size_t>(i)].matrix;
        const auto dim = static_cast<Eigen::Index>(space.dim());
        diag_weights = Eigen::MatrixXd::Zero(dim, channel_count + 2);
        for (std::size_t ch = 0; ch < channel_count; ++ch) {
            const SparseMatrix cc = SparseMatrix(collapse[ch].adjoint()) * collapse[ch];
            bool is_diag = true;
            for (Eigen::Index r = 0; r < cc.outerSize(); ++r) {
                for (SparseMatrix::InnerIterator it(cc, r); it; ++it) {
                    if (it.row() == it.col()) {
                        diag_weights(it.row(), static_cast<Eigen::Index>(ch)) = it.value().real();
                    } else if (it.value() != cplx(0.0)) {
                        is_diag = false;
                    }
                }
            }
            diagonal[ch] = is_diag;
        }
        for (Eigen::Index i = 0; i < dim; ++i) {
            const BasisState b = space.state(static_cast<std::size_t>(i));
            diag_weights(i, channel_count) = b.n_v;
            diag_weights(i, channel_count + 1) = b.n_h;
        }
        scales.push_back(1.0);
        if (c.feedback.enabled && c.feedback.attenuation_factor != 1.0) scales.push_back(c.feedback.attenuation_factor);
        levels = c.atom_model.kind == AtomModelKind::transit ? coupling_levels + 1 : 1;
        tick_dt = c.dt_max / static_cast<double>(units_per_step);

        const HamiltonianParts parts = build_hamiltonian_parts(space, p);
        props.resize(static_cast<std::size_t>(levels) * scales.size() * (bisection_depth + 1));
        for (int l = 0; l < levels; ++l) {
            const double cs = levels == 1 ? 1.0 : static_cast<double>(l) / coupling_levels;
            for (std::size_t s = 0; s < scales.size(); ++s) {
                const DenseMatrix h = DenseMatrix(parts.assemble(cs, scales[s]).matrix);
                for (int k = 0; k <= bisection_depth; ++k) {
                    const double step = c.dt_max / static_cast<double>(1 << k);
                    const DenseMatrix gen = cplx(0.0, -step) * h;
                    props[index(l, s, k)] = gen.exp();
                }
            }
        }

        // Truncated coherent state of the V mode, renormalized.
        field = StateVector::Zero(dim);
        const cplx alpha = steady_alpha(p);
        cplx amp = std::exp(-0.5 * std::norm(alpha));
        for (int n = 0; n <= c.n_max_v; ++n) {
            field[static_cast<Eigen::Index>(space.index({Level::g_minus, n, 0}))] = amp;
            amp *= alpha / std::sqrt(static_cast<double>(n + 1));
        }
        field /= field.norm();
    }

    std::size_t index(int level, std::size_t s, int k) const {
        return (static_cast<std::size_t>(level) * scales.size() + s) * (bisection_depth + 1) + static_cast<std::size_t>(k);
    }

    // Product state |level> (x) field, where field has the layout of g- rows.
    StateVector with_atom(Level level, const StateVector& fld) const {
        StateVector psi = StateVector::Zero(fld.size());
        const Eigen::Index block = (space.n_max_v() + 1) * (space.n_max_h() + 1);
        psi.segment(static_cast<Eigen::Index>(level) * block, block) = fld.segment(0, block);
        return psi;
    }

    // Field part of psi taken from the most populated ground level, stored in g- rows.
    StateVector field_of(const StateVector& psi) const {
        const Eigen::Index block = (space.n_max_v() + 1) * (space.n_max_h() + 1);
        Eigen::Index best = 0;
        double best_w = -1.0;
        for (Eigen::Index l = 0; l < 3; ++l) {
            const double w = psi.segment(l * block, block).squaredNorm();
            if (w > best_w) {
                best_w = w;
                best = l;
            }
        }
        StateVector f = StateVector::Zero(psi.size());
        f.segment(0, block) = psi.segment(best * block, block);
        const double n = f.norm();
        if (!(n > 0.0)) return field;
        return f / n;
    }

    Diag diag(const StateVector& psi) const {
        Diag d;
        const Eigen::VectorXd pop = psi.cwiseAbs2();
        d.norm2 = pop.sum();
        const Eigen::VectorXd q = diag_weights.transpose() * pop;
        d.n_v = q[channel_count];
        d.n_h = q[channel_count + 1];
        for (std::size_t c = 0; c < collapse.size(); ++c) {
            if (diagonal[c]) {
                d.w[c] = q[static_cast<Eigen::Index>(c)];
            } else if (c == static_cast<std::size_t>(Channel::h_det_b) && !diagonal[0]) {
                d.w[c] = d.w[static_cast<std::size_t>(Channel::h_det_a)];
            } else {
                d.w[c] = (collapse[c] * psi).squaredNorm();
            }
        }
        return d;
    }
};

TrajectoryEngine::TrajectoryEngine(const TrajectoryConfig& config, const PhysicalParams& params)
    : config_(config), params_(params) {
    config_.validate(params_);
    impl_ = std::make_unique<Impl>(config_, params_);
}

TrajectoryEngine::~TrajectoryEngine() = default;

TrajectoryResult TrajectoryEngine::run(std::uint64_t k) const {
    const Impl& im = *impl_;
    const TrajectoryConfig& c = config_;
    Rng rng(c.seed, k);
    TrajectoryResult out;
    out.record.duration = to_nanos(c.duration);
    out.record.truth_tags = true;

    const auto warmup_steps = static_cast<std::int64_t>(std::llround(c.warmup / c.dt_max));
    const auto record_steps = std::max<std::int64_t>(1, std::llround(c.duration / c.dt_max));
    const std::int64_t t0_tick = warmup_steps * units_per_step;
    const std::int64_t end_tick = (warmup_steps + record_steps) * units_per_step;
    auto time_of = [&](std::int64_t tick) { return static_cast<double>(tick - t0_tick) * im.tick_dt; };

    auto sample_level = [&]() {
        const double total = c.initial_ground[0] + c.initial_ground[1] + c.initial_ground[2];
        double u = rng.uniform() * total;
        for (int m = 0; m < 3; ++m) {
            if (u < c.initial_ground[static_cast<std::size_t>(m)]) return ground_level(m - 1);
            u -= c.initial_ground[static_cast<std::size_t>(m)];
        }
        return Level::g_plus;
    };

    const bool transit = c.atom_model.kind == AtomModelKind::transit;
    const double span = 2.0 * c.atom_model.mean_transit;
    bool atom_present = !transit;
    double atom_arrival = 0.0;
    double next_arrival = std::numeric_limits<double>::infinity();
    if (transit) {
        if (c.atom_model.start_with_atom) {
            next_arrival = 0.0;
        } else if (c.atom_model.arrival_rate > 0.0) {
            next_arrival = time_of(0) + rng.exponential(c.atom_model.arrival_rate);
        }
    }

    StateVector psi = im.with_atom(transit ? Level::g_zero : sample_level(), im.field);
    if (!transit) out.atoms = 1;
    StateVector tmp(psi.size());
    double threshold = rng.uniform();

    FeedbackController fb(c.feedback);

    // Observer state.
    const bool observe = c.observer.enabled;
    const double jump_window = c.observer.jump_window > 0.0 ? c.observer.jump_window : 300.0 / params_.gamma;
    std::size_t n_bins = 0;
    std::int64_t finish_ticks = 0;
    std::int64_t jump_window_ticks = 0;
    std::deque<OpenStart> open;
    if (observe) {
        n_bins = static_cast<std::size_t>(std::llround(c.observer.tau_max / c.observer.bin_width));
        out.intensity.resize(n_bins, c.observer.bin_width);
        jump_window_ticks = static_cast<std::int64_t>(std::floor(jump_window / im.tick_dt));
        finish_ticks = std::max(jump_window_ticks,
                                static_cast<std::int64_t>(std::ceil(c.observer.tau_max / im.tick_dt)));
    }
    const auto h_a = static_cast<std::size_t>(Channel::h_det_a);

    auto integrate = [&](const Diag& a, const Diag& b, std::int64_t ta, std::int64_t tb) {
        if (ta < t0_tick) return;
        const double h = static_cast<double>(tb - ta) * im.tick_dt;
        for (std::size_t ch = 0; ch < channel_count; ++ch) {
            out.expected_counts[ch] += 0.5 * h * (a.w[ch] / a.norm2 + b.w[ch] / b.norm2);
        }
        out.n_v_integral += 0.5 * h * (a.n_v / a.norm2 + b.n_v / b.norm2);
        out.n_h_integral += 0.5 * h * (a.n_h / a.norm2 + b.n_h / b.norm2);
        if (!observe) return;
        // Total H intensity: both detectors.
        const double ia = 2.0 * a.w[h_a] / a.norm2;
        const double ib = 2.0 * b.w[h_a] / b.norm2;
        const double integral = 0.5 * h * (ia + ib);
        out.intensity.stop_integral += integral;
        const double bw = c.observer.bin_width;
        for (OpenStart& s : open) {
            if (ta < s.tick) continue;
            const double ua = static_cast<double>(ta - s.tick) * im.tick_dt;
            const double ub = static_cast<double>(tb - s.tick) * im.tick_dt;
            auto ia_bin = static_cast<std::size_t>(ua / bw);
            if (ia_bin >= n_bins) continue;
            const auto ib_bin = static_cast<std::size_t>(ub / bw);
            if (ia_bin == ib_bin || ub - ua <= 0.0) {
                s.bins[ia_bin] += integral;
                continue;
            }
            // Split the chunk across bins in proportion to overlap.
            double lo = ua;
            for (std::size_t i = ia_bin; i <= ib_bin && i < n_bins; ++i) {
                const double hi = std::min(ub, static_cast<double>(i + 1) * bw);
                s.bins[i] += integral * (hi - lo) / (ub - ua);
                lo = hi;
            }
        }
    };

    auto finish_starts = [&](std::int64_t now) {
        while (!open.empty() && now - open.front().tick >= finish_ticks) {
            OpenStart& s = open.front();
            ConditionalIntensity& ci = out.intensity;
            const bool selected = s.side <= c.observer.max_jumps;
            for (std::size_t i = 0; i < n_bins; ++i) {
                const double v = s.bins[i];
                ci.sum[i] += v;
                ci.sum_sq[i] += v * v;
                if (selected) {
                    ci.sum_selected[i] += v;
                    ci.sum_sq_selected[i] += v * v;
                }
            }
            ++ci.n_starts;
            if (selected) ++ci.n_starts_selected;
            open.pop_front();
        }
    };

    auto jump = [&](std::int64_t tick) {
        const Diag d = im.diag(psi);
        double total = 0.0;
        for (double w : d.w) total += w;
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw NumericalError("norm fell below the jump threshold with no open channel");
        }
        double u = rng.uniform() * total;
        std::size_t ch = 0;
        for (; ch + 1 < channel_count; ++ch) {
            if (u < d.w[ch]) break;
            u -= d.w[ch];
        }
        // Pick the next channel with nonzero weight if rounding landed on an empty one.
        while (d.w[ch] <= 0.0 && ch > 0) --ch;
        tmp.noalias() = im.collapse[ch] * psi;
        const double n = tmp.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("collapse produced a zero or non-finite state");
        psi = tmp / n;
        threshold = rng.uniform();

        const auto channel = static_cast<Channel>(ch);
        const double t = time_of(tick);
        bool new_epoch = true;
        if (c.feedback.enabled && c.feedback.trigger_channels.contains(channel)) new_epoch = fb.on_detection(t);
        if (tick < t0_tick) return;
        insert_event(out.record.events, {to_nanos(t), channel});
        if (!observe) return;
        if (is_truth_channel(channel)) {
            for (OpenStart& s : open) {
                if (tick > s.tick && tick - s.tick <= jump_window_ticks) ++s.side;
            }
        } else if (is_h_detector(channel) && (!c.feedback.enabled || new_epoch)) {
            open.push_back({tick, std::vector<double>(n_bins, 0.0), 0});
        }
    };

    std::int64_t tick = 0;
    Diag cur = im.diag(psi);
    while (tick < end_tick) {
        const double t = time_of(tick);
        const double t_mid = t + 0.5 * c.dt_max;

        int level = 0;
        if (transit) {
            if (atom_present && t >= atom_arrival + span) atom_present = false;
            while (next_arrival <= t) {
                if (!atom_present) {
                    atom_present = true;
                    atom_arrival = next_arrival;
                    psi = im.with_atom(sample_level(), im.field_of(psi));
                    cur = im.diag(psi);
                    if (t >= 0.0) ++out.atoms;
                }
                next_arrival = c.atom_model.arrival_rate > 0.0 ? next_arrival + rng.exponential(c.atom_model.arrival_rate)
                                                               : std::numeric_limits<double>::infinity();
            }
            if (atom_present) {
                const double g = transit_coupling(t_mid, atom_arrival, c.atom_model.mean_transit);
                level = static_cast<int>(std::lround(g * coupling_levels));
            }
        }
        std::size_t s = 0;
        if (c.feedback.enabled) {
            if (fb.scale(t_mid) != 1.0 && im.scales.size() > 1) s = 1;
            fb.discard_before(t - c.dt_max);
        }

        std::int64_t remaining = units_per_step;
        int limit = static_cast<int>(units_per_step);
        while (remaining > 0) {
            const int chunk = largest_pow2_at_most(std::min<std::int64_t>(remaining, limit));
            const int kk = bisection_depth - log2_exact(chunk);
            tmp.noalias() = im.props[im.index(level, s, kk)] * psi;
            const double n2 = tmp.squaredNorm();
            if (n2 > threshold || chunk == 1) {
                if (!std::isfinite(n2)) throw NumericalError("non-finite amplitude in trajectory");
                psi.swap(tmp);
                const Diag next = im.diag(psi);
                integrate(cur, next, tick, tick + chunk);
                tick += chunk;
                remaining -= chunk;
                cur = next;
                if (n2 <= threshold) {
                    jump(tick);
                    cur = im.diag(psi);
                    limit = static_cast<int>(units_per_step);
                }
            } else {
                limit = chunk / 2;
            }
        }
        if (observe) finish_starts(tick);
    }
    out.intensity.observed_time = static_cast<double>(end_tick - t0_tick) * im.tick_dt;
    out.record.metadata["trajectory_index"] = std::to_string(k);
    return out;
}

DetectionRecord evolve_trajectory(const TrajectoryConfig& config, const PhysicalParams& params) {
    TrajectoryEngine engine(config, params);
    DetectionRecord r = engine.run(0).record;
    for (auto& [key, value] : describe(config, params)) r.metadata[key] = value;
    return r;
}

std::map<std::string, std::string> describe(const TrajectoryConfig& c, const PhysicalParams& p) {
    std::map<std::string, std::string> m;
    m["g"] = num(p.g);
    m["kappa"] = num(p.kappa);
    m["gamma"] = num(p.gamma);
    m["delta_g"] = num(p.delta_g);
    m["delta_e"] = num(p.delta_e);
    m["drive_amplitude"] = num(p.drive_amplitude);
    m["drive_detuning"] = num(p.drive_detuning);
    m["lo_mix"] = num(p.lo_mix);
    m["pi_branch"] = num(p.pi_branch);
    m["sigma_branch"] = num(p.sigma_branch);
    m["seed"] = std::to_string(c.seed);
    m["dt_max"] = num(c.dt_max);
    m["warmup"] = num(c.warmup);
    m["n_max_v"] = std::to_string(c.n_max_v);
    m["n_max_h"] = std::to_string(c.n_max_h);
    m["atom_model"] = c.atom_model.kind == AtomModelKind::transit ? "transit" : "fixed_max_coupled";
    if (c.atom_model.kind == AtomModelKind::transit) {
        m["mean_transit"] = num(c.atom_model.mean_transit);
        m["arrival_rate"] = num(c.atom_model.arrival_rate);
    }
    if (c.feedback.enabled) {
        m["feedback_trigger"] = c.feedback.trigger_channels.to_string();
        m["feedback_latency"] = num(c.feedback.electronic_latency);
        m["feedback_delay"] = num(c.feedback.delay_after_detection);
        m["feedback_window"] = num(c.feedback.window_duration);
        m["feedback_attenuation"] = num(c.feedback.attenuation_factor);
    }
    return m;
}

EnsembleResult run_ensemble(const TrajectoryConfig& config, const PhysicalParams& params, std::size_t n_traj,
                            unsigned jobs, bool keep_records) {
    if (n_traj < 1) throw ConfigError("n_traj must be at least 1");
    const TrajectoryEngine engine(config, params);
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n_traj));

    EnsembleResult out;
    if (keep_records) out.records.resize(n_traj);
    std::vector<std::optional<TrajectoryResult>> pending(n_traj);
    std::size_t merged = 0;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;

    // Folds finished trajectories in index order so sums are bit-identical
    // for any worker count.
    auto fold = [&]() {
        while (merged < n_traj && pending[merged]) {
            TrajectoryResult& r = *pending[merged];
            out.intensity.merge(r.intensity);
            for (std::size_t ch = 0; ch < channel_count; ++ch) out.expected_counts[ch] += r.expected_counts[ch];
            out.n_v_integral += r.n_v_integral;
            out.n_h_integral += r.n_h_integral;
            out.recorded_time += to_seconds(r.record.duration);
            if (keep_records) out.records[merged] = std::move(r.record);
            pending[merged].reset();
            ++merged;
        }
    };

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n_traj) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                TrajectoryResult r = engine.run(k);
                std::lock_guard lock(mu);
                pending[k] = std::move(r);
                fold();
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    out.metadata = describe(config, params);
    out.metadata["n_traj"] = std::to_string(n_traj);
    if (keep_records) {
        for (std::size_t k = 0; k < n_traj; ++k) {
            for (auto& [key, value] : out.metadata) out.records[k].metadata[key] = value;
            out.records[k].metadata["trajectory_index"] = std::to_string(k);
        }
    }
    return out;
}

}  // namespace qbeat
