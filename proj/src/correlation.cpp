#include "qbeat/correlation.hpp"

#include <fftw3.h>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "qbeat/errors.hpp"

namespace qbeat {

namespace {

std::string num(double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
}

std::int64_t to_ns_count(double seconds, const char* what) {
    const std::int64_t n = to_nanos(seconds).count();
    if (n < 1) throw DomainError(std::string(what) + " must be at least 1 ns");
    return n;
}

struct PairAccumulator {
    std::int64_t bw_ns = 0;
    std::size_t n_bins = 0;
    std::vector<std::uint64_t> counts;
    std::vector<double> exposure;  // seconds of start-window time inside the record, per bin
    std::uint64_t n_starts = 0;
    std::uint64_t n_stops = 0;
    double duration = 0.0;

    void add(const DetectionRecord& r, const CorrelationOptions& o, const std::vector<bool>* mask) {
        if (mask && mask->size() != r.events.size()) throw DomainError("start mask size differs from event count");
        struct Stop {
            std::int64_t t;
            std::size_t idx;
        };
        std::vector<Stop> stops;
        for (std::size_t i = 0; i < r.events.size(); ++i) {
            if (o.stop.contains(r.events[i].channel)) stops.push_back({r.events[i].time.count(), i});
        }
        n_stops += stops.size();
        duration += to_seconds(r.duration);
        const std::int64_t t_end = r.duration.count();
        const std::int64_t span = bw_ns * static_cast<std::int64_t>(n_bins);
        for (std::size_t i = 0; i < r.events.size(); ++i) {
            const JumpEvent& e = r.events[i];
            if (!o.start.contains(e.channel) || (mask && !(*mask)[i])) continue;
            ++n_starts;
            const std::int64_t ts = e.time.count();
            for (std::size_t b = 0; b < n_bins; ++b) {
                const std::int64_t lo = ts + static_cast<std::int64_t>(b) * bw_ns;
                const std::int64_t covered = std::clamp<std::int64_t>(t_end - lo, 0, bw_ns);
                if (covered == 0) break;
                exposure[b] += static_cast<double>(covered) * 1e-9;
            }
            auto it = std::lower_bound(stops.begin(), stops.end(), ts, [](const Stop& s, std::int64_t t) { return s.t < t; });
            for (; it != stops.end() && it->t - ts < span; ++it) {
                if (it->idx == i) continue;
                ++counts[static_cast<std::size_t>((it->t - ts) / bw_ns)];
                if (o.conditioning == Conditioning::start_stop) break;
            }
        }
    }
};

CorrelationResult finish(const PairAccumulator& acc, const char* method) {
    if (acc.n_starts == 0) throw DomainError("no start events on the start channel");
    if (acc.n_stops == 0) throw DomainError("no stop events on the stop channel");
    CorrelationResult r;
    r.tau_bins.resize(acc.n_bins + 1);
    for (std::size_t i = 0; i <= acc.n_bins; ++i) r.tau_bins[i] = static_cast<double>(i) * static_cast<double>(acc.bw_ns) * 1e-9;
    r.counts = acc.counts;
    r.n_starts = acc.n_starts;
    r.stop_rate = static_cast<double>(acc.n_stops) / acc.duration;
    r.g2.resize(acc.n_bins);
    r.stderr_.resize(acc.n_bins);
    for (std::size_t i = 0; i < acc.n_bins; ++i) {
        const double expect = r.stop_rate * acc.exposure[i];
        if (expect > 0.0) {
            r.g2[i] = static_cast<double>(acc.counts[i]) / expect;
            r.stderr_[i] = std::sqrt(std::max<double>(static_cast<double>(acc.counts[i]), 1.0)) / expect;
        }
    }
    r.normalization["method"] = method;
    r.normalization["stop_rate_hz"] = num(r.stop_rate);
    r.normalization["n_starts"] = std::to_string(r.n_starts);
    r.normalization["n_stops"] = std::to_string(acc.n_stops);
    r.normalization["duration_s"] = num(acc.duration);
    return r;
}

PairAccumulator make_accumulator(const CorrelationOptions& o) {
    PairAccumulator acc;
    acc.bw_ns = to_ns_count(o.bin_width, "bin_width");
    if (!(o.tau_max >= o.bin_width)) throw DomainError("tau_max must be at least bin_width");
    acc.n_bins = static_cast<std::size_t>(std::llround(o.tau_max * 1e9) / acc.bw_ns);
    acc.counts.assign(acc.n_bins, 0);
    acc.exposure.assign(acc.n_bins, 0.0);
    return acc;
}

const char* method_name(Conditioning c) { return c == Conditioning::all_pairs ? "all_pairs" : "start_stop"; }

double wrap_phase(double p) {
    p = std::remainder(p, 2.0 * std::numbers::pi);
    if (p <= -std::numbers::pi) p += 2.0 * std::numbers::pi;
    return p;
}

struct FitData {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> w;  // 1 / sigma
};

// Residuals (model - y) * w over x = (A, omega, phi, decay, offset), or
// without decay when it is held at zero.
struct BeatFunctor : Eigen::DenseFunctor<double> {
    const FitData* data;
    bool fixed_decay;

    BeatFunctor(const FitData& d, bool fixed)
        : DenseFunctor<double>(fixed ? 4 : 5, static_cast<int>(d.t.size())), data(&d), fixed_decay(fixed) {}

    BeatParams unpack(const InputType& x) const {
        BeatParams b;
        b.amplitude = x[0];
        b.freq = x[1];
        b.phase = x[2];
        b.decay = fixed_decay ? 0.0 : x[3];
        b.offset = x[fixed_decay ? 3 : 4];
        return b;
    }

    int operator()(const InputType& x, ValueType& f) const {
        const BeatParams b = unpack(x);
        for (std::size_t i = 0; i < data->t.size(); ++i) {
            f[static_cast<Eigen::Index>(i)] = (beat_model(data->t[i], b) - data->y[i]) * data->w[i];
        }
        return 0;
    }

    int df(const InputType& x, JacobianType& j) const {
        const BeatParams b = unpack(x);
        for (std::size_t i = 0; i < data->t.size(); ++i) {
            const double t = data->t[i];
            const double e = std::exp(-b.decay * t);
            const double c = std::cos(b.freq * t + b.phase);
            const double s = std::sin(b.freq * t + b.phase);
            const double w = data->w[i];
            const auto r = static_cast<Eigen::Index>(i);
            j(r, 0) = w * e * c;
            j(r, 1) = -w * b.amplitude * e * t * s;
            j(r, 2) = -w * b.amplitude * e * s;
            if (fixed_decay) {
                j(r, 3) = w;
            } else {
                j(r, 3) = -w * b.amplitude * t * e * c;
                j(r, 4) = w;
            }
        }
        return 0;
    }
};

FitData select_fit_data(const CorrelationResult& c, const FitOptions& o) {
    FitData d;
    bool all_positive = true;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double t = c.tau_center(i);
        if (t < o.tau_min || t >= o.tau_max) continue;
        bool excluded = false;
        for (const auto& [lo, hi] : o.exclude) excluded = excluded || (t >= lo && t < hi);
        if (excluded) continue;
        d.t.push_back(t);
        d.y.push_back(c.g2[i]);
        const double s = i < c.stderr_.size() ? c.stderr_[i] : 0.0;
        all_positive = all_positive && s > 0.0 && std::isfinite(s);
        d.w.push_back(s);
    }
    for (double& w : d.w) w = (o.weighted && all_positive) ? 1.0 / w : 1.0;
    return d;
}

FitResult run_fit(const FitData& d, const BeatParams& guess, const FitOptions& o, bool fixed_decay) {
    BeatFunctor f(d, fixed_decay);
    Eigen::VectorXd x(fixed_decay ? 4 : 5);
    x[0] = guess.amplitude;
    x[1] = guess.freq;
    x[2] = guess.phase;
    if (fixed_decay) {
        x[3] = guess.offset;
    } else {
        x[3] = guess.decay;
        x[4] = guess.offset;
    }
    Eigen::LevenbergMarquardt<BeatFunctor> lm(f);
    lm.setMaxfev(o.max_iterations);
    lm.setXtol(1e-12);
    lm.setFtol(1e-14);
    const auto status = lm.minimize(x);
    Eigen::VectorXd res(f.values());
    f(x, res);
    if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
        status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters || !x.allFinite()) {
        throw FitError("damped-cosine fit did not converge", res.norm());
    }
    FitResult r;
    r.params = f.unpack(x);
    r.decay_fixed = fixed_decay;
    r.iterations = static_cast<int>(lm.iterations());
    r.residual_norm = res.norm();
    const int p = f.inputs();
    const int m = f.values();
    r.reduced_chi2 = m > p ? res.squaredNorm() / (m - p) : 0.0;
    BeatFunctor::JacobianType j(m, p);
    f.df(x, j);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    if (lu.isInvertible()) cov = lu.inverse() * r.reduced_chi2;
    // Map the reduced parameter order back to (A, omega, phi, decay, offset).
    const std::array<int, 5> map = fixed_decay ? std::array<int, 5>{0, 1, 2, -1, 3} : std::array<int, 5>{0, 1, 2, 3, 4};
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
            r.covariance[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                (map[static_cast<std::size_t>(a)] < 0 || map[static_cast<std::size_t>(b)] < 0)
                    ? 0.0
                    : cov(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)]);
        }
    }
    return r;
}

void canonicalize(FitResult& r) {
    BeatParams& b = r.params;
    if (b.amplitude < 0.0) {
        b.amplitude = -b.amplitude;
        b.phase += std::numbers::pi;
    }
    if (b.freq < 0.0) {
        b.freq = -b.freq;
        b.phase = -b.phase;
        // Covariances with the flipped parameters change sign.
        for (int i : {1, 2}) {
            for (int k = 0; k < 5; ++k) {
                if (k == 1 || k == 2) continue;
                r.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *= -1.0;
                r.covariance[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *= -1.0;
            }
        }
    }
    b.phase = wrap_phase(b.phase);
}

std::mutex fftw_plan_mutex;

}  // namespace

CorrelationResult g2_estimate(const DetectionRecord& record, const CorrelationOptions& options,
                              const std::vector<bool>* start_mask) {
    PairAccumulator acc = make_accumulator(options);
    acc.add(record, options, start_mask);
    return finish(acc, method_name(options.conditioning));
}

CorrelationResult g2_estimate(std::span<const DetectionRecord> records, const CorrelationOptions& options,
                              const std::vector<std::vector<bool>>* start_masks) {
    if (start_masks && start_masks->size() != records.size()) throw DomainError("one start mask per record required");
    PairAccumulator acc = make_accumulator(options);
    for (std::size_t k = 0; k < records.size(); ++k) acc.add(records[k], options, start_masks ? &(*start_masks)[k] : nullptr);
    return finish(acc, method_name(options.conditioning));
}

CorrelationResult intensity_g2(const ConditionalIntensity& ci, bool selected) {
    const std::uint64_t n = selected ? ci.n_starts_selected : ci.n_starts;
    if (n == 0) throw DomainError("conditional intensity has no starts");
    const double rate = ci.mean_rate();
    if (!(rate > 0.0)) throw DomainError("conditional intensity has zero mean rate");
    const auto& sum = selected ? ci.sum_selected : ci.sum;
    const auto& sq = selected ? ci.sum_sq_selected : ci.sum_sq;
    CorrelationResult r;
    const std::size_t bins = sum.size();
    r.tau_bins.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) r.tau_bins[i] = static_cast<double>(i) * ci.bin_width;
    r.counts.assign(bins, 0);
    r.g2.resize(bins);
    r.stderr_.resize(bins);
    r.n_starts = n;
    r.stop_rate = rate;
    const double nd = static_cast<double>(n);
    const double norm = rate * ci.bin_width;
    for (std::size_t i = 0; i < bins; ++i) {
        const double mean = sum[i] / nd;
        const double var = std::max(0.0, sq[i] / nd - mean * mean);
        r.g2[i] = mean / norm;
        r.stderr_[i] = std::sqrt(var / nd) / norm;
    }
    r.normalization["method"] = selected ? "conditional_intensity_selected" : "conditional_intensity";
    r.normalization["stop_rate_hz"] = num(rate);
    r.normalization["n_starts"] = std::to_string(n);
    r.normalization["duration_s"] = num(ci.observed_time);
    return r;
}

std::vector<bool> feedback_epoch_starts(const DetectionRecord& record, const FeedbackProtocol& protocol) {
    std::vector<bool> mask(record.events.size(), false);
    FeedbackController fb(protocol);
    for (std::size_t i = 0; i < record.events.size(); ++i) {
        const JumpEvent& e = record.events[i];
        if (!protocol.trigger_channels.contains(e.channel)) continue;
        mask[i] = fb.on_detection(to_seconds(e.time));
    }
    return mask;
}

Spectrum fft_spectrum(const CorrelationResult& c, const SpectrumOptions& o) {
    if (c.tau_bins.size() < 2) throw DomainError("empty correlation");
    const double bw = c.tau_bins[1] - c.tau_bins[0];
    for (std::size_t i = 1; i + 1 < c.tau_bins.size(); ++i) {
        if (std::abs((c.tau_bins[i + 1] - c.tau_bins[i]) - bw) > 1e-9 * bw) throw DomainError("non-uniform bins");
    }
    if (o.zero_pad < 1) throw DomainError("zero_pad must be at least 1");
    std::vector<double> y;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double t = c.tau_center(i);
        if (t >= o.tau_min && t < o.tau_max) y.push_back(c.g2[i]);
    }
    if (y.size() < 2) throw DomainError("fewer than two bins in the spectrum range");
    const std::size_t n = y.size();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    const std::size_t n_pad = n * static_cast<std::size_t>(o.zero_pad);
    std::vector<double> in(n_pad, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = o.window ? 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n))) : 1.0;
        in[i] = (y[i] - mean) * w;
    }
    const std::size_t n_out = n_pad / 2 + 1;
    std::vector<fftw_complex> out(n_out);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_plan_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_pad), in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_plan_mutex);
        fftw_destroy_plan(plan);
    }
    Spectrum s;
    s.freq_hz.resize(n_out);
    s.power.resize(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        s.freq_hz[k] = static_cast<double>(k) / (static_cast<double>(n_pad) * bw);
        s.power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
    return s;
}

SpectrumPeak find_peak(const Spectrum& s, double min_freq_hz) {
    if (s.power.size() < 3) throw DomainError("spectrum too short for a peak");
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.power.size(); ++k) {
        if (s.freq_hz[k] < min_freq_hz) continue;
        if (best == 0 || s.power[k] > s.power[best]) best = k;
    }
    if (best == 0) throw DomainError("no spectrum bin above the minimum frequency");
    const double df = s.freq_hz[1] - s.freq_hz[0];
    SpectrumPeak p;
    p.freq_hz = s.freq_hz[best];
    p.power = s.power[best];
    if (best + 1 < s.power.size()) {
        const double floor = 1e-300;
        const double a = std::log(std::max(s.power[best - 1], floor));
        const double b = std::log(std::max(s.power[best], floor));
        const double c = std::log(std::max(s.power[best + 1], floor));
        const double den = a - 2.0 * b + c;
        const double d_log = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
        const double la = s.power[best - 1], lb = s.power[best], lc = s.power[best + 1];
        const double den_lin = la - 2.0 * lb + lc;
        const double d_lin = den_lin != 0.0 ? 0.5 * (la - lc) / den_lin : 0.0;
        p.freq_hz = (static_cast<double>(best) + d_log) * df;
        p.power = std::exp(b - 0.25 * (a - c) * d_log);
        p.interpolation_error_hz = std::abs(d_log - d_lin) * df;
    }
    const double half = 0.5 * s.power[best];
    double right = s.freq_hz.back();
    for (std::size_t k = best; k + 1 < s.power.size(); ++k) {
        if (s.power[k + 1] < half) {
            right = s.freq_hz[k] + df * (s.power[k] - half) / (s.power[k] - s.power[k + 1]);
            break;
        }
    }
    double left = 0.0;
    for (std::size_t k = best; k > 0; --k) {
        if (s.power[k - 1] < half) {
            left = s.freq_hz[k] - df * (s.power[k] - half) / (s.power[k] - s.power[k - 1]);
            break;
        }
    }
    p.half_width_hz = 0.5 * (right - left);
    return p;
}

double FitResult::sigma(int i) const {
    const double v = covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    return v >= 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
}

FitResult fit_damped_cosine(const CorrelationResult& correlation, const BeatParams& guess, const FitOptions& o) {
    for (double v : {guess.amplitude, guess.freq, guess.phase, guess.decay, guess.offset}) {
        if (!std::isfinite(v)) throw DomainError("fit guess must be finite");
    }
    const FitData d = select_fit_data(correlation, o);
    if (d.t.size() < 5) throw DomainError("fit needs at least 5 samples");
    FitResult r = run_fit(d, guess, o, false);
    if (r.params.decay < 0.0) {
        BeatParams g = r.params;
        g.decay = 0.0;
        r = run_fit(d, g, o, true);
    }
    canonicalize(r);
    return r;
}

FitResult fit_beats(const CorrelationResult& correlation, const FitOptions& o) {
    SpectrumOptions so;
    so.tau_min = o.tau_min;
    so.tau_max = o.tau_max;
    const Spectrum s = fft_spectrum(correlation, so);
    const SpectrumPeak peak = find_peak(s);
    const FitData d = select_fit_data(correlation, o);
    if (d.t.size() < 5) throw DomainError("fit needs at least 5 samples");
    double mean = 0.0;
    for (double v : d.y) mean += v;
    mean /= static_cast<double>(d.y.size());
    double var = 0.0;
    for (double v : d.y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.y.size());
    const double span = d.t.back() - d.t.front();
    BeatParams g;
    g.offset = mean;
    g.amplitude = std::sqrt(2.0 * var);
    g.freq = 2.0 * std::numbers::pi * peak.freq_hz;
    g.decay = std::max(2.0 * std::numbers::pi * peak.half_width_hz * 0.5, 1.0 / (10.0 * span));
    std::optional<FitResult> best;
    std::optional<FitError> last_error;
    for (int k = 0; k < 4; ++k) {
        g.phase = 0.5 * std::numbers::pi * k - std::numbers::pi;
        try {
            FitResult r = fit_damped_cosine(correlation, g, o);
            if (!best || r.residual_norm < best->residual_norm) best = r;
        } catch (const FitError& e) {
            last_error = e;
        }
    }
    if (!best) throw *last_error;
    return *best;
}

std::vector<bool> filter_by_jump_count(const DetectionRecord& record, int max_jumps, double window, ChannelSet start,
                                       const std::vector<bool>* start_mask) {
    if (!record.truth_tags) throw UnsupportedInputError("jump-count filter needs records with truth tags");
    if (max_jumps < 0) throw DomainError("max_jumps must be non-negative");
    if (!(window > 0.0)) throw DomainError("jump-count window must be positive");
    if (start_mask && start_mask->size() != record.events.size()) throw DomainError("start mask size differs from event count");
    const std::int64_t w = to_nanos(window).count();
    std::vector<std::int64_t> side;
    for (const JumpEvent& e : record.events) {
        if (e.truth()) side.push_back(e.time.count());
    }
    std::vector<bool> keep(record.events.size(), false);
    for (std::size_t i = 0; i < record.events.size(); ++i) {
        const JumpEvent& e = record.events[i];
        if (!start.contains(e.channel) || (start_mask && !(*start_mask)[i])) continue;
        if (max_jumps == unlimited_jumps) {
            keep[i] = true;
            continue;
        }
        const std::int64_t ts = e.time.count();
        if (ts + w > record.duration.count()) continue;
        const auto lo = std::upper_bound(side.begin(), side.end(), ts);
        const auto hi = std::upper_bound(side.begin(), side.end(), ts + w);
        keep[i] = std::distance(lo, hi) <= max_jumps;
    }
    return keep;
}

std::vector<bool> time_filter_mask(std::span<const Nanos> times, Nanos window, Nanos skip) {
    const std::size_t n = times.size();
    std::vector<bool> keep(n, false);
    std::size_t i = 0;
    while (i < n) {
        if (i + 1 < n && times[i + 1] - times[i] < window) {
            const Nanos end = times[i + 1] + skip;
            std::size_t j = i + 2;
            while (j < n && times[j] < end) ++j;
            i = j;
        } else {
            keep[i] = true;
            ++i;
        }
    }
    return keep;
}

DetectionRecord time_filter(const DetectionRecord& record, double coincidence_window, double skip_duration,
                            ChannelSet channels) {
    if (!(coincidence_window > 0.0) || !(skip_duration > 0.0)) {
        throw DomainError("time filter needs a positive window and skip duration");
    }
    std::vector<std::size_t> idx;
    std::vector<Nanos> times;
    for (std::size_t i = 0; i < record.events.size(); ++i) {
        if (channels.contains(record.events[i].channel)) {
            idx.push_back(i);
            times.push_back(record.events[i].time);
        }
    }
    const std::vector<bool> keep = time_filter_mask(times, to_nanos(coincidence_window), to_nanos(skip_duration));
    std::vector<bool> drop(record.events.size(), false);
    for (std::size_t k = 0; k < idx.size(); ++k) drop[idx[k]] = !keep[k];
    DetectionRecord out;
    out.duration = record.duration;
    out.truth_tags = record.truth_tags;
    out.metadata = record.metadata;
    out.metadata["time_filter"] = std::to_string(to_nanos(coincidence_window).count()) + "ns," +
                                  std::to_string(to_nanos(skip_duration).count()) + "ns";
    for (std::size_t i = 0; i < record.events.size(); ++i) {
        if (!drop[i]) out.events.push_back(record.events[i]);
    }
    return out;
}

}  // namespace qbeat
