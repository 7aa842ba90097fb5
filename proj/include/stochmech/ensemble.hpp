#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stochmech/errors.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/parallel.hpp"
#include "stochmech/rng.hpp"
#include "stochmech/sde.hpp"

namespace stochmech {

enum class InitKind { point, gaussian };

/// Initial ensemble distribution: a point, or an uncorrelated Gaussian with
/// per-mode variances around a center state.
struct InitialDistribution {
    InitKind kind = InitKind::point;
    PhaseState center;
    std::vector<double> var_x; ///< per mode; empty means zero
    std::vector<double> var_p;

    static InitialDistribution point_at(PhaseState c) {
        InitialDistribution d;
        d.kind = InitKind::point;
        d.center = std::move(c);
        return d;
    }

    static InitialDistribution gaussian(PhaseState c, std::vector<double> vx, std::vector<double> vp) {
        InitialDistribution d;
        d.kind = InitKind::gaussian;
        d.center = std::move(c);
        d.var_x = std::move(vx);
        d.var_p = std::move(vp);
        d.validate();
        return d;
    }

    /// Convenience for one degree of freedom.
    static InitialDistribution gaussian(PhaseState c, double vx, double vp) {
        return gaussian(std::move(c), std::vector<double>{vx}, std::vector<double>{vp});
    }

    void validate() const {
        for (double v : var_x)
            if (!(v >= 0.0)) throw InvalidValueError("var_x", "variances must be >= 0");
        for (double v : var_p)
            if (!(v >= 0.0)) throw InvalidValueError("var_p", "variances must be >= 0");
        if (kind == InitKind::gaussian &&
            (var_x.size() != center.dof() || var_p.size() != center.dof()))
            throw DimensionMismatchError(center.dof(), var_x.size());
    }

    /// Draws the initial state for one path from its private stream.
    PhaseState draw(const WienerIncrementStream& stream) const {
        PhaseState s = center;
        if (kind == InitKind::gaussian) {
            const std::size_t n = center.dof();
            for (std::size_t i = 0; i < n; ++i) {
                if (var_x[i] > 0.0) s.x[i] += std::sqrt(var_x[i]) * stream.initial_normal(2 * i);
                if (var_p[i] > 0.0) s.p[i] += std::sqrt(var_p[i]) * stream.initial_normal(2 * i + 1);
            }
        }
        return s;
    }
};

struct MomentEstimate {
    double value = 0.0;
    double se = 0.0; ///< standard error; 0 marks an exactly determined value
};

/// Monte Carlo moment estimates on a fixed grid of sample times.
struct EnsembleResult {
    std::vector<double> times;
    // indexed [time][mode]
    std::vector<std::vector<MomentEstimate>> mean_x, var_x, mean_p, var_p;
    std::vector<MomentEstimate> mean_energy; // [time]
    std::size_t paths = 0;     ///< paths included in the estimates
    std::size_t excluded = 0;  ///< truncated (overflowed) paths, not included
    NoiseSpec spec;
    std::string model_name;
    double dt = 0.0;

    std::size_t dof() const { return times.empty() ? 0 : mean_x.front().size(); }
};

namespace detail {

inline std::vector<std::uint64_t> sample_indices(std::uint64_t steps, std::size_t sample_count) {
    std::vector<std::uint64_t> idx;
    if (sample_count == 0) sample_count = 1;
    const std::uint64_t stride = std::max<std::uint64_t>(1, steps / sample_count);
    for (std::uint64_t k = 0; k <= steps; k += stride) idx.push_back(k);
    if (idx.back() != steps) idx.push_back(steps);
    return idx;
}

/// Power sums for one sample time and one mode.
struct MomentSums {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    void add(double v) {
        const double v2 = v * v;
        s1 += v;
        s2 += v2;
        s3 += v2 * v;
        s4 += v2 * v2;
    }
    void merge(const MomentSums& o) {
        s1 += o.s1;
        s2 += o.s2;
        s3 += o.s3;
        s4 += o.s4;
    }
};

inline MomentEstimate mean_estimate(const MomentSums& s, std::size_t n) {
    const double mean = s.s1 / static_cast<double>(n);
    const double var = std::max(0.0, (s.s2 - static_cast<double>(n) * mean * mean) /
                                         static_cast<double>(n - 1));
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// Unbiased variance with a fourth-moment standard error.
inline MomentEstimate variance_estimate(const MomentSums& s, std::size_t n) {
    const double nd = static_cast<double>(n);
    const double mean = s.s1 / nd;
    const double var = std::max(0.0, (s.s2 - nd * mean * mean) / (nd - 1.0));
    const double m2 = std::max(0.0, (s.s2 - nd * mean * mean) / nd);
    const double m4 = std::max(
        0.0, (s.s4 - 4.0 * mean * s.s3 + 6.0 * mean * mean * s.s2 - 4.0 * mean * mean * mean * s.s1 +
              nd * mean * mean * mean * mean) /
                 nd);
    const double var_of_var = std::max(0.0, (m4 - (nd - 3.0) / (nd - 1.0) * m2 * m2) / nd);
    return {var, std::sqrt(var_of_var)};
}

} // namespace detail

/// Runs N independent paths and reduces unbiased sample moments (with
/// standard errors) at ~sample_count equally spaced times.
///
/// Paths are chunked deterministically; per-chunk partial sums are reduced in
/// chunk order, so the result is bit-identical for every worker count.
/// Truncated (overflowed) paths are excluded from all estimates and counted.
inline EnsembleResult run_ensemble(const HamiltonianModel& model, const InitialDistribution& init,
                                   std::size_t n_paths, double horizon, double dt,
                                   const NoiseSpec& spec, std::size_t sample_count = 50,
                                   Scheme scheme = Scheme::heun, unsigned threads = 1) {
    if (n_paths < 2) throw InvalidValueError("N", "need at least 2 paths");
    init.validate();
    model.check_dimension(init.center);
    spec.validate();

    const std::uint64_t steps = detail::steps_for(horizon, dt);
    const std::vector<std::uint64_t> samples = detail::sample_indices(steps, sample_count);
    const std::size_t n_times = samples.size();
    const std::size_t n = model.dof();

    constexpr std::size_t kChunk = 256;
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;

    struct ChunkAccum {
        std::vector<detail::MomentSums> x, p; // [time*n + mode]
        std::vector<detail::MomentSums> energy; // [time]
        std::size_t excluded = 0;
    };
    std::vector<ChunkAccum> accums(n_chunks);

    ThreadPool pool(threads);
    parallel_chunks(&pool, n_paths, kChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        ChunkAccum& acc = accums[chunk];
        acc.x.resize(n_times * n);
        acc.p.resize(n_times * n);
        acc.energy.resize(n_times);

        std::vector<double> path_x(n_times * n), path_p(n_times * n), path_e(n_times);
        for (std::size_t path = begin; path < end; ++path) {
            const std::uint64_t key = derive_path_key(spec.master_seed, path);
            const WienerIncrementStream stream(key, n, dt);
            const PhaseState start = init.draw(stream);

            std::size_t cursor = 0;
            const bool ok = detail::integrate_core(
                model, start, steps, dt, spec, scheme, key,
                [&](std::uint64_t k, const PhaseState& s) {
                    if (cursor < n_times && samples[cursor] == k) {
                        for (std::size_t i = 0; i < n; ++i) {
                            path_x[cursor * n + i] = s.x[i];
                            path_p[cursor * n + i] = s.p[i];
                        }
                        path_e[cursor] = model.energy(s);
                        ++cursor;
                    }
                });
            if (!ok) {
                ++acc.excluded;
                continue;
            }
            for (std::size_t t = 0; t < n_times; ++t) {
                for (std::size_t i = 0; i < n; ++i) {
                    acc.x[t * n + i].add(path_x[t * n + i]);
                    acc.p[t * n + i].add(path_p[t * n + i]);
                }
                acc.energy[t].add(path_e[t]);
            }
        }
    });

    // chunk-ordered reduction
    std::vector<detail::MomentSums> xs(n_times * n), ps(n_times * n), es(n_times);
    std::size_t excluded = 0;
    for (const ChunkAccum& acc : accums) {
        excluded += acc.excluded;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            xs[k].merge(acc.x[k]);
            ps[k].merge(acc.p[k]);
        }
        for (std::size_t t = 0; t < n_times; ++t) es[t].merge(acc.energy[t]);
    }

    const std::size_t included = n_paths - excluded;
    if (included == 0) throw AllPathsExcludedError("all " + std::to_string(n_paths) + " paths overflowed");
    if (included < 2)
        throw InsufficientSamplesError("only " + std::to_string(included) + " paths survived");

    EnsembleResult res;
    res.paths = included;
    res.excluded = excluded;
    res.spec = spec;
    res.model_name = model.name();
    res.dt = dt;
    res.times.resize(n_times);
    res.mean_x.assign(n_times, std::vector<MomentEstimate>(n));
    res.var_x.assign(n_times, std::vector<MomentEstimate>(n));
    res.mean_p.assign(n_times, std::vector<MomentEstimate>(n));
    res.var_p.assign(n_times, std::vector<MomentEstimate>(n));
    res.mean_energy.resize(n_times);
    for (std::size_t t = 0; t < n_times; ++t) {
        res.times[t] = static_cast<double>(samples[t]) * dt;
        for (std::size_t i = 0; i < n; ++i) {
            res.mean_x[t][i] = detail::mean_estimate(xs[t * n + i], included);
            res.var_x[t][i] = detail::variance_estimate(xs[t * n + i], included);
            res.mean_p[t][i] = detail::mean_estimate(ps[t * n + i], included);
            res.var_p[t][i] = detail::variance_estimate(ps[t * n + i], included);
        }
        res.mean_energy[t] = detail::mean_estimate(es[t], included);
    }
    return res;
}

/// The trigger experiment: initial coordinates and momenta drawn from the
/// minimal-uncertainty dispersions of the inverted oscillator, then propagated
/// deterministically (no in-flight noise). All randomness lives in the
/// initial kick.
inline EnsembleResult kick_ensemble(const HamiltonianModel& model, double hbar_eff,
                                    std::size_t n_paths, double horizon, double dt,
                                    std::uint64_t master_seed = 42, std::size_t sample_count = 60,
                                    unsigned threads = 1) {
    if (model.name() != "inverted")
        throw UnsupportedModelError("kick_ensemble requires the inverted oscillator");
    const Dispersions disp = minimal_uncertainty_dispersions(model, hbar_eff);
    const InitialDistribution init = InitialDistribution::gaussian(
        PhaseState(0.0, 0.0), disp.var_x, disp.var_p);
    NoiseSpec spec;
    spec.hbar_eff = hbar_eff;
    spec.gating = GatingPolicy::off; // deterministic propagation
    spec.master_seed = master_seed;
    return run_ensemble(model, init, n_paths, horizon, dt, spec, sample_count,
                        Scheme::symplectic, threads);
}

/// Weighted least-squares line fit diagnostics.
struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
    double ci95_half = 0.0; ///< 95% half-width
    double intercept = 0.0;
    std::size_t points_used = 0;
    bool exact_zero = false; ///< all variances were identically zero

    bool contains(double reference) const {
        return std::abs(slope - reference) <= (exact_zero ? 0.0 : ci95_half);
    }
};

namespace detail {

struct WlsResult {
    double slope, intercept, slope_var;
};

/// Weighted least squares with a persistence-aware slope variance.
///
/// Moment estimates along one ensemble are not independent across time: a
/// fluctuation acquired by t_j is still present at t_k > t_j. For cumulative
/// (Brownian-type) growth the covariance of the variance estimates is exactly
/// cov(v_j, v_k) = se_min^2, which is what the sandwich below uses; for
/// bounded curves it errs on the wide side. `se` are the per-point standard
/// errors matching the weights w = 1/se^2.
inline WlsResult weighted_line_fit(const std::vector<double>& t, const std::vector<double>& y,
                                   const std::vector<double>& w, const std::vector<double>& se) {
    double sw = 0, swt = 0, swy = 0, swtt = 0, swty = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sw += w[i];
        swt += w[i] * t[i];
        swy += w[i] * y[i];
        swtt += w[i] * t[i] * t[i];
        swty += w[i] * t[i] * y[i];
    }
    const double det = sw * swtt - swt * swt;
    WlsResult r;
    r.slope = (sw * swty - swt * swy) / det;
    r.intercept = (swtt * swy - swt * swty) / det;

    // slope = sum_i a_i y_i with a_i = w_i (sw * t_i - swt) / det
    double var = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double ai = w[i] * (sw * t[i] - swt) / det;
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double aj = w[j] * (sw * t[j] - swt) / det;
            const double semin = std::min(se[i], se[j]);
            var += ai * aj * semin * semin;
        }
    }
    r.slope_var = std::max(var, 0.0);
    return r;
}

} // namespace detail

/// Least-squares slope of var_x versus time, weighted by the per-time
/// standard errors, with a 95% confidence interval. Sample times whose
/// variance is exactly determined (zero standard error) pin nothing and are
/// skipped; an ensemble whose variance is identically zero fits slope 0
/// exactly.
inline SlopeFit variance_slope(const EnsembleResult& result, std::size_t mode = 0) {
    if (result.times.empty() || mode >= result.dof())
        throw InsufficientSamplesError("variance_slope: no samples for requested mode");

    bool all_zero = true;
    std::vector<double> t, y, w, se;
    for (std::size_t k = 0; k < result.times.size(); ++k) {
        const MomentEstimate& v = result.var_x[k][mode];
        if (v.value != 0.0) all_zero = false;
        if (v.se > 0.0) {
            t.push_back(result.times[k]);
            y.push_back(v.value);
            w.push_back(1.0 / (v.se * v.se));
            se.push_back(v.se);
        }
    }
    if (all_zero) {
        SlopeFit fit;
        fit.exact_zero = true;
        return fit;
    }
    if (t.size() < 2)
        throw InsufficientSamplesError("variance_slope: fewer than 2 usable sample times");

    const detail::WlsResult r = detail::weighted_line_fit(t, y, w, se);
    SlopeFit fit;
    fit.slope = r.slope;
    fit.intercept = r.intercept;
    fit.se = std::sqrt(r.slope_var);
    fit.ci95_half = 1.959963984540054 * fit.se;
    fit.points_used = t.size();
    return fit;
}

/// Exponential growth fit: regression of ln var_x against t on a time window.
struct ExponentialFit {
    double rate = 0.0;      ///< fitted exponent (2*lambda for the trigger law)
    double rate_stderr = 0.0;
    double rate_ci95_half = 0.0;
    double prefactor = 0.0; ///< exp(intercept)
    std::size_t points_used = 0;
    bool looks_exponential = false; ///< rate resolved well above its own error
};

inline ExponentialFit exponential_rate_fit(const EnsembleResult& result, std::size_t mode,
                                           double window_begin, double window_end) {
    if (!(window_end > window_begin))
        throw InvalidValueError("window", "end must exceed begin");
    std::vector<double> t, y, w, se;
    bool weighted = true;
    for (std::size_t k = 0; k < result.times.size(); ++k) {
        const double tk = result.times[k];
        if (tk < window_begin - 1e-12 || tk > window_end + 1e-12) continue;
        const MomentEstimate& v = result.var_x[k][mode];
        if (!(v.value > 0.0))
            throw NonPositiveVarianceError("exponential_rate_fit: var_x <= 0 at t=" +
                                           std::to_string(tk));
        t.push_back(tk);
        y.push_back(std::log(v.value));
        const double se_ln = v.se / v.value; // delta method
        se.push_back(se_ln);
        if (se_ln > 0.0)
            w.push_back(1.0 / (se_ln * se_ln));
        else
            weighted = false;
    }
    if (t.size() < 3)
        throw InsufficientSamplesError("exponential_rate_fit: need >= 3 samples in window");
    if (!weighted) {
        w.assign(t.size(), 1.0);
        se.assign(t.size(), 1.0);
    }

    const detail::WlsResult r = detail::weighted_line_fit(t, y, w, se);
    ExponentialFit fit;
    fit.rate = r.slope;
    fit.rate_stderr = std::sqrt(r.slope_var);
    fit.rate_ci95_half = 1.959963984540054 * fit.rate_stderr;
    fit.prefactor = std::exp(r.intercept);
    fit.points_used = t.size();
    fit.looks_exponential =
        fit.rate > 4.0 * fit.rate_stderr && fit.rate * (window_end - window_begin) > 1.0;
    return fit;
}

/// Terminal states of N paths (struct-of-arrays), for histogram comparisons.
/// Truncated paths are skipped and counted.
struct TerminalSample {
    std::vector<double> x, p; ///< 1-DOF layout: one entry per included path
    std::size_t excluded = 0;
};

inline TerminalSample terminal_states(const HamiltonianModel& model, const InitialDistribution& init,
                                      std::size_t n_paths, double horizon, double dt,
                                      const NoiseSpec& spec, Scheme scheme = Scheme::heun,
                                      unsigned threads = 1) {
    if (model.dof() != 1)
        throw UnsupportedModelError("terminal_states supports one degree of freedom");
    const std::uint64_t steps = detail::steps_for(horizon, dt);

    std::vector<double> xs(n_paths, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> ps(n_paths, std::numeric_limits<double>::quiet_NaN());
    ThreadPool pool(threads);
    parallel_chunks(&pool, n_paths, 512, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t path = begin; path < end; ++path) {
            const std::uint64_t key = derive_path_key(spec.master_seed, path);
            const WienerIncrementStream stream(key, 1, dt);
            const PhaseState start = init.draw(stream);
            PhaseState last;
            const bool ok = detail::integrate_core(model, start, steps, dt, spec, scheme, key,
                                                   [&](std::uint64_t, const PhaseState& s) { last = s; });
            if (ok) {
                xs[path] = last.x[0];
                ps[path] = last.p[0];
            }
        }
    });

    TerminalSample out;
    out.x.reserve(n_paths);
    out.p.reserve(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (std::isnan(xs[i])) {
            ++out.excluded;
            continue;
        }
        out.x.push_back(xs[i]);
        out.p.push_back(ps[i]);
    }
    return out;
}

} // namespace stochmech
