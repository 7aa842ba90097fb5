#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stochmech/errors.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/phase_state.hpp"
#include "stochmech/rng.hpp"

namespace stochmech {

enum class GatingPolicy { unstable_only, all_on, off };

inline const char* to_string(GatingPolicy g) {
    switch (g) {
        case GatingPolicy::unstable_only: return "unstable_only";
        case GatingPolicy::all_on: return "all_on";
        case GatingPolicy::off: return "off";
    }
    return "?";
}

inline GatingPolicy gating_from_string(const std::string& s) {
    if (s == "unstable_only") return GatingPolicy::unstable_only;
    if (s == "all_on") return GatingPolicy::all_on;
    if (s == "off") return GatingPolicy::off;
    throw InvalidValueError("gating", "expected unstable_only, all_on or off, got '" + s + "'");
}

/// Vacuum-noise configuration: action scale, which degrees of freedom receive
/// noise, and the reproducibility seed.
struct NoiseSpec {
    double hbar_eff = 1.0;
    GatingPolicy gating = GatingPolicy::unstable_only;
    std::uint64_t master_seed = 42;
    double rate_tolerance = 1e-10; ///< instability threshold, 1/time units

    /// True when integration degenerates to the deterministic flow.
    bool noiseless() const { return hbar_eff == 0.0 || gating == GatingPolicy::off; }

    void validate() const {
        if (hbar_eff < 0.0) throw InvalidValueError("hbar_eff", "must be >= 0");
        if (!(rate_tolerance > 0.0)) throw InvalidValueError("rate_tolerance", "must be > 0");
    }
};

/// Per-coordinate noise amplitudes entering the stochastic Hamilton equations:
///   dx_i gains sigma_x[i] dw,  dp_i gains sigma_p[i] dw.
struct NoiseAmplitudes {
    std::vector<double> sigma_x;
    std::vector<double> sigma_p;

    bool any() const {
        for (double v : sigma_x)
            if (v != 0.0) return true;
        for (double v : sigma_p)
            if (v != 0.0) return true;
        return false;
    }
};

namespace detail {

/// Local per-coordinate instability rates lambda_i^2 = max(-d2H/dx_i^2, 0)/m_i.
/// Requires the Hessian to be diagonal in the given coordinates (true for the
/// whole catalog); coupled Hessians would need the normal-coordinate
/// transformation first and are rejected.
inline void local_instability_rates(const HamiltonianModel& model, const PhaseState& state,
                                    std::vector<double>& lambda_sq, HessianBlocks& scratch) {
    model.check_dimension(state);
    HessianBlocks& h = scratch;
    h = model.hessian(state);
    if (!h.separable())
        throw NonSeparableModelError("noise amplitudes: model '" + model.name() +
                                     "' has nonzero d2H/dxdp");
    const std::size_t n = h.dof();
    const double scale = std::max(h.Axx.max_abs(), 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && std::abs(h.Axx(i, j)) > 1e-12 * scale)
                throw NonSeparableModelError(
                    "noise amplitudes: model '" + model.name() +
                    "' has a cross-coupled Hessian; transform to normal coordinates first");
    lambda_sq.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        lambda_sq[i] = std::max(-h.Axx(i, i), 0.0) * h.Bpp(i, i);
}

} // namespace detail

/// Noise amplitudes at a state:
///   sigma_x_i = sqrt(hbar/2m_i)          on gated coordinates,
///   sigma_p_i = sqrt(hbar m_i lambda_i^2 / 2) on unstable coordinates,
/// where lambda_i is the local instability rate. Stable coordinates never get
/// momentum noise; coordinate noise covers all modes under all_on and only
/// unstable ones under unstable_only.
inline NoiseAmplitudes noise_amplitudes(const HamiltonianModel& model, const PhaseState& state,
                                        const NoiseSpec& spec) {
    spec.validate();
    const std::size_t n = model.dof();
    NoiseAmplitudes amp;
    amp.sigma_x.assign(n, 0.0);
    amp.sigma_p.assign(n, 0.0);
    if (spec.noiseless()) return amp;

    std::vector<double> lambda_sq;
    HessianBlocks scratch;
    detail::local_instability_rates(model, state, lambda_sq, scratch);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = model.masses()[i];
        const bool unstable = std::sqrt(lambda_sq[i]) > spec.rate_tolerance;
        const bool coord_noise =
            spec.gating == GatingPolicy::all_on || (spec.gating == GatingPolicy::unstable_only && unstable);
        if (coord_noise) amp.sigma_x[i] = std::sqrt(0.5 * spec.hbar_eff / m);
        if (unstable) amp.sigma_p[i] = std::sqrt(0.5 * spec.hbar_eff * m * lambda_sq[i]);
    }
    return amp;
}

/// Wiener increments drawn for a single step, one pair per degree of freedom.
struct StepIncrements {
    std::vector<double> dw_x;
    std::vector<double> dw_p;
};

inline StepIncrements draw_increments(const WienerIncrementStream& stream, std::uint64_t step,
                                      std::size_t dof) {
    StepIncrements inc;
    inc.dw_x.resize(dof);
    inc.dw_p.resize(dof);
    for (std::size_t i = 0; i < dof; ++i) {
        inc.dw_x[i] = stream.dw_x(step, i);
        inc.dw_p[i] = stream.dw_p(step, i);
    }
    return inc;
}

namespace detail {

/// Kick-drift-kick body shared by the public stepper and the path driver, so
/// the noiseless limit of integrate_path is bit-identical to composing
/// step_symplectic_deterministic.
inline void leapfrog_inplace(const HamiltonianModel& model, PhaseState& s, double dt,
                             Derivatives& d) {
    const std::size_t n = s.x.size();
    model.derivatives_into(s, d);
    for (std::size_t i = 0; i < n; ++i) s.p[i] -= 0.5 * dt * d.dH_dx[i];
    model.derivatives_into(s, d);
    for (std::size_t i = 0; i < n; ++i) s.x[i] += dt * d.dH_dp[i];
    model.normalize(s);
    model.derivatives_into(s, d);
    for (std::size_t i = 0; i < n; ++i) s.p[i] -= 0.5 * dt * d.dH_dx[i];
    s.t += dt;
}

} // namespace detail

/// One leapfrog (kick-drift-kick) step of the noiseless Hamilton equations.
/// Symplectic; doubles as the drift part of the noiseless limit.
inline PhaseState step_symplectic_deterministic(const HamiltonianModel& model,
                                                const PhaseState& state, double dt) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    model.check_dimension(state);
    PhaseState s = state;
    Derivatives d;
    detail::leapfrog_inplace(model, s, dt, d);
    return s;
}

/// Euler-Maruyama step of the stochastic Hamilton equations:
///   x' = x + dH/dp dt + sigma_x dw_x,   p' = p - dH/dx dt + sigma_p dw_p,
/// with amplitudes evaluated at the pre-step state (Ito convention; the noise
/// is additive per step, so Ito and Stratonovich coincide).
inline PhaseState step_euler_maruyama(const HamiltonianModel& model, const PhaseState& state,
                                      double dt, const StepIncrements& inc, const NoiseSpec& spec) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    model.check_dimension(state);
    const std::size_t n = model.dof();
    const NoiseAmplitudes amp = noise_amplitudes(model, state, spec);
    Derivatives d;
    model.derivatives_into(state, d);
    PhaseState s = state;
    for (std::size_t i = 0; i < n; ++i) {
        s.x[i] += d.dH_dp[i] * dt + amp.sigma_x[i] * inc.dw_x[i];
        s.p[i] += -d.dH_dx[i] * dt + amp.sigma_p[i] * inc.dw_p[i];
    }
    model.normalize(s);
    s.t += dt;
    return s;
}

/// Heun (predictor-corrector) step: the drift is averaged between the current
/// state and an Euler predictor that already carries the noise; the diffusion
/// term is added once. Weak second order in the drift for additive noise.
inline PhaseState step_stochastic_heun(const HamiltonianModel& model, const PhaseState& state,
                                       double dt, const StepIncrements& inc, const NoiseSpec& spec) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    model.check_dimension(state);
    const std::size_t n = model.dof();
    const NoiseAmplitudes amp = noise_amplitudes(model, state, spec);
    Derivatives d0, d1;
    model.derivatives_into(state, d0);

    PhaseState pred = state;
    for (std::size_t i = 0; i < n; ++i) {
        pred.x[i] += d0.dH_dp[i] * dt + amp.sigma_x[i] * inc.dw_x[i];
        pred.p[i] += -d0.dH_dx[i] * dt + amp.sigma_p[i] * inc.dw_p[i];
    }
    model.derivatives_into(pred, d1);

    PhaseState s = state;
    for (std::size_t i = 0; i < n; ++i) {
        s.x[i] += 0.5 * dt * (d0.dH_dp[i] + d1.dH_dp[i]) + amp.sigma_x[i] * inc.dw_x[i];
        s.p[i] += -0.5 * dt * (d0.dH_dx[i] + d1.dH_dx[i]) + amp.sigma_p[i] * inc.dw_p[i];
    }
    model.normalize(s);
    s.t += dt;
    return s;
}

enum class Scheme { euler_maruyama, heun, symplectic };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::euler_maruyama: return "euler_maruyama";
        case Scheme::heun: return "heun";
        case Scheme::symplectic: return "symplectic";
    }
    return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "euler_maruyama") return Scheme::euler_maruyama;
    if (s == "heun") return Scheme::heun;
    if (s == "symplectic") return Scheme::symplectic;
    throw InvalidValueError("scheme", "expected euler_maruyama, heun or symplectic, got '" + s + "'");
}

/// A uniformly sampled path. `truncated` marks paths that overflowed before
/// the horizon; `states` then holds the finite prefix.
struct Trajectory {
    std::vector<PhaseState> states;
    double dt = 0.0;
    std::string model_name;
    NoiseSpec spec;
    std::uint64_t path_seed = 0;
    bool truncated = false;
};

namespace detail {

inline std::uint64_t steps_for(double horizon, double dt) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    if (!(horizon > 0.0)) throw InvalidValueError("horizon", "must be > 0");
    const double k = horizon / dt;
    const auto rounded = static_cast<std::uint64_t>(std::llround(k));
    if (rounded == 0 || std::abs(static_cast<double>(rounded) * dt - horizon) >
                            1e-9 * std::max(1.0, std::abs(horizon)))
        throw InvalidValueError("horizon", "must be an integer multiple of dt");
    return rounded;
}

/// Core integration loop shared by integrate_path and the ensemble driver.
/// `observe(step_index, state)` fires for the initial state (step 0) and after
/// every completed step. Returns false when the path overflowed (the observer
/// never sees a non-finite state).
///
/// Noiseless specs (hbar_eff = 0 or gating = off) always route to the
/// symplectic stepper so the zero-noise limit is bit-identical to the
/// deterministic integrator, whatever `scheme` says.
template <typename Observer>
bool integrate_core(const HamiltonianModel& model, const PhaseState& initial, std::uint64_t steps,
                    double dt, const NoiseSpec& spec, Scheme scheme, std::uint64_t path_key,
                    Observer&& observe) {
    spec.validate();
    model.check_dimension(initial);
    const std::size_t n = model.dof();

    PhaseState s = initial;
    model.normalize(s);
    observe(std::uint64_t{0}, s);

    if (spec.noiseless() || scheme == Scheme::symplectic) {
        Derivatives d;
        for (std::uint64_t k = 0; k < steps; ++k) {
            leapfrog_inplace(model, s, dt, d);
            if (!s.finite()) return false;
            observe(k + 1, s);
        }
        return true;
    }

    const WienerIncrementStream stream(path_key, n, dt);
    const bool frozen = model.constant_hessian();
    NoiseAmplitudes amp;
    if (frozen) amp = noise_amplitudes(model, s, spec);

    Derivatives d0, d1;
    PhaseState pred = s;
    for (std::uint64_t k = 0; k < steps; ++k) {
        if (!frozen) amp = noise_amplitudes(model, s, spec);
        model.derivatives_into(s, d0);
        if (scheme == Scheme::euler_maruyama) {
            for (std::size_t i = 0; i < n; ++i) {
                s.x[i] += d0.dH_dp[i] * dt + amp.sigma_x[i] * stream.dw_x(k, i);
                s.p[i] += -d0.dH_dx[i] * dt + amp.sigma_p[i] * stream.dw_p(k, i);
            }
        } else { // heun
            for (std::size_t i = 0; i < n; ++i) {
                const double nx = amp.sigma_x[i] * stream.dw_x(k, i);
                const double np = amp.sigma_p[i] * stream.dw_p(k, i);
                pred.x[i] = s.x[i] + d0.dH_dp[i] * dt + nx;
                pred.p[i] = s.p[i] - d0.dH_dx[i] * dt + np;
            }
            model.derivatives_into(pred, d1);
            for (std::size_t i = 0; i < n; ++i) {
                const double nx = amp.sigma_x[i] * stream.dw_x(k, i);
                const double np = amp.sigma_p[i] * stream.dw_p(k, i);
                s.x[i] += 0.5 * dt * (d0.dH_dp[i] + d1.dH_dp[i]) + nx;
                s.p[i] += -0.5 * dt * (d0.dH_dx[i] + d1.dH_dx[i]) + np;
            }
        }
        model.normalize(s);
        s.t += dt;
        if (!s.finite()) return false;
        observe(k + 1, s);
    }
    return true;
}

} // namespace detail

/// Integrates one path over `horizon` (an integer multiple of dt) and records
/// every state. Identical (master_seed, path_index) inputs give bit-identical
/// trajectories regardless of what else has run.
inline Trajectory integrate_path(const HamiltonianModel& model, const PhaseState& initial,
                                 double horizon, double dt, const NoiseSpec& spec,
                                 Scheme scheme = Scheme::heun, std::uint64_t path_index = 0) {
    const std::uint64_t steps = detail::steps_for(horizon, dt);
    Trajectory traj;
    traj.dt = dt;
    traj.model_name = model.name();
    traj.spec = spec;
    traj.path_seed = derive_path_key(spec.master_seed, path_index);
    traj.states.reserve(steps + 1);
    const bool ok = detail::integrate_core(
        model, initial, steps, dt, spec, scheme, traj.path_seed,
        [&](std::uint64_t, const PhaseState& s) { traj.states.push_back(s); });
    traj.truncated = !ok;
    return traj;
}

} // namespace stochmech
