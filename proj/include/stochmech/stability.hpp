#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stochmech/errors.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/phase_state.hpp"

namespace stochmech {

/// Variational (tangent-flow) matrix in block form [[0, A], [B, 0]] acting on
/// the stacked vector (dp, dx), with A = -d2H/dxdx and B = d2H/dpdp evaluated
/// at one state. Only valid for separable Hamiltonians, where the diagonal
/// blocks vanish identically.
struct VariationalMatrix {
    SquareMatrix A; ///< -Axx
    SquareMatrix B; ///< Bpp

    std::size_t dof() const { return A.size(); }

    /// Dense 2n x 2n matrix, row-major, (dp, dx) component ordering.
    SquareMatrix full() const {
        const std::size_t n = dof();
        SquareMatrix m(2 * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                m(i, n + j) = A(i, j);
                m(n + i, j) = B(i, j);
            }
        return m;
    }
};

inline VariationalMatrix linearize(const HamiltonianModel& model, const PhaseState& state) {
    HessianBlocks h = model.hessian(state);
    if (!h.separable())
        throw NonSeparableModelError("linearize: model '" + model.name() +
                                     "' has nonzero d2H/dxdp at this state");
    if (!h.Axx.symmetric(1e-12) || !h.Bpp.symmetric(1e-12))
        throw Error("linearize: Hessian blocks are not symmetric");
    const std::size_t n = h.dof();
    VariationalMatrix vm;
    vm.A = SquareMatrix(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) vm.A(i, j) = -h.Axx(i, j);
    vm.B = h.Bpp;
    return vm;
}

enum class ModeCase { FreeDrift, Oscillatory, Unstable };

inline const char* to_string(ModeCase c) {
    switch (c) {
        case ModeCase::FreeDrift: return "free_drift";
        case ModeCase::Oscillatory: return "oscillatory";
        case ModeCase::Unstable: return "unstable";
    }
    return "?";
}

struct ModeRecord {
    std::size_t index = 0;      ///< dominant coordinate of the normal mode
    ModeCase mode_case = ModeCase::FreeDrift;
    double rate = 0.0;          ///< omega_i (oscillatory) or lambda_i (unstable); 0 for free drift
    double effective_mass = 0.0;
};

struct ModeClassification {
    std::vector<ModeRecord> modes;
    double rate_tolerance = 0.0;
};

/// Splits the degrees of freedom into the three normal-form cases: free drift,
/// oscillatory, exponentially unstable.
///
/// In mass-weighted coordinates the second-order tangent dynamics is
/// y'' = S y with S = B^{1/2} A B^{1/2} symmetric; its eigenvalues mu_i are
/// the per-mode B-scaled curvatures (mu = -omega^2, +lambda^2, or 0). The
/// free-drift band is applied to the curvature in A units, c_i = mu_i * m_i,
/// so the split is insensitive to the mass normalization.
inline ModeClassification classify_modes(const VariationalMatrix& vm, double rate_tolerance = 1e-10) {
    if (!(rate_tolerance > 0.0))
        throw InvalidValueError("rate_tolerance", "must be > 0");
    const std::size_t n = vm.dof();

    Eigen::MatrixXd A(n, n), B(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            A(i, j) = vm.A(i, j);
            B(i, j) = vm.B(i, j);
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bsolve(B);
    if (bsolve.eigenvalues().minCoeff() <= 0.0)
        throw Error("classify_modes: kinetic block is not positive definite");
    const Eigen::MatrixXd b_sqrt =
        bsolve.eigenvectors() * bsolve.eigenvalues().cwiseSqrt().asDiagonal() *
        bsolve.eigenvectors().transpose();

    const Eigen::MatrixXd S = b_sqrt * A * b_sqrt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ssolve(0.5 * (S + S.transpose()));

    ModeClassification out;
    out.rate_tolerance = rate_tolerance;
    out.modes.resize(n);
    std::vector<bool> index_taken(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const double mu = ssolve.eigenvalues()(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd u = ssolve.eigenvectors().col(static_cast<Eigen::Index>(k));
        const double ubu = u.dot(B * u);
        const double m_eff = 1.0 / ubu;
        const double curvature = mu * m_eff;

        ModeRecord rec;
        rec.effective_mass = m_eff;
        if (std::abs(curvature) <= rate_tolerance) {
            rec.mode_case = ModeCase::FreeDrift;
            rec.rate = 0.0;
        } else if (curvature < 0.0) {
            rec.mode_case = ModeCase::Oscillatory;
            rec.rate = std::sqrt(-mu);
        } else {
            rec.mode_case = ModeCase::Unstable;
            rec.rate = std::sqrt(mu);
        }

        // Label the mode by the coordinate it mostly lives on (modes of the
        // catalog models are axis-aligned; ties fall back to eigen order).
        const Eigen::VectorXd xdir = (b_sqrt * u).cwiseAbs();
        Eigen::Index best = 0;
        xdir.maxCoeff(&best);
        std::size_t idx = static_cast<std::size_t>(best);
        if (index_taken[idx]) {
            for (std::size_t alt = 0; alt < n; ++alt)
                if (!index_taken[alt]) { idx = alt; break; }
        }
        index_taken[idx] = true;
        rec.index = idx;
        out.modes[k] = rec;
    }
    std::sort(out.modes.begin(), out.modes.end(),
              [](const ModeRecord& a, const ModeRecord& b) { return a.index < b.index; });
    return out;
}

namespace detail {

/// One tangent leapfrog step, columns stored (dx_1..dx_n, dp_1..dp_n).
/// Axx0/Axx1 are the potential Hessians at the step's start and end states;
/// this is the exact tangent map of the kick-drift-kick base step.
inline void tangent_leapfrog_step(SquareMatrix& frame, const SquareMatrix& Axx0,
                                  const SquareMatrix& Axx1, const SquareMatrix& Bpp, double dt) {
    const std::size_t n = Axx0.size();
    const std::size_t cols = frame.size();
    std::vector<double> tmp(n);
    for (std::size_t c = 0; c < cols; ++c) {
        // half kick: dp -= dt/2 * Axx0 * dx
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += Axx0(i, j) * frame(j, c);
            tmp[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) frame(n + i, c) -= 0.5 * dt * tmp[i];
        // drift: dx += dt * Bpp * dp
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += Bpp(i, j) * frame(n + j, c);
            tmp[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) frame(i, c) += dt * tmp[i];
        // half kick with the end-state Hessian
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += Axx1(i, j) * frame(j, c);
            tmp[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) frame(n + i, c) -= 0.5 * dt * tmp[i];
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Returns the
/// diagonal of R (column norms after orthogonalization); frame columns are
/// left orthonormal.
inline std::vector<double> orthonormalize_columns(SquareMatrix& frame) {
    const std::size_t dim = frame.size();
    std::vector<double> diag(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t prev = 0; prev < c; ++prev) {
                double dot = 0.0;
                for (std::size_t r = 0; r < dim; ++r) dot += frame(r, prev) * frame(r, c);
                for (std::size_t r = 0; r < dim; ++r) frame(r, c) -= dot * frame(r, prev);
            }
        }
        double norm2 = 0.0;
        for (std::size_t r = 0; r < dim; ++r) norm2 += frame(r, c) * frame(r, c);
        const double norm = std::sqrt(norm2);
        diag[c] = norm;
        if (norm > 0.0) {
            const double inv = 1.0 / norm;
            for (std::size_t r = 0; r < dim; ++r) frame(r, c) *= inv;
        }
    }
    return diag;
}

} // namespace detail

/// Evolves a tangent frame along a precomputed trajectory with the
/// time-dependent variational matrix. Frame columns are tangent vectors in
/// (dx, dp) component order; the integrator matches the order of the leapfrog
/// base step.
inline SquareMatrix propagate_tangent(const HamiltonianModel& model,
                                      std::span<const PhaseState> trajectory,
                                      const SquareMatrix& frame) {
    const std::size_t n = model.dof();
    if (frame.size() != 2 * n)
        throw DimensionMismatchError(2 * n, frame.size());
    if (trajectory.size() < 2) return frame;

    const double dt = trajectory[1].t - trajectory[0].t;
    if (!(dt > 0.0)) throw InvalidValueError("trajectory", "time stamps must increase");
    for (std::size_t k = 1; k + 1 < trajectory.size(); ++k) {
        const double step = trajectory[k + 1].t - trajectory[k].t;
        if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
            throw InvalidValueError("trajectory", "time step is not uniform");
    }

    SquareMatrix evolved = frame;
    HessianBlocks h0 = model.hessian(trajectory[0]);
    for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
        HessianBlocks h1 = model.hessian(trajectory[k + 1]);
        detail::tangent_leapfrog_step(evolved, h0.Axx, h1.Axx, h0.Bpp, dt);
        h0 = std::move(h1);
    }
    return evolved;
}

/// Lyapunov spectrum estimate with Kolmogorov-Sinai entropy (sum of positive
/// exponents) and per-renormalization convergence history.
struct LyapunovReport {
    std::vector<double> spectrum;               ///< sorted descending, 1/time units
    double ks_entropy = 0.0;                    ///< sum of positive exponents
    double horizon = 0.0;
    double renorm_interval = 0.0;
    std::vector<std::vector<double>> history;   ///< running spectrum per renormalization
    bool converged = false;
    bool valid = true;                          ///< false if the trajectory overflowed early
    double time_integrated = 0.0;
};

/// Benettin-style estimator: integrate the base trajectory (noiseless
/// leapfrog) together with a tangent frame, re-orthonormalize the frame at
/// fixed intervals, and accumulate the log growth factors.
///
/// The initial frame is the identity with dx columns first, so neutral
/// directions of shear flows stay exactly neutral. The reported spectrum
/// differences the accumulated logs over the second half of the run, which
/// cancels the O(1/T) alignment offset of the raw time average (the constant
/// log of the initial projection onto the growing direction); the convergence
/// history keeps the raw running averages.
inline LyapunovReport lyapunov_spectrum(const HamiltonianModel& model, const PhaseState& initial,
                                        double horizon, double dt, double renorm_interval,
                                        double convergence_tol = 1e-3) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    if (!(horizon > dt)) throw InvalidValueError("horizon", "must exceed dt");
    if (!(renorm_interval >= dt))
        throw InvalidValueError("renorm_interval", "must be >= dt");
    model.check_dimension(initial);

    const std::size_t n = model.dof();
    const std::size_t dim = 2 * n;
    const auto steps = static_cast<std::uint64_t>(std::llround(horizon / dt));
    const auto renorm_every =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(renorm_interval / dt)));

    LyapunovReport report;
    report.horizon = horizon;
    report.renorm_interval = renorm_interval;
    report.spectrum.assign(dim, 0.0);

    PhaseState s = initial;
    model.normalize(s);
    SquareMatrix frame = SquareMatrix::identity(dim);
    std::vector<double> log_sums(dim, 0.0);
    std::vector<double> half_snapshot(dim, 0.0);
    double half_time = 0.0;

    Derivatives d;
    HessianBlocks h0 = model.hessian(s);
    const bool frozen_hessian = model.constant_hessian();

    std::uint64_t since_renorm = 0;
    for (std::uint64_t k = 0; k < steps; ++k) {
        // base leapfrog step
        model.derivatives_into(s, d);
        for (std::size_t i = 0; i < n; ++i) s.p[i] -= 0.5 * dt * d.dH_dx[i];
        model.derivatives_into(s, d);
        for (std::size_t i = 0; i < n; ++i) s.x[i] += dt * d.dH_dp[i];
        model.normalize(s);
        model.derivatives_into(s, d);
        for (std::size_t i = 0; i < n; ++i) s.p[i] -= 0.5 * dt * d.dH_dx[i];
        s.t += dt;

        if (!s.finite()) {
            report.valid = false;
            break;
        }

        HessianBlocks h1 = frozen_hessian ? h0 : model.hessian(s);
        detail::tangent_leapfrog_step(frame, h0.Axx, h1.Axx, h0.Bpp, dt);
        if (!frozen_hessian) h0 = std::move(h1);

        if (++since_renorm == renorm_every || k + 1 == steps) {
            const std::vector<double> diag = detail::orthonormalize_columns(frame);
            for (std::size_t c = 0; c < dim; ++c)
                if (diag[c] > 0.0) log_sums[c] += std::log(diag[c]);
            since_renorm = 0;
            report.time_integrated = static_cast<double>(k + 1) * dt;
            if (report.time_integrated <= 0.5 * horizon) {
                half_snapshot = log_sums;
                half_time = report.time_integrated;
            }

            std::vector<double> running(dim);
            for (std::size_t c = 0; c < dim; ++c) running[c] = log_sums[c] / report.time_integrated;
            std::sort(running.begin(), running.end(), std::greater<double>());
            report.history.push_back(std::move(running));
        }
    }

    if (!report.history.empty()) {
        const double tail = report.time_integrated - half_time;
        if (tail > 0.0 && half_time > 0.0) {
            for (std::size_t c = 0; c < dim; ++c)
                report.spectrum[c] = (log_sums[c] - half_snapshot[c]) / tail;
            std::sort(report.spectrum.begin(), report.spectrum.end(), std::greater<double>());
        } else {
            report.spectrum = report.history.back();
        }
    }
    report.ks_entropy = 0.0;
    for (double lam : report.spectrum) report.ks_entropy += std::max(lam, 0.0);

    if (report.history.size() >= 2) {
        const auto& a = report.history[report.history.size() - 2];
        const auto& b = report.history.back();
        double max_delta = 0.0, max_mag = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            max_delta = std::max(max_delta, std::abs(a[c] - b[c]));
            max_mag = std::max(max_mag, std::abs(b[c]));
        }
        report.converged = report.valid && max_delta < convergence_tol * std::max(max_mag, 1.0);
    }
    return report;
}

} // namespace stochmech
