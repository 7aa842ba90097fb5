#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "stochmech/ensemble.hpp"
#include "stochmech/errors.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/sde.hpp"

namespace stochmech {

/// Second-moment trajectory of a linear model, stacked (x_1..x_n, p_1..p_n).
struct CovarianceTrajectory {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> cov;

    double var_x(std::size_t time_index, std::size_t mode = 0) const {
        return cov[time_index](static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(mode));
    }
    double var_p(std::size_t time_index, std::size_t mode = 0) const {
        const auto n = cov[time_index].rows() / 2;
        return cov[time_index](n + static_cast<Eigen::Index>(mode), n + static_cast<Eigen::Index>(mode));
    }

    /// Covariance at a requested time (must be one of the stored samples).
    const Eigen::MatrixXd& at_time(double t) const {
        for (std::size_t k = 0; k < times.size(); ++k)
            if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return cov[k];
        throw InvalidValueError("time", "no oracle sample at requested time");
    }
};

/// Deterministic ground truth for every linear-model ensemble check.
///
/// For a linear SDE the covariance obeys dS/dt = M S + S M^T + Q with M the
/// constant variational matrix and Q = diag(sigma_x^2, sigma_p^2). This
/// integrates that moment equation with classic RK4 — a route entirely
/// independent of the path integrator and its RNG.
inline CovarianceTrajectory covariance_ode_oracle(const HamiltonianModel& model,
                                                  const Eigen::MatrixXd& initial_covariance,
                                                  const NoiseSpec& spec, double horizon, double dt,
                                                  std::size_t sample_count = 50) {
    if (!model.constant_hessian())
        throw NonLinearModelError("covariance_ode_oracle: model '" + model.name() +
                                  "' has a state-dependent Hessian");
    spec.validate();
    const std::size_t n = model.dof();
    const auto dim = static_cast<Eigen::Index>(2 * n);
    if (initial_covariance.rows() != dim || initial_covariance.cols() != dim)
        throw DimensionMismatchError(2 * n, static_cast<std::size_t>(initial_covariance.rows()));

    // constant drift matrix: d(x,p)/dt = M (x,p)
    PhaseState origin(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0));
    const HessianBlocks h = model.hessian(origin);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n + j)) = h.Bpp(i, j);
            M(static_cast<Eigen::Index>(n + i), static_cast<Eigen::Index>(j)) = -h.Axx(i, j);
        }

    const NoiseAmplitudes amp = noise_amplitudes(model, origin, spec);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
        Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = amp.sigma_x[i] * amp.sigma_x[i];
        Q(static_cast<Eigen::Index>(n + i), static_cast<Eigen::Index>(n + i)) =
            amp.sigma_p[i] * amp.sigma_p[i];
    }

    const std::uint64_t steps = detail::steps_for(horizon, dt);
    const std::vector<std::uint64_t> samples = detail::sample_indices(steps, sample_count);

    auto rhs = [&](const Eigen::MatrixXd& sigma) -> Eigen::MatrixXd {
        return M * sigma + sigma * M.transpose() + Q;
    };

    CovarianceTrajectory out;
    Eigen::MatrixXd sigma = initial_covariance;
    std::size_t cursor = 0;
    auto maybe_record = [&](std::uint64_t k) {
        if (cursor < samples.size() && samples[cursor] == k) {
            out.times.push_back(static_cast<double>(k) * dt);
            out.cov.push_back(sigma);
            ++cursor;
        }
    };
    maybe_record(0);
    for (std::uint64_t k = 0; k < steps; ++k) {
        const Eigen::MatrixXd k1 = rhs(sigma);
        const Eigen::MatrixXd k2 = rhs(sigma + 0.5 * dt * k1);
        const Eigen::MatrixXd k3 = rhs(sigma + 0.5 * dt * k2);
        const Eigen::MatrixXd k4 = rhs(sigma + dt * k3);
        sigma += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        maybe_record(k + 1);
    }
    return out;
}

/// Overload starting from an ensemble initial distribution.
inline CovarianceTrajectory covariance_ode_oracle(const HamiltonianModel& model,
                                                  const InitialDistribution& init,
                                                  const NoiseSpec& spec, double horizon, double dt,
                                                  std::size_t sample_count = 50) {
    const std::size_t n = model.dof();
    const auto dim = static_cast<Eigen::Index>(2 * n);
    Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Zero(dim, dim);
    if (init.kind == InitKind::gaussian) {
        init.validate();
        for (std::size_t i = 0; i < n; ++i) {
            sigma0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = init.var_x[i];
            sigma0(static_cast<Eigen::Index>(n + i), static_cast<Eigen::Index>(n + i)) = init.var_p[i];
        }
    }
    return covariance_ode_oracle(model, sigma0, spec, horizon, dt, sample_count);
}

} // namespace stochmech
