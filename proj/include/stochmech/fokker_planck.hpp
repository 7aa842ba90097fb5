#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "stochmech/ensemble.hpp"
#include "stochmech/errors.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/parallel.hpp"
#include "stochmech/phase_state.hpp"
#include "stochmech/sde.hpp"

namespace stochmech {

enum class BoundaryKind { periodic, zero_flux };

inline BoundaryKind boundary_from_string(const std::string& s) {
    if (s == "periodic") return BoundaryKind::periodic;
    if (s == "zero_flux") return BoundaryKind::zero_flux;
    throw InvalidValueError("boundary", "expected periodic or zero_flux, got '" + s + "'");
}

/// Phase-space box and resolution for one degree of freedom.
struct GridGeometry {
    double x_min = -3.0, x_max = 3.0;
    double p_min = -3.0, p_max = 3.0;
    std::size_t nx = 128, np = 128;
    BoundaryKind boundary_x = BoundaryKind::zero_flux;
    BoundaryKind boundary_p = BoundaryKind::zero_flux;

    double dx() const { return (x_max - x_min) / static_cast<double>(nx); }
    double dp() const { return (p_max - p_min) / static_cast<double>(np); }
    double cell_area() const { return dx() * dp(); }
    double x_center(std::size_t i) const { return x_min + (static_cast<double>(i) + 0.5) * dx(); }
    double p_center(std::size_t j) const { return p_min + (static_cast<double>(j) + 0.5) * dp(); }

    void validate() const {
        if (!(x_max > x_min) || !(p_max > p_min))
            throw InvalidValueError("bounds", "domain bounds must be ordered");
        if (nx < 16 || np < 16)
            throw InvalidValueError("resolution", "need at least 16 cells per axis");
    }
};

/// Discretized phase-space density. Row-major, x-major: rho[i * np + j] is the
/// cell centered at (x_i, p_j). Non-negative, unit mass.
struct DistributionGrid {
    GridGeometry geom;
    std::vector<double> rho;
    bool delta_regularized = false; ///< point init widened to a 2-cell Gaussian

    double operator()(std::size_t i, std::size_t j) const { return rho[i * geom.np + j]; }
    double& operator()(std::size_t i, std::size_t j) { return rho[i * geom.np + j]; }

    double mass() const {
        double s = 0.0;
        for (double v : rho) s += v;
        return s * geom.cell_area();
    }

    double min_density() const {
        double m = rho.empty() ? 0.0 : rho.front();
        for (double v : rho) m = std::min(m, v);
        return m;
    }

    void normalize() {
        const double m = mass();
        if (!(m > 0.0)) throw InvalidValueError("grid", "cannot normalize zero mass");
        const double inv = 1.0 / m;
        for (double& v : rho) v *= inv;
    }
};

namespace fpdetail {

inline double gauss_mass_inside(double center, double sigma, double lo, double hi) {
    const double inv = 1.0 / (sigma * std::numbers::sqrt2);
    return 0.5 * (std::erf((hi - center) * inv) - std::erf((lo - center) * inv));
}

} // namespace fpdetail

/// Builds a normalized grid from an initial distribution.
/// Point initials (and zero-variance Gaussian axes) are regularized to a
/// Gaussian of two cell widths and flagged, since a delta has no grid
/// representation; the width is recorded via `delta_regularized`.
inline DistributionGrid build_grid(const GridGeometry& geom, const InitialDistribution& init) {
    geom.validate();
    if (init.center.dof() != 1)
        throw UnsupportedModelError("build_grid supports one degree of freedom");

    const double cx = init.center.x[0];
    const double cp = init.center.p[0];
    double vx = 0.0, vp = 0.0;
    if (init.kind == InitKind::gaussian) {
        init.validate();
        vx = init.var_x[0];
        vp = init.var_p[0];
    }
    bool regularized = false;
    if (vx <= 0.0) {
        vx = 4.0 * geom.dx() * geom.dx();
        regularized = true;
    }
    if (vp <= 0.0) {
        vp = 4.0 * geom.dp() * geom.dp();
        regularized = true;
    }

    const double inside = fpdetail::gauss_mass_inside(cx, std::sqrt(vx), geom.x_min, geom.x_max) *
                          fpdetail::gauss_mass_inside(cp, std::sqrt(vp), geom.p_min, geom.p_max);
    if (inside < 0.999)
        throw MassOutsideDomainError("initial distribution keeps only " + std::to_string(inside) +
                                     " of its mass inside the domain");

    DistributionGrid grid;
    grid.geom = geom;
    grid.delta_regularized = regularized;
    grid.rho.assign(geom.nx * geom.np, 0.0);
    for (std::size_t i = 0; i < geom.nx; ++i) {
        const double ex = geom.x_center(i) - cx;
        const double gx = std::exp(-0.5 * ex * ex / vx);
        for (std::size_t j = 0; j < geom.np; ++j) {
            const double ep = geom.p_center(j) - cp;
            grid.rho[i * geom.np + j] = gx * std::exp(-0.5 * ep * ep / vp);
        }
    }
    grid.normalize();
    return grid;
}

namespace fpdetail {

inline double van_leer(double theta) {
    const double a = std::abs(theta);
    return (theta + a) / (1.0 + a);
}

/// Flux-limited upwind flux across the face between cells L and R, for a
/// constant advection speed v along the line. `upstream` is the next cell on
/// the upwind side (rho[L-1] for v>0, rho[R+1] for v<0); callers pass the
/// donor value again when that neighbor does not exist, which degrades the
/// face to first-order upwind.
inline double tvd_face_flux(double rho_l, double rho_r, double upstream, double v, double courant) {
    const double jump = rho_r - rho_l;
    double correction = 0.0;
    if (jump != 0.0) {
        const double theta = (v >= 0.0 ? (rho_l - upstream) : (upstream - rho_r)) / jump;
        correction = 0.5 * std::abs(v) * (1.0 - std::abs(courant)) * van_leer(theta) * jump;
    }
    const double upwind = v >= 0.0 ? v * rho_l : v * rho_r;
    return upwind + correction;
}

/// Advection along the x (row) axis: speed u[j] constant per column.
/// Two passes: face fluxes into `faces` ((nx+1) x np), then the conservative
/// update. Both passes stream rows, and parallel partitions write disjoint
/// output, so results are bitwise independent of the worker count.
inline void advect_x(const std::vector<double>& in, std::vector<double>& out, std::size_t nx,
                     std::size_t np, const std::vector<double>& u, double dt, double dx,
                     BoundaryKind bc, std::vector<double>& faces, ThreadPool* pool) {
    const bool periodic = bc == BoundaryKind::periodic;
    const std::size_t n_faces = nx + 1;
    if (faces.size() != n_faces * np) faces.assign(n_faces * np, 0.0);
    // closed-wall face rows stay zero across calls; interior rows are fully
    // rewritten below

    auto row = [&](std::size_t i) { return in.data() + i * np; };

    parallel_chunks(pool, n_faces, 64, [&](std::size_t, std::size_t fb, std::size_t fe) {
        for (std::size_t f = fb; f < fe; ++f) {
            double* face_row = faces.data() + f * np;
            if (!periodic && (f == 0 || f == nx)) continue; // closed wall: flux stays 0
            const std::size_t ir = periodic ? (f % nx) : f;
            const std::size_t il = periodic ? ((f + nx - 1) % nx) : (f - 1);
            const double* rl = row(il);
            const double* rr = row(ir);
            // upstream row for the limiter; null when outside a closed wall
            const double* rul = nullptr;
            const double* rur = nullptr;
            if (periodic) {
                rul = row((il + nx - 1) % nx);
                rur = row((ir + 1) % nx);
            } else {
                rul = il > 0 ? row(il - 1) : nullptr;
                rur = ir + 1 < nx ? row(ir + 1) : nullptr;
            }
            for (std::size_t j = 0; j < np; ++j) {
                const double v = u[j];
                const double c = v * dt / dx;
                const double upstream =
                    v >= 0.0 ? (rul ? rul[j] : rl[j]) : (rur ? rur[j] : rr[j]);
                face_row[j] = tvd_face_flux(rl[j], rr[j], upstream, v, c);
            }
        }
    });

    const double scale = dt / dx;
    parallel_chunks(pool, nx, 32, [&](std::size_t, std::size_t ib, std::size_t ie) {
        for (std::size_t i = ib; i < ie; ++i) {
            const double* fin = faces.data() + i * np;
            const double* fout = faces.data() + (i + 1) * np;
            const double* src = in.data() + i * np;
            double* dst = out.data() + i * np;
            if (periodic && i == nx - 1) fout = faces.data(); // face nx == face 0
            for (std::size_t j = 0; j < np; ++j) {
                double v = src[j] - scale * (fout[j] - fin[j]);
                dst[j] = v < 0.0 ? 0.0 : v; // clip roundoff undershoot
            }
        }
    });
}

/// Advection along the p (column) axis: speed w[i] constant per row. Each row
/// is an independent 1-D constant-speed problem on contiguous memory.
inline void advect_p(const std::vector<double>& in, std::vector<double>& out, std::size_t nx,
                     std::size_t np, const std::vector<double>& w, double dt, double dp,
                     BoundaryKind bc, ThreadPool* pool) {
    const bool periodic = bc == BoundaryKind::periodic;
    parallel_chunks(pool, nx, 16, [&](std::size_t, std::size_t ib, std::size_t ie) {
        std::vector<double> faces(np + 1);
        for (std::size_t i = ib; i < ie; ++i) {
            const double* src = in.data() + i * np;
            double* dst = out.data() + i * np;
            const double v = w[i];
            const double c = v * dt / dp;
            for (std::size_t f = 0; f <= np; ++f) {
                if (!periodic && (f == 0 || f == np)) {
                    faces[f] = 0.0;
                    continue;
                }
                const std::size_t jr = periodic ? (f % np) : f;
                const std::size_t jl = periodic ? ((f + np - 1) % np) : (f - 1);
                double upstream;
                if (v >= 0.0)
                    upstream = periodic ? src[(jl + np - 1) % np] : (jl > 0 ? src[jl - 1] : src[jl]);
                else
                    upstream = periodic ? src[(jr + 1) % np] : (jr + 1 < np ? src[jr + 1] : src[jr]);
                faces[f] = tvd_face_flux(src[jl], src[jr], upstream, v, c);
            }
            const double scale = dt / dp;
            for (std::size_t j = 0; j < np; ++j) {
                double val = src[j] - scale * (faces[j + 1] - faces[j]);
                dst[j] = val < 0.0 ? 0.0 : val;
            }
        }
    });
}

/// Explicit conservative diffusion along x with a coefficient that may vary
/// with x (face coefficients are arithmetic means of the adjacent cells).
inline void diffuse_x(const std::vector<double>& in, std::vector<double>& out, std::size_t nx,
                      std::size_t np, const std::vector<double>& d_of_x, double dt, double dx,
                      BoundaryKind bc, ThreadPool* pool) {
    const bool periodic = bc == BoundaryKind::periodic;
    const double scale = dt / (dx * dx);
    parallel_chunks(pool, nx, 32, [&](std::size_t, std::size_t ib, std::size_t ie) {
        for (std::size_t i = ib; i < ie; ++i) {
            const double* mid = in.data() + i * np;
            const double* lo = nullptr;
            const double* hi = nullptr;
            double d_lo = 0.0, d_hi = 0.0;
            if (i > 0 || periodic) {
                const std::size_t il = i > 0 ? i - 1 : nx - 1;
                lo = in.data() + il * np;
                d_lo = 0.5 * (d_of_x[i] + d_of_x[il]);
            }
            if (i + 1 < nx || periodic) {
                const std::size_t ih = (i + 1) % nx;
                hi = in.data() + ih * np;
                d_hi = 0.5 * (d_of_x[i] + d_of_x[ih]);
            }
            double* dst = out.data() + i * np;
            for (std::size_t j = 0; j < np; ++j) {
                const double flux_hi = hi ? d_hi * (hi[j] - mid[j]) : 0.0;
                const double flux_lo = lo ? d_lo * (mid[j] - lo[j]) : 0.0;
                dst[j] = mid[j] + scale * (flux_hi - flux_lo);
            }
        }
    });
}

/// Explicit diffusion along p; the coefficient is constant along each row.
inline void diffuse_p(const std::vector<double>& in, std::vector<double>& out, std::size_t nx,
                      std::size_t np, const std::vector<double>& d_of_x, double dt, double dp,
                      BoundaryKind bc, ThreadPool* pool) {
    const bool periodic = bc == BoundaryKind::periodic;
    parallel_chunks(pool, nx, 32, [&](std::size_t, std::size_t ib, std::size_t ie) {
        for (std::size_t i = ib; i < ie; ++i) {
            const double* src = in.data() + i * np;
            double* dst = out.data() + i * np;
            const double mu = d_of_x[i] * dt / (dp * dp);
            if (mu == 0.0) {
                std::memcpy(dst, src, np * sizeof(double));
                continue;
            }
            for (std::size_t j = 0; j < np; ++j) {
                double left, right;
                if (periodic) {
                    left = src[(j + np - 1) % np];
                    right = src[(j + 1) % np];
                } else {
                    left = j > 0 ? src[j - 1] : src[j];
                    right = j + 1 < np ? src[j + 1] : src[j];
                }
                dst[j] = src[j] + mu * (left - 2.0 * src[j] + right);
            }
        }
    });
}

/// Velocity tables and diffusion coefficient tables for a 1-DOF model.
struct ModelTables {
    std::vector<double> u;      ///< dH/dp at p_j (x-velocity per column)
    std::vector<double> w;      ///< -dH/dx at x_i (p-velocity per row)
    std::vector<double> d_x;    ///< coordinate diffusion coefficient per x-cell
    std::vector<double> d_p;    ///< momentum diffusion coefficient per x-cell
    double u_max = 0.0, w_max = 0.0, d_x_max = 0.0, d_p_max = 0.0;
};

inline ModelTables build_tables(const HamiltonianModel& model, const GridGeometry& geom,
                                double hbar_eff, GatingPolicy gating, double rate_tolerance) {
    if (model.dof() != 1)
        throw UnsupportedModelError("phase-space grids support one degree of freedom");
    ModelTables tab;
    const double m = model.masses()[0];
    tab.u.resize(geom.np);
    for (std::size_t j = 0; j < geom.np; ++j) {
        tab.u[j] = geom.p_center(j) / m;
        tab.u_max = std::max(tab.u_max, std::abs(tab.u[j]));
    }
    tab.w.resize(geom.nx);
    tab.d_x.assign(geom.nx, 0.0);
    tab.d_p.assign(geom.nx, 0.0);
    Derivatives d;
    for (std::size_t i = 0; i < geom.nx; ++i) {
        PhaseState s(geom.x_center(i), 0.0);
        model.derivatives_into(s, d);
        tab.w[i] = -d.dH_dx[0];
        tab.w_max = std::max(tab.w_max, std::abs(tab.w[i]));

        if (hbar_eff > 0.0 && gating != GatingPolicy::off) {
            const HessianBlocks h = model.hessian(s);
            const double lambda_sq = std::max(-h.Axx(0, 0), 0.0) / m;
            const bool unstable = std::sqrt(lambda_sq) > rate_tolerance;
            if (unstable) tab.d_p[i] = 0.25 * hbar_eff * m * lambda_sq;
            if (gating == GatingPolicy::all_on || unstable) tab.d_x[i] = 0.25 * hbar_eff / m;
        }
    }
    for (std::size_t i = 0; i < geom.nx; ++i) {
        tab.d_x_max = std::max(tab.d_x_max, tab.d_x[i]);
        tab.d_p_max = std::max(tab.d_p_max, tab.d_p[i]);
    }
    return tab;
}

} // namespace fpdetail

/// Time-stepping configuration for the phase-space Master Equation.
/// `validated` checks the advective CFL bound and the explicit diffusion
/// stability bound against a concrete model and grid at construction.
struct MasterEqConfig {
    double hbar_eff = 1.0;
    GatingPolicy gating = GatingPolicy::unstable_only;
    double dt = 1e-3;
    bool strang = true; ///< half-advection, diffusion, half-advection
    double entropy_interval = 1.0;
    double stationarity_threshold = 1e-6; ///< L1 change per unit time; <= 0 disables
    double rate_tolerance = 1e-10;

    static MasterEqConfig validated(const HamiltonianModel& model, const GridGeometry& geom,
                                    MasterEqConfig cfg) {
        if (!(cfg.dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
        if (cfg.hbar_eff < 0.0) throw InvalidValueError("hbar_eff", "must be >= 0");
        if (!(cfg.entropy_interval > 0.0))
            throw InvalidValueError("entropy_interval", "must be > 0");
        const auto tab = fpdetail::build_tables(model, geom, cfg.hbar_eff, cfg.gating,
                                                cfg.rate_tolerance);
        // advection sub-steps inside one evolve step
        const double dt_x = cfg.dt / 2.0;
        const double dt_p = cfg.strang ? cfg.dt / 2.0 : cfg.dt;
        if (tab.u_max * dt_x > geom.dx() || tab.w_max * dt_p > geom.dp())
            throw CFLViolationError("advective CFL bound violated; reduce dt");
        if (tab.d_x_max * cfg.dt / (geom.dx() * geom.dx()) > 0.5 ||
            tab.d_p_max * cfg.dt / (geom.dp() * geom.dp()) > 0.5)
            throw StabilityViolationError("explicit diffusion stability bound violated; reduce dt");
        return cfg;
    }
};

/// Gibbs entropy S = -sum rho ln rho dx dp, with 0 ln 0 := 0.
inline double gibbs_entropy(const DistributionGrid& grid) {
    double s = 0.0;
    for (double v : grid.rho)
        if (v > 0.0) s -= v * std::log(v);
    return s * grid.geom.cell_area();
}

/// Conservative flux-limited advection by the Hamiltonian velocity field over
/// one interval: x for dt/2, p for dt, x for dt/2. Mass-conserving, positivity
/// preserving under the CFL bound.
inline DistributionGrid liouville_step(const HamiltonianModel& model, const DistributionGrid& grid,
                                       double dt, unsigned threads = 1) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    const GridGeometry& g = grid.geom;
    const auto tab = fpdetail::build_tables(model, g, 0.0, GatingPolicy::off, 1e-10);
    if (tab.u_max * (dt / 2.0) > g.dx() || tab.w_max * dt > g.dp())
        throw CFLViolationError("liouville_step: CFL bound violated");

    ThreadPool pool(threads);
    DistributionGrid out = grid;
    std::vector<double> tmp(grid.rho.size());
    std::vector<double> faces;
    fpdetail::advect_x(grid.rho, tmp, g.nx, g.np, tab.u, dt / 2.0, g.dx(), g.boundary_x, faces, &pool);
    fpdetail::advect_p(tmp, out.rho, g.nx, g.np, tab.w, dt, g.dp(), g.boundary_p, &pool);
    fpdetail::advect_x(out.rho, tmp, g.nx, g.np, tab.u, dt / 2.0, g.dx(), g.boundary_x, faces, &pool);
    out.rho = std::move(tmp);
    return out;
}

/// One explicit diffusion interval with the Master Equation coefficients
/// D_x = hbar/4m and D_p = hbar m lambda_loc^2 / 4, where
/// lambda_loc^2 = max(-d2H/dx2, 0)/m is evaluated per cell column. Gating
/// selects which cells receive coordinate diffusion; stable cells never
/// receive momentum diffusion. hbar = 0 or gating = off is the identity.
inline DistributionGrid diffusion_step(const HamiltonianModel& model, const DistributionGrid& grid,
                                       double dt, const MasterEqConfig& config, unsigned threads = 1) {
    if (!(dt > 0.0)) throw InvalidValueError("dt", "must be > 0");
    const GridGeometry& g = grid.geom;
    DistributionGrid out = grid;
    if (config.hbar_eff == 0.0 || config.gating == GatingPolicy::off) return out;

    const auto tab = fpdetail::build_tables(model, g, config.hbar_eff, config.gating,
                                            config.rate_tolerance);
    if (tab.d_x_max == 0.0 && tab.d_p_max == 0.0) return out;
    if (tab.d_x_max * dt / (g.dx() * g.dx()) > 0.5 || tab.d_p_max * dt / (g.dp() * g.dp()) > 0.5)
        throw StabilityViolationError("diffusion_step: stability bound violated");

    ThreadPool pool(threads);
    std::vector<double> tmp(grid.rho.size());
    fpdetail::diffuse_x(grid.rho, tmp, g.nx, g.np, tab.d_x, dt, g.dx(), g.boundary_x, &pool);
    fpdetail::diffuse_p(tmp, out.rho, g.nx, g.np, tab.d_p, dt, g.dp(), g.boundary_p, &pool);
    return out;
}

/// Evolution record: entropy and stationarity diagnostics on the sampling
/// grid, plus the final density.
struct MasterEqResult {
    DistributionGrid final_grid;
    std::vector<double> sample_times;
    std::vector<double> entropy;
    std::vector<double> l1_rate;    ///< L1 change per unit time since previous sample (0 at t=0)
    std::vector<double> mass_error; ///< |mass - 1| at each sample
    std::vector<double> min_density;
    bool stationary = false;
    double stationary_time = 0.0;
    double time_evolved = 0.0;
};

/// Strang-split Master Equation evolution: symmetric sweep chain
/// x(dt/2) p(dt/2) | diffusion(dt) | p(dt/2) x(dt/2) per step (the
/// half-advections split once more so the whole composition stays
/// time-symmetric and second order). Entropy is sampled at a fixed cadence;
/// the run stops early once the L1 change rate drops below the stationarity
/// threshold.
inline MasterEqResult evolve_master_equation(const HamiltonianModel& model,
                                             const DistributionGrid& grid, double horizon,
                                             const MasterEqConfig& config, unsigned threads = 1) {
    const MasterEqConfig cfg = MasterEqConfig::validated(model, grid.geom, config);
    const GridGeometry& g = grid.geom;
    const std::uint64_t steps = detail::steps_for(horizon, cfg.dt);
    const auto sample_every = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(cfg.entropy_interval / cfg.dt)));

    const auto tab =
        fpdetail::build_tables(model, g, cfg.hbar_eff, cfg.gating, cfg.rate_tolerance);
    const bool diffusive = tab.d_x_max > 0.0 || tab.d_p_max > 0.0;

    std::vector<double> cur = grid.rho;
    std::vector<double> buf_a(cur.size()), buf_b(cur.size());
    std::vector<double> faces;
    std::vector<double> prev_sample = cur;

    MasterEqResult res;
    res.final_grid = grid;

    const double cell = g.cell_area();
    auto record = [&](double t, bool first) {
        double mass = 0.0, mn = cur.front(), s = 0.0;
        for (double v : cur) {
            mass += v;
            mn = std::min(mn, v);
            if (v > 0.0) s -= v * std::log(v);
        }
        res.sample_times.push_back(t);
        res.entropy.push_back(s * cell);
        res.mass_error.push_back(std::abs(mass * cell - 1.0));
        res.min_density.push_back(mn);
        if (first) {
            res.l1_rate.push_back(0.0);
        } else {
            double l1 = 0.0;
            for (std::size_t k = 0; k < cur.size(); ++k) l1 += std::abs(cur[k] - prev_sample[k]);
            const double rate = l1 * cell / (t - res.sample_times[res.sample_times.size() - 2]);
            res.l1_rate.push_back(rate);
            if (cfg.stationarity_threshold > 0.0 && rate < cfg.stationarity_threshold &&
                !res.stationary) {
                res.stationary = true;
                res.stationary_time = t;
            }
        }
        prev_sample = cur;
    };

    ThreadPool pool(threads);
    auto sweep_x = [&](double dt_adv) {
        fpdetail::advect_x(cur, buf_a, g.nx, g.np, tab.u, dt_adv, g.dx(), g.boundary_x, faces, &pool);
        cur.swap(buf_a);
    };
    auto sweep_p = [&](double dt_adv) {
        fpdetail::advect_p(cur, buf_a, g.nx, g.np, tab.w, dt_adv, g.dp(), g.boundary_p, &pool);
        cur.swap(buf_a);
    };
    auto diffuse_interval = [&](double dt_diff) {
        if (!diffusive) return;
        fpdetail::diffuse_x(cur, buf_a, g.nx, g.np, tab.d_x, dt_diff, g.dx(), g.boundary_x, &pool);
        fpdetail::diffuse_p(buf_a, buf_b, g.nx, g.np, tab.d_p, dt_diff, g.dp(), g.boundary_p, &pool);
        cur.swap(buf_b);
    };

    record(0.0, true);
    for (std::uint64_t k = 0; k < steps; ++k) {
        if (cfg.strang) {
            sweep_x(cfg.dt / 2.0);
            sweep_p(cfg.dt / 2.0);
            diffuse_interval(cfg.dt);
            sweep_p(cfg.dt / 2.0);
            sweep_x(cfg.dt / 2.0);
        } else {
            sweep_x(cfg.dt / 2.0);
            sweep_p(cfg.dt);
            sweep_x(cfg.dt / 2.0);
            diffuse_interval(cfg.dt);
        }
        res.time_evolved = static_cast<double>(k + 1) * cfg.dt;
        if ((k + 1) % sample_every == 0 || k + 1 == steps) {
            record(res.time_evolved, false);
            if (res.stationary) break;
        }
    }

    res.final_grid.rho = std::move(cur);
    res.final_grid.delta_regularized = grid.delta_regularized;
    return res;
}

/// Total variation distance between the grid density and an empirical sample:
/// TV = 1/2 [ sum_cells |rho dA - n_cell/N| + n_outside/N ].
inline double compare_histogram(const DistributionGrid& grid, const std::vector<double>& xs,
                                const std::vector<double>& ps) {
    if (xs.size() != ps.size()) throw InvalidValueError("samples", "x/p length mismatch");
    const GridGeometry& g = grid.geom;
    std::vector<double> counts(g.nx * g.np, 0.0);
    std::size_t outside = 0, inside = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double fx = (xs[k] - g.x_min) / g.dx();
        const double fp = (ps[k] - g.p_min) / g.dp();
        if (fx < 0.0 || fp < 0.0 || fx >= static_cast<double>(g.nx) ||
            fp >= static_cast<double>(g.np)) {
            ++outside;
            continue;
        }
        counts[static_cast<std::size_t>(fx) * g.np + static_cast<std::size_t>(fp)] += 1.0;
        ++inside;
    }
    if (inside < 1000)
        throw TooFewSamplesError("compare_histogram: only " + std::to_string(inside) +
                                 " samples inside the domain (need >= 1000)");
    const double n = static_cast<double>(xs.size());
    const double cell = g.cell_area();
    double tv = static_cast<double>(outside) / n;
    for (std::size_t k = 0; k < counts.size(); ++k)
        tv += std::abs(grid.rho[k] * cell - counts[k] / n);
    return 0.5 * tv;
}

inline double compare_histogram(const DistributionGrid& grid, const std::vector<PhaseState>& samples) {
    std::vector<double> xs, ps;
    xs.reserve(samples.size());
    ps.reserve(samples.size());
    for (const PhaseState& s : samples) {
        if (s.dof() != 1) throw UnsupportedModelError("compare_histogram expects 1-DOF samples");
        xs.push_back(s.x[0]);
        ps.push_back(s.p[0]);
    }
    return compare_histogram(grid, xs, ps);
}

// --- snapshot export -------------------------------------------------------

/// CSV rows (x, p, rho), full double precision.
inline void write_grid_csv(const DistributionGrid& grid, std::ostream& os) {
    os << "x,p,rho\n";
    char buf[96];
    for (std::size_t i = 0; i < grid.geom.nx; ++i)
        for (std::size_t j = 0; j < grid.geom.np; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid.geom.x_center(i),
                          grid.geom.p_center(j), grid(i, j));
            os << buf;
        }
}

/// Binary layout: little-endian, header {magic "SHFP", version u32, n_x u32,
/// n_p u32, bounds 4 x f64}, then n_x * n_p f64 densities in row-major
/// (x-major) order.
inline void write_grid_binary(const DistributionGrid& grid, std::ostream& os) {
    static_assert(std::endian::native == std::endian::little,
                  "binary snapshot writer assumes a little-endian host");
    os.write("SHFP", 4);
    const std::uint32_t version = 1;
    const std::uint32_t nx = static_cast<std::uint32_t>(grid.geom.nx);
    const std::uint32_t np = static_cast<std::uint32_t>(grid.geom.np);
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&nx), 4);
    os.write(reinterpret_cast<const char*>(&np), 4);
    const double bounds[4] = {grid.geom.x_min, grid.geom.x_max, grid.geom.p_min, grid.geom.p_max};
    os.write(reinterpret_cast<const char*>(bounds), sizeof bounds);
    os.write(reinterpret_cast<const char*>(grid.rho.data()),
             static_cast<std::streamsize>(grid.rho.size() * sizeof(double)));
}

inline DistributionGrid read_grid_binary(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SHFP", 4) != 0)
        throw InvalidValueError("snapshot", "bad magic");
    std::uint32_t version = 0, nx = 0, np = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&nx), 4);
    is.read(reinterpret_cast<char*>(&np), 4);
    if (version != 1) throw InvalidValueError("snapshot", "unsupported version");
    double bounds[4];
    is.read(reinterpret_cast<char*>(bounds), sizeof bounds);
    DistributionGrid grid;
    grid.geom.x_min = bounds[0];
    grid.geom.x_max = bounds[1];
    grid.geom.p_min = bounds[2];
    grid.geom.p_max = bounds[3];
    grid.geom.nx = nx;
    grid.geom.np = np;
    grid.rho.resize(static_cast<std::size_t>(nx) * np);
    is.read(reinterpret_cast<char*>(grid.rho.data()),
            static_cast<std::streamsize>(grid.rho.size() * sizeof(double)));
    if (!is) throw InvalidValueError("snapshot", "truncated file");
    return grid;
}

} // namespace stochmech
