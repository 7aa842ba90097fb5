#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochmech/config.hpp"
#include "stochmech/covariance_oracle.hpp"
#include "stochmech/ensemble.hpp"
#include "stochmech/errors.hpp"
#include "stochmech/fokker_planck.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/stability.hpp"
#include "stochmech/version.hpp"

namespace stochmech {

/// One reported number. Every entry carries either a statistical uncertainty
/// or the `exact` marker, and names the reference expression plus tolerance
/// behind its verdict.
struct HeadlineEntry {
    std::string name;
    double value = 0.0;
    bool exact = false;
    double uncertainty = 0.0;
    std::string reference;
    std::string verdict; ///< "PASS", "FAIL" or "INFO"
};

struct RunSummary {
    std::string scenario;
    std::string model;
    ParamMap params;
    std::vector<HeadlineEntry> headline;
    std::size_t excluded_paths = 0;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    double wall_seconds = 0.0; ///< reported on stdout, never serialized

    bool all_pass() const {
        for (const auto& h : headline)
            if (h.verdict == "FAIL") return false;
        return true;
    }
};

struct RunOptions {
    std::string out_dir;   ///< empty: compute only, write nothing
    unsigned threads = 0;  ///< 0: hardware concurrency
    bool emit_plots = false;
};

namespace scenariodetail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline HeadlineEntry checked(std::string name, double value, double uncertainty, bool exact,
                             std::string reference, bool pass) {
    HeadlineEntry h;
    h.name = std::move(name);
    h.value = value;
    h.uncertainty = uncertainty;
    h.exact = exact;
    h.reference = std::move(reference);
    h.verdict = pass ? "PASS" : "FAIL";
    return h;
}

inline HeadlineEntry info(std::string name, double value, double uncertainty, bool exact,
                          std::string reference) {
    HeadlineEntry h;
    h.name = std::move(name);
    h.value = value;
    h.uncertainty = uncertainty;
    h.exact = exact;
    h.reference = std::move(reference);
    h.verdict = "INFO";
    return h;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size())
            throw Error("csv row width mismatch");
        rows_.push_back(row);
    }

    void write(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot open '" + path + "' for writing");
        for (std::size_t c = 0; c < columns_.size(); ++c)
            os << (c ? "," : "") << columns_[c];
        os << "\n";
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c)
                os << (c ? "," : "") << fmt(row[c]);
            os << "\n";
        }
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

/// Ensemble timeseries columns for one degree of freedom.
inline CsvWriter ensemble_csv(const EnsembleResult& r) {
    CsvWriter csv({"time", "mean_x", "mean_x_se", "var_x", "var_x_se", "mean_p", "mean_p_se",
                   "var_p", "var_p_se", "mean_E", "mean_E_se"});
    for (std::size_t t = 0; t < r.times.size(); ++t)
        csv.add_row({r.times[t], r.mean_x[t][0].value, r.mean_x[t][0].se, r.var_x[t][0].value,
                     r.var_x[t][0].se, r.mean_p[t][0].value, r.mean_p[t][0].se,
                     r.var_p[t][0].value, r.var_p[t][0].se, r.mean_energy[t].value,
                     r.mean_energy[t].se});
    return csv;
}

/// Max |ensemble - oracle| in units of the ensemble standard error, over
/// var_x and var_p at `points` evenly spaced sample times. Entries that are
/// exactly determined on both sides contribute zero.
inline double oracle_max_z(const EnsembleResult& ens, const CovarianceTrajectory& oracle,
                           std::size_t points = 5) {
    double worst = 0.0;
    const std::size_t n_times = ens.times.size();
    for (std::size_t k = 0; k < points; ++k) {
        const std::size_t idx = points == 1 ? n_times - 1 : (k * (n_times - 1)) / (points - 1);
        const auto check = [&](const MomentEstimate& est, double truth) {
            const double diff = std::abs(est.value - truth);
            if (est.se > 0.0)
                worst = std::max(worst, diff / est.se);
            else if (diff > 1e-12)
                worst = std::numeric_limits<double>::infinity();
        };
        check(ens.var_x[idx][0], oracle.var_x(idx));
        check(ens.var_p[idx][0], oracle.var_p(idx));
    }
    return worst;
}

inline void write_plot_script(const std::string& dir, ScenarioKind kind) {
    std::ofstream os(dir + "/plot.py", std::ios::binary);
    os << "#!/usr/bin/env python3\n"
          "\"\"\"Quick-look plot for the CSV written next to this script.\"\"\"\n"
          "import csv, os, sys\n"
          "import matplotlib\n"
          "matplotlib.use(\"Agg\")\n"
          "import matplotlib.pyplot as plt\n\n"
          "here = os.path.dirname(os.path.abspath(__file__))\n"
          "rows = list(csv.DictReader(open(os.path.join(here, \"timeseries.csv\"))))\n"
          "t = [float(r[\"time\"]) for r in rows]\n";
    switch (kind) {
        case ScenarioKind::ensemble:
        case ScenarioKind::kick_ensemble:
            os << "for col in (\"var_x\", \"var_p\"):\n"
                  "    y = [float(r[col]) for r in rows]\n"
                  "    plt.plot(t, y, label=col)\n"
                  "plt.xlabel(\"time\"); plt.ylabel(\"variance\"); plt.legend()\n"
                  "if max(float(r[\"var_x\"]) for r in rows) > 0:\n"
                  "    plt.yscale(\"log\")\n";
            break;
        case ScenarioKind::lyapunov:
            os << "cols = [c for c in rows[0] if c.startswith(\"lambda\")]\n"
                  "for col in cols:\n"
                  "    plt.plot(t, [float(r[col]) for r in rows], label=col)\n"
                  "plt.xlabel(\"time\"); plt.ylabel(\"running exponent\"); plt.legend()\n";
            break;
        case ScenarioKind::master_equation:
            os << "plt.plot(t, [float(r[\"entropy\"]) for r in rows], label=\"entropy\")\n"
                  "plt.xlabel(\"time\"); plt.ylabel(\"Gibbs entropy\"); plt.legend()\n";
            break;
        case ScenarioKind::analytic:
            os << "print(\"nothing to plot for analytic scenarios\"); sys.exit(0)\n";
            break;
    }
    os << "plt.savefig(os.path.join(here, \"plot.png\"), dpi=120)\n"
          "print(\"wrote plot.png\")\n";
}

inline void write_summary_json(const RunSummary& summary, const std::string& path) {
    nlohmann::ordered_json j;
    j["scenario"] = summary.scenario;
    j["model"] = summary.model;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : summary.params) params[k] = v;
    j["params"] = params;
    nlohmann::ordered_json head = nlohmann::ordered_json::array();
    for (const HeadlineEntry& h : summary.headline) {
        nlohmann::ordered_json e;
        e["name"] = h.name;
        e["value"] = h.value;
        if (h.exact)
            e["uncertainty"] = "exact";
        else
            e["uncertainty"] = h.uncertainty;
        e["reference"] = h.reference;
        e["verdict"] = h.verdict;
        head.push_back(e);
    }
    j["headline"] = head;
    j["excluded_paths"] = summary.excluded_paths;
    j["seed"] = summary.seed;
    j["version"] = summary.version;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

// --- per-kind runners -------------------------------------------------------

inline void run_analytic(const ScenarioConfig& cfg, RunSummary& out, CsvWriter& csv) {
    if (cfg.quantity == "free_mass_rms_drift") {
        const double m = cfg.model_params.at("m");
        const double rms = std::sqrt(cfg.hbar_eff * cfg.tau / (2.0 * m));
        const double target = 1.47e-5;
        const bool pass =
            std::abs(rms - target) <= 0.01 * target && rms > 0.316e-5 && rms < 3.16e-5;
        out.headline.push_back(checked(
            "rms_drift_cm", rms, 0.0, true,
            "closed form rms = sqrt(hbar tau / 2m); target 1.47e-5 cm within 1%, order 1e-5",
            pass));
        csv.add_row({0.0, rms});
    } else { // zero_point_energy
        const HamiltonianModel model = cfg.build_model();
        const Dispersions d = minimal_uncertainty_dispersions(model, cfg.hbar_eff);
        const double omega = cfg.model_params.at("omega");
        const double expected = 0.5 * cfg.hbar_eff * omega;
        out.headline.push_back(checked("mean_energy", d.mean_energy, 0.0, true,
                                       "<E> = hbar omega / 2", d.mean_energy == expected));
        const double product = d.var_x * d.var_p;
        const double target = 0.25 * cfg.hbar_eff * cfg.hbar_eff;
        out.headline.push_back(checked("uncertainty_product", product, 0.0, true,
                                       "var_x var_p = hbar^2/4 to machine precision",
                                       std::abs(product - target) <= 1e-14 * target));
        csv.add_row({0.0, d.mean_energy});
    }
}

inline void add_exclusion_check(const EnsembleResult& r, std::size_t requested, RunSummary& out) {
    const double frac = static_cast<double>(r.excluded) / static_cast<double>(requested);
    out.headline.push_back(checked("excluded_fraction", frac, 0.0, true,
                                   "truncated-path budget: 0.1% of N", frac <= 1e-3));
    out.excluded_paths += r.excluded;
}

inline void run_ensemble_scenario(const ScenarioConfig& cfg, const RunOptions& opt, RunSummary& out,
                                  CsvWriter& csv) {
    const HamiltonianModel model = cfg.build_model();
    const InitialDistribution init = cfg.initial_distribution();
    const NoiseSpec spec = cfg.noise_spec();
    const EnsembleResult r = run_ensemble(model, init, cfg.paths, cfg.horizon, cfg.dt, spec,
                                          cfg.samples, cfg.scheme, opt.threads);
    csv = ensemble_csv(r);
    add_exclusion_check(r, cfg.paths, out);

    if (model.name() == "free_particle" && cfg.gating == GatingPolicy::all_on &&
        cfg.hbar_eff > 0.0) {
        const double m = model.masses()[0];
        const double expected = 0.5 * cfg.hbar_eff / m;
        const SlopeFit fit = variance_slope(r, 0);
        const bool pass = std::abs(fit.slope - expected) <= 0.05 * expected && fit.contains(expected);
        out.headline.push_back(checked(
            "var_x_slope", fit.slope, fit.ci95_half, false,
            "diffusion law var_x(t) = (hbar/2m) t; slope within 5% of " + fmt(expected) +
                " and inside its own 95% CI",
            pass));
    }

    if (model.constant_hessian()) {
        const CovarianceTrajectory oracle =
            covariance_ode_oracle(model, init, spec, cfg.horizon, cfg.dt, cfg.samples);
        // oracle sample grid matches the ensemble grid by construction
        const double z = oracle_max_z(r, oracle);
        out.headline.push_back(checked(
            "oracle_max_sigma", z, 0.0, true,
            "second-moment equation dS/dt = M S + S M^T + Q; agreement within 3 standard errors "
            "at 5 sample times",
            z <= 3.0));
    }

    if (cfg.has_fit_window && model.name() == "inverted") {
        const double lambda = cfg.model_params.at("lambda");
        const ExponentialFit fit =
            exponential_rate_fit(r, 0, cfg.fit_window_begin, cfg.fit_window_end);
        out.headline.push_back(checked("growth_rate", fit.rate, fit.rate_ci95_half, false,
                                       "exponential variance growth at rate 2 lambda, within 2%",
                                       std::abs(fit.rate - 2.0 * lambda) <= 0.02 * 2.0 * lambda));
        out.headline.push_back(info("growth_prefactor", fit.prefactor, 0.0, false,
                                    "fitted prefactor of var_x ~ C exp(2 lambda t)"));
    }

    if (cfg.init_x == 0.0 && cfg.init_p == 0.0) {
        double worst = 0.0;
        for (std::size_t t = 0; t < r.times.size(); ++t) {
            const MomentEstimate& m = r.mean_x[t][0];
            if (m.se > 0.0) worst = std::max(worst, std::abs(m.value) / m.se);
        }
        out.headline.push_back(checked("mean_x_max_sigma", worst, 0.0, true,
                                       "zero-mean noise keeps mean_x at 0 within 4.5 standard errors",
                                       worst <= 4.5));
    }
}

inline void run_kick_scenario(const ScenarioConfig& cfg, const RunOptions& opt, RunSummary& out,
                              CsvWriter& csv) {
    const HamiltonianModel model = cfg.build_model();
    const double lambda = cfg.model_params.at("lambda");
    const double m = cfg.model_params.at("m");
    const EnsembleResult r = kick_ensemble(model, cfg.hbar_eff, cfg.paths, cfg.horizon, cfg.dt,
                                           cfg.seed, cfg.samples, opt.threads);
    csv = ensemble_csv(r);
    add_exclusion_check(r, cfg.paths, out);

    // terminal variance against the exact propagation of the initial kick
    const std::size_t last = r.times.size() - 1;
    const double T = r.times[last];
    const double expected_var =
        (0.5 * cfg.hbar_eff / (m * lambda)) * std::cosh(2.0 * lambda * T);
    const MomentEstimate& vx = r.var_x[last][0];
    out.headline.push_back(checked(
        "var_x_final", vx.value, vx.se, false,
        "kick-propagated variance (hbar/2 m lambda) cosh(2 lambda t) = " + fmt(expected_var) +
            " at t = " + fmt(T) + ", within 5%",
        std::abs(vx.value - expected_var) <= 0.05 * expected_var));

    if (cfg.has_fit_window) {
        const ExponentialFit fit =
            exponential_rate_fit(r, 0, cfg.fit_window_begin, cfg.fit_window_end);
        out.headline.push_back(checked("growth_rate", fit.rate, fit.rate_ci95_half, false,
                                       "trigger law exponent 2 lambda, within 2%",
                                       std::abs(fit.rate - 2.0 * lambda) <= 0.02 * 2.0 * lambda));
        const double expected_prefactor = 0.25 * cfg.hbar_eff / (m * lambda);
        out.headline.push_back(checked(
            "growth_prefactor", fit.prefactor, 0.0, false,
            "trigger law prefactor hbar/4 m lambda = " + fmt(expected_prefactor) + ", within 10%",
            std::abs(fit.prefactor - expected_prefactor) <= 0.10 * expected_prefactor));
    }

    // uncertainty product at t = 0
    const MomentEstimate& vx0 = r.var_x[0][0];
    const MomentEstimate& vp0 = r.var_p[0][0];
    const double product = vx0.value * vp0.value;
    const double target = 0.25 * cfg.hbar_eff * cfg.hbar_eff;
    const double rel_se = std::sqrt(std::pow(vx0.se / vx0.value, 2) + std::pow(vp0.se / vp0.value, 2));
    out.headline.push_back(checked("uncertainty_product_t0", product, product * rel_se, false,
                                   "initial dispersions satisfy var_x var_p = hbar^2/4 within 3 "
                                   "standard errors",
                                   std::abs(product - target) <= 3.0 * product * rel_se));

    if (cfg.continuous_comparison) {
        // same trigger driven by in-flight noise instead of an initial kick
        NoiseSpec spec = cfg.noise_spec();
        const std::size_t n_cont = std::max<std::size_t>(2000, cfg.paths / 10);
        const double horizon = std::min(cfg.horizon, 3.0);
        const InitialDistribution init = InitialDistribution::point_at(PhaseState(0.0, 0.0));
        const EnsembleResult c = run_ensemble(model, init, n_cont, horizon, cfg.dt, spec, 30,
                                              Scheme::heun, opt.threads);
        const CovarianceTrajectory oracle = covariance_ode_oracle(model, init, spec, horizon, cfg.dt, 30);
        const double z = oracle_max_z(c, oracle);
        out.headline.push_back(checked(
            "continuous_oracle_max_sigma", z, 0.0, true,
            "continuous-noise trigger against the second-moment equation, 3 standard errors", z <= 3.0));
        out.excluded_paths += c.excluded;
    }
}

struct LyapunovDefaults {
    ParamMap params;
    PhaseState initial;
};

inline LyapunovDefaults lyapunov_defaults(const std::string& model) {
    if (model == "free_particle") return {{{"m", 1.0}}, PhaseState(0.0, 1.0)};
    if (model == "harmonic") return {{{"m", 1.0}, {"omega", 1.0}}, PhaseState(1.0, 0.0)};
    if (model == "inverted") return {{{"m", 1.0}, {"lambda", 1.0}}, PhaseState(1.0, 0.0)};
    if (model == "pendulum") return {{{"m", 1.0}, {"gl", 1.0}}, PhaseState(1.0, 0.0)};
    if (model == "double_well")
        return {{{"m", 1.0}, {"depth", 1.0}, {"x0", 1.0}}, PhaseState(1.3, 0.0)};
    throw UnknownModelError(model);
}

inline void run_lyapunov_scenario(const ScenarioConfig& cfg, RunSummary& out, CsvWriter& csv) {
    std::vector<std::string> models = cfg.models;
    if (models.empty()) models.push_back(cfg.model);

    csv = CsvWriter({"time", "model_index", "lambda_1", "lambda_2"});
    std::string model_list;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const std::string& name = models[mi];
        LyapunovDefaults defaults = lyapunov_defaults(name);
        ParamMap params = defaults.params;
        if (models.size() == 1 && !cfg.model_params.empty()) params = cfg.model_params;
        PhaseState initial = defaults.initial;
        if (cfg.init_x != 0.0 || cfg.init_p != 0.0) initial = PhaseState(cfg.init_x, cfg.init_p);

        const HamiltonianModel model = builtin_model(name, params);
        const LyapunovReport rep =
            lyapunov_spectrum(model, initial, cfg.horizon, cfg.dt, cfg.renorm_interval);
        for (std::size_t k = 0; k < rep.history.size(); ++k)
            csv.add_row({(static_cast<double>(k) + 1.0) * cfg.renorm_interval,
                         static_cast<double>(mi), rep.history[k][0], rep.history[k][1]});

        const std::string prefix = name + ".";
        if (!rep.valid) {
            out.headline.push_back(checked(prefix + "valid", 0.0, 0.0, true,
                                           "trajectory stayed finite to the horizon", false));
            continue;
        }
        if (name == "inverted") {
            const double lambda = params.at("lambda");
            const bool pass = std::abs(rep.spectrum.front() - lambda) <= 0.01 * lambda &&
                              std::abs(rep.spectrum.back() + lambda) <= 0.01 * lambda;
            out.headline.push_back(checked(prefix + "lambda_max", rep.spectrum.front(), 0.0, false,
                                           "spectrum {+lambda, -lambda} with lambda = " + fmt(lambda) +
                                               ", within 1%",
                                           pass));
            out.headline.push_back(checked(prefix + "ks_entropy", rep.ks_entropy, 0.0, false,
                                           "h = sum of positive exponents = lambda, within 1%",
                                           std::abs(rep.ks_entropy - lambda) <= 0.01 * lambda));
        } else if (name == "harmonic" || name == "free_particle") {
            double max_abs = 0.0;
            for (double l : rep.spectrum) max_abs = std::max(max_abs, std::abs(l));
            out.headline.push_back(checked(prefix + "lambda_max", rep.spectrum.front(), 0.0, false,
                                           "stable flow: |lambda_i| < 1e-3 and h < 1e-3",
                                           max_abs < 1e-3 && rep.ks_entropy < 1e-3));
        } else {
            out.headline.push_back(info(prefix + "lambda_max", rep.spectrum.front(), 0.0, false,
                                        "integrable 1-DOF flow; exponent decays like log t / t"));
            out.headline.push_back(info(prefix + "ks_entropy", rep.ks_entropy, 0.0, false,
                                        "positive-exponent sum at this horizon"));
        }
        model_list += (model_list.empty() ? "" : "+") + name;
    }
    if (models.size() > 1) out.model = model_list;
}

inline void run_master_equation_scenario(const ScenarioConfig& cfg, const RunOptions& opt,
                                         RunSummary& out, CsvWriter& csv,
                                         DistributionGrid* final_grid) {
    const HamiltonianModel model = cfg.build_model();

    auto evolve_once = [&](const GridGeometry& geom) {
        const DistributionGrid grid = build_grid(geom, cfg.initial_distribution());
        MasterEqConfig mc;
        mc.hbar_eff = cfg.hbar_eff;
        mc.gating = cfg.gating;
        mc.dt = cfg.dt;
        mc.strang = cfg.grid.strang;
        mc.entropy_interval = cfg.grid.entropy_interval;
        mc.stationarity_threshold = cfg.grid.stationarity_threshold;
        return evolve_master_equation(model, grid, cfg.horizon, mc, opt.threads);
    };

    const MasterEqResult res = evolve_once(cfg.grid.geom);

    csv = CsvWriter({"time", "entropy", "l1_rate", "mass_error", "min_rho"});
    for (std::size_t k = 0; k < res.sample_times.size(); ++k)
        csv.add_row({res.sample_times[k], res.entropy[k], res.l1_rate[k], res.mass_error[k],
                     res.min_density[k]});

    double worst_mass = 0.0, min_rho = 0.0;
    for (double e : res.mass_error) worst_mass = std::max(worst_mass, e);
    for (double v : res.min_density) min_rho = std::min(min_rho, v);
    out.headline.push_back(checked("mass_error_max", worst_mass, 0.0, true,
                                   "mass conserved to 1e-12 after every sampled step",
                                   worst_mass < 1e-12));
    out.headline.push_back(checked("min_density", min_rho, 0.0, true,
                                   "density stays non-negative", min_rho >= 0.0));

    const bool diffusive = cfg.hbar_eff > 0.0 && cfg.gating != GatingPolicy::off;
    double min_dS = 0.0;
    for (std::size_t k = 1; k < res.entropy.size(); ++k)
        min_dS = std::min(min_dS, res.entropy[k] - res.entropy[k - 1]);
    if (diffusive) {
        out.headline.push_back(checked("entropy_min_increment", min_dS, 0.0, true,
                                       "H-theorem: Gibbs entropy non-decreasing between samples "
                                       "(tolerance -1e-9)",
                                       min_dS >= -1e-9));
        if (cfg.grid.stationarity_threshold > 0.0) {
            out.headline.push_back(checked(
                "stationary_time", res.stationary ? res.stationary_time : -1.0, 0.0, true,
                "L1 change per unit time below " + fmt(cfg.grid.stationarity_threshold) +
                    " before the horizon",
                res.stationary));
        }
    } else {
        const double floor_s = std::abs(res.entropy.back() - res.entropy.front());
        out.headline.push_back(info("entropy_drift", floor_s, 0.0, false,
                                    "advection-only limit: entropy change is pure numerical "
                                    "diffusion"));
        if (cfg.grid.refine_check) {
            GridGeometry fine = cfg.grid.geom;
            fine.nx *= 2;
            fine.np *= 2;
            const MasterEqResult res2 = evolve_once(fine);
            const double floor_fine = std::abs(res2.entropy.back() - res2.entropy.front());
            out.headline.push_back(checked(
                "entropy_drift_refined", floor_fine, 0.0, false,
                "numerical entropy floor shrinks under 2x grid refinement", floor_fine < floor_s));
        }
    }
    out.headline.push_back(info("entropy_final", res.entropy.back(), 0.0, false,
                                "Gibbs entropy at the end of the run"));
    if (final_grid) *final_grid = res.final_grid;
}

} // namespace scenariodetail

/// Runs one scenario, writes timeseries.csv / summary.json (and optional plot
/// script and grid snapshots) into opt.out_dir, and returns the summary.
inline RunSummary run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
    using namespace scenariodetail;
    const auto t0 = std::chrono::steady_clock::now();

    RunSummary summary;
    summary.scenario = cfg.display_name;
    summary.model = cfg.models.empty() ? cfg.model : cfg.model;
    summary.params = cfg.model_params;
    summary.seed = cfg.seed;

    CsvWriter csv({"time", "value"});
    DistributionGrid final_grid;
    bool have_grid = false;

    switch (cfg.kind) {
        case ScenarioKind::analytic:
            run_analytic(cfg, summary, csv);
            break;
        case ScenarioKind::ensemble:
            run_ensemble_scenario(cfg, opt, summary, csv);
            break;
        case ScenarioKind::kick_ensemble:
            run_kick_scenario(cfg, opt, summary, csv);
            break;
        case ScenarioKind::lyapunov:
            run_lyapunov_scenario(cfg, summary, csv);
            break;
        case ScenarioKind::master_equation:
            run_master_equation_scenario(cfg, opt, summary, csv, &final_grid);
            have_grid = true;
            break;
    }

    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        csv.write(opt.out_dir + "/timeseries.csv");
        write_summary_json(summary, opt.out_dir + "/summary.json");
        if (have_grid) {
            std::ofstream cs(opt.out_dir + "/grid_final.csv", std::ios::binary);
            write_grid_csv(final_grid, cs);
            std::ofstream bs(opt.out_dir + "/grid_final.shfp", std::ios::binary);
            write_grid_binary(final_grid, bs);
        }
        if (opt.emit_plots) write_plot_script(opt.out_dir, cfg.kind);
    }
    return summary;
}

/// A named built-in scenario: the configuration text is a complete document
/// that round-trips through parse_config.
struct CatalogEntry {
    std::string name;
    std::string description;
    std::string config_text;
};

inline const std::vector<CatalogEntry>& scenario_catalog() {
    static const std::vector<CatalogEntry> entries = {
        {"free_mass_universe_age",
         "rms drift of a 1 g free mass over the age of the universe (closed form, cgs)",
         "scenario = \"analytic\"\n"
         "name = \"free_mass_universe_age\"\n"
         "quantity = \"free_mass_rms_drift\"\n"
         "model = \"free_particle\"\n"
         "m = 1.0\n"
         "units = \"cgs\"\n"
         "tau = 4.10e17\n"},
        {"zero_point",
         "minimal-uncertainty mean energy of a gram-scale oscillator (closed form, cgs)",
         "scenario = \"analytic\"\n"
         "name = \"zero_point\"\n"
         "quantity = \"zero_point_energy\"\n"
         "model = \"harmonic\"\n"
         "m = 1.0\n"
         "omega = 1.0\n"
         "units = \"cgs\"\n"},
        {"free_diffusion",
         "free-particle coordinate diffusion: fitted variance slope against hbar/2m",
         "scenario = \"ensemble\"\n"
         "name = \"free_diffusion\"\n"
         "model = \"free_particle\"\n"
         "m = 1.0\n"
         "hbar_eff = 1.0\n"
         "gating = \"all_on\"\n"
         "N = 10000\n"
         "dt = 1e-3\n"
         "horizon = 2.0\n"
         "samples = 40\n"},
        {"inverted_trigger",
         "exponential trigger on the inverted oscillator: kick ensemble plus "
         "continuous-noise cross-check",
         "scenario = \"kick_ensemble\"\n"
         "name = \"inverted_trigger\"\n"
         "model = \"inverted\"\n"
         "m = 1.0\n"
         "lambda = 1.0\n"
         "hbar_eff = 1.0\n"
         "N = 100000\n"
         "dt = 1e-3\n"
         "horizon = 6.0\n"
         "samples = 60\n"
         "fit_window = [3.0, 6.0]\n"
         "continuous_comparison = true\n"},
        {"lyapunov_zoo",
         "Lyapunov spectra and KS entropy across the whole model catalog",
         "scenario = \"lyapunov\"\n"
         "name = \"lyapunov_zoo\"\n"
         "models = [\"free_particle\", \"harmonic\", \"inverted\", \"pendulum\", \"double_well\"]\n"
         "horizon = 100.0\n"
         "dt = 1e-3\n"
         "renorm_interval = 0.5\n"},
        {"pendulum_relaxation",
         "irreversible relaxation of a pendulum ensemble on a 256^2 phase-space grid",
         "scenario = \"master_equation\"\n"
         "name = \"pendulum_relaxation\"\n"
         "model = \"pendulum\"\n"
         "m = 1.0\n"
         "gl = 1.0\n"
         "hbar_eff = 0.05\n"
         "gating = \"unstable_only\"\n"
         "dt = 8e-3\n"
         "horizon = 2400.0\n"
         "nx = 256\n"
         "np = 256\n"
         "x_min = -3.141592653589793\n"
         "x_max = 3.141592653589793\n"
         "p_min = -3.0\n"
         "p_max = 3.0\n"
         "boundary_x = \"periodic\"\n"
         "boundary_p = \"zero_flux\"\n"
         "init_x = 0.0\n"
         "init_p = 2.2\n"
         "init_var_x = 0.04\n"
         "init_var_p = 0.04\n"
         "entropy_interval = 2.0\n"
         "stationarity_threshold = 1e-4\n"},
        {"liouville_limit",
         "hbar = 0 limit: harmonic rotation conserves entropy within a floor that "
         "shrinks under refinement",
         "scenario = \"master_equation\"\n"
         "name = \"liouville_limit\"\n"
         "model = \"harmonic\"\n"
         "m = 1.0\n"
         "omega = 1.0\n"
         "hbar_eff = 0.0\n"
         "dt = 3.9269908169872414e-3\n"
         "horizon = 6.283185307179586\n"
         "nx = 64\n"
         "np = 64\n"
         "x_min = -3.0\n"
         "x_max = 3.0\n"
         "p_min = -3.0\n"
         "p_max = 3.0\n"
         "init_x = 1.0\n"
         "init_p = 0.0\n"
         "init_var_x = 0.1\n"
         "init_var_p = 0.1\n"
         "entropy_interval = 0.5\n"
         "stationarity_threshold = 0.0\n"
         "refine_check = true\n"},
    };
    return entries;
}

inline const CatalogEntry* find_catalog_entry(const std::string& name) {
    for (const CatalogEntry& e : scenario_catalog())
        if (e.name == name) return &e;
    return nullptr;
}

} // namespace stochmech
