#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "stochmech/errors.hpp"
#include "stochmech/phase_state.hpp"

namespace stochmech {

using ParamMap = std::map<std::string, double>;

struct Derivatives {
    std::vector<double> dH_dx;
    std::vector<double> dH_dp;
};

namespace detail {

/// Implementation hook behind HamiltonianModel. Evaluations must be pure and
/// deterministic functions of the state.
class HamiltonianImpl {
public:
    HamiltonianImpl(std::string name, std::vector<double> masses, ParamMap params)
        : name_(std::move(name)), masses_(std::move(masses)), params_(std::move(params)) {}
    virtual ~HamiltonianImpl() = default;

    const std::string& name() const { return name_; }
    std::size_t dof() const { return masses_.size(); }
    const std::vector<double>& masses() const { return masses_; }
    const ParamMap& params() const { return params_; }

    virtual double energy(const PhaseState& s) const {
        double e = potential(s.x);
        for (std::size_t i = 0; i < dof(); ++i) e += s.p[i] * s.p[i] / (2.0 * masses_[i]);
        return e;
    }

    virtual void derivatives(const PhaseState& s, Derivatives& out) const {
        potential_gradient(s.x, out.dH_dx);
        out.dH_dp.resize(dof());
        for (std::size_t i = 0; i < dof(); ++i) out.dH_dp[i] = s.p[i] / masses_[i];
    }

    virtual void hessian(const PhaseState& s, HessianBlocks& out) const {
        potential_hessian(s.x, out.Axx);
        out.Bpp = SquareMatrix(dof());
        for (std::size_t i = 0; i < dof(); ++i) out.Bpp(i, i) = 1.0 / masses_[i];
        out.Cxp = SquareMatrix(dof());
    }

    virtual double potential(const std::vector<double>& x) const = 0;
    virtual void potential_gradient(const std::vector<double>& x, std::vector<double>& out) const = 0;
    virtual void potential_hessian(const std::vector<double>& x, SquareMatrix& out) const = 0;

    /// Quadratic models have a state-independent Hessian; several engines
    /// cache on this.
    virtual bool constant_hessian() const { return false; }
    virtual bool periodic(std::size_t) const { return false; }

private:
    std::string name_;
    std::vector<double> masses_;
    ParamMap params_;
};

} // namespace detail

/// A Hamiltonian H(x, p): energy, derivatives, Hessian blocks, masses and
/// named parameters. Immutable after construction; cheap to copy and safe to
/// share across threads.
class HamiltonianModel {
public:
    explicit HamiltonianModel(std::shared_ptr<const detail::HamiltonianImpl> impl)
        : impl_(std::move(impl)) {}

    const std::string& name() const { return impl_->name(); }
    std::size_t dof() const { return impl_->dof(); }
    const std::vector<double>& masses() const { return impl_->masses(); }
    const ParamMap& parameters() const { return impl_->params(); }
    bool constant_hessian() const { return impl_->constant_hessian(); }
    bool periodic_coordinate(std::size_t i) const { return impl_->periodic(i); }

    double energy(const PhaseState& s) const {
        check_dimension(s);
        return impl_->energy(s);
    }

    Derivatives derivatives(const PhaseState& s) const {
        check_dimension(s);
        Derivatives d;
        impl_->derivatives(s, d);
        return d;
    }

    void derivatives_into(const PhaseState& s, Derivatives& d) const {
        check_dimension(s);
        impl_->derivatives(s, d);
    }

    HessianBlocks hessian(const PhaseState& s) const {
        check_dimension(s);
        HessianBlocks h;
        impl_->hessian(s, h);
        return h;
    }

    /// Wraps periodic coordinates into [-pi, pi). Identity for everything else.
    void normalize(PhaseState& s) const {
        for (std::size_t i = 0; i < dof(); ++i) {
            if (!impl_->periodic(i)) continue;
            const double two_pi = 2.0 * std::numbers::pi;
            double v = std::remainder(s.x[i], two_pi); // (-pi, pi]
            if (v == std::numbers::pi) v = -std::numbers::pi;
            s.x[i] = v;
        }
    }

    void check_dimension(const PhaseState& s) const {
        if (s.x.size() != dof() || s.p.size() != dof())
            throw DimensionMismatchError(dof(), s.x.size());
    }

private:
    std::shared_ptr<const detail::HamiltonianImpl> impl_;
};

namespace detail {

inline double require_param(const std::string& model, const ParamMap& params,
                            const std::string& key, bool positive) {
    auto it = params.find(key);
    if (it == params.end()) throw MissingParameterError(model, key);
    if (positive && !(it->second > 0.0))
        throw NonPositiveParameterError(model, key, it->second);
    return it->second;
}

inline void reject_unknown_params(const std::string& model, const ParamMap& params,
                                  std::initializer_list<const char*> known) {
    for (const auto& [key, _] : params) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) { ok = true; break; }
        if (!ok) throw InvalidValueError(key, "not a parameter of model '" + model + "'");
    }
}

class FreeParticle final : public HamiltonianImpl {
public:
    FreeParticle(double m, ParamMap params)
        : HamiltonianImpl("free_particle", {m}, std::move(params)) {}
    double potential(const std::vector<double>&) const override { return 0.0; }
    void potential_gradient(const std::vector<double>&, std::vector<double>& out) const override {
        out.assign(1, 0.0);
    }
    void potential_hessian(const std::vector<double>&, SquareMatrix& out) const override {
        out = SquareMatrix(1);
    }
    bool constant_hessian() const override { return true; }
};

class Harmonic final : public HamiltonianImpl {
public:
    Harmonic(double m, double omega, ParamMap params)
        : HamiltonianImpl("harmonic", {m}, std::move(params)), k_(m * omega * omega) {}
    double potential(const std::vector<double>& x) const override { return 0.5 * k_ * x[0] * x[0]; }
    void potential_gradient(const std::vector<double>& x, std::vector<double>& out) const override {
        out.assign(1, k_ * x[0]);
    }
    void potential_hessian(const std::vector<double>&, SquareMatrix& out) const override {
        out = SquareMatrix(1);
        out(0, 0) = k_;
    }
    bool constant_hessian() const override { return true; }
private:
    double k_; // m * omega^2
};

class Inverted final : public HamiltonianImpl {
public:
    Inverted(double m, double lambda, ParamMap params)
        : HamiltonianImpl("inverted", {m}, std::move(params)), k_(m * lambda * lambda) {}
    double potential(const std::vector<double>& x) const override { return -0.5 * k_ * x[0] * x[0]; }
    void potential_gradient(const std::vector<double>& x, std::vector<double>& out) const override {
        out.assign(1, -k_ * x[0]);
    }
    void potential_hessian(const std::vector<double>&, SquareMatrix& out) const override {
        out = SquareMatrix(1);
        out(0, 0) = -k_;
    }
    bool constant_hessian() const override { return true; }
private:
    double k_; // m * lambda^2
};

/// V(x) = -m*gl*cos(x), angle measured from the stable equilibrium.
class Pendulum final : public HamiltonianImpl {
public:
    Pendulum(double m, double gl, ParamMap params)
        : HamiltonianImpl("pendulum", {m}, std::move(params)), mgl_(m * gl) {}
    double potential(const std::vector<double>& x) const override { return -mgl_ * std::cos(x[0]); }
    void potential_gradient(const std::vector<double>& x, std::vector<double>& out) const override {
        out.assign(1, mgl_ * std::sin(x[0]));
    }
    void potential_hessian(const std::vector<double>& x, SquareMatrix& out) const override {
        out = SquareMatrix(1);
        out(0, 0) = mgl_ * std::cos(x[0]);
    }
    bool periodic(std::size_t) const override { return true; }
private:
    double mgl_;
};

/// V(x) = depth * ((x/x0)^2 - 1)^2: barrier `depth` at x=0, minima at +-x0.
class DoubleWell final : public HamiltonianImpl {
public:
    DoubleWell(double m, double depth, double x0, ParamMap params)
        : HamiltonianImpl("double_well", {m}, std::move(params)), d_(depth), x0_(x0) {}
    double potential(const std::vector<double>& x) const override {
        const double u = x[0] / x0_;
        const double w = u * u - 1.0;
        return d_ * w * w;
    }
    void potential_gradient(const std::vector<double>& x, std::vector<double>& out) const override {
        const double u = x[0] / x0_;
        out.assign(1, 4.0 * d_ * u * (u * u - 1.0) / x0_);
    }
    void potential_hessian(const std::vector<double>& x, SquareMatrix& out) const override {
        const double u = x[0] / x0_;
        out = SquareMatrix(1);
        out(0, 0) = 4.0 * d_ * (3.0 * u * u - 1.0) / (x0_ * x0_);
    }
private:
    double d_, x0_;
};

} // namespace detail

/// Instantiates a catalog model by name. Catalog:
///   free_particle(m), harmonic(m, omega), inverted(m, lambda),
///   pendulum(m, gl), double_well(m, depth, x0)
inline HamiltonianModel builtin_model(const std::string& name, const ParamMap& params) {
    using namespace detail;
    if (name == "free_particle") {
        reject_unknown_params(name, params, {"m"});
        const double m = require_param(name, params, "m", true);
        return HamiltonianModel(std::make_shared<FreeParticle>(m, params));
    }
    if (name == "harmonic") {
        reject_unknown_params(name, params, {"m", "omega"});
        const double m = require_param(name, params, "m", true);
        const double omega = require_param(name, params, "omega", true);
        return HamiltonianModel(std::make_shared<Harmonic>(m, omega, params));
    }
    if (name == "inverted") {
        reject_unknown_params(name, params, {"m", "lambda"});
        const double m = require_param(name, params, "m", true);
        const double lambda = require_param(name, params, "lambda", true);
        return HamiltonianModel(std::make_shared<Inverted>(m, lambda, params));
    }
    if (name == "pendulum") {
        reject_unknown_params(name, params, {"m", "gl"});
        const double m = require_param(name, params, "m", true);
        const double gl = require_param(name, params, "gl", true);
        return HamiltonianModel(std::make_shared<Pendulum>(m, gl, params));
    }
    if (name == "double_well") {
        reject_unknown_params(name, params, {"m", "depth", "x0"});
        const double m = require_param(name, params, "m", true);
        const double depth = require_param(name, params, "depth", true);
        const double x0 = require_param(name, params, "x0", true);
        return HamiltonianModel(std::make_shared<DoubleWell>(m, depth, x0, params));
    }
    throw UnknownModelError(name);
}

/// Parameter names builtin_model accepts for each catalog entry.
inline const std::vector<std::string>& model_parameter_names(const std::string& name) {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"free_particle", {"m"}},
        {"harmonic", {"m", "omega"}},
        {"inverted", {"m", "lambda"}},
        {"pendulum", {"m", "gl"}},
        {"double_well", {"m", "depth", "x0"}},
    };
    auto it = table.find(name);
    if (it == table.end()) throw UnknownModelError(name);
    return it->second;
}

inline const std::vector<std::string>& catalog_model_names() {
    static const std::vector<std::string> names = {
        "free_particle", "harmonic", "inverted", "pendulum", "double_well"};
    return names;
}

/// Ground-state-style dispersions and mean energy for the quadratic wells.
struct Dispersions {
    double var_x = 0.0;
    double var_p = 0.0;
    double mean_energy = 0.0;
    /// False on the inverted oscillator, whose "mean energy" has no minimum.
    bool mean_energy_defined = true;
};

/// Minimal-uncertainty dispersions: the variance pair that satisfies
/// var_x * var_p = hbar^2/4 while minimising the mean energy.
///
/// harmonic: var_x = hbar/(2 m omega), var_p = hbar m omega / 2,
///           mean_energy = hbar omega / 2.
/// inverted: same with lambda in place of omega; mean energy is flagged
///           undefined (the quadratic hill has no energy minimum).
/// hbar = 0 returns all zeros for any model.
inline Dispersions minimal_uncertainty_dispersions(const HamiltonianModel& model, double hbar_eff) {
    if (hbar_eff < 0.0) throw InvalidValueError("hbar_eff", "must be >= 0");
    if (hbar_eff == 0.0) return Dispersions{0.0, 0.0, 0.0, true};

    const std::string& name = model.name();
    const double m = model.masses().at(0);
    if (name == "harmonic") {
        const double omega = model.parameters().at("omega");
        return Dispersions{hbar_eff / (2.0 * m * omega), 0.5 * hbar_eff * m * omega,
                           0.5 * hbar_eff * omega, true};
    }
    if (name == "inverted") {
        const double lambda = model.parameters().at("lambda");
        return Dispersions{hbar_eff / (2.0 * m * lambda), 0.5 * hbar_eff * m * lambda, 0.0, false};
    }
    throw UnsupportedModelError("minimal_uncertainty_dispersions: model '" + name +
                                "' is not a quadratic well");
}

} // namespace stochmech
