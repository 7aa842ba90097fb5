#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stochmech/errors.hpp"
#include "stochmech/fokker_planck.hpp"
#include "stochmech/hamiltonian.hpp"
#include "stochmech/sde.hpp"

namespace stochmech {

/// Physical hbar in CGS units (erg s), used by scenarios declaring cgs units.
inline constexpr double kHbarCgs = 1.0546e-27;

namespace toml_lite {

/// One parsed value. Scenario documents are flat `key = value` files with
/// strings, numbers, booleans and one-line arrays; that is the whole grammar.
struct Value {
    enum class Kind { number, string, boolean, number_array, string_array };
    Kind kind = Kind::number;
    double num = 0.0;
    std::string str;
    bool boolean = false;
    std::vector<double> nums;
    std::vector<std::string> strs;
    std::string raw; ///< original token, for exact integer re-parsing
    std::size_t line = 0, col = 0;
};

using Table = std::map<std::string, Value>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(k[0])) && k[0] != '_') return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

inline bool parse_number(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    const char* begin = tok.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + tok.size();
}

inline Value parse_scalar(const std::string& tok, std::size_t line, std::size_t col) {
    Value v;
    v.raw = tok;
    v.line = line;
    v.col = col;
    if (tok.size() >= 2 && tok.front() == '"') {
        if (tok.back() != '"' || tok.size() < 2)
            throw ConfigSyntaxError(line, col, "unterminated string");
        v.kind = Value::Kind::string;
        v.str = tok.substr(1, tok.size() - 2);
        if (v.str.find('"') != std::string::npos)
            throw ConfigSyntaxError(line, col, "stray quote inside string");
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = tok == "true";
        return v;
    }
    if (parse_number(tok, v.num)) {
        v.kind = Value::Kind::number;
        return v;
    }
    throw ConfigSyntaxError(line, col, "cannot parse value '" + tok + "'");
}

} // namespace detail

/// Parses a flat key = value document. Comments start at '#' outside strings;
/// arrays are single-line and homogeneous. Errors carry line:column.
inline Table parse(const std::string& text) {
    Table table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        // strip comment (respecting quotes)
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line = line.substr(0, i);
                break;
            }
        }
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '[')
            throw ConfigSyntaxError(line_no, 1, "tables are not supported; use flat key = value");

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigSyntaxError(line_no, 1, "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (!detail::valid_key(key))
            throw ConfigSyntaxError(line_no, 1, "bad key '" + key + "'");
        if (table.count(key))
            throw ConfigSyntaxError(line_no, 1, "duplicate key '" + key + "'");
        const std::string value_str = detail::trim(line.substr(eq + 1));
        const std::size_t vcol = eq + 2;
        if (value_str.empty())
            throw ConfigSyntaxError(line_no, vcol, "missing value for '" + key + "'");

        if (value_str.front() == '[') {
            if (value_str.back() != ']')
                throw ConfigSyntaxError(line_no, vcol, "array must close on the same line");
            Value v;
            v.line = line_no;
            v.col = vcol;
            v.raw = value_str;
            std::string body = value_str.substr(1, value_str.size() - 2);
            std::vector<std::string> items;
            std::string cur;
            bool instr = false;
            for (char c : body) {
                if (c == '"') instr = !instr;
                if (c == ',' && !instr) {
                    items.push_back(detail::trim(cur));
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            if (!detail::trim(cur).empty()) items.push_back(detail::trim(cur));
            bool any_string = false, any_number = false;
            for (const std::string& item : items) {
                const Value sv = detail::parse_scalar(item, line_no, vcol);
                if (sv.kind == Value::Kind::string) {
                    any_string = true;
                    v.strs.push_back(sv.str);
                } else if (sv.kind == Value::Kind::number) {
                    any_number = true;
                    v.nums.push_back(sv.num);
                } else {
                    throw ConfigSyntaxError(line_no, vcol, "arrays hold numbers or strings");
                }
            }
            if (any_string && any_number)
                throw ConfigSyntaxError(line_no, vcol, "mixed array types");
            v.kind = any_string ? Value::Kind::string_array : Value::Kind::number_array;
            table.emplace(key, std::move(v));
        } else {
            table.emplace(key, detail::parse_scalar(value_str, line_no, vcol));
        }
    }
    return table;
}

} // namespace toml_lite

enum class ScenarioKind { ensemble, kick_ensemble, lyapunov, master_equation, analytic };

inline const char* to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::ensemble: return "ensemble";
        case ScenarioKind::kick_ensemble: return "kick_ensemble";
        case ScenarioKind::lyapunov: return "lyapunov";
        case ScenarioKind::master_equation: return "master_equation";
        case ScenarioKind::analytic: return "analytic";
    }
    return "?";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "ensemble") return ScenarioKind::ensemble;
    if (s == "kick_ensemble") return ScenarioKind::kick_ensemble;
    if (s == "lyapunov") return ScenarioKind::lyapunov;
    if (s == "master_equation") return ScenarioKind::master_equation;
    if (s == "analytic") return ScenarioKind::analytic;
    throw InvalidValueError("scenario", "unknown scenario kind '" + s + "'");
}

/// Master-Equation grid settings carried by a scenario.
struct GridSettings {
    GridGeometry geom;
    double entropy_interval = 1.0;
    double stationarity_threshold = 1e-6;
    bool strang = true;
    bool refine_check = false; ///< also run at doubled resolution and compare entropy floors
};

/// Fully validated scenario description with documented defaults applied
/// (dt = 1e-3, N = 10^4, gating = unstable_only, hbar_eff = 1, seed = 42).
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::ensemble;
    std::string display_name;

    std::string model;
    std::vector<std::string> models; ///< lyapunov sweeps over several models
    ParamMap model_params;

    std::string units = "model"; ///< "model" or "cgs"
    double hbar_eff = 1.0;
    GatingPolicy gating = GatingPolicy::unstable_only;
    double dt = 1e-3;
    double horizon = 1.0;
    std::size_t paths = 10000;
    std::uint64_t seed = 42;
    std::size_t samples = 50;
    Scheme scheme = Scheme::heun;

    double init_x = 0.0, init_p = 0.0;
    double init_var_x = 0.0, init_var_p = 0.0;

    bool has_fit_window = false;
    double fit_window_begin = 0.0, fit_window_end = 0.0;
    bool continuous_comparison = false; ///< kick_ensemble also runs the continuous-noise ensemble

    double renorm_interval = 1.0; ///< lyapunov

    GridSettings grid;

    std::string quantity; ///< analytic scenarios
    double tau = 0.0;

    std::string output_dir;
    bool emit_plots = false;

    InitialDistribution initial_distribution() const {
        PhaseState center(init_x, init_p);
        if (init_var_x > 0.0 || init_var_p > 0.0)
            return InitialDistribution::gaussian(center, init_var_x, init_var_p);
        return InitialDistribution::point_at(center);
    }

    NoiseSpec noise_spec() const {
        NoiseSpec spec;
        spec.hbar_eff = hbar_eff;
        spec.gating = gating;
        spec.master_seed = seed;
        return spec;
    }

    HamiltonianModel build_model() const { return builtin_model(model, model_params); }
};

namespace confdetail {

inline double as_number(const toml_lite::Value& v, const std::string& key) {
    if (v.kind != toml_lite::Value::Kind::number)
        throw InvalidValueError(key, "expected a number");
    return v.num;
}

inline std::string as_string(const toml_lite::Value& v, const std::string& key) {
    if (v.kind != toml_lite::Value::Kind::string)
        throw InvalidValueError(key, "expected a string");
    return v.str;
}

inline bool as_bool(const toml_lite::Value& v, const std::string& key) {
    if (v.kind != toml_lite::Value::Kind::boolean)
        throw InvalidValueError(key, "expected true or false");
    return v.boolean;
}

inline std::size_t as_count(const toml_lite::Value& v, const std::string& key, std::size_t min_value) {
    const double d = as_number(v, key);
    if (!(d >= static_cast<double>(min_value)) || d != std::floor(d) || d > 9e15)
        throw InvalidValueError(key, "expected an integer >= " + std::to_string(min_value));
    return static_cast<std::size_t>(d);
}

inline std::uint64_t as_seed(const toml_lite::Value& v, const std::string& key) {
    // re-parse the raw token so 64-bit seeds above 2^53 survive exactly
    if (v.kind != toml_lite::Value::Kind::number)
        throw InvalidValueError(key, "expected an unsigned integer");
    const std::string& raw = v.raw;
    if (raw.find_first_of(".eE+-") != std::string::npos)
        throw InvalidValueError(key, "expected an unsigned integer");
    errno = 0;
    char* end = nullptr;
    const unsigned long long parsed = std::strtoull(raw.c_str(), &end, 10);
    if (errno != 0 || end != raw.c_str() + raw.size())
        throw InvalidValueError(key, "expected an unsigned integer");
    return static_cast<std::uint64_t>(parsed);
}

inline double as_positive(const toml_lite::Value& v, const std::string& key) {
    const double d = as_number(v, key);
    if (!(d > 0.0)) throw InvalidValueError(key, "must be > 0");
    return d;
}

inline double as_non_negative(const toml_lite::Value& v, const std::string& key) {
    const double d = as_number(v, key);
    if (!(d >= 0.0)) throw InvalidValueError(key, "must be >= 0");
    return d;
}

} // namespace confdetail

/// Parses and validates a scenario document. Unknown keys fail loudly; every
/// model parameter is checked against the catalog before any computation.
inline ScenarioConfig parse_config(const std::string& text) {
    using toml_lite::Value;
    const toml_lite::Table table = toml_lite::parse(text);
    ScenarioConfig cfg;

    auto find = [&](const char* key) -> const Value* {
        auto it = table.find(key);
        return it == table.end() ? nullptr : &it->second;
    };

    const Value* scen = find("scenario");
    if (!scen) throw InvalidValueError("scenario", "missing required key");
    cfg.kind = scenario_kind_from_string(confdetail::as_string(*scen, "scenario"));

    if (const Value* v = find("model")) cfg.model = confdetail::as_string(*v, "model");
    if (const Value* v = find("models")) {
        if (v->kind != Value::Kind::string_array)
            throw InvalidValueError("models", "expected an array of model names");
        cfg.models = v->strs;
    }
    if (cfg.model.empty() && cfg.models.empty())
        throw InvalidValueError("model", "missing required key");
    if (!cfg.models.empty() && cfg.kind != ScenarioKind::lyapunov)
        throw InvalidValueError("models", "only lyapunov scenarios accept a model list");
    for (const std::string& name : cfg.models)
        (void)model_parameter_names(name); // throws UnknownModel early
    if (!cfg.model.empty())
        (void)model_parameter_names(cfg.model);

    // key sets
    static const std::set<std::string> common_keys = {
        "scenario", "model", "models", "units", "hbar_eff", "gating", "dt",
        "horizon", "N", "seed", "output_dir", "emit_plots", "name"};
    static const std::set<std::string> ensemble_keys = {
        "scheme", "samples", "init_x", "init_p", "init_var_x", "init_var_p", "fit_window"};
    static const std::set<std::string> kick_keys = {
        "samples", "fit_window", "continuous_comparison"};
    static const std::set<std::string> lyapunov_keys = {"renorm_interval", "init_x", "init_p"};
    static const std::set<std::string> master_keys = {
        "nx", "np", "x_min", "x_max", "p_min", "p_max", "boundary_x", "boundary_p",
        "init_x", "init_p", "init_var_x", "init_var_p", "entropy_interval",
        "stationarity_threshold", "strang", "refine_check"};
    static const std::set<std::string> analytic_keys = {"quantity", "tau"};

    const std::set<std::string>* kind_keys = nullptr;
    switch (cfg.kind) {
        case ScenarioKind::ensemble: kind_keys = &ensemble_keys; break;
        case ScenarioKind::kick_ensemble: kind_keys = &kick_keys; break;
        case ScenarioKind::lyapunov: kind_keys = &lyapunov_keys; break;
        case ScenarioKind::master_equation: kind_keys = &master_keys; break;
        case ScenarioKind::analytic: kind_keys = &analytic_keys; break;
    }

    std::set<std::string> param_keys;
    if (!cfg.model.empty())
        for (const std::string& p : model_parameter_names(cfg.model)) param_keys.insert(p);

    for (const auto& [key, value] : table) {
        if (common_keys.count(key) || kind_keys->count(key) || param_keys.count(key)) continue;
        throw UnknownKeyError(key);
    }

    // model parameters
    for (const std::string& p : param_keys)
        if (const Value* v = find(p.c_str())) cfg.model_params[p] = confdetail::as_number(*v, p);

    // common values
    if (const Value* v = find("name")) cfg.display_name = confdetail::as_string(*v, "name");
    if (const Value* v = find("units")) {
        cfg.units = confdetail::as_string(*v, "units");
        if (cfg.units != "model" && cfg.units != "cgs")
            throw InvalidValueError("units", "expected model or cgs");
    }
    if (cfg.units == "cgs") {
        if (find("hbar_eff"))
            throw InvalidValueError("hbar_eff", "cgs units pin hbar to its physical value; "
                                                "remove the key or use model units");
        cfg.hbar_eff = kHbarCgs;
    } else if (const Value* v = find("hbar_eff")) {
        cfg.hbar_eff = confdetail::as_non_negative(*v, "hbar_eff");
    }
    if (const Value* v = find("gating")) cfg.gating = gating_from_string(confdetail::as_string(*v, "gating"));
    if (const Value* v = find("dt")) cfg.dt = confdetail::as_positive(*v, "dt");
    if (const Value* v = find("horizon")) cfg.horizon = confdetail::as_positive(*v, "horizon");
    if (const Value* v = find("N")) cfg.paths = confdetail::as_count(*v, "N", 2);
    if (const Value* v = find("seed")) cfg.seed = confdetail::as_seed(*v, "seed");
    if (const Value* v = find("output_dir")) cfg.output_dir = confdetail::as_string(*v, "output_dir");
    if (const Value* v = find("emit_plots")) cfg.emit_plots = confdetail::as_bool(*v, "emit_plots");

    if (const Value* v = find("scheme")) cfg.scheme = scheme_from_string(confdetail::as_string(*v, "scheme"));
    if (const Value* v = find("samples")) cfg.samples = confdetail::as_count(*v, "samples", 1);
    if (const Value* v = find("init_x")) cfg.init_x = confdetail::as_number(*v, "init_x");
    if (const Value* v = find("init_p")) cfg.init_p = confdetail::as_number(*v, "init_p");
    if (const Value* v = find("init_var_x")) cfg.init_var_x = confdetail::as_non_negative(*v, "init_var_x");
    if (const Value* v = find("init_var_p")) cfg.init_var_p = confdetail::as_non_negative(*v, "init_var_p");
    if (const Value* v = find("fit_window")) {
        if (v->kind != Value::Kind::number_array || v->nums.size() != 2 || !(v->nums[0] < v->nums[1]))
            throw InvalidValueError("fit_window", "expected [begin, end] with begin < end");
        cfg.has_fit_window = true;
        cfg.fit_window_begin = v->nums[0];
        cfg.fit_window_end = v->nums[1];
    }
    if (const Value* v = find("continuous_comparison"))
        cfg.continuous_comparison = confdetail::as_bool(*v, "continuous_comparison");
    if (const Value* v = find("renorm_interval"))
        cfg.renorm_interval = confdetail::as_positive(*v, "renorm_interval");

    // master-equation grid
    if (const Value* v = find("nx")) cfg.grid.geom.nx = confdetail::as_count(*v, "nx", 16);
    if (const Value* v = find("np")) cfg.grid.geom.np = confdetail::as_count(*v, "np", 16);
    if (const Value* v = find("x_min")) cfg.grid.geom.x_min = confdetail::as_number(*v, "x_min");
    if (const Value* v = find("x_max")) cfg.grid.geom.x_max = confdetail::as_number(*v, "x_max");
    if (const Value* v = find("p_min")) cfg.grid.geom.p_min = confdetail::as_number(*v, "p_min");
    if (const Value* v = find("p_max")) cfg.grid.geom.p_max = confdetail::as_number(*v, "p_max");
    if (const Value* v = find("boundary_x"))
        cfg.grid.geom.boundary_x = boundary_from_string(confdetail::as_string(*v, "boundary_x"));
    if (const Value* v = find("boundary_p"))
        cfg.grid.geom.boundary_p = boundary_from_string(confdetail::as_string(*v, "boundary_p"));
    if (const Value* v = find("entropy_interval"))
        cfg.grid.entropy_interval = confdetail::as_positive(*v, "entropy_interval");
    if (const Value* v = find("stationarity_threshold"))
        cfg.grid.stationarity_threshold = confdetail::as_non_negative(*v, "stationarity_threshold");
    if (const Value* v = find("strang")) cfg.grid.strang = confdetail::as_bool(*v, "strang");
    if (const Value* v = find("refine_check")) cfg.grid.refine_check = confdetail::as_bool(*v, "refine_check");

    if (cfg.kind == ScenarioKind::analytic) {
        const Value* q = find("quantity");
        if (!q) throw InvalidValueError("quantity", "analytic scenarios need a quantity key");
        cfg.quantity = confdetail::as_string(*q, "quantity");
        if (cfg.quantity != "free_mass_rms_drift" && cfg.quantity != "zero_point_energy")
            throw InvalidValueError("quantity", "expected free_mass_rms_drift or zero_point_energy");
        if (const Value* v = find("tau")) cfg.tau = confdetail::as_positive(*v, "tau");
        if (cfg.quantity == "free_mass_rms_drift" && cfg.tau == 0.0)
            throw InvalidValueError("tau", "free_mass_rms_drift needs an elapsed time tau");
    } else if (cfg.model.empty()) {
        // models list only valid for lyapunov; everything else needs one model
        if (cfg.kind != ScenarioKind::lyapunov)
            throw InvalidValueError("model", "missing required key");
    }

    if (cfg.kind == ScenarioKind::master_equation) cfg.grid.geom.validate();
    if (cfg.kind == ScenarioKind::kick_ensemble && cfg.model != "inverted")
        throw InvalidValueError("model", "kick ensembles require the inverted oscillator");
    if (cfg.kind == ScenarioKind::ensemble && cfg.has_fit_window && cfg.model != "inverted")
        throw InvalidValueError("fit_window",
                                "exponential fits apply to the inverted oscillator only");

    // instantiating the model validates parameter completeness and positivity
    if (!cfg.model.empty()) (void)cfg.build_model();

    if (cfg.display_name.empty())
        cfg.display_name = cfg.kind == ScenarioKind::analytic ? cfg.quantity
                                                              : std::string(to_string(cfg.kind));
    return cfg;
}

} // namespace stochmech
