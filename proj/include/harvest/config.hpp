#pragma once

#include "harvest/chain.hpp"
#include "harvest/grid.hpp"
#include "harvest/model.hpp"
#include "harvest/simulate.hpp"
#include "harvest/solver.hpp"
#include "harvest/verify.hpp"
#include "harvest/version.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace harvest {

/// Configuration or input-file problem; the CLI maps this to exit code 1.
class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace cfg_detail {

using nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed,
                         const std::set<std::string>& required = {}) {
    if (!obj.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw config_error(where + ": unknown key '" + key + "'");
    for (const auto& key : required)
        if (!obj.contains(key))
            throw config_error(where + ": missing required key '" + key + "'");
}

inline double number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key) || !obj[key].is_number())
        throw config_error(where + ": '" + std::string(key) + "' must be a number");
    return obj[key].get<double>();
}

inline std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw config_error(where + ": expected a number array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw config_error(where + ": expected a number array");
        out.push_back(e.get<double>());
    }
    return out;
}

inline ScalarField parse_field(const json& obj, const std::string& where) {
    require_keys(obj, where,
                 {"family", "growth", "competition", "slope", "value", "scale", "offset"},
                 {"family"});
    const std::string family = obj["family"].get<std::string>();
    if (family == "logistic")
        return ScalarField(LogisticDrift{number_list(obj.at("growth"), where + ".growth"),
                                         number(obj, where, "competition")});
    if (family == "linear")
        return ScalarField(LinearCoef{number_list(obj.at("slope"), where + ".slope")});
    if (family == "constant")
        return ScalarField(ConstantField{number_list(obj.at("value"), where + ".value")});
    if (family == "scaled_linear")
        return ScalarField(ScaledLinear{number(obj, where, "scale"),
                                        obj.contains("offset") ? number(obj, where, "offset")
                                                               : 0.0});
    throw config_error(where + ": unknown family '" + family + "'");
}

} // namespace cfg_detail

/// Parsed and resolved run configuration. `raw` keeps the config as read so
/// the manifest can echo it verbatim.
struct RunConfig {
    HarvestModel model;
    double grid_h = 0.0;
    bool upper_auto = false;
    double upper = 0.0;      // resolved level (after auto computation)
    ZetaMode zeta_mode = ZetaMode::Auto;

    SolveOptions solver;
    SimConfig simulate;
    std::vector<std::pair<double, std::size_t>> starts; // zero-based regimes
    double eps_disc = 0.05;
    bool path_log = false;

    std::vector<verify::NoiseSweepSpec> sweeps; // one per requested mode
    std::string output_dir = "out";

    nlohmann::json raw;
};

inline RunConfig parse_config(const nlohmann::json& root) {
    using cfg_detail::number;
    using cfg_detail::number_list;
    using cfg_detail::require_keys;

    require_keys(root, "config",
                 {"model", "economics", "controls", "grid", "solver", "simulate", "sweep",
                  "output"},
                 {"model", "economics", "controls", "grid"});

    RunConfig out;
    out.raw = root;

    // model
    const auto& jm = root.at("model");
    require_keys(jm, "model", {"regimes", "drift", "diffusion", "generator"},
                 {"regimes", "drift", "diffusion", "generator"});
    const long regimes = jm.at("regimes").get<long>();
    if (regimes < 1 || regimes > 64) throw config_error("model.regimes: out of range");
    out.model.num_regimes = static_cast<std::size_t>(regimes);
    out.model.drift = cfg_detail::parse_field(jm.at("drift"), "model.drift");
    out.model.diffusion = cfg_detail::parse_field(jm.at("diffusion"), "model.diffusion");

    const auto& jg = jm.at("generator");
    if (!jg.is_array() || jg.size() != out.model.num_regimes)
        throw config_error("model.generator: need one row per regime");
    std::vector<double> rates;
    for (const auto& row : jg) {
        const auto vals = number_list(row, "model.generator row");
        if (vals.size() != out.model.num_regimes)
            throw config_error("model.generator: rows must have one entry per regime");
        rates.insert(rates.end(), vals.begin(), vals.end());
    }
    out.model.generator = RegimeGenerator(out.model.num_regimes, std::move(rates));

    // economics
    const auto& je = root.at("economics");
    require_keys(je, "economics", {"a1", "a2", "a3", "delta", "lambda"},
                 {"a1", "a2", "a3", "delta", "lambda"});
    out.model.econ.a1 = number(je, "economics", "a1");
    out.model.econ.a2 = number(je, "economics", "a2");
    out.model.econ.a3 = number(je, "economics", "a3");
    out.model.econ.delta = number(je, "economics", "delta");
    out.model.econ.lambda_floor = number(je, "economics", "lambda");

    // controls
    const auto& jc = root.at("controls");
    require_keys(jc, "controls", {"set", "rate_family", "cost_family"}, {"set"});
    out.model.control.control_set = number_list(jc.at("set"), "controls.set");
    if (jc.contains("rate_family")) {
        const std::string family = jc["rate_family"].get<std::string>();
        if (family == "identity") out.model.control.rate_family = RateFamily::Identity;
        else if (family == "proportional")
            out.model.control.rate_family = RateFamily::Proportional;
        else throw config_error("controls.rate_family: unknown family '" + family + "'");
    }
    if (jc.contains("cost_family")) {
        const auto& jf = jc["cost_family"];
        require_keys(jf, "controls.cost_family", {"family", "scale", "denom"}, {"family"});
        const std::string family = jf["family"].get<std::string>();
        if (family == "quadratic")
            out.model.control.cost_family =
                QuadraticCost{number_list(jf.at("scale"), "controls.cost_family.scale"),
                              number(jf, "controls.cost_family", "denom")};
        else if (family == "zero") out.model.control.cost_family = ZeroCost{};
        else throw config_error("controls.cost_family: unknown family '" + family + "'");
    }

    // grid
    const auto& jgrid = root.at("grid");
    require_keys(jgrid, "grid", {"h", "U", "zeta"}, {"h", "U"});
    out.grid_h = number(jgrid, "grid", "h");
    if (jgrid["U"].is_string()) {
        if (jgrid["U"].get<std::string>() != "auto")
            throw config_error("grid.U: expected a number or \"auto\"");
        out.upper_auto = true;
    } else if (jgrid["U"].is_number()) {
        out.upper = jgrid["U"].get<double>();
    } else {
        throw config_error("grid.U: expected a number or \"auto\"");
    }
    if (jgrid.contains("zeta")) {
        const std::string z = jgrid["zeta"].get<std::string>();
        if (z == "auto") out.zeta_mode = ZetaMode::Auto;
        else if (z == "zero") out.zeta_mode = ZetaMode::Zero;
        else if (z == "h") out.zeta_mode = ZetaMode::SpacingH;
        else throw config_error("grid.zeta: expected auto, zero or h");
    }

    // solver
    if (root.contains("solver")) {
        const auto& js = root["solver"];
        require_keys(js, "solver", {"tol", "max_iter", "sweep_mode", "policy_eval_every"});
        if (js.contains("tol")) out.solver.tol = number(js, "solver", "tol");
        if (js.contains("max_iter")) out.solver.max_iter = js["max_iter"].get<std::size_t>();
        if (js.contains("sweep_mode")) {
            const std::string mode = js["sweep_mode"].get<std::string>();
            if (mode == "gauss-seidel") out.solver.mode = SweepMode::GaussSeidel;
            else if (mode == "jacobi") out.solver.mode = SweepMode::Jacobi;
            else throw config_error("solver.sweep_mode: expected gauss-seidel or jacobi");
        }
        if (js.contains("policy_eval_every"))
            out.solver.policy_eval_every = js["policy_eval_every"].get<std::size_t>();
    }

    // simulate
    out.starts = {{1.0, 0}};
    if (root.contains("simulate")) {
        const auto& js = root["simulate"];
        require_keys(js, "simulate",
                     {"dt", "horizon", "n_paths", "seed", "starts", "eps_disc",
                      "exact_switch_clocks", "path_log"});
        if (js.contains("dt")) out.simulate.dt = number(js, "simulate", "dt");
        if (js.contains("horizon")) out.simulate.horizon = number(js, "simulate", "horizon");
        if (js.contains("n_paths")) out.simulate.n_paths = js["n_paths"].get<std::size_t>();
        if (js.contains("seed")) out.simulate.seed = js["seed"].get<std::uint64_t>();
        if (js.contains("eps_disc")) out.eps_disc = number(js, "simulate", "eps_disc");
        if (js.contains("exact_switch_clocks"))
            out.simulate.exact_switch_clocks = js["exact_switch_clocks"].get<bool>();
        if (js.contains("path_log")) out.path_log = js["path_log"].get<bool>();
        if (js.contains("starts")) {
            out.starts.clear();
            for (const auto& s : js["starts"]) {
                if (!s.is_array() || s.size() != 2)
                    throw config_error("simulate.starts: expected [x0, regime] pairs");
                const long a1 = s[1].get<long>();
                if (a1 < 1 || a1 > regimes)
                    throw config_error("simulate.starts: regime out of range");
                out.starts.emplace_back(s[0].get<double>(),
                                        static_cast<std::size_t>(a1 - 1));
            }
        }
    }

    // sweep
    if (root.contains("sweep")) {
        const auto& js = root["sweep"];
        require_keys(js, "sweep", {"mode", "intensities", "window", "eps"});
        verify::NoiseSweepSpec spec;
        if (js.contains("intensities"))
            spec.intensities = number_list(js["intensities"], "sweep.intensities");
        spec.window_lo = out.model.econ.lambda_floor;
        if (js.contains("window")) {
            const auto window = number_list(js["window"], "sweep.window");
            if (window.size() != 2) throw config_error("sweep.window: expected [lo, hi]");
            spec.window_lo = window[0];
            spec.window_hi = window[1];
        }
        if (js.contains("eps")) spec.eps_sweep = number(js, "sweep", "eps");
        std::string mode = "both";
        if (js.contains("mode")) mode = js["mode"].get<std::string>();
        if (mode == "multiplicative" || mode == "both") {
            spec.mode = verify::NoiseSweepSpec::Mode::Multiplicative;
            out.sweeps.push_back(spec);
        }
        if (mode == "additive" || mode == "both") {
            spec.mode = verify::NoiseSweepSpec::Mode::Additive;
            out.sweeps.push_back(spec);
        }
        if (out.sweeps.empty())
            throw config_error("sweep.mode: expected multiplicative, additive or both");
    } else {
        verify::NoiseSweepSpec spec;
        spec.window_lo = out.model.econ.lambda_floor;
        spec.mode = verify::NoiseSweepSpec::Mode::Multiplicative;
        out.sweeps.push_back(spec);
        spec.mode = verify::NoiseSweepSpec::Mode::Additive;
        out.sweeps.push_back(spec);
    }

    // output
    if (root.contains("output")) {
        require_keys(root["output"], "output", {"directory"});
        if (root["output"].contains("directory"))
            out.output_dir = root["output"]["directory"].get<std::string>();
    }
    return out;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const std::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    return parse_config(root);
}

/**
 * Resolve the upper level: explicit numbers pass through, "auto" rounds the
 * drift-domination root up to the next positive integer (which every
 * practical spacing divides).
 */
inline void resolve_upper(RunConfig& cfg) {
    if (!cfg.upper_auto) return;
    const double root = compute_truncation(cfg.model);
    double level = std::ceil(root);
    if (level <= cfg.model.econ.lambda_floor + cfg.grid_h) level += 1.0;
    cfg.upper = level;
}

/// Validate the model and throw a config_error listing all violations.
inline void ensure_valid(const RunConfig& cfg) {
    const auto violations = validate_model(cfg.model, cfg.upper);
    if (has_errors(violations)) {
        std::string msg = "invalid model configuration:";
        for (const auto& v : violations)
            if (v.severity == Violation::Severity::Error) msg += "\n  - " + v.message;
        throw config_error(msg);
    }
}

inline nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command,
                                    const Grid& grid, double zeta) {
    nlohmann::json m;
    m["artifact_version"] = kVersion;
    m["command"] = command;
    m["resolved"] = {
        {"lambda", grid.lambda_floor()},
        {"upper", grid.upper()},
        {"upper_auto", cfg.upper_auto},
        {"h", grid.spacing()},
        {"zeta", zeta},
        {"nodes", grid.size()},
        {"killed_node", grid.has_killed_node()},
        {"tol", cfg.solver.tol},
        {"sweep_mode",
         cfg.solver.mode == SweepMode::GaussSeidel ? "gauss-seidel" : "jacobi"},
        {"seed", cfg.simulate.seed},
    };
    m["config"] = cfg.raw;
    return m;
}

} // namespace harvest
