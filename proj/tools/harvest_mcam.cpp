// harvest-mcam: grid solver, Monte Carlo simulator and verification suite for
// mixed regular/impulse harvesting of a regime-switching diffusion.

#include "harvest/harvest.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace harvest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitVerifyFailed = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    double h = 0.0;
    double tol = 0.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 0;
    std::size_t paths = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->set_help_flag("--help", "print this help message and exit");
    cmd->add_option("--config", flags.config_path, "problem configuration file (JSON)")
        ->required();
    cmd->add_option("--out", flags.out_dir, "output directory (overrides the config)");
    cmd->add_option("--h", flags.h, "grid spacing override");
    cmd->add_option("--tol", flags.tol, "solver tolerance override");
    cmd->add_option("--threads", flags.threads, "worker thread cap");
    cmd->add_option("--paths", flags.paths, "Monte Carlo path count override");
}

std::size_t env_threads() {
    if (const char* env = std::getenv("HARVEST_MCAM_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 0;
}

RunConfig load_with_overrides(const CommonFlags& flags) {
    RunConfig cfg = load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
    if (flags.h > 0.0) cfg.grid_h = flags.h;
    if (flags.tol > 0.0) cfg.solver.tol = flags.tol;
    if (flags.seed_set) cfg.simulate.seed = flags.seed;
    if (flags.paths > 0) cfg.simulate.n_paths = flags.paths;
    cfg.simulate.threads = flags.threads ? flags.threads : env_threads();
    resolve_upper(cfg);
    ensure_valid(cfg);
    for (const auto& v : validate_model(cfg.model, cfg.upper))
        if (v.severity == Violation::Severity::Warning)
            std::cerr << "warning: " << v.message << '\n';
    return cfg;
}

struct Prepared {
    RunConfig cfg;
    Grid grid;
    TransitionKernel kernel;
};

Prepared prepare(const CommonFlags& flags) {
    RunConfig cfg = load_with_overrides(flags);
    Grid grid = build_grid(cfg.model.econ.lambda_floor, cfg.upper, cfg.grid_h);
    TransitionKernel kernel = build_kernel(cfg.model, grid, cfg.zeta_mode);
    return {std::move(cfg), std::move(grid), std::move(kernel)};
}

void write_manifest(const Prepared& p, const std::string& command) {
    auto out = io::open_out((fs::path(p.cfg.output_dir) / "manifest.json").string());
    out << make_manifest(p.cfg, command, p.grid, p.kernel.zeta()).dump(2) << '\n';
}

void write_solve_plots(const Prepared& p, const SolveResult& res) {
    const fs::path dir(p.cfg.output_dir);
    std::vector<svg::Series> value_series, type_series, rate_series;
    for (std::size_t a = 0; a < p.cfg.model.num_regimes; ++a) {
        svg::Series sv{"regime " + std::to_string(a + 1), {}, false};
        svg::Series st{"regime " + std::to_string(a + 1), {}, true};
        svg::Series sc{"regime " + std::to_string(a + 1), {}, true};
        for (std::size_t i = p.grid.live_begin(); i < p.grid.size(); ++i) {
            const double x = p.grid.node(i);
            sv.points.emplace_back(x, res.value(i, a));
            st.points.emplace_back(x, step_code(res.policy.step_at(i, a)));
            sc.points.emplace_back(x, res.policy.control_at(i, a));
        }
        value_series.push_back(std::move(sv));
        type_series.push_back(std::move(st));
        rate_series.push_back(std::move(sc));
    }
    svg::write_plot((dir / "value.svg").string(), "value function",
                    {{"V(x, alpha)", "x", "V", value_series}});
    svg::write_plot((dir / "policy.svg").string(), "optimal policy",
                    {{"control type (-1 renew, 0 none, 1 harvest)", "x", "type", type_series},
                     {"regular control rate", "x", "c", rate_series}});
}

int cmd_solve(const CommonFlags& flags, bool dump_kernel) {
    Prepared p = prepare(flags);
    fs::create_directories(p.cfg.output_dir);
    const fs::path dir(p.cfg.output_dir);

    SolveResult res;
    try {
        res = solve(p.cfg.model, p.grid, p.kernel, p.cfg.solver);
    } catch (const solve_error& e) {
        std::cerr << "error: " << e.what()
                  << " (last increment " << io::num(e.last_increment()) << ")\n";
        return kExitNoConvergence;
    }

    io::write_value_csv((dir / "value.csv").string(), p.grid, res.value, res.policy);
    io::write_policy_csv((dir / "policy.csv").string(), p.grid, res.policy);
    io::write_thresholds_csv((dir / "thresholds.csv").string(),
                             extract_thresholds(res.policy, p.grid));
    if (dump_kernel)
        io::write_kernel_csv((dir / "kernel.csv").string(), p.cfg.model, p.grid, p.kernel);
    write_solve_plots(p, res);

    nlohmann::json report{{"iterations", res.report.iterations},
                          {"final_increment", res.report.final_increment},
                          {"residual", res.report.residual},
                          {"wall_seconds", res.report.wall_seconds},
                          {"converged", res.report.converged},
                          {"policy_evaluations", res.report.policy_evaluations},
                          {"monotone_violations", res.report.monotone_violations}};
    io::open_out((dir / "report.json").string()) << report.dump(2) << '\n';
    write_manifest(p, "solve");

    std::cout << "solve: " << res.report.iterations << " sweeps, increment "
              << io::num(res.report.final_increment) << ", residual "
              << io::num(res.report.residual) << ", " << io::num(res.report.wall_seconds)
              << " s\n"
              << "outputs written to " << dir.string() << '\n';
    return kExitOk;
}

void warn_switch_resolution(const RunConfig& cfg) {
    double max_rate = 0.0;
    for (std::size_t a = 0; a < cfg.model.num_regimes; ++a)
        max_rate = std::max(max_rate, -cfg.model.generator.diagonal(a));
    if (cfg.simulate.dt * max_rate > 0.1)
        std::cerr << "warning: simulate.dt is coarse relative to the switching rates ("
                  << io::num(cfg.simulate.dt * max_rate) << " expected switches per step)\n";
}

int cmd_simulate(const CommonFlags& flags, const std::string& policy_path) {
    Prepared p = prepare(flags);
    warn_switch_resolution(p.cfg);
    fs::create_directories(p.cfg.output_dir);
    const fs::path dir(p.cfg.output_dir);

    const io::ValuePolicyTable table =
        io::read_table_csv(policy_path, p.grid, p.cfg.model.num_regimes);

    std::vector<io::StartEstimate> rows;
    for (const auto& [x0, a0] : p.cfg.starts) {
        SimConfig cfg = p.cfg.simulate;
        cfg.start_x = x0;
        cfg.start_alpha = a0;
        rows.push_back({x0, a0, estimate_payoff(p.cfg.model, table.policy, p.grid, cfg)});
        if (p.cfg.path_log) {
            PathLog log;
            detail::Xoshiro256ss rng(detail::mix_seed(cfg.seed));
            simulate_path(p.cfg.model, table.policy, p.grid, cfg, rng, &log);
            io::write_path_log_csv(
                (dir / ("path_log_" + std::to_string(rows.size()) + ".csv")).string(), log);
        }
    }
    io::write_payoff_csv((dir / "payoff_estimate.csv").string(), rows);
    write_manifest(p, "simulate");

    for (const auto& r : rows)
        std::cout << "start (" << io::num(r.x0) << ", " << r.alpha0 + 1
                  << "): mean = " << io::num(r.estimate.mean)
                  << ", SE = " << io::num(r.estimate.std_error) << ", censored "
                  << io::num(r.estimate.censored_fraction) << '\n';
    return kExitOk;
}

int cmd_verify(const CommonFlags& flags, const std::string& suite,
               const std::string& value_path) {
    Prepared p = prepare(flags);
    fs::create_directories(p.cfg.output_dir);
    const fs::path dir(p.cfg.output_dir);

    auto selected = [&](const std::string& name) {
        return suite == "all" || suite.find(name) != std::string::npos;
    };

    verify::VerifyReport report;
    std::optional<SolveResult> solved;
    auto ensure_solved = [&]() -> SolveResult& {
        if (!solved) {
            if (!value_path.empty()) {
                // check a stored table instead of a fresh solve
                const io::ValuePolicyTable table =
                    io::read_table_csv(value_path, p.grid, p.cfg.model.num_regimes);
                if (!table.has_value)
                    throw config_error(value_path + ": table has no value column");
                solved = SolveResult{table.value, table.policy, {}};
            } else {
                solved = solve(p.cfg.model, p.grid, p.kernel, p.cfg.solver);
            }
        }
        return *solved;
    };

    try {
        if (selected("supersolution")) {
            const SolveResult& res = ensure_solved();
            report.checks.push_back(
                verify::check_linear_bound(res.value, p.cfg.model, p.grid, p.kernel).check);
        }
        if (selected("slopes")) {
            const SolveResult& res = ensure_solved();
            report.checks.push_back(verify::check_slopes(res.value, p.cfg.model, p.grid));
        }
        if (selected("linearity")) {
            const SolveResult& res = ensure_solved();
            report.checks.push_back(verify::check_linearity_above(res.value, res.policy,
                                                                  p.cfg.model, p.grid));
        }
        if (selected("sweep")) {
            for (const auto& spec : p.cfg.sweeps)
                report.checks.push_back(
                    verify::noise_sweep(p.cfg.model, spec, p.grid.spacing(), p.grid.upper(),
                                        p.cfg.solver)
                        .check);
        }
        if (selected("refinement")) {
            const double h = p.grid.spacing();
            try {
                report.checks.push_back(
                    verify::refinement_check(p.cfg.model, {4.0 * h, 2.0 * h, h},
                                             p.grid.upper(), p.cfg.solver)
                        .check);
            } catch (const std::invalid_argument& e) {
                verify::CheckResult bad;
                bad.name = "refinement";
                bad.pass = false;
                bad.detail = e.what();
                report.checks.push_back(bad);
            }
        }
        if (selected("mc-cross")) {
            warn_switch_resolution(p.cfg);
            const SolveResult& res = ensure_solved();
            report.checks.push_back(verify::mc_cross_check(p.cfg.model, p.grid, res.value,
                                                           res.policy, p.cfg.starts,
                                                           p.cfg.simulate, p.cfg.eps_disc));
        }
    } catch (const solve_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    }

    if (report.checks.empty()) {
        std::cerr << "error: no checks selected by suite '" << suite << "'\n";
        return kExitConfig;
    }

    io::write_verify_csv((dir / "verify_report.csv").string(), report);
    io::write_verify_text((dir / "verify_report.txt").string(), report);
    write_manifest(p, "verify");

    for (const auto& c : report.checks)
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  measured "
                  << io::num(c.measured) << "  bound " << io::num(c.bound) << '\n';
    return report.all_pass() ? kExitOk : kExitVerifyFailed;
}

int cmd_sweep(const CommonFlags& flags) {
    Prepared p = prepare(flags);
    fs::create_directories(p.cfg.output_dir);
    const fs::path dir(p.cfg.output_dir);

    auto csv = io::open_out((dir / "sweep.csv").string());
    csv << "mode,N,d\n";
    std::vector<svg::Series> series;
    bool all_pass = true;
    try {
        for (const auto& spec : p.cfg.sweeps) {
            const auto result = verify::noise_sweep(p.cfg.model, spec, p.grid.spacing(),
                                                    p.grid.upper(), p.cfg.solver);
            const std::string mode =
                spec.mode == verify::NoiseSweepSpec::Mode::Multiplicative ? "multiplicative"
                                                                          : "additive";
            svg::Series s{mode, {}, false};
            for (const auto& [n, d] : result.distances) {
                csv << mode << ',' << io::num(n) << ',' << io::num(d) << '\n';
                s.points.emplace_back(n, d);
            }
            series.push_back(std::move(s));
            all_pass = all_pass && result.check.pass;
            std::cout << (result.check.pass ? "PASS" : "FAIL") << "  " << result.check.name
                      << "  d(max N) = " << io::num(result.check.measured) << '\n';
        }
    } catch (const solve_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConvergence;
    }
    svg::write_plot((dir / "sweep.svg").string(), "noise-intensity sweep",
                    {{"sup |V - q(x - lambda)| on the window", "N", "d(N)", series}});
    write_manifest(p, "sweep");
    return all_pass ? kExitOk : kExitVerifyFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal harvesting/renewing of a regime-switching diffusion: "
                 "grid solver, simulator and verification suite"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);

    CommonFlags solve_flags, sim_flags, verify_flags, sweep_flags;
    bool dump_kernel = false;
    std::string policy_path, suite = "all";

    CLI::App* solve_cmd =
        app.add_subcommand("solve", "solve the dynamic programming equation on the grid");
    add_common(solve_cmd, solve_flags);
    solve_cmd->add_flag("--dump-kernel", dump_kernel,
                        "also write the transition kernel as CSV");

    CLI::App* sim_cmd = app.add_subcommand(
        "simulate", "Monte Carlo payoff of a stored policy on the continuous system");
    add_common(sim_cmd, sim_flags);
    sim_cmd->add_option("--policy", policy_path, "policy.csv produced by solve")->required();
    auto* seed_opt = sim_cmd->add_option("--seed", sim_flags.seed, "master seed override");

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the oracle suite for the solved problem");
    add_common(verify_cmd, verify_flags);
    verify_cmd->add_option(
        "--suite", suite,
        "all or comma list of supersolution,slopes,linearity,sweep,refinement,mc-cross");
    std::string value_path;
    verify_cmd->add_option("--value", value_path,
                           "check a stored value.csv instead of solving afresh");
    auto* vseed_opt = verify_cmd->add_option("--seed", verify_flags.seed, "master seed override");

    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "solve across increasing noise intensities");
    add_common(sweep_cmd, sweep_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_cmd->parsed()) return cmd_solve(solve_flags, dump_kernel);
        if (sim_cmd->parsed()) {
            sim_flags.seed_set = seed_opt->count() > 0;
            return cmd_simulate(sim_flags, policy_path);
        }
        if (verify_cmd->parsed()) {
            verify_flags.seed_set = vseed_opt->count() > 0;
            return cmd_verify(verify_flags, suite, value_path);
        }
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
