// Acceptance suite: one criterion per numbered line, each with its pinned
// tolerance and (where applicable) wall-clock budget. Exit code = number of
// failed criteria.

#include "harvest/harvest.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

using namespace harvest;

namespace {

int failures = 0;

void line(int id, bool pass, const std::string& text) {
    std::printf("[%2d] %s  %s\n", id, pass ? "PASS" : "FAIL", text.c_str());
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

struct Problem {
    HarvestModel model;
    Grid grid;
    TransitionKernel kernel;
    SolveResult solved;
};

class Suite {
  public:
    const Problem& get(const std::string& name, double h) {
        const std::string key = name + "@" + fmt(h);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        HarvestModel model;
        if (name == "impulse_only") model = testsup::impulse_only_instance();
        else if (name == "mixed") model = testsup::mixed_control_instance();
        else model = testsup::mixed_control_instance(0.4);

        Problem p{std::move(model), Grid{}, TransitionKernel{}, SolveResult{}};
        p.grid = build_grid(p.model.econ.lambda_floor, 2.0, h);
        p.kernel = build_kernel(p.model, p.grid);
        p.solved = solve(p.model, p.grid, p.kernel, {});
        return cache_.emplace(key, std::move(p)).first->second;
    }

    template <class Fn> void for_each_solved(Fn fn) const {
        for (const auto& [key, p] : cache_) fn(key, p);
    }

  private:
    std::map<std::string, Problem> cache_;
};

const std::vector<double> kSpacings{0.02, 0.01, 0.005};

} // namespace

// --- criterion 1: kernel stochasticity --------------------------------------
static void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const HarvestModel m = testsup::mixed_control_instance();
    double worst_sum = 0.0, min_prob = 1.0;
    for (const double h : kSpacings) {
        const Grid g = build_grid(0.2, 2.0, h);
        const TransitionKernel k = build_kernel(m, g);
        const StochasticityReport rep = stochasticity_report(k, g);
        worst_sum = std::max(worst_sum, rep.max_row_sum_error);
        min_prob = std::min(min_prob, rep.min_probability);
    }
    const double secs = seconds_since(t0);
    const bool pass = worst_sum <= 1e-12 && min_prob >= 0.0 && secs < 5.0;
    line(1, pass,
         "kernel stochasticity: max |row sum - 1| = " + fmt(worst_sum) +
             " (<= 1e-12), min probability = " + fmt(min_prob) + " (>= 0), " + fmt(secs) +
             " s (< 5 s)");
}

// --- criterion 2: local consistency -----------------------------------------
static void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const HarvestModel m = testsup::mixed_control_instance();
    double worst_mean = 0.0;
    bool within = true, shrinking = true;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (const double h : kSpacings) {
        const Grid g = build_grid(0.2, 2.0, h);
        const ConsistencyReport rep = local_consistency_report(m, build_kernel(m, g), g);
        worst_mean = std::max(worst_mean, rep.max_mean_error);
        within = within && rep.var_within_bound;
        if (!(rep.max_var_gap < prev_gap)) shrinking = false;
        prev_gap = rep.max_var_gap;
    }
    const double secs = seconds_since(t0);
    const bool pass = worst_mean <= 1e-12 && within && shrinking && secs < 10.0;
    line(2, pass,
         "local consistency: mean error = " + fmt(worst_mean) +
             " (<= 1e-12), variance gap within bound = " + std::string(within ? "yes" : "no") +
             ", gap shrinks as h halves = " + std::string(shrinking ? "yes" : "no") + ", " +
             fmt(secs) + " s (< 10 s)");
}

// --- criterion 3: impulse-only band structure -------------------------------
static void criterion_3(Suite& suite) {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem& p = suite.get("impulse_only", 0.005);
    const double secs = seconds_since(t0);

    bool renew_at_floor = true, band = true, regime_dependent = true;
    const auto thresholds = extract_thresholds(p.solved.policy, p.grid);
    for (std::size_t a = 0; a < 2; ++a) {
        renew_at_floor =
            renew_at_floor && p.solved.policy.step_at(p.grid.floor_index(), a) == StepType::Renew;
        if (!thresholds[a].impulse_lower || !thresholds[a].interval_violations.empty()) {
            band = false;
            continue;
        }
        // a genuine idle band: diffusion nodes strictly between floor and L3
        bool idle = false;
        for (std::size_t i = p.grid.live_begin() + 1; i < p.grid.size(); ++i)
            if (p.grid.node(i) < *thresholds[a].impulse_lower &&
                p.solved.policy.step_at(i, a) == StepType::Diffusion)
                idle = true;
        band = band && idle;
    }
    regime_dependent = thresholds[0].impulse_lower && thresholds[1].impulse_lower &&
                       *thresholds[0].impulse_lower != *thresholds[1].impulse_lower;

    const bool pass = p.solved.report.converged && renew_at_floor && band &&
                      regime_dependent && secs < 60.0;
    line(3, pass,
         "impulse-only solve (h = 0.005, tol = 1e-6): converged in " +
             std::to_string(p.solved.report.iterations) + " sweeps, renew at floor = " +
             (renew_at_floor ? "yes" : "no") + ", idle band + impulse-harvest tail = " +
             (band ? "yes" : "no") + ", harvest levels L3 = {" +
             fmt(*thresholds[0].impulse_lower) + ", " + fmt(*thresholds[1].impulse_lower) +
             "} regime-dependent, " + fmt(secs) + " s (< 60 s)");
}

// --- criterion 4: a larger control set dominates -----------------------------
static void criterion_4(Suite& suite) {
    const Problem& narrow = suite.get("impulse_only", 0.005);
    const Problem& wide = suite.get("mixed", 0.005);
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = narrow.grid.live_begin(); i < narrow.grid.size(); ++i)
        for (std::size_t a = 0; a < 2; ++a)
            min_gap = std::min(min_gap, wide.solved.value(i, a) - narrow.solved.value(i, a));
    const bool pass = min_gap >= -1e-9;
    line(4, pass,
         "control-set dominance: min (V_mixed - V_impulse_only) = " + fmt(min_gap) +
             " (>= -1e-9)");
}

// --- criterion 5: higher floor lowers the value; both keep band structure ----
static void criterion_5(Suite& suite) {
    const Problem& low = suite.get("mixed", 0.005);
    const Problem& high = suite.get("high_floor", 0.005);
    double max_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t i = high.grid.live_begin(); i < high.grid.size(); ++i) {
        const std::size_t j = low.grid.index_of(high.grid.node(i));
        for (std::size_t a = 0; a < 2; ++a)
            max_excess =
                std::max(max_excess, high.solved.value(i, a) - low.solved.value(j, a));
    }
    bool structure = true;
    const auto thresholds = extract_thresholds(high.solved.policy, high.grid);
    for (std::size_t a = 0; a < 2; ++a)
        structure = structure && thresholds[a].renew_upper &&
                    thresholds[a].rate_harvest_lower && thresholds[a].impulse_lower &&
                    thresholds[a].ordered;
    const bool pass = max_excess <= 1e-9 && structure;
    line(5, pass,
         "floor dominance on [0.4, 2]: max (V_high_floor - V_mixed) = " + fmt(max_excess) +
             " (<= 1e-9), three-level band structure with L1 <= L2 <= L3 = " +
             (structure ? "yes" : "no"));
}

// --- criterion 6: slope bounds ------------------------------------------------
static void criterion_6(Suite& suite) {
    double worst = 0.0;
    for (const char* name : {"impulse_only", "mixed", "high_floor"}) {
        const Problem& p = suite.get(name, 0.005);
        worst = std::max(worst,
                         verify::check_slopes(p.solved.value, p.model, p.grid).measured);
    }
    const bool pass = worst <= 1e-9;
    line(6, pass,
         "slope bounds q h <= dV <= r h on all three solutions: worst violation = " +
             fmt(worst) + " (<= 1e-9, zero violations)");
}

// --- criterion 7: linearity in the impulse region ----------------------------
static void criterion_7(Suite& suite) {
    double worst = 0.0;
    bool ok = true;
    for (const char* name : {"impulse_only", "mixed", "high_floor"}) {
        const Problem& p = suite.get(name, 0.005);
        const auto check =
            verify::check_linearity_above(p.solved.value, p.solved.policy, p.model, p.grid);
        ok = ok && check.pass;
        worst = std::max(worst, check.measured);
        for (std::size_t a = 0; a < 2; ++a)
            ok = ok && p.solved.policy.step_at(p.grid.upper_index(), a) == StepType::Harvest;
    }
    line(7, ok,
         "impulse-region linearity: max |dV - q h| = " + fmt(worst) +
             " (<= 1e-9), top node always harvests");
}

// --- criterion 8: monotone iterates ------------------------------------------
static void criterion_8(Suite& suite) {
    // force all nine example runs into the cache, then inspect their reports
    for (const char* name : {"impulse_only", "mixed", "high_floor"})
        for (const double h : kSpacings) suite.get(name, h);
    std::size_t violations = 0, runs = 0;
    suite.for_each_solved([&](const std::string&, const Problem& p) {
        violations += p.solved.report.monotone_violations;
        ++runs;
    });
    const bool pass = violations == 0;
    line(8, pass,
         "monotone iterates over " + std::to_string(runs) +
             " runs: " + std::to_string(violations) + " violations (= 0)");
}

// --- criterion 9: noise sweeps ------------------------------------------------
static void criterion_9() {
    const auto t0 = std::chrono::steady_clock::now();
    const HarvestModel base = testsup::mixed_control_instance();
    bool pass = true;
    std::string summary;
    for (const auto mode : {verify::NoiseSweepSpec::Mode::Multiplicative,
                            verify::NoiseSweepSpec::Mode::Additive}) {
        verify::NoiseSweepSpec spec;
        spec.mode = mode;
        spec.window_lo = 0.2;
        spec.window_hi = 1.5;
        const auto result = verify::noise_sweep(base, spec, 0.005, 2.0);
        pass = pass && result.check.pass;
        summary += (mode == verify::NoiseSweepSpec::Mode::Multiplicative ? "mult d(16) = "
                                                                         : "add d(16) = ") +
                   fmt(result.distances.back().second) + "  ";
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 300.0;
    line(9, pass,
         "noise sweeps nonincreasing with " + summary + "(< 0.05), " + fmt(secs) +
             " s (< 300 s)");
}

// --- criterion 10: Monte Carlo cross-check ------------------------------------
static void criterion_10(Suite& suite) {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem& p = suite.get("mixed", 0.005);
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 200.0;
    cfg.n_paths = 10'000;
    cfg.seed = 1;
    const auto check = verify::mc_cross_check(p.model, p.grid, p.solved.value,
                                              p.solved.policy,
                                              {{0.6, 0}, {1.0, 0}, {1.0, 1}}, cfg, 0.05);
    const double secs = seconds_since(t0);
    const bool pass = check.pass && secs < 300.0;
    line(10, pass,
         "Monte Carlo cross-check (3 starts, 1e4 paths, dt = 1e-3, T = 200): worst gap "
         "beyond 3 SE + 0.05 = " +
             fmt(std::max(check.measured, 0.0)) + " (= 0); liquidation exact; " + fmt(secs) +
             " s (< 300 s)");
}

// --- criterion 11: grid refinement ---------------------------------------------
static void criterion_11(Suite& suite) {
    bool pass = true;
    std::string summary;
    for (const char* name : {"impulse_only", "mixed", "high_floor"}) {
        std::vector<double> errors;
        for (std::size_t k = 0; k + 1 < kSpacings.size(); ++k) {
            const Problem& coarse = suite.get(name, kSpacings[k]);
            const Problem& fine = suite.get(name, kSpacings[k + 1]);
            double e = 0.0;
            for (std::size_t i = coarse.grid.live_begin(); i < coarse.grid.size(); ++i) {
                const std::size_t j = fine.grid.index_of(coarse.grid.node(i));
                for (std::size_t a = 0; a < 2; ++a)
                    e = std::max(e,
                                 std::abs(coarse.solved.value(i, a) - fine.solved.value(j, a)));
            }
            errors.push_back(e);
        }
        for (std::size_t k = 0; k + 1 < errors.size(); ++k)
            pass = pass && errors[k + 1] < errors[k];
        summary += std::string(name) + ": e = {" + fmt(errors[0]) + ", " + fmt(errors[1]) +
                   "}  ";
    }
    line(11, pass, "grid refinement strictly decreasing on all examples: " + summary);
}

int main() {
    std::printf("acceptance suite (version %s)\n", kVersion);
    Suite suite;
    criterion_1();
    criterion_2();
    criterion_3(suite);
    criterion_4(suite);
    criterion_5(suite);
    criterion_6(suite);
    criterion_7(suite);
    criterion_8(suite);
    criterion_9();
    criterion_10(suite);
    criterion_11(suite);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures;
}
