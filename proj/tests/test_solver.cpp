#include "harvest/solver.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace harvest;

namespace {

struct Setup {
    HarvestModel model;
    Grid grid;
    TransitionKernel kernel;

    Setup(HarvestModel m, double h, double upper = 2.0)
        : model(std::move(m)),
          grid(build_grid(model.econ.lambda_floor, upper, h)),
          kernel(build_kernel(model, grid)) {}

    SolveResult run(SolveOptions opts = {}) const { return solve(model, grid, kernel, opts); }
};

/// Harvest everywhere above the floor, idle at the floor.
PolicyField liquidation_policy(const Grid& grid, std::size_t m0, bool harvest_at_floor) {
    PolicyField p(grid.size(), m0);
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < m0; ++a)
            p.step[p.idx(i, a)] =
                (i > grid.floor_index() || harvest_at_floor) ? StepType::Harvest
                                                             : StepType::Diffusion;
    return p;
}

} // namespace

TEST_CASE("initial field is the liquidation payoff") {
    const HarvestModel m = testsup::impulse_only_instance();
    const Grid g = build_grid(0.2, 2.0, 0.1);
    const ValueField v = initialize(g, m);
    CHECK(v(g.index_of(1.0), 0) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(v(g.floor_index(), 1) == 0.0);
    CHECK(v(g.killed_index(), 0) == 0.0);
}

TEST_CASE("branch values against hand evaluation") {
    const Setup s(testsup::mixed_control_instance(), 0.1);
    const ValueField v = initialize(s.grid, s.model);
    const std::size_t i = s.grid.index_of(1.0);

    const BranchValues b = branch_values(v, i, 0, s.grid, s.kernel, s.model);
    REQUIRE(b.harvest.has_value());
    REQUIRE(b.renew.has_value());
    CHECK(*b.harvest == doctest::Approx(0.8).epsilon(1e-14));  // 0.7 + 0.1
    CHECK(*b.renew == doctest::Approx(0.675).epsilon(1e-14));  // 0.9 - 0.225
    CHECK(b.diffusion.size() == 6);

    const BranchValues floor = branch_values(v, s.grid.floor_index(), 0, s.grid, s.kernel, s.model);
    CHECK_FALSE(floor.harvest.has_value());
    CHECK(floor.renew.has_value());

    const BranchValues top = branch_values(v, s.grid.upper_index(), 1, s.grid, s.kernel, s.model);
    CHECK(top.harvest.has_value());
    CHECK_FALSE(top.renew.has_value());
    CHECK(top.diffusion.empty());
}

TEST_CASE("one sweep preserves the liquidation value where harvesting stays optimal") {
    // with the harvest branch active, q(x - h - lambda) + q h telescopes exactly
    const Setup s(testsup::impulse_only_instance(), 0.02);
    const ValueField v0 = initialize(s.grid, s.model);
    const SweepResult sw = bellman_sweep(v0, s.grid, s.kernel, s.model, SweepMode::Jacobi);

    const std::size_t top = s.grid.upper_index();
    CHECK(sw.value(top, 0) == doctest::Approx(v0(top, 0)).epsilon(1e-12));
    CHECK(sw.policy.step_at(top, 0) == StepType::Harvest);
    CHECK(sw.policy.step_at(top, 1) == StepType::Harvest);

    // monotone: one sweep never decreases the liquidation payoff
    for (std::size_t i = s.grid.live_begin(); i < s.grid.size(); ++i)
        for (std::size_t a = 0; a < 2; ++a) CHECK(sw.value(i, a) >= v0(i, a));
}

TEST_CASE("solver on the impulse-only instance") {
    const Setup s(testsup::impulse_only_instance(), 0.02);
    const SolveResult res = s.run();

    CHECK(res.report.converged);
    CHECK(res.report.final_increment < 1e-6);
    CHECK(res.report.monotone_violations == 0);
    CHECK(res.report.residual <= 1e-6);

    SUBCASE("band structure: renew at the floor, idle band, impulse harvest above") {
        for (std::size_t a = 0; a < 2; ++a) {
            CHECK(res.policy.step_at(s.grid.floor_index(), a) == StepType::Renew);
            CHECK(res.policy.step_at(s.grid.upper_index(), a) == StepType::Harvest);
        }
        const auto thresholds = extract_thresholds(res.policy, s.grid);
        for (std::size_t a = 0; a < 2; ++a) {
            REQUIRE(thresholds[a].impulse_lower.has_value());
            CHECK(thresholds[a].interval_violations.empty());
            CHECK_FALSE(thresholds[a].rate_harvest_lower.has_value());
            // a genuine idle band exists between the floor and the impulse region
            CHECK(*thresholds[a].impulse_lower >
                  s.grid.lambda_floor() + 2 * s.grid.spacing());
        }
    }
    SUBCASE("value field dominates the liquidation payoff and stays nonnegative") {
        const ValueField v0 = initialize(s.grid, s.model);
        for (std::size_t i = s.grid.live_begin(); i < s.grid.size(); ++i)
            for (std::size_t a = 0; a < 2; ++a) {
                CHECK(res.value(i, a) >= v0(i, a));
                CHECK(res.value(i, a) >= 0.0);
            }
    }
    SUBCASE("slope bounds hold at the fixed point") {
        const double qh = s.model.econ.q() * s.grid.spacing();
        const double rh = s.model.econ.r() * s.grid.spacing();
        for (std::size_t i = s.grid.live_begin(); i < s.grid.upper_index(); ++i)
            for (std::size_t a = 0; a < 2; ++a) {
                const double dv = res.value(i + 1, a) - res.value(i, a);
                CHECK(dv >= qh - 1e-9);
                CHECK(dv <= rh + 1e-9);
            }
    }
    SUBCASE("harvested nodes carry exactly the unit-price slope") {
        for (std::size_t i = s.grid.live_begin() + 1; i < s.grid.size(); ++i)
            for (std::size_t a = 0; a < 2; ++a)
                if (res.policy.step_at(i, a) == StepType::Harvest)
                    CHECK(res.value(i, a) - res.value(i - 1, a) ==
                          doctest::Approx(s.model.econ.q() * s.grid.spacing())
                              .epsilon(1e-12));
    }
}

TEST_CASE("enlarging the control set never lowers the value") {
    const Setup narrow(testsup::impulse_only_instance(), 0.02);
    const Setup wide(testsup::mixed_control_instance(), 0.02);
    const SolveResult a = narrow.run();
    const SolveResult b = wide.run();
    double min_gap = 1e300;
    for (std::size_t i = narrow.grid.live_begin(); i < narrow.grid.size(); ++i)
        for (std::size_t al = 0; al < 2; ++al)
            min_gap = std::min(min_gap, b.value(i, al) - a.value(i, al));
    CHECK(min_gap >= -1e-9);
}

TEST_CASE("degenerate stopping rule returns after one sweep") {
    const Setup s(testsup::impulse_only_instance(), 0.1);
    SolveOptions opts;
    opts.tol = std::numeric_limits<double>::infinity();
    const SolveResult res = s.run(opts);
    CHECK(res.report.iterations == 1);
}

TEST_CASE("sweep budget exhaustion raises with the last increment") {
    const Setup s(testsup::mixed_control_instance(), 0.05);
    SolveOptions opts;
    opts.tol = 1e-13;
    opts.max_iter = 3;
    opts.policy_eval_every = 0;
    CHECK_THROWS_AS(s.run(opts), solve_error);
    try {
        s.run(opts);
    } catch (const solve_error& e) {
        CHECK(e.last_increment() > 0.0);
    }
}

TEST_CASE("jacobi and gauss-seidel sweeps agree at the fixed point") {
    const Setup s(testsup::mixed_control_instance(), 0.05);
    SolveOptions gs;
    SolveOptions jac;
    jac.mode = SweepMode::Jacobi;
    const SolveResult a = s.run(gs);
    const SolveResult b = s.run(jac);
    CHECK(sup_distance(a.value, b.value) < 1e-8);
}

TEST_CASE("fixed-policy evaluation") {
    const Setup s(testsup::mixed_control_instance(), 0.05);

    SUBCASE("liquidation with harvest prescribed at the floor telescopes exactly") {
        const PolicyField p = liquidation_policy(s.grid, 2, true);
        const ValueField w = policy_evaluate(p, s.model, s.grid, s.kernel);
        const double q = s.model.econ.q();
        for (std::size_t i = s.grid.live_begin(); i < s.grid.size(); ++i)
            for (std::size_t a = 0; a < 2; ++a)
                CHECK(w(i, a) == doctest::Approx(q * (s.grid.node(i) - s.grid.lambda_floor()))
                                     .epsilon(1e-12));
    }
    SUBCASE("evaluating the solved policy reproduces the solved value") {
        const SolveResult res = s.run();
        const ValueField w = policy_evaluate(res.policy, s.model, s.grid, s.kernel);
        CHECK(sup_distance(w, res.value) < 1e-8);
    }
    SUBCASE("any valid policy is dominated by the solved value") {
        const SolveResult res = s.run();
        const PolicyField p = liquidation_policy(s.grid, 2, false);
        const ValueField w = policy_evaluate(p, s.model, s.grid, s.kernel);
        for (std::size_t i = s.grid.live_begin(); i < s.grid.size(); ++i)
            for (std::size_t a = 0; a < 2; ++a)
                CHECK(w(i, a) <= res.value(i, a) + 1e-9);
    }
    SUBCASE("zero-time impulse cycles are rejected") {
        PolicyField p(s.grid.size(), 2);
        const std::size_t i = s.grid.index_of(1.0);
        p.step[p.idx(i, 0)] = StepType::Harvest;
        p.step[p.idx(i - 1, 0)] = StepType::Renew;
        CHECK_THROWS_AS(policy_evaluate(p, s.model, s.grid, s.kernel),
                        std::invalid_argument);
    }
}

TEST_CASE("residual of the initial field is positive, residual after solve is tiny") {
    const Setup s(testsup::mixed_control_instance(), 0.05);
    const ValueField v0 = initialize(s.grid, s.model);
    const SweepResult greedy = bellman_sweep(v0, s.grid, s.kernel, s.model, SweepMode::Jacobi);
    CHECK(dpe_residual(v0, greedy.policy, s.model, s.grid, s.kernel) > 0.0);

    const SolveResult res = s.run();
    CHECK(dpe_residual(res.value, res.policy, s.model, s.grid, s.kernel) <= 1e-6);
}

TEST_CASE("threshold extraction on a constant idle policy") {
    const Setup s(testsup::impulse_only_instance(), 0.1);
    PolicyField p(s.grid.size(), 2); // all diffusion, c = 0
    const auto th = extract_thresholds(p, s.grid);
    for (std::size_t a = 0; a < 2; ++a) {
        CHECK_FALSE(th[a].renew_upper.has_value());
        CHECK_FALSE(th[a].rate_harvest_lower.has_value());
        CHECK_FALSE(th[a].impulse_lower.has_value());
        CHECK(th[a].ordered);
    }
}
