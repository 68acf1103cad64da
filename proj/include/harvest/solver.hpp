#pragma once

#include "harvest/chain.hpp"
#include "harvest/grid.hpp"
#include "harvest/linalg.hpp"
#include "harvest/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace harvest {

// ---------------------------------------------------------------------------
// Value and policy fields
// ---------------------------------------------------------------------------

/// Value table over (node, regime), node-major. Killed nodes stay pinned at 0.
class ValueField {
  public:
    ValueField() = default;
    ValueField(std::size_t nodes, std::size_t regimes, double fill = 0.0)
        : values_(nodes * regimes, fill), m0_(regimes) {}

    double operator()(std::size_t node, std::size_t alpha) const {
        return values_[node * m0_ + alpha];
    }
    double& operator()(std::size_t node, std::size_t alpha) {
        return values_[node * m0_ + alpha];
    }

    std::size_t regimes() const { return m0_; }
    std::size_t nodes() const { return m0_ ? values_.size() / m0_ : 0; }
    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }

  private:
    std::vector<double> values_;
    std::size_t m0_ = 0;
};

inline double sup_distance(const ValueField& a, const ValueField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i)
        d = std::max(d, std::abs(a.raw()[i] - b.raw()[i]));
    return d;
}

/// Per-node action: step type and regular control (0 for impulse steps).
struct PolicyField {
    std::vector<StepType> step;
    std::vector<double> control;
    std::size_t m0 = 0;

    PolicyField() = default;
    PolicyField(std::size_t nodes, std::size_t regimes)
        : step(nodes * regimes, StepType::Diffusion),
          control(nodes * regimes, 0.0),
          m0(regimes) {}

    std::size_t idx(std::size_t node, std::size_t alpha) const { return node * m0 + alpha; }
    StepType step_at(std::size_t node, std::size_t alpha) const { return step[idx(node, alpha)]; }
    double control_at(std::size_t node, std::size_t alpha) const {
        return control[idx(node, alpha)];
    }
};

struct SolveReport {
    std::size_t iterations = 0;
    double final_increment = 0.0;
    double residual = 0.0;
    double wall_seconds = 0.0;
    bool converged = false;
    std::size_t policy_evaluations = 0;
    /// Count of nodes where a sweep decreased the value by more than the
    /// roundoff granularity (32 eps per unit of value). The scheme is
    /// monotone, so any genuine decrease indicates a defect.
    std::size_t monotone_violations = 0;
};

/// Raised when value iteration hits the sweep budget before the tolerance.
class solve_error : public std::runtime_error {
  public:
    solve_error(const std::string& msg, double last_increment)
        : std::runtime_error(msg), last_increment_(last_increment) {}
    double last_increment() const { return last_increment_; }

  private:
    double last_increment_ = 0.0;
};

/// V0(x, alpha) = q (x - lambda) on live nodes: the payoff of liquidating to
/// the floor immediately and never acting again.
inline ValueField initialize(const Grid& grid, const HarvestModel& model) {
    ValueField v(grid.size(), model.num_regimes, 0.0);
    const double q = model.econ.q();
    const double lambda = grid.lambda_floor();
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < model.num_regimes; ++a)
            v(i, a) = q * (grid.node(i) - lambda);
    return v;
}

// ---------------------------------------------------------------------------
// Bellman branches
// ---------------------------------------------------------------------------

struct BranchValues {
    std::optional<double> harvest; // absent at the floor
    std::optional<double> renew;   // absent at the upper level
    struct Diffusion {
        double c = 0.0;
        double value = 0.0;
    };
    std::vector<Diffusion> diffusion; // empty at the upper level
};

namespace detail {
inline double diffusion_branch(const ValueField& v, std::size_t node, std::size_t alpha,
                               const TransitionKernel& kernel, std::size_t ci) {
    const std::size_t r = kernel.row_index(node, alpha, ci);
    const double down = node > 0 ? v(node - 1, alpha) : 0.0; // below-lattice exit is worth 0
    double expect = kernel.p_up(r) * v(node + 1, alpha) + kernel.p_down(r) * down;
    const double* stay = kernel.stay(r);
    for (std::size_t l = 0; l < kernel.regimes(); ++l) expect += stay[l] * v(node, l);
    return kernel.disc(r) * expect + kernel.pay_dt(r);
}
} // namespace detail

/// All candidate branch values of the dynamic programming equation at a node.
inline BranchValues branch_values(const ValueField& v, std::size_t node, std::size_t alpha,
                                  const Grid& grid, const TransitionKernel& kernel,
                                  const HarvestModel& model) {
    if (!grid.is_live(node))
        throw std::invalid_argument("branch_values: node is not live");
    BranchValues out;
    const double h = grid.spacing();
    if (node > grid.floor_index())
        out.harvest = v(node - 1, alpha) + model.econ.q() * h;
    if (node < grid.upper_index()) {
        out.renew = v(node + 1, alpha) - model.econ.r() * h;
        out.diffusion.reserve(model.control.control_set.size());
        for (std::size_t ci = 0; ci < model.control.control_set.size(); ++ci)
            out.diffusion.push_back({model.control.control_set[ci],
                                     detail::diffusion_branch(v, node, alpha, kernel, ci)});
    }
    return out;
}

enum class SweepMode { GaussSeidel, Jacobi };

struct SweepResult {
    ValueField value;
    PolicyField policy;
    double increment = 0.0;
};

namespace detail {

/// Control indices in tie-break order: smallest |c| first, then ascending c.
inline std::vector<std::size_t> control_order(const std::vector<double>& set) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double fa = std::abs(set[a]), fb = std::abs(set[b]);
        if (fa != fb) return fa < fb;
        return set[a] < set[b];
    });
    return order;
}

/**
 * One Bellman update pass. Gauss-Seidel updates next in place in ascending
 * (node, regime) order so later nodes see fresh neighbors; Jacobi reads only
 * the previous field. Returns the sup-norm increment.
 *
 * Branch enumeration order fixes argmax ties: diffusion controls by (|c|, c),
 * then impulse harvest, then impulse renewal.
 */
inline double sweep_once(const ValueField& prev, ValueField& next, PolicyField& policy,
                         const Grid& grid, const TransitionKernel& kernel,
                         const HarvestModel& model, SweepMode mode,
                         const std::vector<std::size_t>& order) {
    const double qh = model.econ.q() * grid.spacing();
    const double rh = model.econ.r() * grid.spacing();
    const std::size_t upper = grid.upper_index();
    const ValueField& read = (mode == SweepMode::GaussSeidel) ? next : prev;

    if (mode == SweepMode::GaussSeidel) next = prev;
    double increment = 0.0;

    for (std::size_t i = grid.live_begin(); i <= upper; ++i) {
        for (std::size_t a = 0; a < kernel.regimes(); ++a) {
            double best;
            StepType best_step;
            double best_c = 0.0;

            if (i == upper) {
                best = read(i - 1, a) + qh; // the only admissible branch at U
                best_step = StepType::Harvest;
            } else {
                best = -std::numeric_limits<double>::infinity();
                best_step = StepType::Diffusion;
                for (std::size_t ci : order) {
                    const double val = diffusion_branch(read, i, a, kernel, ci);
                    if (val > best) {
                        best = val;
                        best_c = model.control.control_set[ci];
                    }
                }
                if (i > grid.floor_index()) {
                    const double val = read(i - 1, a) + qh;
                    if (val > best) {
                        best = val;
                        best_step = StepType::Harvest;
                        best_c = 0.0;
                    }
                }
                const double renew = read(i + 1, a) - rh;
                if (renew > best) {
                    best = renew;
                    best_step = StepType::Renew;
                    best_c = 0.0;
                }
            }

            increment = std::max(increment, std::abs(best - prev(i, a)));
            next(i, a) = best;
            policy.step[policy.idx(i, a)] = best_step;
            policy.control[policy.idx(i, a)] = best_c;
        }
    }
    return increment;
}

} // namespace detail

/// Pure one-sweep Bellman update of a value field.
inline SweepResult bellman_sweep(const ValueField& v, const Grid& grid,
                                 const TransitionKernel& kernel, const HarvestModel& model,
                                 SweepMode mode = SweepMode::GaussSeidel) {
    SweepResult out;
    out.value = ValueField(grid.size(), model.num_regimes, 0.0);
    out.policy = PolicyField(grid.size(), model.num_regimes);
    const auto order = detail::control_order(model.control.control_set);
    out.increment = detail::sweep_once(v, out.value, out.policy, grid, kernel, model, mode, order);
    return out;
}

// ---------------------------------------------------------------------------
// Fixed-policy evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct ChaseResult {
    bool constant = false;  // value is offset alone (guarded impulse or U holding)
    std::size_t node = 0;   // base diffusion node otherwise
    std::size_t alpha = 0;
    double offset = 0.0;
};

/// Follow impulse moves until a diffusion node or a guarded action; a chain
/// longer than the lattice means a zero-time impulse cycle.
inline ChaseResult chase_impulses(const PolicyField& policy, const Grid& grid,
                                  std::size_t node, std::size_t alpha, double qh, double rh) {
    ChaseResult res;
    res.alpha = alpha;
    std::size_t i = node;
    std::size_t steps = 0;
    const std::size_t cap = 2 * grid.size() + 2;
    while (true) {
        if (++steps > cap)
            throw std::invalid_argument("policy has a zero-time impulse cycle");
        const StepType s = policy.step_at(i, alpha);
        if (s == StepType::Harvest) {
            if (i <= grid.floor_index()) { // guarded: worth exactly 0
                res.constant = true;
                return res;
            }
            res.offset += qh;
            --i;
        } else if (s == StepType::Renew) {
            if (i >= grid.upper_index()) {
                res.constant = true;
                return res;
            }
            res.offset -= rh;
            ++i;
        } else {
            if (i == grid.upper_index()) { // diffusion is switched off at U
                res.constant = true;
                return res;
            }
            res.node = i;
            return res;
        }
    }
}

} // namespace detail

/**
 * Exact value of a fixed stationary policy, solving the linear fixed-point
 * system directly: impulse chains are eliminated by substitution along the
 * state axis, the remaining diffusion-node system is dense-LU solved.
 */
inline ValueField policy_evaluate(const PolicyField& policy, const HarvestModel& model,
                                  const Grid& grid, const TransitionKernel& kernel) {
    const std::size_t m0 = model.num_regimes;
    const double qh = model.econ.q() * grid.spacing();
    const double rh = model.econ.r() * grid.spacing();

    // unknowns: live diffusion nodes below U
    std::vector<long> unknown_of(grid.size() * m0, -1);
    std::vector<std::pair<std::size_t, std::size_t>> unknowns;
    for (std::size_t i = grid.live_begin(); i < grid.upper_index(); ++i)
        for (std::size_t a = 0; a < m0; ++a)
            if (policy.step_at(i, a) == StepType::Diffusion) {
                unknown_of[i * m0 + a] = static_cast<long>(unknowns.size());
                unknowns.emplace_back(i, a);
            }

    // every impulse chain must terminate, including ones nothing references
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < m0; ++a)
            detail::chase_impulses(policy, grid, i, a, qh, rh);

    const std::size_t n = unknowns.size();
    std::vector<double> mat(n * n, 0.0);
    std::vector<double> rhs(n, 0.0);

    auto add_reference = [&](std::size_t row, double coeff, long node, std::size_t alpha) {
        if (node < static_cast<long>(grid.live_begin())) return; // killed or exit: worth 0
        const auto chase =
            detail::chase_impulses(policy, grid, static_cast<std::size_t>(node), alpha, qh, rh);
        rhs[row] += coeff * chase.offset;
        if (!chase.constant) {
            const long col = unknown_of[chase.node * m0 + chase.alpha];
            mat[row * n + static_cast<std::size_t>(col)] -= coeff;
        }
    };

    for (std::size_t u = 0; u < n; ++u) {
        const auto [i, a] = unknowns[u];
        const double c = policy.control_at(i, a);
        long ci = -1;
        for (std::size_t k = 0; k < model.control.control_set.size(); ++k)
            if (std::abs(model.control.control_set[k] - c) <= 1e-12) {
                ci = static_cast<long>(k);
                break;
            }
        if (ci < 0)
            throw std::invalid_argument("policy control is not in the model control set");

        const std::size_t r = kernel.row_index(i, a, static_cast<std::size_t>(ci));
        mat[u * n + u] += 1.0;
        rhs[u] += kernel.pay_dt(r);
        const double disc = kernel.disc(r);
        add_reference(u, disc * kernel.p_up(r), static_cast<long>(i) + 1, a);
        add_reference(u, disc * kernel.p_down(r), static_cast<long>(i) - 1, a);
        const double* stay = kernel.stay(r);
        for (std::size_t l = 0; l < m0; ++l)
            if (stay[l] != 0.0) add_reference(u, disc * stay[l], static_cast<long>(i), l);
    }

    std::vector<double> solution;
    if (n > 0) solution = detail::lu_solve_refined(mat, rhs, n);

    ValueField w(grid.size(), m0, 0.0);
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < m0; ++a) {
            const auto chase = detail::chase_impulses(policy, grid, i, a, qh, rh);
            double base = 0.0;
            if (!chase.constant)
                base = solution[static_cast<std::size_t>(
                    unknown_of[chase.node * m0 + chase.alpha])];
            w(i, a) = chase.offset + base;
        }
    return w;
}

// ---------------------------------------------------------------------------
// Solve loop
// ---------------------------------------------------------------------------

struct SolveOptions {
    double tol = 1e-6;
    std::size_t max_iter = 1'000'000;
    SweepMode mode = SweepMode::GaussSeidel;
    /// Every this many sweeps, jump to the exact value of the current greedy
    /// policy (0 disables the acceleration and leaves plain value iteration).
    std::size_t policy_eval_every = 10;
};

struct SolveResult {
    ValueField value;
    PolicyField policy;
    SolveReport report;
};

namespace detail {

inline double residual_only(const ValueField& v, const HarvestModel& model, const Grid& grid,
                            const TransitionKernel& kernel) {
    double residual = 0.0;
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < model.num_regimes; ++a) {
            const BranchValues b = branch_values(v, i, a, grid, kernel, model);
            double best = -std::numeric_limits<double>::infinity();
            if (b.harvest) best = std::max(best, *b.harvest);
            if (b.renew) best = std::max(best, *b.renew);
            for (const auto& d : b.diffusion) best = std::max(best, d.value);
            residual = std::max(residual, std::abs(v(i, a) - best));
        }
    return residual;
}

inline bool same_policy(const PolicyField& a, const PolicyField& b, const Grid& grid) {
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t al = 0; al < a.m0; ++al)
            if (a.step_at(i, al) != b.step_at(i, al) ||
                a.control_at(i, al) != b.control_at(i, al))
                return false;
    return true;
}

/// Lift the field to the exact value of the given policy, shifted down by a
/// roundoff margin so the lifted field stays a strict subsolution and the
/// following sweeps remain nondecreasing in floating point.
inline void lift_to_policy_value(ValueField& v, const PolicyField& policy,
                                 const HarvestModel& model, const Grid& grid,
                                 const TransitionKernel& kernel) {
    const ValueField w = policy_evaluate(policy, model, grid, kernel);
    double scale = 1.0;
    for (double val : w.raw()) scale = std::max(scale, std::abs(val));
    const double margin = 1e-11 * scale;
    for (std::size_t k = 0; k < v.raw().size(); ++k)
        v.raw()[k] = std::max(v.raw()[k], w.raw()[k] - margin);
    // killed nodes stay pinned at zero
    if (grid.has_killed_node())
        for (std::size_t a = 0; a < model.num_regimes; ++a)
            v(grid.killed_index(), a) = 0.0;
}

} // namespace detail

/**
 * Value and policy iteration from the liquidation field. Plain Bellman sweeps
 * run until the sup-norm increment drops below tol; every policy_eval_every
 * sweeps the field jumps to the exact value of the current greedy policy.
 * Because the discount factor per step is 1 - O(h^2), a small increment alone
 * does not certify optimality, so convergence additionally requires the
 * greedy policy to reproduce itself through its own exact evaluation.
 *
 * Iterates are nondecreasing pointwise, and the returned field is always the
 * output of a full sweep, so active-branch identities (e.g. value steps of
 * exactly q h across impulse-harvested nodes) hold to roundoff.
 */
inline SolveResult solve(const HarvestModel& model, const Grid& grid,
                         const TransitionKernel& kernel, const SolveOptions& opts = {}) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = detail::control_order(model.control.control_set);
    const bool accelerate = opts.policy_eval_every > 0 && std::isfinite(opts.tol);

    SolveResult res;
    res.policy = PolicyField(grid.size(), model.num_regimes);
    PolicyField certified(grid.size(), model.num_regimes);
    bool have_certificate_candidate = false;

    ValueField v = initialize(grid, model);
    ValueField next(grid.size(), model.num_regimes, 0.0);

    double increment = 0.0;
    std::size_t iter = 0;
    std::size_t grow_streak = 0;
    double prev_increment = std::numeric_limits<double>::infinity();
    std::size_t since_eval = 0;
    bool converged = false;

    while (iter < opts.max_iter) {
        ++iter;
        increment =
            detail::sweep_once(v, next, res.policy, grid, kernel, model, opts.mode, order);
        constexpr double ulp32 = 32.0 * std::numeric_limits<double>::epsilon();
        for (std::size_t k = 0; k < v.raw().size(); ++k)
            if (next.raw()[k] < v.raw()[k] - ulp32 * (1.0 + std::abs(v.raw()[k])))
                ++res.report.monotone_violations;
        std::swap(v, next);

        if (increment < opts.tol) {
            if (!accelerate) {
                converged = true;
                break;
            }
            if (have_certificate_candidate &&
                detail::same_policy(res.policy, certified, grid)) {
                converged = true; // greedy policy is a fixed point of its own value
                break;
            }
            certified = res.policy;
            have_certificate_candidate = true;
            detail::lift_to_policy_value(v, res.policy, model, grid, kernel);
            ++res.report.policy_evaluations;
            since_eval = 0;
            continue;
        }
        have_certificate_candidate = false;

        grow_streak = (increment > prev_increment) ? grow_streak + 1 : 0;
        prev_increment = increment;
        if (grow_streak >= 10)
            throw solve_error("solve: increments grew for 10 consecutive sweeps", increment);

        if (accelerate && ++since_eval >= opts.policy_eval_every) {
            since_eval = 0;
            detail::lift_to_policy_value(v, res.policy, model, grid, kernel);
            ++res.report.policy_evaluations;
        }
    }

    res.report.iterations = iter;
    res.report.final_increment = increment;
    res.report.converged = converged;
    if (!converged)
        throw solve_error("solve: sweep budget exhausted before reaching the tolerance",
                          increment);

    res.value = std::move(v);
    res.report.residual = detail::residual_only(res.value, model, grid, kernel);
    res.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// Max |V - best branch| over live nodes; also checks the recorded policy
/// attains the max (to 1e-9), which holds for converged solver output.
inline double dpe_residual(const ValueField& v, const PolicyField& policy,
                           const HarvestModel& model, const Grid& grid,
                           const TransitionKernel& kernel) {
    double residual = 0.0;
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i) {
        for (std::size_t a = 0; a < model.num_regimes; ++a) {
            const BranchValues b = branch_values(v, i, a, grid, kernel, model);
            double best = -std::numeric_limits<double>::infinity();
            if (b.harvest) best = std::max(best, *b.harvest);
            if (b.renew) best = std::max(best, *b.renew);
            for (const auto& d : b.diffusion) best = std::max(best, d.value);
            residual = std::max(residual, std::abs(v(i, a) - best));

            double recorded;
            switch (policy.step_at(i, a)) {
                case StepType::Harvest: recorded = b.harvest.value_or(0.0); break;
                case StepType::Renew: recorded = b.renew.value_or(0.0); break;
                default: {
                    recorded = -std::numeric_limits<double>::infinity();
                    for (const auto& d : b.diffusion)
                        if (std::abs(d.c - policy.control_at(i, a)) <= 1e-12)
                            recorded = d.value;
                }
            }
            if (std::abs(recorded - best) > 1e-9)
                throw std::logic_error("dpe_residual: recorded policy does not attain the max");
        }
    }
    return residual;
}

// ---------------------------------------------------------------------------
// Threshold extraction
// ---------------------------------------------------------------------------

/// Levels of the band structure for a single regime. Bands may be absent
/// (e.g. no bounded-rate harvesting when the control set is {0}).
struct RegimeThresholds {
    std::optional<double> renew_upper;          // L1: top of the renewal band
    std::optional<double> rate_harvest_lower;   // L2: bottom of bounded-rate harvesting
    std::optional<double> impulse_lower;        // L3: bottom of impulse harvesting
    std::vector<double> interval_violations;    // nodes breaking the band structure
    bool ordered = true;                        // L1 <= L2 <= L3 among present levels
};

inline std::vector<RegimeThresholds> extract_thresholds(const PolicyField& policy,
                                                        const Grid& grid) {
    std::vector<RegimeThresholds> out(policy.m0);
    for (std::size_t a = 0; a < policy.m0; ++a) {
        RegimeThresholds& th = out[a];
        std::vector<std::size_t> renewish, rate_harvest, impulse;
        for (std::size_t i = grid.live_begin(); i < grid.size(); ++i) {
            const StepType s = policy.step_at(i, a);
            const double c = policy.control_at(i, a);
            if (s == StepType::Renew || (s == StepType::Diffusion && c < 0.0))
                renewish.push_back(i);
            else if (s == StepType::Diffusion && c > 0.0)
                rate_harvest.push_back(i);
            else if (s == StepType::Harvest)
                impulse.push_back(i);
        }

        auto contiguity = [&](const std::vector<std::size_t>& region) {
            if (region.size() < 2) return;
            for (std::size_t i = region.front(); i <= region.back(); ++i)
                if (!std::binary_search(region.begin(), region.end(), i))
                    th.interval_violations.push_back(grid.node(i));
        };
        contiguity(renewish);
        contiguity(rate_harvest);
        contiguity(impulse);

        if (!renewish.empty()) th.renew_upper = grid.node(renewish.back());
        if (!rate_harvest.empty()) th.rate_harvest_lower = grid.node(rate_harvest.front());
        if (!impulse.empty()) th.impulse_lower = grid.node(impulse.front());

        double last = -std::numeric_limits<double>::infinity();
        for (const auto& level : {th.renew_upper, th.rate_harvest_lower, th.impulse_lower}) {
            if (!level) continue;
            if (*level < last) th.ordered = false;
            last = *level;
        }
    }
    return out;
}

} // namespace harvest
