#pragma once

#include "harvest/grid.hpp"
#include "harvest/model.hpp"
#include "harvest/solver.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace harvest {

struct SimConfig {
    double dt = 1e-3;       // Euler time step
    double horizon = 200.0; // censoring time
    std::size_t n_paths = 10'000;
    std::uint64_t seed = 1;
    double start_x = 1.0;
    std::size_t start_alpha = 0;
    bool exact_switch_clocks = false; // exponential clocks instead of per-step thinning
    std::size_t threads = 0;          // 0 = hardware concurrency
};

struct PathRecord {
    double discounted_payoff = 0.0;
    double exit_time = 0.0;
    bool censored = false; // reached the horizon without exiting
    double total_harvest = 0.0;
    double total_renew = 0.0;
};

struct PayoffEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double censored_fraction = 0.0;
    double tail_bound = 0.0; // discounted payoff ignored beyond the horizon
};

/// One Euler-Maruyama step of the controlled state.
inline double step_euler(const HarvestModel& model, double x, std::size_t alpha, double c,
                         double dt, double gaussian) {
    return x + (model.b(x, alpha) - model.f(x, c)) * dt +
           model.sigma(x, alpha) * std::sqrt(dt) * gaussian;
}

/// First-order regime switch over one step: leave alpha for l with
/// probability rate(alpha, l) * dt.
inline std::size_t sample_switch(const RegimeGenerator& gen, std::size_t alpha, double dt,
                                 double uniform) {
    double acc = 0.0;
    for (std::size_t l = 0; l < gen.m0; ++l) {
        if (l == alpha) continue;
        const double p = gen.rate(alpha, l) * dt;
        if (p >= 1.0)
            throw std::invalid_argument("sample_switch: dt too large for the switching rates");
        acc += p;
        if (uniform < acc) return l;
    }
    return alpha;
}

struct PolicyAction {
    double control = 0.0;
    double impulse = 0.0; // > 0 harvested amount, < 0 renewed amount
    bool exited = false;
};

/**
 * Feedback rule lifting the grid policy to a continuous state: snap to the
 * nearest node; project impulse regions onto the continuation boundary
 * (harvesting down / renewing up); otherwise return the node's regular
 * control.
 *
 * A state below the floor follows the floor node's action: a renewing floor
 * reflects the overshoot back up (the lift of an instantaneous renewal at
 * the floor), anything else exits. Attempting to harvest down through the
 * floor also exits.
 */
inline PolicyAction apply_policy(double x, std::size_t alpha, const PolicyField& policy,
                                 const Grid& grid) {
    PolicyAction act;
    const double hi = grid.upper() + grid.spacing();
    const double clamped = std::min(x, hi);
    std::size_t i;
    if (clamped < grid.lambda_floor() - 0.5 * grid.spacing()) {
        if (policy.step_at(grid.floor_index(), alpha) != StepType::Renew) {
            act.exited = true;
            return act;
        }
        i = grid.floor_index();
    } else {
        i = grid.nearest_index(std::max(clamped, grid.node(grid.live_begin())));
    }
    const StepType s = policy.step_at(i, alpha);
    if (s == StepType::Harvest) {
        while (policy.step_at(i, alpha) == StepType::Harvest) {
            if (i <= grid.floor_index()) {
                // the rule keeps pushing below the floor: liquidate and exit
                act.impulse = std::max(x - grid.lambda_floor(), 0.0);
                act.exited = true;
                return act;
            }
            --i;
        }
        act.impulse = x - grid.node(i);
        act.control = policy.control_at(i, alpha);
    } else if (s == StepType::Renew) {
        while (policy.step_at(i, alpha) == StepType::Renew && i < grid.upper_index()) ++i;
        act.impulse = x - grid.node(i); // negative: renewed amount
        act.control = policy.control_at(i, alpha);
    } else {
        act.control = policy.control_at(i, alpha);
    }
    return act;
}

namespace detail {

/// splitmix64, used to derive independent per-path generator seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d4a9d49268f09bull;
    return z ^ (z >> 31);
}

/// xoshiro256** (Blackman/Vigna, public domain): fast 64-bit generator for
/// the path loop; state is seeded through splitmix64.
class Xoshiro256ss {
  public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    explicit Xoshiro256ss(std::uint64_t seed) {
        for (auto& word : state_) word = mix_seed(seed += 0x9e3779b97f4a7c15ull);
    }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

  private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }
    std::uint64_t state_[4]{};
};

/// Direct-dispatch coefficient evaluation for the path loop; identical
/// expressions to ScalarField::operator(), minus the variant dispatch.
struct CoefCache {
    const LogisticDrift* drift_logistic;
    const LinearCoef* diff_linear;
    const ScaledLinear* diff_scaled;
    const HarvestModel& model;

    explicit CoefCache(const HarvestModel& m)
        : drift_logistic(std::get_if<LogisticDrift>(&m.drift.family())),
          diff_linear(std::get_if<LinearCoef>(&m.diffusion.family())),
          diff_scaled(std::get_if<ScaledLinear>(&m.diffusion.family())),
          model(m) {}

    double b(double x, std::size_t a) const {
        return drift_logistic ? x * (drift_logistic->growth[a] -
                                     drift_logistic->competition * x)
                              : model.b(x, a);
    }
    double sigma(double x, std::size_t a) const {
        if (diff_linear) return diff_linear->slope[a] * x;
        if (diff_scaled) return diff_scaled->scale * x + diff_scaled->offset;
        return model.sigma(x, a);
    }
};

} // namespace detail

struct PathLogRow {
    double t = 0.0;
    double x = 0.0;
    std::size_t alpha = 0;
    double c = 0.0;
    double dY = 0.0;
    double dZ = 0.0;
    double payoff_so_far = 0.0;
};

using PathLog = std::vector<PathLogRow>;

/**
 * Simulate one controlled path under the grid policy and accumulate the
 * discounted payoff until exit below the floor or the horizon. At most one
 * impulse (harvest or renewal, never both) is applied per step.
 */
template <class Rng>
PathRecord simulate_path(const HarvestModel& model, const PolicyField& policy,
                         const Grid& grid, const SimConfig& cfg, Rng& rng,
                         PathLog* log = nullptr) {
    PathRecord rec;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    const double q = model.econ.q(), r = model.econ.r();
    const double decay = std::exp(-model.econ.delta * cfg.dt);
    const double sqrt_dt = std::sqrt(cfg.dt);
    const long n_steps = std::lround(cfg.horizon / cfg.dt);
    const detail::CoefCache coef(model);

    double x = cfg.start_x;
    std::size_t alpha = cfg.start_alpha;
    double discount = 1.0;
    double next_switch = std::numeric_limits<double>::infinity();
    if (cfg.exact_switch_clocks) {
        const double rate = -model.generator.diagonal(alpha);
        if (rate > 0.0) next_switch = -std::log1p(-uniform(rng)) / rate;
    }

    for (long k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        const PolicyAction act = apply_policy(x, alpha, policy, grid);
        double dY = 0.0, dZ = 0.0;
        if (act.impulse > 0.0) {
            dY = act.impulse;
            rec.discounted_payoff += discount * q * dY;
            rec.total_harvest += dY;
            x -= dY;
        } else if (act.impulse < 0.0) {
            dZ = -act.impulse;
            rec.discounted_payoff -= discount * r * dZ;
            rec.total_renew += dZ;
            x += dZ;
        }
        if (log) log->push_back({t, x, alpha, act.control, dY, dZ, rec.discounted_payoff});
        if (act.exited) {
            rec.exit_time = t;
            return rec;
        }

        if (act.control != 0.0) // p(x, alpha, 0) = 0 for the supported families
            rec.discounted_payoff +=
                discount * model.price_cost(x, alpha, act.control) * cfg.dt;
        x = x + (coef.b(x, alpha) - model.f(x, act.control)) * cfg.dt +
            coef.sigma(x, alpha) * sqrt_dt * normal(rng);
        discount *= decay;

        if (cfg.exact_switch_clocks) {
            if (t + cfg.dt >= next_switch) {
                // jump distribution proportional to the off-diagonal rates
                const double total = -model.generator.diagonal(alpha);
                double u = uniform(rng) * total;
                for (std::size_t l = 0; l < model.generator.m0; ++l) {
                    if (l == alpha) continue;
                    u -= model.generator.rate(alpha, l);
                    if (u <= 0.0) {
                        alpha = l;
                        break;
                    }
                }
                const double rate = -model.generator.diagonal(alpha);
                next_switch = rate > 0.0 ? t + cfg.dt - std::log1p(-uniform(rng)) / rate
                                         : std::numeric_limits<double>::infinity();
            }
        } else {
            alpha = sample_switch(model.generator, alpha, cfg.dt, uniform(rng));
        }
        // whether a sub-floor state exits or is renewed back up is decided by
        // apply_policy on the next pass, from the floor node's action
    }
    rec.exit_time = cfg.horizon;
    rec.censored = true;
    return rec;
}

/// Discounted payoff mass beyond the horizon, for censoring diagnostics.
inline double horizon_tail_bound(const HarvestModel& model, const Grid& grid,
                                 const SimConfig& cfg) {
    double sup_p = 0.0;
    for (std::size_t i = grid.live_begin(); i < grid.size(); ++i)
        for (std::size_t a = 0; a < model.num_regimes; ++a)
            for (double c : model.control.control_set)
                sup_p = std::max(sup_p, std::abs(model.price_cost(grid.node(i), a, c)));
    return std::exp(-model.econ.delta * cfg.horizon) *
           (model.econ.q() * grid.upper() + sup_p / model.econ.delta);
}

/**
 * Monte Carlo estimate over independent seeded paths. Path k uses a generator
 * seeded from (seed, k), so results are reproducible bit-for-bit regardless
 * of the worker count.
 */
inline PayoffEstimate estimate_payoff(const HarvestModel& model, const PolicyField& policy,
                                      const Grid& grid, const SimConfig& cfg) {
    if (cfg.n_paths < 2)
        throw std::invalid_argument("estimate_payoff: need at least two paths");

    std::vector<double> payoffs(cfg.n_paths);
    std::vector<std::uint8_t> censored(cfg.n_paths, 0);

    std::size_t workers = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<std::size_t>(workers, cfg.n_paths);

    auto run_chunk = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            detail::Xoshiro256ss rng(detail::mix_seed(cfg.seed + 0x51a1ull * k));
            const PathRecord rec = simulate_path(model, policy, grid, cfg, rng);
            payoffs[k] = rec.discounted_payoff;
            censored[k] = rec.censored ? 1 : 0;
        }
    };

    if (workers == 1) {
        run_chunk(0, cfg.n_paths);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (cfg.n_paths + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(cfg.n_paths, begin + chunk);
            if (begin < end) pool.emplace_back(run_chunk, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    PayoffEstimate est;
    est.n_paths = cfg.n_paths;
    double sum = 0.0;
    std::size_t n_censored = 0;
    for (std::size_t k = 0; k < cfg.n_paths; ++k) {
        sum += payoffs[k];
        n_censored += censored[k];
    }
    est.mean = sum / static_cast<double>(cfg.n_paths);
    double ss = 0.0;
    for (double p : payoffs) ss += (p - est.mean) * (p - est.mean);
    const double sample_var = ss / static_cast<double>(cfg.n_paths - 1);
    est.std_error = std::sqrt(sample_var / static_cast<double>(cfg.n_paths));
    est.censored_fraction =
        static_cast<double>(n_censored) / static_cast<double>(cfg.n_paths);
    est.tail_bound = horizon_tail_bound(model, grid, cfg);
    return est;
}

} // namespace harvest
