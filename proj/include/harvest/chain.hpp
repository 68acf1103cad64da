#pragma once

#include "harvest/grid.hpp"
#include "harvest/model.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace harvest {

/// Step type of the controlled chain: diffusion-like move, impulse harvest,
/// or impulse renewal. Numeric values follow the convention used in the
/// policy file format.
enum class StepType : int { Renew = -1, Diffusion = 0, Harvest = 1 };

inline int step_code(StepType s) { return static_cast<int>(s); }

inline StepType step_from_code(int code) {
    switch (code) {
        case -1: return StepType::Renew;
        case 0: return StepType::Diffusion;
        case 1: return StepType::Harvest;
        default: throw std::invalid_argument("step type code must be -1, 0 or 1");
    }
}

/**
 * Normalizer Q_h(x, alpha, 0, c) = sigma^2 + h |b - f| - h^2 Gamma_aa + zeta.
 * All three dynamic terms are nonnegative (the diagonal generator entry is
 * nonpositive), so Q_h = 0 only in the fully degenerate case.
 */
inline double q_normalizer(const HarvestModel& model, double x, std::size_t alpha, double c,
                           double h, double zeta) {
    const double sig = model.sigma(x, alpha);
    const double drift = model.b(x, alpha) - model.f(x, c);
    const double q = sig * sig + h * std::abs(drift) -
                     h * h * model.generator.diagonal(alpha) + zeta;
    if (q <= 0.0)
        throw std::runtime_error("degenerate state: Q_h = 0 (zero dynamics and zeta = 0)");
    return q;
}

/// One target of a kernel row. node = -1 denotes the exit state below the
/// lattice (value 0), which only occurs on floors at zero.
struct KernelEntry {
    long node = 0;
    std::size_t regime = 0;
    double prob = 0.0;
};

struct KernelRow {
    std::vector<KernelEntry> entries;
    double dt = 0.0;

    double sum() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.prob;
        return s;
    }
};

/// Diffusion-step row at a live node x < U (Markov chain construction).
inline KernelRow diffusion_transitions(const HarvestModel& model, const Grid& grid,
                                       std::size_t node, std::size_t alpha, double c,
                                       double zeta) {
    if (!grid.is_live(node) || node == grid.upper_index())
        throw std::invalid_argument("diffusion row: node must be live and below U");
    const double x = grid.node(node);
    const double h = grid.spacing();
    const double sig = model.sigma(x, alpha);
    const double drift = model.b(x, alpha) - model.f(x, c);
    const double q = q_normalizer(model, x, alpha, c, h, zeta);

    KernelRow row;
    row.dt = h * h / q;
    const double half_var = 0.5 * sig * sig;
    row.entries.push_back({static_cast<long>(node) + 1, alpha,
                           (half_var + std::max(drift, 0.0) * h) / q});
    row.entries.push_back({static_cast<long>(node) - 1, alpha,
                           (half_var + std::max(-drift, 0.0) * h) / q});
    for (std::size_t l = 0; l < model.num_regimes; ++l) {
        const double p = (l == alpha) ? zeta / q : model.generator.rate(alpha, l) * row.dt;
        row.entries.push_back({static_cast<long>(node), l, p});
    }
    return row;
}

/// Impulse-step row: a deterministic one-node move taking zero time.
inline KernelRow impulse_transitions(const Grid& grid, std::size_t node, std::size_t alpha,
                                     StepType step) {
    if (step == StepType::Diffusion)
        throw std::invalid_argument("impulse row: step must be Harvest or Renew");
    if (step == StepType::Harvest) {
        if (node <= grid.floor_index())
            throw std::invalid_argument("impulse harvest is not available at the floor");
        return {{{static_cast<long>(node) - 1, alpha, 1.0}}, 0.0};
    }
    if (node >= grid.upper_index())
        throw std::invalid_argument("impulse renewal is not available at the upper level");
    return {{{static_cast<long>(node) + 1, alpha, 1.0}}, 0.0};
}

/// How the regularizer zeta(h) is chosen when building a kernel.
enum class ZetaMode { Auto, Zero, SpacingH };

/**
 * Materialized diffusion-step transition data for every
 * (live node below U, regime, control), plus per-row interpolation interval,
 * discount factor and running payoff weight. Impulse rows are trivial and
 * are produced on demand by impulse_transitions().
 *
 * Construction is a pure map over rows; the finished kernel is immutable.
 */
class TransitionKernel {
  public:
    TransitionKernel() = default;

    TransitionKernel(const HarvestModel& model, const Grid& grid, ZetaMode mode) {
        m0_ = model.num_regimes;
        nc_ = model.control.control_set.size();
        live_begin_ = grid.live_begin();
        diff_nodes_ = grid.upper_index() - grid.live_begin();
        const double h = grid.spacing();

        zeta_ = 0.0;
        if (mode == ZetaMode::SpacingH) zeta_ = h;
        if (mode == ZetaMode::Auto) {
            for (std::size_t i = grid.live_begin(); i < grid.upper_index() && zeta_ == 0.0; ++i)
                for (std::size_t a = 0; a < m0_; ++a)
                    if (model.sigma(grid.node(i), a) == 0.0) {
                        zeta_ = h;
                        break;
                    }
        }

        const std::size_t rows = diff_nodes_ * m0_ * nc_;
        p_up_.resize(rows);
        p_down_.resize(rows);
        dt_.resize(rows);
        disc_.resize(rows);
        pay_dt_.resize(rows);
        stay_.resize(rows * m0_);

        for (std::size_t i = grid.live_begin(); i < grid.upper_index(); ++i) {
            const double x = grid.node(i);
            for (std::size_t a = 0; a < m0_; ++a) {
                const double sig = model.sigma(x, a);
                const double half_var = 0.5 * sig * sig;
                for (std::size_t ci = 0; ci < nc_; ++ci) {
                    const double c = model.control.control_set[ci];
                    const double drift = model.b(x, a) - model.f(x, c);
                    const double q = q_normalizer(model, x, a, c, h, zeta_);
                    const std::size_t r = row_index(i, a, ci);
                    p_up_[r] = (half_var + std::max(drift, 0.0) * h) / q;
                    p_down_[r] = (half_var + std::max(-drift, 0.0) * h) / q;
                    dt_[r] = h * h / q;
                    disc_[r] = std::exp(-model.econ.delta * dt_[r]);
                    pay_dt_[r] = model.price_cost(x, a, c) * dt_[r];
                    for (std::size_t l = 0; l < m0_; ++l)
                        stay_[r * m0_ + l] =
                            (l == a) ? zeta_ / q : model.generator.rate(a, l) * dt_[r];
                }
            }
        }
    }

    double zeta() const { return zeta_; }
    std::size_t regimes() const { return m0_; }
    std::size_t controls() const { return nc_; }
    std::size_t diffusion_nodes() const { return diff_nodes_; }

    std::size_t row_index(std::size_t node, std::size_t alpha, std::size_t ci) const {
        return ((node - live_begin_) * m0_ + alpha) * nc_ + ci;
    }

    double p_up(std::size_t r) const { return p_up_[r]; }
    double p_down(std::size_t r) const { return p_down_[r]; }
    double dt(std::size_t r) const { return dt_[r]; }
    double disc(std::size_t r) const { return disc_[r]; }
    double pay_dt(std::size_t r) const { return pay_dt_[r]; }
    const double* stay(std::size_t r) const { return stay_.data() + r * m0_; }

    /// Materialize the row for tests and diagnostics.
    KernelRow diffusion_row(std::size_t node, std::size_t alpha, std::size_t ci) const {
        const std::size_t r = row_index(node, alpha, ci);
        KernelRow row;
        row.dt = dt_[r];
        row.entries.push_back({static_cast<long>(node) + 1, alpha, p_up_[r]});
        row.entries.push_back({static_cast<long>(node) - 1, alpha, p_down_[r]});
        for (std::size_t l = 0; l < m0_; ++l)
            row.entries.push_back({static_cast<long>(node), l, stay_[r * m0_ + l]});
        return row;
    }

  private:
    std::size_t m0_ = 0, nc_ = 0, live_begin_ = 0, diff_nodes_ = 0;
    double zeta_ = 0.0;
    std::vector<double> p_up_, p_down_, dt_, disc_, pay_dt_, stay_;
};

inline TransitionKernel build_kernel(const HarvestModel& model, const Grid& grid,
                                     ZetaMode mode = ZetaMode::Auto) {
    return TransitionKernel(model, grid, mode);
}

/// Whole-kernel stochasticity summary (probability bounds and row sums).
struct StochasticityReport {
    double max_row_sum_error = 0.0;
    double min_probability = 0.0;
};

inline StochasticityReport stochasticity_report(const TransitionKernel& kernel,
                                                const Grid& grid) {
    StochasticityReport rep;
    rep.min_probability = 1.0;
    for (std::size_t i = grid.live_begin(); i < grid.upper_index(); ++i)
        for (std::size_t a = 0; a < kernel.regimes(); ++a)
            for (std::size_t ci = 0; ci < kernel.controls(); ++ci) {
                const KernelRow row = kernel.diffusion_row(i, a, ci);
                rep.max_row_sum_error =
                    std::max(rep.max_row_sum_error, std::abs(row.sum() - 1.0));
                for (const auto& e : row.entries)
                    rep.min_probability = std::min(rep.min_probability, e.prob);
            }
    return rep;
}

/**
 * One-step conditional moment check of the chain against the diffusion.
 * The mean identity is algebraically exact; the variance gap must stay
 * within the analytic bound (h|b-f| + h^2|Gamma_aa| + zeta + dt (b-f)^2) dt.
 */
struct ConsistencyReport {
    double max_mean_error = 0.0;
    double max_var_gap = 0.0;
    double max_var_bound = 0.0;
    double max_switch_error = 0.0;
    bool var_within_bound = true;
};

inline ConsistencyReport local_consistency_report(const HarvestModel& model,
                                                  const TransitionKernel& kernel,
                                                  const Grid& grid) {
    ConsistencyReport rep;
    const double h = grid.spacing();
    for (std::size_t i = grid.live_begin(); i < grid.upper_index(); ++i) {
        const double x = grid.node(i);
        for (std::size_t a = 0; a < kernel.regimes(); ++a) {
            const double sig = model.sigma(x, a);
            for (std::size_t ci = 0; ci < kernel.controls(); ++ci) {
                const double c = model.control.control_set[ci];
                const double drift = model.b(x, a) - model.f(x, c);
                const std::size_t r = kernel.row_index(i, a, ci);
                const double dt = kernel.dt(r);

                const double mean = h * (kernel.p_up(r) - kernel.p_down(r));
                rep.max_mean_error =
                    std::max(rep.max_mean_error, std::abs(mean - drift * dt));

                const double var =
                    h * h * (kernel.p_up(r) + kernel.p_down(r)) - mean * mean;
                const double gap = std::abs(var - sig * sig * dt);
                const double bound =
                    (h * std::abs(drift) + h * h * std::abs(model.generator.diagonal(a)) +
                     kernel.zeta() + dt * drift * drift) *
                    dt;
                rep.max_var_gap = std::max(rep.max_var_gap, gap);
                rep.max_var_bound = std::max(rep.max_var_bound, bound);
                if (gap > bound * (1.0 + 1e-12) + 1e-300) rep.var_within_bound = false;

                for (std::size_t l = 0; l < kernel.regimes(); ++l)
                    if (l != a)
                        rep.max_switch_error =
                            std::max(rep.max_switch_error,
                                     std::abs(kernel.stay(r)[l] -
                                              model.generator.rate(a, l) * dt));
            }
        }
    }
    return rep;
}

} // namespace harvest
