#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace harvest {

/**
 * Generator matrix of the modulating continuous-time Markov chain.
 *
 * Rates are stored row-major; regimes are indexed 0..m0-1 internally
 * (file formats label them 1..m0).
 */
struct RegimeGenerator {
    std::vector<double> entries; // m0 x m0, row-major
    std::size_t m0 = 0;

    RegimeGenerator() = default;
    RegimeGenerator(std::size_t m, std::vector<double> rates)
        : entries(std::move(rates)), m0(m) {
        if (entries.size() != m0 * m0)
            throw std::invalid_argument("generator: need m0*m0 rate entries");
    }

    double rate(std::size_t from, std::size_t to) const { return entries[from * m0 + to]; }
    double diagonal(std::size_t a) const { return entries[a * m0 + a]; }

    double row_sum(std::size_t a) const {
        double s = 0.0;
        for (std::size_t l = 0; l < m0; ++l) s += rate(a, l);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Scalar coefficient fields b(x, alpha), sigma(x, alpha)
// ---------------------------------------------------------------------------

/// x * (growth[alpha] - competition * x)
struct LogisticDrift {
    std::vector<double> growth;
    double competition = 0.0;
};

/// slope[alpha] * x
struct LinearCoef {
    std::vector<double> slope;
};

/// value[alpha]
struct ConstantField {
    std::vector<double> value;
};

/// scale * x + offset, identical across regimes (used by noise-intensity sweeps)
struct ScaledLinear {
    double scale = 0.0;
    double offset = 0.0;
};

/**
 * Closed set of parametric coefficient families. Evaluation is pure; adding a
 * family means adding a variant alternative and a visitor branch.
 */
class ScalarField {
  public:
    using Family = std::variant<LogisticDrift, LinearCoef, ConstantField, ScaledLinear>;

    ScalarField() : family_(ConstantField{{0.0}}) {}
    ScalarField(Family f) : family_(std::move(f)) {}

    double operator()(double x, std::size_t alpha) const {
        return std::visit(
            [&](const auto& fam) -> double {
                using T = std::decay_t<decltype(fam)>;
                if constexpr (std::is_same_v<T, LogisticDrift>)
                    return x * (fam.growth.at(alpha) - fam.competition * x);
                else if constexpr (std::is_same_v<T, LinearCoef>)
                    return fam.slope.at(alpha) * x;
                else if constexpr (std::is_same_v<T, ConstantField>)
                    return fam.value.at(alpha);
                else
                    return fam.scale * x + fam.offset;
            },
            family_);
    }

    const Family& family() const { return family_; }

    /// Number of regimes the family is parameterized for; 0 = any.
    std::size_t regime_count() const {
        return std::visit(
            [](const auto& fam) -> std::size_t {
                using T = std::decay_t<decltype(fam)>;
                if constexpr (std::is_same_v<T, LogisticDrift>) return fam.growth.size();
                else if constexpr (std::is_same_v<T, LinearCoef>) return fam.slope.size();
                else if constexpr (std::is_same_v<T, ConstantField>) return fam.value.size();
                else return 0;
            },
            family_);
    }

  private:
    Family family_;
};

// ---------------------------------------------------------------------------
// Regular control: rate function f(x, c) and running cost g(x, alpha, c)
// ---------------------------------------------------------------------------

enum class RateFamily { Identity, Proportional };

/// scale[alpha] * c^2 / (denom * (1 + x))
struct QuadraticCost {
    std::vector<double> scale;
    double denom = 1.0;
};

struct ZeroCost {};

struct ControlLaw {
    std::vector<double> control_set; // finite, ascending, contains 0
    RateFamily rate_family = RateFamily::Identity;
    std::variant<QuadraticCost, ZeroCost> cost_family = ZeroCost{};

    double rate(double x, double c) const {
        return rate_family == RateFamily::Identity ? c : c * x;
    }

    double cost(double x, std::size_t alpha, double c) const {
        if (const auto* quad = std::get_if<QuadraticCost>(&cost_family))
            return quad->scale.at(alpha) * c * c / (quad->denom * (1.0 + x));
        return 0.0;
    }

    double max_control() const {
        return control_set.empty() ? 0.0 : control_set.back();
    }

    bool contains(double c) const {
        for (double v : control_set)
            if (v == c || std::abs(v - c) <= 1e-12) return true;
        return false;
    }
};

// ---------------------------------------------------------------------------
// Prices, costs, discounting, state floor
// ---------------------------------------------------------------------------

struct Economics {
    double a1 = 0.0;           // unit price
    double a2 = 0.0;           // impulse-harvest unit cost
    double a3 = 0.0;           // impulse-renew unit cost
    double delta = 0.0;        // discount rate per unit time
    double lambda_floor = 0.0; // state-constraint level

    double q() const { return a1 - a2; }
    double r() const { return a1 + a3; }
};

/**
 * Full problem instance. Immutable after construction; all evaluation
 * methods are pure and safe to call concurrently.
 */
struct HarvestModel {
    ScalarField drift;
    ScalarField diffusion;
    RegimeGenerator generator;
    ControlLaw control;
    Economics econ;
    std::size_t num_regimes = 0;

    double b(double x, std::size_t alpha) const { return drift(x, alpha); }
    double sigma(double x, std::size_t alpha) const { return diffusion(x, alpha); }
    double f(double x, double c) const { return control.rate(x, c); }
    double g(double x, std::size_t alpha, double c) const { return control.cost(x, alpha, c); }

    /// p(x, alpha, c) = a1 f(x, c) - g(x, alpha, c), unchecked
    double price_cost(double x, std::size_t alpha, double c) const {
        return econ.a1 * f(x, c) - g(x, alpha, c);
    }
};

/// Checked variant of HarvestModel::price_cost.
inline double eval_price_cost(const HarvestModel& model, double x, std::size_t alpha, double c) {
    if (alpha >= model.num_regimes)
        throw std::domain_error("eval_price_cost: regime index out of range");
    if (!model.control.contains(c))
        throw std::domain_error("eval_price_cost: control not in the control set");
    return model.price_cost(x, alpha, c);
}

/// Net impulse prices (q, r) = (a1 - a2, a1 + a3).
inline std::pair<double, double> derived_prices(const HarvestModel& model) {
    return {model.econ.q(), model.econ.r()};
}

/**
 * Margin of the drift-domination condition at (x, alpha) for a candidate
 * truncation level U:
 *
 *   q (b(x, alpha) - delta (x - U)) + max_c (a2 f(x, c) - g(x, alpha, c))
 *
 * Negative margin for all x > U means value growth above U is exactly the
 * linear harvest gain, so the computational domain can stop at U.
 */
inline double truncation_margin(const HarvestModel& m, double upper, double x,
                                std::size_t alpha) {
    double best = -std::numeric_limits<double>::infinity();
    for (double c : m.control.control_set)
        best = std::max(best, m.econ.a2 * m.f(x, c) - m.g(x, alpha, c));
    return m.econ.q() * (m.b(x, alpha) - m.econ.delta * (x - upper)) + best;
}

/**
 * Smallest level above which impulse harvesting is always optimal, computed
 * as the largest root over regimes of
 *
 *   b(x, alpha) = -max_c(a2 c) / q.
 *
 * Requires the Identity rate family and logistic drift; bisection to 1e-10.
 * Callers round the result up to a grid-compatible level.
 */
inline double compute_truncation(const HarvestModel& model) {
    const auto* drift = std::get_if<LogisticDrift>(&model.drift.family());
    if (!drift)
        throw std::invalid_argument(
            "compute_truncation: needs logistic drift; set the upper level manually");
    if (model.control.rate_family != RateFamily::Identity)
        throw std::invalid_argument(
            "compute_truncation: needs the identity rate family; set the upper level manually");
    const double q = model.econ.q();
    if (q <= 0.0)
        throw std::invalid_argument(
            "compute_truncation: q = a1 - a2 must be positive; set the upper level manually");
    if (drift->competition <= 0.0)
        throw std::invalid_argument(
            "compute_truncation: drift never dominates harvesting; set the upper level manually");

    double sup_cost = 0.0;
    for (double c : model.control.control_set)
        sup_cost = std::max(sup_cost, model.econ.a2 * c);
    const double threshold = -sup_cost / q;
    const double lambda = model.econ.lambda_floor;

    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < model.num_regimes; ++a) {
        // logistic drift decreases beyond its vertex, so the last crossing of
        // the threshold lies at or beyond max(lambda, vertex)
        const double vertex = drift->growth[a] / (2.0 * drift->competition);
        double lo = std::max(lambda, vertex);
        if (model.b(lo, a) < threshold) continue; // already below: no root past lambda

        double hi = std::max(2.0 * std::max(lo, 1.0), 1.0);
        int doubling = 0;
        while (model.b(hi, a) >= threshold) {
            hi *= 2.0;
            if (++doubling > 200)
                throw std::runtime_error(
                    "compute_truncation: drift condition unreachable; set the upper level manually");
        }
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            (model.b(mid, a) >= threshold ? lo : hi) = mid;
        }
        best = std::max(best, 0.5 * (lo + hi));
    }
    if (!std::isfinite(best))
        throw std::runtime_error(
            "compute_truncation: no root above the floor; set the upper level manually");
    return best;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Error;
    std::string message;
};

/**
 * Structural and sampled checks of a model instance. Violations are data,
 * not exceptions; an empty list means the instance is admissible.
 */
inline std::vector<Violation> validate_model(const HarvestModel& model,
                                             double upper_hint = 0.0) {
    std::vector<Violation> out;
    auto error = [&](std::string msg) {
        out.push_back({Violation::Severity::Error, std::move(msg)});
    };
    auto warning = [&](std::string msg) {
        out.push_back({Violation::Severity::Warning, std::move(msg)});
    };

    const std::size_t m0 = model.num_regimes;
    if (m0 == 0) {
        error("model has no regimes");
        return out;
    }

    // generator
    if (model.generator.m0 != m0 || model.generator.entries.size() != m0 * m0) {
        error("generator size does not match the regime count");
    } else {
        for (std::size_t a = 0; a < m0; ++a) {
            for (std::size_t l = 0; l < m0; ++l)
                if (l != a && model.generator.rate(a, l) < 0.0)
                    error("generator row " + std::to_string(a + 1) +
                          ": negative off-diagonal rate");
            if (std::abs(model.generator.row_sum(a)) > 1e-12)
                error("generator row " + std::to_string(a + 1) + ": row sum != 0");
        }
    }

    // coefficient fields
    for (const auto* field : {&model.drift, &model.diffusion}) {
        const std::size_t rc = field->regime_count();
        if (rc != 0 && rc != m0)
            error("coefficient field regime count does not match the model");
    }

    // economics
    if (model.econ.a1 <= 0.0) error("a1 must be positive");
    if (model.econ.a2 <= 0.0) error("a2 must be positive");
    if (model.econ.a3 <= 0.0) error("a3 must be positive");
    if (model.econ.delta <= 0.0) error("delta must be positive");
    if (model.econ.lambda_floor < 0.0) error("lambda must be nonnegative");
    if (model.econ.a1 > 0.0 && model.econ.a2 > 0.0 && model.econ.q() <= 0.0)
        warning("q = a1 - a2 <= 0: harvesting never pays, the value field degenerates");

    // control set
    const auto& set = model.control.control_set;
    if (set.empty()) {
        error("control set is empty");
    } else {
        if (!model.control.contains(0.0)) error("0 is not in the control set");
        for (std::size_t i = 1; i < set.size(); ++i)
            if (!(set[i] > set[i - 1])) error("control set is not strictly ascending");
    }
    if (const auto* quad = std::get_if<QuadraticCost>(&model.control.cost_family)) {
        if (quad->denom <= 0.0) error("quadratic cost denominator must be positive");
        if (quad->scale.size() != m0) error("quadratic cost scale count does not match regimes");
        for (double s : quad->scale)
            if (s < 0.0) error("quadratic cost scale must be nonnegative");
    }

    // sampled checks on [0, 2 U]
    double xmax = upper_hint > 0.0 ? 2.0 * upper_hint : 0.0;
    if (xmax <= 0.0) {
        try {
            xmax = 2.0 * compute_truncation(model);
        } catch (const std::exception&) {
            xmax = 2.0 * (model.econ.lambda_floor + 1.0);
        }
    }
    bool f_zero_ok = true, g_nonneg = true, all_finite = true;
    const int samples = 201;
    for (int i = 0; i < samples; ++i) {
        const double x = xmax * static_cast<double>(i) / (samples - 1);
        for (std::size_t a = 0; a < m0; ++a) {
            if (!std::isfinite(model.b(x, a)) || !std::isfinite(model.sigma(x, a)))
                all_finite = false;
            for (double c : set) {
                const double fv = model.f(x, c);
                const double gv = model.g(x, a, c);
                if (!std::isfinite(fv) || !std::isfinite(gv)) all_finite = false;
                if (gv < 0.0) g_nonneg = false;
                if (c == 0.0 && fv != 0.0) f_zero_ok = false;
            }
        }
    }
    if (!f_zero_ok) error("f(x, 0) != 0 somewhere on the sampled domain");
    if (!g_nonneg) error("running cost g is negative somewhere on the sampled domain");
    if (!all_finite) error("coefficients are not finite on the sampled domain");

    return out;
}

inline bool has_errors(const std::vector<Violation>& violations) {
    return std::any_of(violations.begin(), violations.end(), [](const Violation& v) {
        return v.severity == Violation::Severity::Error;
    });
}

} // namespace harvest
