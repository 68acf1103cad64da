#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace harvest {

/**
 * Uniform state lattice {lambda - h, lambda, ..., U} intersected with [0, U].
 *
 * The node below the floor, when it exists, is the absorbing "killed" state:
 * reaching it stops the chain with value 0. All nodes at or above the floor
 * are live. lambda and U are snapped to exact multiples of h; a snap larger
 * than h/2 is rejected as a configuration error.
 */
class Grid {
  public:
    Grid() = default;
    Grid(double h, long k_first, long k_floor, long k_upper)
        : h_(h), k_first_(k_first), k_floor_(k_floor), k_upper_(k_upper) {
        nodes_.reserve(static_cast<std::size_t>(k_upper - k_first + 1));
        for (long k = k_first; k <= k_upper; ++k)
            nodes_.push_back(static_cast<double>(k) * h);
    }

    double spacing() const { return h_; }
    double lambda_floor() const { return static_cast<double>(k_floor_) * h_; }
    double upper() const { return static_cast<double>(k_upper_) * h_; }

    std::size_t size() const { return nodes_.size(); }
    double node(std::size_t i) const { return nodes_[i]; }
    const std::vector<double>& nodes() const { return nodes_; }

    bool has_killed_node() const { return k_first_ < k_floor_; }
    std::size_t killed_index() const { return 0; }

    /// Index of the first live node (the floor).
    std::size_t live_begin() const { return has_killed_node() ? 1 : 0; }
    std::size_t upper_index() const { return nodes_.size() - 1; }
    std::size_t floor_index() const { return live_begin(); }
    std::size_t live_count() const { return nodes_.size() - live_begin(); }

    bool is_live(std::size_t i) const { return i >= live_begin(); }

    /// Nearest node index for a continuous state, clamped to the lattice.
    std::size_t nearest_index(double x) const {
        const double t = (x - nodes_.front()) / h_;
        long i = std::lround(t);
        if (i < 0) i = 0;
        if (i >= static_cast<long>(nodes_.size())) i = static_cast<long>(nodes_.size()) - 1;
        return static_cast<std::size_t>(i);
    }

    /// Exact index of a node value; throws if x is not on the lattice.
    std::size_t index_of(double x) const {
        const std::size_t i = nearest_index(x);
        if (std::abs(nodes_[i] - x) > 1e-9 * std::max(1.0, std::abs(x)))
            throw std::invalid_argument("grid: " + std::to_string(x) + " is not a grid node");
        return i;
    }

  private:
    double h_ = 0.0;
    long k_first_ = 0, k_floor_ = 0, k_upper_ = 0;
    std::vector<double> nodes_;
};

namespace detail {
inline long snap_to_multiple(double value, double h, const char* what) {
    const long k = std::lround(value / h);
    const double snapped = static_cast<double>(k) * h;
    if (std::abs(snapped - value) > 0.5 * h * (1.0 + 1e-9))
        throw std::invalid_argument(std::string(what) +
                                    " is more than h/2 away from a multiple of h");
    return k;
}
} // namespace detail

/**
 * Build the lattice for floor lambda, upper level U and spacing h.
 * The killed node lambda - h is included whenever it is nonnegative.
 */
inline Grid build_grid(double lambda, double upper, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("grid: spacing must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("grid: floor must be nonnegative");
    if (!(lambda < upper)) throw std::invalid_argument("grid: floor must lie below the upper level");

    const long k_floor = detail::snap_to_multiple(lambda, h, "floor lambda");
    const long k_upper = detail::snap_to_multiple(upper, h, "upper level U");
    if (k_floor >= k_upper)
        throw std::invalid_argument("grid: snapped floor reaches the upper level");

    const long k_first = (k_floor >= 1) ? k_floor - 1 : k_floor;
    return Grid(h, k_first, k_floor, k_upper);
}

} // namespace harvest
