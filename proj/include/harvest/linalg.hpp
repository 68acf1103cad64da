#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace harvest::detail {

/**
 * Dense LU with partial pivoting for the small systems arising in
 * fixed-policy evaluation (strictly diagonally dominant after impulse
 * elimination). Keeps the factors so the caller can run a refinement step.
 */
class LuFactors {
  public:
    LuFactors(std::vector<double> a, std::size_t n) : lu_(std::move(a)), n_(n), perm_(n) {
        if (lu_.size() != n_ * n_) throw std::invalid_argument("lu: dimension mismatch");
        for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
        for (std::size_t col = 0; col < n_; ++col) {
            std::size_t piv = col;
            double best = std::abs(lu_[perm_[col] * n_ + col]);
            for (std::size_t r = col + 1; r < n_; ++r) {
                const double v = std::abs(lu_[perm_[r] * n_ + col]);
                if (v > best) {
                    best = v;
                    piv = r;
                }
            }
            if (best == 0.0) throw std::runtime_error("lu: singular matrix");
            std::swap(perm_[col], perm_[piv]);

            const double* prow = &lu_[perm_[col] * n_];
            const double inv_piv = 1.0 / prow[col];
            for (std::size_t r = col + 1; r < n_; ++r) {
                double* row = &lu_[perm_[r] * n_];
                const double factor = row[col] * inv_piv;
                row[col] = factor;
                if (factor == 0.0) continue;
                for (std::size_t k = col + 1; k < n_; ++k) row[k] -= factor * prow[k];
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        std::vector<double> y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = b[perm_[i]];
            const double* row = &lu_[perm_[i] * n_];
            for (std::size_t k = 0; k < i; ++k) s -= row[k] * y[k];
            y[i] = s;
        }
        std::vector<double> x(n_);
        for (std::size_t i = n_; i-- > 0;) {
            const double* row = &lu_[perm_[i] * n_];
            double s = y[i];
            for (std::size_t k = i + 1; k < n_; ++k) s -= row[k] * x[k];
            x[i] = s / row[i];
        }
        return x;
    }

  private:
    std::vector<double> lu_;
    std::size_t n_ = 0;
    std::vector<std::size_t> perm_;
};

/// Solve a x = b with one step of iterative refinement; a and b are copied.
inline std::vector<double> lu_solve_refined(const std::vector<double>& a,
                                            const std::vector<double>& b, std::size_t n) {
    const LuFactors lu(a, n);
    std::vector<double> x = lu.solve(b);
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        const double* row = &a[i * n];
        for (std::size_t k = 0; k < n; ++k) s -= row[k] * x[k];
        residual[i] = s;
    }
    const std::vector<double> dx = lu.solve(residual);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    return x;
}

} // namespace harvest::detail
