#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sandpile/errors.hpp"

namespace sandpile {

// Dense LU factorization with partial pivoting, sized for the small state
// spaces the exact oracle works on.
class DenseLU {
  public:
    DenseLU(std::vector<double> a, int n) : lu_(std::move(a)), perm_(n), n_(n) {
        if (static_cast<size_t>(n) * n != lu_.size())
            throw BadParameter("matrix storage does not match dimension");
        for (int i = 0; i < n_; ++i) perm_[i] = i;
        for (int col = 0; col < n_; ++col) {
            int pivot = col;
            double best = std::abs(lu_[idx(col, col)]);
            for (int row = col + 1; row < n_; ++row) {
                const double v = std::abs(lu_[idx(row, col)]);
                if (v > best) {
                    best = v;
                    pivot = row;
                }
            }
            if (best < 1e-300)
                throw SingularSystem("pivot " + std::to_string(col) + " is numerically zero");
            if (pivot != col) {
                std::swap(perm_[pivot], perm_[col]);
                for (int j = 0; j < n_; ++j)
                    std::swap(lu_[idx(pivot, j)], lu_[idx(col, j)]);
            }
            const double inv = 1.0 / lu_[idx(col, col)];
            for (int row = col + 1; row < n_; ++row) {
                const double factor = lu_[idx(row, col)] * inv;
                lu_[idx(row, col)] = factor;
                if (factor == 0.0) continue;
                const double* src = &lu_[idx(col, col + 1)];
                double* dst = &lu_[idx(row, col + 1)];
                for (int j = col + 1; j < n_; ++j) dst[j - col - 1] -= factor * src[j - col - 1];
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& b) const {
        if (static_cast<int>(b.size()) != n_) throw BadParameter("rhs size mismatch");
        std::vector<double> x(n_);
        for (int i = 0; i < n_; ++i) x[i] = b[perm_[i]];
        for (int i = 1; i < n_; ++i) {
            double sum = x[i];
            for (int j = 0; j < i; ++j) sum -= lu_[idx(i, j)] * x[j];
            x[i] = sum;
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double sum = x[i];
            for (int j = i + 1; j < n_; ++j) sum -= lu_[idx(i, j)] * x[j];
            x[i] = sum / lu_[idx(i, i)];
        }
        return x;
    }

    int size() const { return n_; }

  private:
    size_t idx(int row, int col) const {
        return static_cast<size_t>(row) * n_ + col;
    }

    std::vector<double> lu_;
    std::vector<int> perm_;
    int n_;
};

// Solves the tridiagonal system A v = b in place, where A is given by its
// diagonals. No pivoting: callers only pass systems that are strictly
// diagonally dominant by columns, for which elimination in natural order
// is stable.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                             std::vector<double> diag,
                                             std::vector<double> upper,
                                             std::vector<double> rhs) {
    const size_t n = diag.size();
    if (lower.size() + 1 != n || upper.size() + 1 != n || rhs.size() != n)
        throw BadParameter("tridiagonal band sizes inconsistent");
    for (size_t i = 1; i < n; ++i) {
        if (std::abs(diag[i - 1]) < 1e-300)
            throw SingularSystem("tridiagonal pivot is numerically zero");
        const double factor = lower[i - 1] / diag[i - 1];
        diag[i] -= factor * upper[i - 1];
        rhs[i] -= factor * rhs[i - 1];
    }
    if (std::abs(diag[n - 1]) < 1e-300)
        throw SingularSystem("tridiagonal pivot is numerically zero");
    rhs[n - 1] /= diag[n - 1];
    for (size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    return rhs;
}

} // namespace sandpile
