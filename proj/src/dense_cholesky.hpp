#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lapfield/grid.hpp"

namespace lapfield::detail {

/// Dense symmetric positive definite factorization M = R R^T, stored in the
/// lower triangle of a row-major n x n buffer.
class DenseCholesky {
public:
    DenseCholesky() = default;
    DenseCholesky(std::vector<double> m, std::size_t n) : a_(std::move(m)), n_(n) { factor(); }

    std::size_t size() const noexcept { return n_; }

    void solve_in_place(std::vector<double>& b) const {
        for (std::size_t i = 0; i < n_; ++i) {
            const double* ri = &a_[i * n_];
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= ri[k] * b[k];
            b[i] = s / ri[i];
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = b[i];
            for (std::size_t k = i + 1; k < n_; ++k) s -= a_[k * n_ + i] * b[k];
            b[i] = s / a_[i * n_ + i];
        }
    }

private:
    void factor() {
        for (std::size_t j = 0; j < n_; ++j) {
            double* rj = &a_[j * n_];
            double d = rj[j];
            for (std::size_t k = 0; k < j; ++k) d -= rj[k] * rj[k];
            if (!(d > 0.0)) throw NumericalError("dense Cholesky: matrix is not positive definite");
            const double piv = std::sqrt(d);
            rj[j] = piv;
            for (std::size_t i = j + 1; i < n_; ++i) {
                double* ri = &a_[i * n_];
                double s = ri[j];
                for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
                ri[j] = s / piv;
            }
        }
    }

    std::vector<double> a_;
    std::size_t n_ = 0;
};

}  // namespace lapfield::detail
