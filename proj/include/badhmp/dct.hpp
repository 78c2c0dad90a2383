#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <string>

#include "badhmp/common.hpp"

namespace badhmp {

// Orthonormal DCT-II basis. Row k, column m:
//   B(k,m) = s_k * sqrt(2/M) * cos(pi * (2m+1) * k / (2M)),  s_0 = 1/sqrt(2).
// Rows are orthonormal, so the inverse of the full basis is its transpose.
class DctBasis {
public:
    DctBasis(int length, int coefficient_count)
        : length_(length), coeffs_(coefficient_count) {
        if (length < 1 || coefficient_count < 1 || coefficient_count > length)
            throw DimensionError("DctBasis: need 1 <= C <= M, got C=" +
                                 std::to_string(coefficient_count) + " M=" +
                                 std::to_string(length));
        basis_.resize(coeffs_, length_);
        const double norm = std::sqrt(2.0 / length_);
        for (int k = 0; k < coeffs_; ++k) {
            const double scale = (k == 0) ? norm / std::numbers::sqrt2 : norm;
            for (int m = 0; m < length_; ++m)
                basis_(k, m) = scale * std::cos(std::numbers::pi * (2 * m + 1) * k / (2.0 * length_));
        }
    }

    int length() const { return length_; }
    int coefficient_count() const { return coeffs_; }
    const Eigen::MatrixXd& matrix() const { return basis_; }

    // series (M x cols) -> coefficients (C x cols)
    Eigen::MatrixXd forward(const Eigen::MatrixXd& series) const {
        if (series.rows() != length_)
            throw DimensionError("dct_forward: series length " + std::to_string(series.rows()) +
                                 " != basis length " + std::to_string(length_));
        return basis_ * series;
    }

    // coefficients (C x cols) -> series (M x cols)
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& coefficients) const {
        if (coefficients.rows() != coeffs_)
            throw DimensionError("dct_inverse: got " + std::to_string(coefficients.rows()) +
                                 " coefficients, basis has " + std::to_string(coeffs_));
        return basis_.transpose() * coefficients;
    }

private:
    int length_;
    int coeffs_;
    Eigen::MatrixXd basis_;
};

inline Eigen::VectorXd dct_forward(const Eigen::VectorXd& series, const DctBasis& basis) {
    return basis.forward(series);
}

inline Eigen::VectorXd dct_inverse(const Eigen::VectorXd& coefficients, const DctBasis& basis) {
    return basis.inverse(coefficients);
}

} // namespace badhmp
