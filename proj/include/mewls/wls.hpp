/**
 * @file wls.hpp
 * @brief Weighted least-squares spline fit and residual bookkeeping.
 *
 * The normal system B^T W B P = B^T W Q is never formed; the scaled problem
 * W^{1/2} B P = W^{1/2} Q is solved with a column-pivoted QR factorisation
 * (dense for small problems, sparse for image-sized ones). All s columns of
 * Q share one factorisation.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/error.hpp"

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseQR>

#include <cmath>
#include <string>
#include <vector>

namespace mewls {

/// Positive weights summing to one.
using WeightVector = Vector;
/// Squared residual norms r_k^2 = ||S(u_k,v_k) - Q_k||^2.
using ResidualVector = Vector;

/// Weights below this are removed from the factorisation (the rows carry no
/// information at double precision).
inline constexpr double kNegligibleWeight = 1e-300;
/// Relative threshold on the diagonal of R for the rank decision.
inline constexpr double kRankTolerance = 1e-12;

struct WlsOptions {
    /// Use the dense factorisation while rows * cols stays below this.
    Eigen::Index dense_limit = 4'000'000;
};

struct WlsSolution {
    ControlNet net;
    Eigen::Index rank = 0;
    Eigen::Index dropped_rows = 0;
};

inline WeightVector uniform_weights(Eigen::Index m) {
    return WeightVector::Constant(m, 1.0 / static_cast<double>(m));
}

/// Minimiser of sum_k w_k ||(B P)_k - Q_k||^2.
inline WlsSolution solve_wls(const DesignMatrix& B, const WeightVector& w, const Matrix& Q,
                             const WlsOptions& options = {}) {
    const Eigen::Index m = B.rows();
    const Eigen::Index n = B.cols();
    if (w.size() != m || Q.rows() != m) {
        throw InvalidInput("solve_wls: design matrix has " + std::to_string(m) +
                           " rows but weights/observations have " + std::to_string(w.size()) +
                           "/" + std::to_string(Q.rows()));
    }
    if (m == 0 || n == 0) throw InvalidInput("solve_wls: empty system");

    std::vector<Eigen::Index> kept;
    kept.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
        if (!(w[k] >= 0.0) || !std::isfinite(w[k])) {
            throw InvalidInput("solve_wls: weights must be finite and non-negative");
        }
        if (w[k] > kNegligibleWeight) kept.push_back(k);
    }
    const auto rows = static_cast<Eigen::Index>(kept.size());

    WlsSolution out;
    out.dropped_rows = m - rows;
    if (rows < n) {
        throw SingularSystem("solve_wls: " + std::to_string(rows) +
                                 " effective observations for " + std::to_string(n) + " unknowns",
                             rows, n);
    }

    Matrix rhs(rows, Q.cols());
    for (Eigen::Index r = 0; r < rows; ++r) rhs.row(r) = std::sqrt(w[kept[r]]) * Q.row(kept[r]);

    if (rows * n <= options.dense_limit) {
        Matrix a = Matrix::Zero(rows, n);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double scale = std::sqrt(w[kept[r]]);
            for (SparseRowMatrix::InnerIterator it(B.matrix, kept[r]); it; ++it) {
                a(r, it.col()) = scale * it.value();
            }
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(a);
        qr.setThreshold(kRankTolerance);
        out.rank = qr.rank();
        if (out.rank < n) {
            throw SingularSystem("solve_wls: rank-deficient system (rank " +
                                     std::to_string(out.rank) + " of " + std::to_string(n) + ")",
                                 out.rank, n);
        }
        out.net = ControlNet(qr.solve(rhs));
        return out;
    }

    Eigen::SparseMatrix<double> a(rows, n);
    {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(B.matrix.nonZeros()));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double scale = std::sqrt(w[kept[r]]);
            for (SparseRowMatrix::InnerIterator it(B.matrix, kept[r]); it; ++it) {
                triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()),
                                      scale * it.value());
            }
        }
        a.setFromTriplets(triplets.begin(), triplets.end());
    }
    a.makeCompressed();
    double max_col_norm = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) max_col_norm = std::max(max_col_norm, a.col(c).norm());

    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(kRankTolerance * max_col_norm);
    qr.compute(a);
    if (qr.info() != Eigen::Success) {
        throw SingularSystem("solve_wls: sparse QR factorisation failed", 0, n);
    }
    out.rank = qr.rank();
    if (out.rank < n) {
        throw SingularSystem("solve_wls: rank-deficient system (rank " + std::to_string(out.rank) +
                                 " of " + std::to_string(n) + ")",
                             out.rank, n);
    }
    Matrix x = qr.solve(rhs);
    if (qr.info() != Eigen::Success) {
        throw SingularSystem("solve_wls: sparse QR solve failed", out.rank, n);
    }
    out.net = ControlNet(std::move(x));
    return out;
}

/// Entry k is ||row_k(B) P - Q_k||^2.
inline ResidualVector residual_sq_norms(const DesignMatrix& B, const Matrix& P, const Matrix& Q) {
    if (B.cols() != P.rows() || B.rows() != Q.rows() || P.cols() != Q.cols()) {
        throw InvalidInput("residual_sq_norms: shape mismatch");
    }
    const Matrix r = B.matrix * P - Q;
    return r.rowwise().squaredNorm();
}

inline double weighted_mse(const ResidualVector& r2, const WeightVector& w) {
    if (r2.size() != w.size()) throw InvalidInput("weighted_mse: length mismatch");
    return w.dot(r2);
}

/// B^T W (B P - Q): the first-block residual of the maximum-entropy system.
inline Matrix normal_residual(const DesignMatrix& B, const WeightVector& w, const Matrix& P,
                              const Matrix& Q) {
    const Matrix r = B.matrix * P - Q;
    return B.matrix.transpose() * (w.asDiagonal() * r);
}

}  // namespace mewls
