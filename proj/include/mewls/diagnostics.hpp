/**
 * @file diagnostics.hpp
 * @brief Local convergence quantities of the maximum-entropy system.
 *
 * For s = 1 write F = (F1, F2, F3) with
 *   F1 = B^T W (B P - Q),
 *   F2 = sum e^{-mu r^2} r^2 - mse sum e^{-mu r^2},
 *   F3 = w - e^{-mu r^2} / sum e^{-mu r^2}.
 * Its Jacobian has the block pattern [[A 0 C], [d^T s 0], [D v I]] and one
 * Gauss-Seidel sweep linearises to delta_w <- G33 delta_w with
 *   G33 = (D - s^{-1} v d^T) A^{-1} C.
 * The local iteration converges when rho(G33) < 1.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/entropy.hpp"
#include "mewls/error.hpp"
#include "mewls/mewls.hpp"
#include "mewls/wls.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace mewls {

/// s* = sum r^2 (mse_uw - r^2) = (sum r^2)^2 / m - sum r^4 for OLS residuals.
/// Non-positive, zero iff all residual moduli coincide.
inline double s_star(const ResidualVector& r2) {
    if (r2.size() == 0) throw InvalidInput("s_star: empty residual vector");
    const double m = static_cast<double>(r2.size());
    const double mean = r2.sum() / m;
    // sum r^2 (mean - r^2) = -sum (r^2 - mean)^2, which keeps the sign exact
    return -(r2.array() - mean).square().sum();
}

/// Jacobian blocks at (P, mu, w). d and s are scaled by exp(mu c) (the
/// exponent shift), which cancels in every quantity built from s^{-1} d.
struct JacobianBlocks {
    Matrix A;        // n x n, B^T W B
    Matrix C;        // n x m, B^T diag(r)
    Vector d;        // n, gradient of F2 w.r.t. P
    double s = 0.0;  // dF2/dmu
    Matrix D;        // m x n, dF3/dP
    Vector v;        // m, dF3/dmu
    double f2_scale = 1.0;
};

inline JacobianBlocks jacobian_blocks(const DesignMatrix& B, const Vector& q, const Vector& p,
                                      double mu, const WeightVector& w, double target_mse) {
    const Eigen::Index m = B.rows();
    if (q.size() != m || w.size() != m || p.size() != B.cols()) {
        throw InvalidInput("jacobian_blocks: shape mismatch");
    }
    const Vector r = B.matrix * p - q;
    const Vector r2 = r.array().square();
    const double c = exponent_shift(r2, mu);
    const Vector e = (-mu * (r2.array() - c)).exp();
    const double z = e.sum();
    const Vector soft = e / z;  // softmax weights implied by (P, mu)

    const Matrix bd = B.dense();
    JacobianBlocks jb;
    jb.f2_scale = std::exp(mu * c);
    jb.A = bd.transpose() * w.asDiagonal() * bd;
    jb.C = bd.transpose() * r.asDiagonal();
    const Vector g =
        2.0 * r.array() * ((1.0 + mu * target_mse) - mu * r2.array()) * e.array();
    jb.d = bd.transpose() * g;
    jb.s = (r2.array() * e.array() * (target_mse - r2.array())).sum();

    // D = 2 mu diag(soft) (diag(r) - u (soft .* r)^T) B
    const RowVector sr_b = (soft.array() * r.array()).matrix().transpose() * bd;
    jb.D.resize(m, B.cols());
    for (Eigen::Index k = 0; k < m; ++k) {
        jb.D.row(k) = 2.0 * mu * soft[k] * (r[k] * bd.row(k) - sr_b);
    }
    // v = soft .* (r^2 - soft^T r^2)
    const double tilted_mean = soft.dot(r2);
    jb.v = (soft.array() * (r2.array() - tilted_mean)).matrix();
    return jb;
}

/// Blocks for one output channel of a fitted problem at the state's (P, mu, w).
inline JacobianBlocks jacobian_blocks(const FitProblem& problem, const MewlsState& state,
                                      int channel = 0) {
    if (channel < 0 || channel >= problem.spec().codim()) {
        throw InvalidInput("jacobian_blocks: channel out of range");
    }
    const Matrix free = problem.reduce(state.net);
    return jacobian_blocks(problem.design(), problem.observations().col(channel),
                           free.col(channel), state.mu, state.w, state.target_mse);
}

/// m x m iteration block (D - s^{-1} v d^T) A^{-1} C.
inline Matrix g33(const JacobianBlocks& jb) {
    if (jb.s == 0.0) {
        throw DegenerateResiduals("g33: dF2/dmu vanishes (all residual moduli equal)");
    }
    Eigen::LDLT<Matrix> ldlt(jb.A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= kRankTolerance * ldlt.vectorD().maxCoeff()) {
        throw SingularSystem("g33: B^T W B is singular", 0, jb.A.cols());
    }
    const Matrix ainv_c = ldlt.solve(jb.C);
    const Matrix left = jb.D - (jb.v * jb.d.transpose()) / jb.s;
    return left * ainv_c;
}

struct SpectralRadius {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
    /// True when the value is the last power-iteration estimate rather than a
    /// converged or exact one.
    bool approximate = false;
};

/// Largest eigenvalue modulus: power iteration from a random start. The
/// iteration stops when x is an eigenvector of M (or of M^2, which covers
/// dominant +/- pairs) to relative residual tol. Complex or nearly tied
/// dominant eigenvalues do not settle; those fall back to a dense
/// eigensolver when n <= dense_limit, otherwise the last estimate is
/// returned flagged approximate.
inline SpectralRadius spectral_radius(const Matrix& M, double tol = 1e-8, int max_iters = 2000,
                                      Eigen::Index dense_limit = 2000) {
    if (M.rows() != M.cols()) throw InvalidInput("spectral_radius: matrix must be square");
    SpectralRadius out;
    const Eigen::Index n = M.rows();
    if (n == 0 || M.cwiseAbs().maxCoeff() == 0.0) {
        out.converged = true;
        return out;
    }

    std::mt19937_64 gen(0x5eed5eedULL);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = dist(gen);
    x.normalize();

    for (int it = 1; it <= max_iters; ++it) {
        const Vector y = M * x;
        const Vector z = M * y;
        out.iterations = it;
        const double zn = z.norm();
        const double l1 = x.dot(y);
        const double l2 = x.dot(z);
        out.value = std::sqrt(zn);
        if (zn == 0.0) {
            out.value = 0.0;
            out.converged = true;
            return out;
        }
        if ((y - l1 * x).norm() <= tol * std::abs(l1)) {
            out.value = std::abs(l1);
            out.converged = true;
            return out;
        }
        if (l2 > 0.0 && (z - l2 * x).norm() <= tol * l2) {
            out.value = std::sqrt(l2);
            out.converged = true;
            return out;
        }
        x = z / zn;
    }
    if (n <= dense_limit) {
        Eigen::EigenSolver<Matrix> es(M, false);
        if (es.info() == Eigen::Success) {
            out.value = es.eigenvalues().cwiseAbs().maxCoeff();
            out.converged = true;
            return out;
        }
    }
    out.approximate = true;
    return out;
}

/// rho(G33) through the n x n matrix A^{-1} C (D - s^{-1} v d^T), which has the
/// same nonzero spectrum as G33.
inline double g33_spectral_radius_reduced(const JacobianBlocks& jb) {
    if (jb.s == 0.0) throw DegenerateResiduals("g33: dF2/dmu vanishes");
    Eigen::LDLT<Matrix> ldlt(jb.A);
    if (ldlt.info() != Eigen::Success) throw SingularSystem("g33: B^T W B is singular", 0, jb.A.cols());
    const Matrix left = jb.D - (jb.v * jb.d.transpose()) / jb.s;
    const Matrix small = ldlt.solve(jb.C * left);
    Eigen::EigenSolver<Matrix> es(small, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Per-stage record of the quantities tracked for the local theory.
struct ConvergenceReport {
    double s_star = 0.0;
    std::vector<double> reduction;
    std::vector<double> rho_g33;
    std::vector<int> iterations;
    std::vector<double> entropy_trace;
};

}  // namespace mewls
