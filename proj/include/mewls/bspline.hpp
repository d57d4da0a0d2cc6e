/**
 * @file bspline.hpp
 * @brief Tensor-product B-spline bases, surfaces and design matrices.
 *
 * Conventions shared by every module:
 *  - knot vectors live in [0,1]; a basis with n functions of degree d has
 *    n + d + 1 knots and is a partition of unity on [t_d, t_n] (0-based);
 *  - control points P_ij are stored row-wise in an (n1*n2) x s matrix with
 *    i varying fastest, i.e. row i + n1*j;
 *  - design-matrix columns follow the same ordering, so that S = B * P;
 *  - structured data are vectorised column-wise: observation (u_k, v_l)
 *    sits on row k + m1*l.
 */

#pragma once

#include "mewls/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mewls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// KnotVector
// ---------------------------------------------------------------------------

/// Non-decreasing knot sequence on [0,1] defining one univariate basis.
class KnotVector {
public:
    KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
        if (degree_ < 0) {
            throw InvalidConfiguration("knot vector: negative degree");
        }
        const auto k = static_cast<int>(knots_.size());
        if (k < degree_ + 2) {
            throw InvalidConfiguration("knot vector: need at least d + 2 knots, got " +
                                       std::to_string(k));
        }
        if (knots_.front() != 0.0 || knots_.back() != 1.0) {
            throw InvalidConfiguration("knot vector: first knot must be 0 and last knot 1");
        }
        if (!std::is_sorted(knots_.begin(), knots_.end())) {
            throw InvalidConfiguration("knot vector: knots must be non-decreasing");
        }
        if (!(knots_[degree_] < knots_[basis_count()])) {
            throw InvalidConfiguration("knot vector: empty validity interval");
        }
    }

    int degree() const noexcept { return degree_; }
    int basis_count() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }
    std::span<const double> knots() const noexcept { return knots_; }
    double operator[](std::size_t i) const { return knots_[i]; }
    std::size_t size() const noexcept { return knots_.size(); }

    /// Interval on which the basis sums to one.
    double domain_begin() const { return knots_[degree_]; }
    double domain_end() const { return knots_[basis_count()]; }
    bool in_domain(double t) const { return t >= domain_begin() && t <= domain_end(); }

    bool is_clamped() const {
        for (int i = 0; i <= degree_; ++i) {
            if (knots_[i] != 0.0 || knots_[knots_.size() - 1 - i] != 1.0) return false;
        }
        return true;
    }

    /// Knot span mu in [d, n-1] with t_mu <= t < t_{mu+1}; the right end of the
    /// validity interval belongs to the last non-empty span.
    int find_span(double t) const {
        if (!in_domain(t)) {
            throw DomainError("parameter " + std::to_string(t) + " outside spline domain [" +
                              std::to_string(domain_begin()) + ", " +
                              std::to_string(domain_end()) + "]");
        }
        const int n = basis_count();
        if (t >= domain_end()) {
            int mu = n - 1;
            while (knots_[mu] == knots_[mu + 1]) --mu;
            return mu;
        }
        const auto first = knots_.begin() + degree_;
        const auto last = knots_.begin() + n + 1;
        return static_cast<int>(std::upper_bound(first, last, t) - knots_.begin()) - 1;
    }

    /// Values of the d+1 basis functions mu-d..mu that may be nonzero at t.
    /// Only valid inside the validity interval; no zero denominators arise there.
    void nonzero_basis(int span, double t, std::span<double> out) const {
        const int d = degree_;
        double left[kMaxLocal];
        double right[kMaxLocal];
        out[0] = 1.0;
        for (int j = 1; j <= d; ++j) {
            left[j] = t - knots_[span + 1 - j];
            right[j] = knots_[span + j] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    static constexpr int kMaxLocal = 32;

private:
    std::vector<double> knots_;
    int degree_;
};

/// Clamped knots: d+1 zeros, equispaced interior knots, d+1 ones.
inline KnotVector make_clamped_knots(int n, int d) {
    if (d < 0 || n <= d) {
        throw InvalidConfiguration("clamped knots need n > d (n=" + std::to_string(n) +
                                   ", d=" + std::to_string(d) + ")");
    }
    if (d + 1 > KnotVector::kMaxLocal) throw InvalidConfiguration("degree too large");
    std::vector<double> t(static_cast<std::size_t>(n + d + 1));
    const int segments = n - d;
    for (int i = 0; i < n + d + 1; ++i) {
        if (i <= d) {
            t[i] = 0.0;
        } else if (i >= n) {
            t[i] = 1.0;
        } else {
            t[i] = static_cast<double>(i - d) / segments;
        }
    }
    return KnotVector(std::move(t), d);
}

/// n + d + 1 equally spaced knots spanning [0,1] (used for closed directions).
inline KnotVector make_uniform_knots(int n, int d) {
    if (d < 0 || n < d + 1) {
        throw InvalidConfiguration("uniform knots need n >= d + 1 (n=" + std::to_string(n) +
                                   ", d=" + std::to_string(d) + ")");
    }
    if (d + 1 > KnotVector::kMaxLocal) throw InvalidConfiguration("degree too large");
    const int k = n + d + 1;
    std::vector<double> t(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) t[i] = static_cast<double>(i) / (k - 1);
    t.back() = 1.0;
    return KnotVector(std::move(t), d);
}

/// All n basis values at t in [0,1] by the Cox-de Boor recursion.
/// Terms with a zero denominator contribute 0.
inline Vector eval_basis_1d(const KnotVector& kv, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("basis parameter " + std::to_string(t) + " outside [0,1]");
    }
    const auto knots = kv.knots();
    const int k = static_cast<int>(knots.size());
    const int d = kv.degree();

    // degree 0: indicator of [t_i, t_{i+1}); the right end of the validity
    // interval and t = 1 go to the last non-empty interval to their left
    std::vector<double> b(static_cast<std::size_t>(k - 1), 0.0);
    if (kv.in_domain(t)) {
        b[kv.find_span(t)] = 1.0;
    } else if (t >= 1.0) {
        int i = k - 2;
        while (knots[i] == knots[i + 1]) --i;
        b[i] = 1.0;
    } else {
        for (int i = 0; i < k - 1; ++i) {
            if (knots[i] <= t && t < knots[i + 1]) {
                b[i] = 1.0;
                break;
            }
        }
    }

    for (int p = 1; p <= d; ++p) {
        for (int i = 0; i + p + 1 < k; ++i) {
            double value = 0.0;
            const double den_left = knots[i + p] - knots[i];
            if (den_left > 0.0) value += (t - knots[i]) / den_left * b[i];
            const double den_right = knots[i + p + 1] - knots[i + 1];
            if (den_right > 0.0) value += (knots[i + p + 1] - t) / den_right * b[i + 1];
            b[i] = value;
        }
    }
    Vector out(kv.basis_count());
    for (int i = 0; i < kv.basis_count(); ++i) out[i] = b[i];
    return out;
}

// ---------------------------------------------------------------------------
// SurfaceSpec / ControlNet
// ---------------------------------------------------------------------------

/// Tensor-product spline configuration. When closed in u, the last
/// wrap_count rows of the control grid repeat the first ones.
class SurfaceSpec {
public:
    /// A closed surface wraps d rows.
    SurfaceSpec(KnotVector knots_u, KnotVector knots_v, int codim = 1, bool closed_u = false)
        : SurfaceSpec(std::move(knots_u), std::move(knots_v), codim, closed_u, -1) {}

    SurfaceSpec(KnotVector knots_u, KnotVector knots_v, int codim, bool closed_u, int wrap_count)
        : ku_(std::move(knots_u)), kv_(std::move(knots_v)), codim_(codim), closed_u_(closed_u),
          wrap_(closed_u ? (wrap_count < 0 ? ku_.degree() : wrap_count) : 0) {
        if (ku_.degree() != kv_.degree()) {
            throw InvalidConfiguration("surface: degrees in u and v must agree");
        }
        if (codim_ < 1) throw InvalidConfiguration("surface: codimension s must be >= 1");
        if (wrap_ < 0 || wrap_ >= n1() - wrap_) {
            throw InvalidConfiguration("surface: wrap count " + std::to_string(wrap_) +
                                       " must be smaller than the free row count " +
                                       std::to_string(n1() - wrap_));
        }
    }

    /// Clamped n1 x n2 grid of degree d (the default configuration).
    static SurfaceSpec clamped(int n1, int n2, int d, int codim = 1) {
        return SurfaceSpec(make_clamped_knots(n1, d), make_clamped_knots(n2, d), codim);
    }

    /// Closed-in-u grid: uniform knots in u with d wrapped rows, clamped in v.
    /// n1_free is the number of independent control rows.
    static SurfaceSpec closed(int n1_free, int n2, int d, int codim = 1) {
        return SurfaceSpec(make_uniform_knots(n1_free + d, d), make_clamped_knots(n2, d), codim,
                           true, d);
    }

    const KnotVector& knots_u() const noexcept { return ku_; }
    const KnotVector& knots_v() const noexcept { return kv_; }
    int degree() const noexcept { return ku_.degree(); }
    int n1() const noexcept { return ku_.basis_count(); }
    int n2() const noexcept { return kv_.basis_count(); }
    int codim() const noexcept { return codim_; }
    bool closed_u() const noexcept { return closed_u_; }
    int wrap_count() const noexcept { return wrap_; }
    int n1_free() const noexcept { return n1() - wrap_; }
    Eigen::Index control_count() const noexcept { return Eigen::Index{n1()} * n2(); }
    Eigen::Index free_count() const noexcept { return Eigen::Index{n1_free()} * n2(); }

    bool contains(double u, double v) const { return ku_.in_domain(u) && kv_.in_domain(v); }

private:
    KnotVector ku_;
    KnotVector kv_;
    int codim_;
    bool closed_u_;
    int wrap_;
};

/// Control points, one row per P_ij (row i + n1*j), s columns.
struct ControlNet {
    Matrix values;

    ControlNet() = default;
    explicit ControlNet(Matrix v) : values(std::move(v)) {}

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index codim() const { return values.cols(); }

    static Eigen::Index index(int i, int j, int n1) { return Eigen::Index{i} + Eigen::Index{n1} * j; }
};

/// S(u,v) = sum_ij P_ij b_i(u) b_j(v).
inline RowVector eval_surface(const SurfaceSpec& spec, const ControlNet& net, double u, double v) {
    if (net.rows() != spec.control_count()) {
        throw InvalidInput("control net has " + std::to_string(net.rows()) + " rows, expected " +
                           std::to_string(spec.control_count()));
    }
    const int d = spec.degree();
    const int su = spec.knots_u().find_span(u);
    const int sv = spec.knots_v().find_span(v);
    double bu[KnotVector::kMaxLocal];
    double bv[KnotVector::kMaxLocal];
    spec.knots_u().nonzero_basis(su, u, std::span<double>(bu, d + 1));
    spec.knots_v().nonzero_basis(sv, v, std::span<double>(bv, d + 1));

    RowVector out = RowVector::Zero(net.codim());
    for (int b = 0; b <= d; ++b) {
        const int j = sv - d + b;
        for (int a = 0; a <= d; ++a) {
            const int i = su - d + a;
            out += (bu[a] * bv[b]) * net.values.row(ControlNet::index(i, j, spec.n1()));
        }
    }
    return out;
}

/// Full control net from its independent rows: rows n1_free..n1-1 of every
/// column repeat rows 0..wrap_count-1.
inline ControlNet expand_closed_u(int n1_free, int n2, int wrap_count, const Matrix& free_net) {
    if (wrap_count < 0 || (wrap_count > 0 && wrap_count >= n1_free)) {
        throw InvalidConfiguration("wrap count must be smaller than the free row count");
    }
    if (free_net.rows() != Eigen::Index{n1_free} * n2) {
        throw InvalidInput("free control net has " + std::to_string(free_net.rows()) +
                           " rows, expected " + std::to_string(n1_free * n2));
    }
    const int n1 = n1_free + wrap_count;
    Matrix full(Eigen::Index{n1} * n2, free_net.cols());
    for (int j = 0; j < n2; ++j) {
        for (int i = 0; i < n1; ++i) {
            const int src = i < n1_free ? i : i - n1_free;
            full.row(ControlNet::index(i, j, n1)) = free_net.row(ControlNet::index(src, j, n1_free));
        }
    }
    return ControlNet(std::move(full));
}

inline ControlNet expand_closed_u(const SurfaceSpec& spec, const Matrix& free_net) {
    if (!spec.closed_u()) {
        throw InvalidConfiguration("expand_closed_u requires a surface closed in u");
    }
    return expand_closed_u(spec.n1_free(), spec.n2(), spec.wrap_count(), free_net);
}

/// Maps independent control rows to the full net: full = E * free.
inline SparseRowMatrix closure_matrix(const SurfaceSpec& spec) {
    const int n1 = spec.n1();
    const int nf = spec.n1_free();
    SparseRowMatrix e(spec.control_count(), spec.free_count());
    e.reserve(Eigen::VectorXi::Constant(e.rows(), 1));
    for (int j = 0; j < spec.n2(); ++j) {
        for (int i = 0; i < n1; ++i) {
            const int src = i < nf ? i : i - nf;
            e.insert(ControlNet::index(i, j, n1), ControlNet::index(src, j, nf)) = 1.0;
        }
    }
    e.makeCompressed();
    return e;
}

// ---------------------------------------------------------------------------
// Datasets and design matrices
// ---------------------------------------------------------------------------

enum class Layout { scattered, structured };

/// Observations Q (m x s) at parameters (u,v). For structured data u and v
/// hold the m1 and m2 grid coordinates and Q row k + m1*l belongs to (u_k, v_l).
struct Dataset {
    Layout layout = Layout::scattered;
    std::vector<double> u;
    std::vector<double> v;
    Matrix Q;

    static Dataset scattered(std::vector<double> u, std::vector<double> v, Matrix Q) {
        if (u.size() != v.size() || static_cast<Eigen::Index>(u.size()) != Q.rows()) {
            throw InvalidInput("scattered dataset: u, v and Q must have the same length");
        }
        return Dataset{Layout::scattered, std::move(u), std::move(v), std::move(Q)};
    }

    static Dataset structured(std::vector<double> u, std::vector<double> v, Matrix Q) {
        if (static_cast<Eigen::Index>(u.size() * v.size()) != Q.rows()) {
            throw InvalidInput("structured dataset: Q must have m1*m2 rows");
        }
        return Dataset{Layout::structured, std::move(u), std::move(v), std::move(Q)};
    }

    Eigen::Index size() const { return Q.rows(); }
    int codim() const { return static_cast<int>(Q.cols()); }
    std::size_t m1() const { return u.size(); }
    std::size_t m2() const { return v.size(); }

    /// Parameters of observation k in row order.
    std::pair<double, double> param(Eigen::Index k) const {
        if (layout == Layout::scattered) return {u[k], v[k]};
        const auto m1v = static_cast<Eigen::Index>(u.size());
        return {u[k % m1v], v[k / m1v]};
    }
};

/// Sparse m x (n1 n2) matrix; row k holds b_i(u_k) b_j(v_k) at column i + n1*j.
struct DesignMatrix {
    SparseRowMatrix matrix;

    Eigen::Index rows() const { return matrix.rows(); }
    Eigen::Index cols() const { return matrix.cols(); }
    Matrix dense() const { return Matrix(matrix); }
};

namespace detail {

struct LocalBasis {
    int span = 0;
    double values[KnotVector::kMaxLocal] = {};
};

inline LocalBasis local_basis(const KnotVector& kv, double t) {
    LocalBasis lb;
    lb.span = kv.find_span(t);
    kv.nonzero_basis(lb.span, t, std::span<double>(lb.values, kv.degree() + 1));
    return lb;
}

inline void append_row(SparseRowMatrix& b, Eigen::Index row, const LocalBasis& lu,
                       const LocalBasis& lv, int d, int n1) {
    for (int jb = 0; jb <= d; ++jb) {
        const int j = lv.span - d + jb;
        for (int ia = 0; ia <= d; ++ia) {
            const double value = lu.values[ia] * lv.values[jb];
            if (value != 0.0) {
                b.insert(row, ControlNet::index(lu.span - d + ia, j, n1)) = value;
            }
        }
    }
}

}  // namespace detail

inline DesignMatrix design_matrix_scattered(const SurfaceSpec& spec, const Dataset& data) {
    if (data.layout != Layout::scattered) throw InvalidInput("expected a scattered dataset");
    const auto m = static_cast<Eigen::Index>(data.u.size());
    if (m == 0) throw InvalidInput("empty dataset");
    const int d = spec.degree();
    SparseRowMatrix b(m, spec.control_count());
    b.reserve(Eigen::VectorXi::Constant(m, (d + 1) * (d + 1)));
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto lu = detail::local_basis(spec.knots_u(), data.u[k]);
        const auto lv = detail::local_basis(spec.knots_v(), data.v[k]);
        detail::append_row(b, k, lu, lv, d, spec.n1());
    }
    b.makeCompressed();
    return DesignMatrix{std::move(b)};
}

inline DesignMatrix design_matrix_structured(const SurfaceSpec& spec, const Dataset& data) {
    if (data.layout != Layout::structured) throw InvalidInput("expected a structured dataset");
    if (data.u.empty() || data.v.empty()) throw InvalidInput("empty structured grid");
    const auto m1 = static_cast<Eigen::Index>(data.u.size());
    const auto m2 = static_cast<Eigen::Index>(data.v.size());
    const int d = spec.degree();

    std::vector<detail::LocalBasis> bu;
    std::vector<detail::LocalBasis> bv;
    bu.reserve(data.u.size());
    bv.reserve(data.v.size());
    for (double u : data.u) bu.push_back(detail::local_basis(spec.knots_u(), u));
    for (double v : data.v) bv.push_back(detail::local_basis(spec.knots_v(), v));

    SparseRowMatrix b(m1 * m2, spec.control_count());
    b.reserve(Eigen::VectorXi::Constant(m1 * m2, (d + 1) * (d + 1)));
    for (Eigen::Index l = 0; l < m2; ++l) {
        for (Eigen::Index k = 0; k < m1; ++k) {
            detail::append_row(b, k + m1 * l, bu[k], bv[l], d, spec.n1());
        }
    }
    b.makeCompressed();
    return DesignMatrix{std::move(b)};
}

inline DesignMatrix design_matrix(const SurfaceSpec& spec, const Dataset& data) {
    return data.layout == Layout::scattered ? design_matrix_scattered(spec, data)
                                            : design_matrix_structured(spec, data);
}

/// Design matrix acting on the independent control rows (B * E); equal to
/// the plain design matrix for open surfaces.
inline DesignMatrix reduced_design_matrix(const SurfaceSpec& spec, const Dataset& data) {
    auto full = design_matrix(spec, data);
    if (!spec.closed_u() || spec.wrap_count() == 0) return full;
    SparseRowMatrix reduced = full.matrix * closure_matrix(spec);
    reduced.makeCompressed();
    return DesignMatrix{std::move(reduced)};
}

}  // namespace mewls
