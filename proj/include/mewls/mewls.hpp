/**
 * @file mewls.hpp
 * @brief Maximum-entropy weighted least squares.
 *
 * The weights w maximise -sum w log w subject to sum w = 1 and a prescribed
 * weighted MSE. Stationarity gives the coupled system
 *
 *     B^T W B P = B^T W Q                                  (control points)
 *     sum_i e^{-mu r_i^2} (r_i^2 - mse) = 0                (multiplier mu)
 *     w_k = e^{-mu r_k^2} / sum_i e^{-mu r_i^2}             (weights)
 *
 * with r_k^2 = ||S(u_k,v_k) - Q_k||^2. It is solved by a nonlinear
 * Gauss-Seidel sweep over the three blocks, and the target MSE is lowered
 * gradually from the uniform-weight value (continuation) so that every stage
 * starts inside the basin of the previous solution.
 *
 * Exponentials are always evaluated relative to a reference residual c
 * (min r^2 for mu >= 0, max r^2 for mu < 0) so that mu * r^2 may exceed the
 * range of exp() without overflow or total underflow.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/entropy.hpp"
#include "mewls/error.hpp"
#include "mewls/wls.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mewls {

// ---------------------------------------------------------------------------
// Scalar multiplier equation and weight law
// ---------------------------------------------------------------------------

/// Reference residual used to shift exponents: exp(-mu (r^2 - c)) <= 1.
inline double exponent_shift(const ResidualVector& r2, double mu) {
    return mu >= 0.0 ? r2.minCoeff() : r2.maxCoeff();
}

/// e^{mu c} * [sum e^{-mu r_i^2} r_i^2 - mse * sum e^{-mu r_i^2}], c = exponent_shift.
/// Same roots as the unscaled equation; finite for any finite mu.
inline double mu_equation(const ResidualVector& r2, double mu, double target_mse) {
    const double c = exponent_shift(r2, mu);
    double f = 0.0;
    for (Eigen::Index i = 0; i < r2.size(); ++i) {
        f += std::exp(-mu * (r2[i] - c)) * (r2[i] - target_mse);
    }
    return f;
}

/// d/dmu of mu_equation with c held fixed.
inline double mu_equation_derivative(const ResidualVector& r2, double mu, double target_mse) {
    const double c = exponent_shift(r2, mu);
    double df = 0.0;
    for (Eigen::Index i = 0; i < r2.size(); ++i) {
        df -= (r2[i] - c) * std::exp(-mu * (r2[i] - c)) * (r2[i] - target_mse);
    }
    return df;
}

/// w_k = e^{-mu r_k^2} / sum_i e^{-mu r_i^2}.
inline WeightVector update_weights(const ResidualVector& r2, double mu) {
    if (!std::isfinite(mu)) throw InvalidInput("update_weights: non-finite multiplier");
    const double c = exponent_shift(r2, mu);
    WeightVector w(r2.size());
    for (Eigen::Index k = 0; k < r2.size(); ++k) w[k] = std::exp(-mu * (r2[k] - c));
    w /= w.sum();
    return w;
}

struct MuSolverOptions {
    int max_iters = 200;
};

namespace detail {

/// Softmax-weighted mean of r^2 and its (negative) variance derivative.
struct TiltedMoments {
    double mean = 0.0;
    double slope = 0.0;  // d mean / d mu = -Var_w(r^2)
};

inline TiltedMoments tilted_moments(const ResidualVector& r2, double mu) {
    const double c = exponent_shift(r2, mu);
    double z = 0.0;
    double s1 = 0.0;
    for (Eigen::Index i = 0; i < r2.size(); ++i) {
        const double e = std::exp(-mu * (r2[i] - c));
        z += e;
        s1 += e * r2[i];
    }
    TiltedMoments out;
    out.mean = s1 / z;
    double var = 0.0;
    for (Eigen::Index i = 0; i < r2.size(); ++i) {
        const double dev = r2[i] - out.mean;
        var += std::exp(-mu * (r2[i] - c)) * dev * dev;
    }
    out.slope = -var / z;
    return out;
}

}  // namespace detail

/// Root of the multiplier equation by safeguarded Newton: Newton steps on the
/// normalised form (weighted mean minus target, strictly decreasing in mu)
/// with bisection whenever a step leaves the current bracket.
inline double solve_mu(const ResidualVector& r2, double target_mse, double mu0 = 0.0,
                       const MuSolverOptions& options = {}) {
    if (r2.size() == 0) throw InvalidInput("solve_mu: empty residual vector");
    if (!r2.allFinite() || r2.minCoeff() < 0.0) {
        throw InvalidInput("solve_mu: residuals must be finite and non-negative");
    }
    if (!std::isfinite(mu0)) mu0 = 0.0;
    const double lo_r2 = r2.minCoeff();
    const double hi_r2 = r2.maxCoeff();
    if (hi_r2 - lo_r2 <= 1e-14 * hi_r2 || hi_r2 == lo_r2) {
        throw DegenerateResiduals(
            "solve_mu: all residuals have the same modulus; no entropy-maximal weighting exists");
    }
    if (!(target_mse > lo_r2 && target_mse < hi_r2)) {
        throw InfeasibleTarget("solve_mu: target MSE " + std::to_string(target_mse) +
                               " outside the attainable range (" + std::to_string(lo_r2) + ", " +
                               std::to_string(hi_r2) + ")");
    }

    const double ftol = 16.0 * std::numeric_limits<double>::epsilon() * hi_r2;
    auto h = [&](double mu) { return detail::tilted_moments(r2, mu); };

    double x = mu0;
    auto moments = h(x);
    double fx = moments.mean - target_mse;
    if (std::abs(fx) <= ftol) return x;

    // f is decreasing in mu: expand away from x until the sign flips.
    double lo = x;
    double hi = x;
    double step = 1.0 / (hi_r2 - lo_r2);
    for (int k = 0;; ++k) {
        const double probe = fx > 0.0 ? x + step : x - step;
        const double fp = h(probe).mean - target_mse;
        if (std::abs(fp) <= ftol) return probe;
        if ((fp > 0.0) != (fx > 0.0)) {
            (fx > 0.0 ? hi : lo) = probe;
            break;
        }
        (fx > 0.0 ? lo : hi) = probe;
        step *= 2.0;
        if (k > 2000 || !std::isfinite(probe)) {
            throw IterationFailure("solve_mu: failed to bracket the multiplier", probe, k);
        }
    }

    // Newton from the bracket end nearest to the root side we came from.
    x = fx > 0.0 ? lo : hi;
    moments = h(x);
    fx = moments.mean - target_mse;
    for (int it = 0; it < options.max_iters; ++it) {
        if (std::abs(fx) <= ftol) return x;
        if (fx > 0.0) {
            lo = std::max(lo, x);
        } else {
            hi = std::min(hi, x);
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
            return x;
        }
        double next = moments.slope < 0.0 ? x - fx / moments.slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
        moments = h(x);
        fx = moments.mean - target_mse;
    }
    if (std::abs(fx) <= 1e3 * ftol) return x;
    throw IterationFailure("solve_mu: no convergence within " + std::to_string(options.max_iters) +
                               " iterations",
                           x, options.max_iters);
}

// ---------------------------------------------------------------------------
// Fit problem, state and reports
// ---------------------------------------------------------------------------

/// A spline configuration bound to a dataset, with the design matrix acting
/// on the independent control points.
class FitProblem {
public:
    FitProblem(SurfaceSpec spec, Dataset data)
        : spec_(std::move(spec)), data_(std::move(data)) {
        if (data_.codim() != spec_.codim()) {
            throw InvalidInput("dataset codimension " + std::to_string(data_.codim()) +
                               " does not match the surface codimension " +
                               std::to_string(spec_.codim()));
        }
        if (data_.size() == 0) throw InvalidInput("empty dataset");
        design_ = reduced_design_matrix(spec_, data_);
    }

    const SurfaceSpec& spec() const noexcept { return spec_; }
    const Dataset& data() const noexcept { return data_; }
    const DesignMatrix& design() const noexcept { return design_; }
    const Matrix& observations() const noexcept { return data_.Q; }
    Eigen::Index size() const noexcept { return data_.size(); }

    ControlNet expand(const Matrix& free) const {
        if (!spec_.closed_u() || spec_.wrap_count() == 0) return ControlNet(free);
        return expand_closed_u(spec_, free);
    }

    /// Independent rows of a full control net.
    Matrix reduce(const ControlNet& net) const {
        if (!spec_.closed_u() || spec_.wrap_count() == 0) return net.values;
        const int nf = spec_.n1_free();
        Matrix free(spec_.free_count(), net.codim());
        for (int j = 0; j < spec_.n2(); ++j) {
            for (int i = 0; i < nf; ++i) {
                free.row(ControlNet::index(i, j, nf)) =
                    net.values.row(ControlNet::index(i, j, spec_.n1()));
            }
        }
        return free;
    }

private:
    SurfaceSpec spec_;
    Dataset data_;
    DesignMatrix design_;
};

/// Current (P, mu, w) together with residuals and the MSE levels.
struct MewlsState {
    ControlNet net;
    double mu = 0.0;
    WeightVector w;
    ResidualVector r2;
    double target_mse = 0.0;
    double mse_uw = 0.0;
};

/// Progress of one Gauss-Seidel sweep.
struct SweepInfo {
    int sweep = 0;
    double change_net = 0.0;
    double change_mu = 0.0;
    double change_w = 0.0;
    double change = 0.0;
    double mu = 0.0;
    double weight_sum = 0.0;
    double weighted_mse = 0.0;
};

struct FitReport {
    double reduction = 1.0;  // mse_uw / target
    double target_mse = 0.0;
    double mse_uw = 0.0;
    double weighted_mse = 0.0;
    double mu = 0.0;
    double entropy = 0.0;
    int iterations = 0;
    bool converged = false;
    double final_change = 0.0;
    /// Fixed-point residuals of the three blocks at the returned state.
    double residual_normal = 0.0;
    double residual_mu = 0.0;
    double residual_weights = 0.0;
    Eigen::Index dropped_rows = 0;
    std::vector<double> change_trace;
    std::vector<double> mu_trace;
};

struct FitOptions {
    double tol = 1e-8;
    int max_iters = 500;
    MuSolverOptions mu_solver;
    WlsOptions wls;
    /// Called after every sweep with the freshly updated state.
    std::function<void(const SweepInfo&, const MewlsState&)> on_sweep;
};

struct FitResult {
    MewlsState state;
    FitReport report;
};

/// Gauss-Seidel did not reach the tolerance; carries the last iterate.
class FitFailure : public IterationFailure {
public:
    FitFailure(const std::string& what, MewlsState state, FitReport report)
        : IterationFailure(what, state.mu, report.iterations), state_(std::move(state)),
          report_(std::move(report)) {}

    const MewlsState& state() const noexcept { return state_; }
    const FitReport& report() const noexcept { return report_; }

private:
    MewlsState state_;
    FitReport report_;
};

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Ordinary least squares (uniform weights): the state at target = mse_uw.
inline MewlsState ols_state(const FitProblem& problem, const WlsOptions& wls = {}) {
    const auto m = problem.size();
    MewlsState state;
    state.w = uniform_weights(m);
    const auto sol = solve_wls(problem.design(), state.w, problem.observations(), wls);
    state.r2 = residual_sq_norms(problem.design(), sol.net.values, problem.observations());
    state.net = problem.expand(sol.net.values);
    state.mu = 0.0;
    state.mse_uw = state.r2.mean();
    state.target_mse = state.mse_uw;
    return state;
}

/// Nonlinear Gauss-Seidel on the three-block system for a fixed target MSE.
/// Each sweep solves the weighted fit, then the multiplier (warm-started at
/// the previous value), then the weights. Convergence is declared when the
/// largest relative change of (P, mu, w) over a sweep is at most tol. On a
/// cold start the first sweep compares (mu, w) only, P being a function of w.
inline FitResult gauss_seidel_fit(const FitProblem& problem, double target_mse,
                                  const FitOptions& options = {},
                                  const std::optional<MewlsState>& warm = std::nullopt) {
    if (!(target_mse > 0.0) || !std::isfinite(target_mse)) {
        throw InvalidInput("gauss_seidel_fit: target MSE must be positive and finite");
    }
    const auto& B = problem.design();
    const auto& Q = problem.observations();
    const auto m = problem.size();

    MewlsState state;
    std::optional<Matrix> prev_free;
    if (warm) {
        state = *warm;
        if (state.w.size() != m) throw InvalidInput("gauss_seidel_fit: warm state size mismatch");
        prev_free = problem.reduce(state.net);
    } else {
        state.w = uniform_weights(m);
        state.mu = 0.0;
        state.mse_uw = std::numeric_limits<double>::quiet_NaN();
    }
    state.target_mse = target_mse;

    // residuals at the rounding level of the data count as exact zeros
    const double data_scale = detail::max_abs(Q);
    const double residual_floor =
        std::pow(64.0 * std::numeric_limits<double>::epsilon() * std::max(data_scale, 1e-300), 2);

    FitReport report;
    report.target_mse = target_mse;
    Matrix free;
    for (int sweep = 1; sweep <= options.max_iters; ++sweep) {
        const auto sol = solve_wls(B, state.w, Q, options.wls);
        free = sol.net.values;
        report.dropped_rows = sol.dropped_rows;
        ResidualVector r2 = residual_sq_norms(B, free, Q);
        if (!std::isfinite(state.mse_uw)) state.mse_uw = r2.mean();
        if (r2.maxCoeff() <= residual_floor) {
            throw DegenerateResiduals(
                "gauss_seidel_fit: the surface reproduces the data to rounding error; all residual "
                "moduli coincide and no entropy-maximal weighting exists");
        }

        const double mu = solve_mu(r2, target_mse, state.mu, options.mu_solver);
        WeightVector w = update_weights(r2, mu);

        SweepInfo info;
        info.sweep = sweep;
        info.change_net = prev_free ? detail::max_abs(free - *prev_free) /
                                          std::max(detail::max_abs(free), 1e-300)
                                    : 0.0;
        info.change_mu = std::abs(mu - state.mu) / std::max(1.0, std::abs(mu));
        info.change_w = detail::max_abs(w - state.w) / w.maxCoeff();
        info.change = std::max({info.change_net, info.change_mu, info.change_w});
        info.mu = mu;
        info.weight_sum = w.sum();
        info.weighted_mse = weighted_mse(r2, w);

        prev_free = free;
        state.mu = mu;
        state.w = std::move(w);
        state.r2 = std::move(r2);
        report.iterations = sweep;
        report.change_trace.push_back(info.change);
        report.mu_trace.push_back(mu);
        report.final_change = info.change;

        if (options.on_sweep) {
            state.net = problem.expand(free);
            options.on_sweep(info, state);
        }
        if (info.change <= options.tol) {
            report.converged = true;
            break;
        }
    }

    state.net = problem.expand(free);
    report.mse_uw = state.mse_uw;
    report.reduction = state.mse_uw / target_mse;
    report.mu = state.mu;
    report.weighted_mse = weighted_mse(state.r2, state.w);
    report.entropy = entropy(state.w);
    report.residual_normal = detail::max_abs(normal_residual(B, state.w, free, Q));
    report.residual_mu = std::abs(report.weighted_mse - target_mse);
    report.residual_weights = detail::max_abs(state.w - update_weights(state.r2, state.mu));

    if (!report.converged) {
        throw FitFailure("gauss_seidel_fit: no convergence within " +
                             std::to_string(options.max_iters) + " sweeps (last change " +
                             std::to_string(report.final_change) + ")",
                         state, report);
    }
    return FitResult{std::move(state), std::move(report)};
}

inline FitResult gauss_seidel_fit(const SurfaceSpec& spec, const Dataset& data, double target_mse,
                                  const FitOptions& options = {}) {
    return gauss_seidel_fit(FitProblem(spec, data), target_mse, options);
}

// ---------------------------------------------------------------------------
// Continuation over the target MSE
// ---------------------------------------------------------------------------

/// Reduction factors r (target = mse_uw / r), strictly increasing, r_0 >= 1.
struct ContinuationSchedule {
    std::vector<double> factors{1.0};
    double tol = 1e-8;
    int max_iters = 500;

    void validate() const {
        if (factors.empty()) throw InvalidConfiguration("continuation schedule is empty");
        if (!(factors.front() >= 1.0)) {
            throw InvalidConfiguration("continuation schedule must start at a factor >= 1");
        }
        for (std::size_t i = 1; i < factors.size(); ++i) {
            if (!(factors[i] > factors[i - 1])) {
                throw InvalidConfiguration("continuation factors must be strictly increasing");
            }
        }
    }

    /// 1, 2, 5, 10, 20, 50, ... below r_final, then r_final.
    static ContinuationSchedule geometric(double r_final, double tol = 1e-8, int max_iters = 500) {
        if (!(r_final >= 1.0)) throw InvalidConfiguration("terminal reduction factor must be >= 1");
        ContinuationSchedule s;
        s.tol = tol;
        s.max_iters = max_iters;
        s.factors = {1.0};
        for (double decade = 1.0;; decade *= 10.0) {
            const double next[] = {2.0 * decade, 5.0 * decade, 10.0 * decade};
            bool done = false;
            for (double f : next) {
                if (f >= r_final) {
                    done = true;
                    break;
                }
                s.factors.push_back(f);
            }
            if (done) break;
        }
        if (r_final > s.factors.back()) s.factors.push_back(r_final);
        return s;
    }
};

struct ContinuationResult {
    MewlsState state;
    std::vector<FitReport> stages;
};

/// A continuation stage failed; holds the last converged state.
class StageFailure : public Error {
public:
    StageFailure(const std::string& what, std::optional<MewlsState> last_good,
                 std::vector<FitReport> stages, double failed_factor,
                 std::exception_ptr cause = nullptr)
        : Error(what), last_good_(std::move(last_good)), stages_(std::move(stages)),
          failed_factor_(failed_factor), cause_(std::move(cause)) {}

    const std::optional<MewlsState>& last_good() const noexcept { return last_good_; }
    const std::vector<FitReport>& stages() const noexcept { return stages_; }
    double failed_factor() const noexcept { return failed_factor_; }
    /// The error raised by the failing stage.
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    std::optional<MewlsState> last_good_;
    std::vector<FitReport> stages_;
    double failed_factor_;
    std::exception_ptr cause_;
};

/// OLS baseline, then one Gauss-Seidel solve per factor, each warm-started
/// from the previous stage.
inline ContinuationResult continuation_fit(const FitProblem& problem,
                                           const ContinuationSchedule& schedule,
                                           FitOptions options = {}) {
    schedule.validate();
    options.tol = schedule.tol;
    options.max_iters = schedule.max_iters;

    ContinuationResult result;
    std::optional<MewlsState> current;
    try {
        current = ols_state(problem, options.wls);
    } catch (const Error& e) {
        throw StageFailure(std::string("continuation_fit: OLS baseline failed: ") + e.what(),
                           std::nullopt, {}, 1.0, std::current_exception());
    }
    const double mse_uw = current->mse_uw;
    for (double factor : schedule.factors) {
        const double target = mse_uw / factor;
        try {
            auto fit = gauss_seidel_fit(problem, target, options, current);
            fit.report.reduction = factor;
            result.stages.push_back(fit.report);
            current = std::move(fit.state);
        } catch (const Error& e) {
            throw StageFailure("continuation_fit: stage r = " + std::to_string(factor) +
                                   " failed: " + e.what(),
                               current, result.stages, factor, std::current_exception());
        }
    }
    result.state = std::move(*current);
    return result;
}

inline ContinuationResult continuation_fit(const SurfaceSpec& spec, const Dataset& data,
                                           const ContinuationSchedule& schedule,
                                           const FitOptions& options = {}) {
    return continuation_fit(FitProblem(spec, data), schedule, options);
}

}  // namespace mewls
