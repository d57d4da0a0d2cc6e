// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   mewls_acceptance            run all criteria
//   mewls_acceptance 5 7        run selected criteria

#include "mewls/bspline.hpp"
#include "mewls/data.hpp"
#include "mewls/diagnostics.hpp"
#include "mewls/image.hpp"
#include "mewls/mewls.hpp"
#include "mewls/phantom.hpp"
#include "mewls/wls.hpp"
#include "../support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace mewls;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [violated: " << what << "]";
        }
    }
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

// ---------------------------------------------------------------------------

void basis_correctness(Outcome& out) {
    std::mt19937_64 gen(1001);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::vector<SurfaceSpec> specs{SurfaceSpec::clamped(10, 10, 3), SurfaceSpec::clamped(7, 5, 2),
                                         SurfaceSpec::clamped(4, 4, 3), sphere_surface_spec()};
    double worst_sum = 0.0;
    double min_value = 1.0;
    for (int s = 0; s < 10000; ++s) {
        const auto& spec = specs[s % specs.size()];
        const auto& ku = spec.knots_u();
        const auto& kv = spec.knots_v();
        const double u = ku.domain_begin() + unit(gen) * (ku.domain_end() - ku.domain_begin());
        const double v = kv.domain_begin() + unit(gen) * (kv.domain_end() - kv.domain_begin());
        const Vector bu = eval_basis_1d(ku, u);
        const Vector bv = eval_basis_1d(kv, v);
        const Matrix tensor = bu * bv.transpose();
        worst_sum = std::max(worst_sum, std::abs(tensor.sum() - 1.0));
        min_value = std::min(min_value, tensor.minCoeff());
        const auto row = design_matrix(spec, Dataset::scattered({u}, {v}, Matrix::Zero(1, spec.codim())));
        worst_sum = std::max(worst_sum, std::abs(row.dense().sum() - 1.0));
        min_value = std::min(min_value, row.dense().minCoeff());
    }

    double corner = 0.0;
    const auto spec = SurfaceSpec::clamped(6, 5, 3, 2);
    const ControlNet net(Matrix::Random(30, 2));
    const int n1 = 6;
    const int n2 = 5;
    const std::pair<std::pair<double, double>, Eigen::Index> corners[] = {
        {{0, 0}, ControlNet::index(0, 0, n1)},
        {{1, 0}, ControlNet::index(n1 - 1, 0, n1)},
        {{0, 1}, ControlNet::index(0, n2 - 1, n1)},
        {{1, 1}, ControlNet::index(n1 - 1, n2 - 1, n1)}};
    for (const auto& [uv, idx] : corners) {
        corner = std::max(corner, (eval_surface(spec, net, uv.first, uv.second) - net.values.row(idx))
                                      .cwiseAbs()
                                      .maxCoeff());
    }

    // cubic Bezier basis: Bernstein polynomials
    double bern = 0.0;
    const auto kv = make_clamped_knots(4, 3);
    for (int s = 0; s <= 100; ++s) {
        const double t = s == 50 ? 0.5 : unit(gen);
        const Vector b = eval_basis_1d(kv, t);
        const double c = 1.0 - t;
        const double want[4] = {c * c * c, 3 * t * c * c, 3 * t * t * c, t * t * t};
        for (int i = 0; i < 4; ++i) bern = std::max(bern, std::abs(b[i] - want[i]));
    }
    const Vector half = eval_basis_1d(kv, 0.5);
    out.check(half[0] == 0.125 && half[1] == 0.375 && half[2] == 0.375 && half[3] == 0.125,
              "Bernstein values at 1/2");

    out.detail << "max|sum-1|=" << fmt(worst_sum) << " min=" << fmt(min_value) << " corner=" << fmt(corner)
               << " bernstein=" << fmt(bern);
    out.check(worst_sum <= 1e-12, "partition of unity 1e-12");
    out.check(min_value >= 0.0, "non-negativity");
    out.check(corner <= 1e-12, "corner interpolation 1e-12");
    out.check(bern <= 1e-13, "Bernstein 1e-13");
}

void wls_oracle(Outcome& out) {
    std::mt19937_64 gen(1002);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> small(2, 4);
    double worst = 0.0;
    int instances = 0;
    while (instances < 100) {
        const int n1 = small(gen);
        const int n2 = small(gen);
        if (n1 * n2 > 16) continue;
        const int d = std::uniform_int_distribution<int>(0, std::min(n1, n2) - 1)(gen);
        const int m = std::uniform_int_distribution<int>(2 * n1 * n2, 40)(gen);
        const int s = 1 + instances % 3;
        const auto spec = SurfaceSpec::clamped(n1, n2, d, s);
        std::vector<double> u(static_cast<std::size_t>(m));
        std::vector<double> v(static_cast<std::size_t>(m));
        for (auto& x : u) x = unit(gen);
        for (auto& x : v) x = unit(gen);
        Matrix q(m, s);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = unit(gen);
        Vector w(m);
        for (auto& x : w) x = 0.02 + unit(gen);
        w /= w.sum();
        const Matrix Bo = oracle::design_dense(spec, u, v);
        // skip draws that leave a basis function without data
        if (Eigen::FullPivLU<Matrix>(Bo).rank() < n1 * n2) continue;
        const auto sol = solve_wls(design_matrix(spec, Dataset::scattered(u, v, q)), w, q);
        const Matrix want = oracle::normal_equations(Bo, w, q);
        worst = std::max(worst, (sol.net.values - want).cwiseAbs().maxCoeff() /
                                    std::max(1.0, want.cwiseAbs().maxCoeff()));
        ++instances;
    }
    out.detail << instances << " instances, max rel diff=" << fmt(worst);
    out.check(worst <= 1e-10, "agreement 1e-10");
}

void mu_equation_checks(Outcome& out) {
    Vector two(2);
    two << 0.0, 1.0;
    const double mu = solve_mu(two, 0.25, 0.0);
    const double err_ln3 = std::abs(mu - std::log(3.0));

    std::mt19937_64 gen(1003);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_fd = 0.0;
    int points = 0;
    while (points < 1000) {
        Vector r2(2 + points % 25);
        for (auto& x : r2) x = 2.0 * unit(gen) * unit(gen);
        const double m0 = (unit(gen) - 0.25) * 8.0;
        const double t = r2.minCoeff() + unit(gen) * (r2.maxCoeff() - r2.minCoeff());
        const double h = 1e-6 * std::max(1.0, std::abs(m0));
        if (m0 - h <= 0.0 && m0 + h >= 0.0) continue;
        const double fd = (mu_equation(r2, m0 + h, t) - mu_equation(r2, m0 - h, t)) / (2 * h);
        const double an = mu_equation_derivative(r2, m0, t);
        const double scale = std::max(std::abs(an), 1e-3 * r2.maxCoeff() * r2.maxCoeff());
        worst_fd = std::max(worst_fd, std::abs(fd - an) / scale);
        ++points;
    }

    double worst_zero = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vector r2(10);
        for (auto& x : r2) x = unit(gen);
        worst_zero = std::max(worst_zero, std::abs(solve_mu(r2, r2.mean(), 0.0)));
    }
    out.detail << "|mu-ln3|=" << fmt(err_ln3) << " fd rel err=" << fmt(worst_fd)
               << " max|mu| at mean=" << fmt(worst_zero);
    out.check(err_ln3 <= 1e-10, "ln 3 root 1e-10");
    out.check(worst_fd < 1e-6, "derivative vs finite differences 1e-6");
    out.check(worst_zero <= 1e-12, "mu = 0 root at the mean");
}

void fixed_point_oracle(Outcome& out) {
    std::mt19937_64 gen(1004);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.03);
    double worst = 0.0;
    double worst_constraint = 0.0;
    int done = 0;
    int newton_fail = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const int m = 6 + inst % 5;  // 6..10
        const bool bilinear = inst % 2 == 0;
        const int n = bilinear ? 2 : 1;
        const int d = bilinear ? 1 : 0;
        std::vector<double> u(static_cast<std::size_t>(m));
        std::vector<double> v(static_cast<std::size_t>(m));
        Matrix q(m, 1);
        for (int k = 0; k < m; ++k) {
            u[k] = unit(gen);
            v[k] = unit(gen);
            q(k, 0) = 0.2 + 0.6 * u[k] - 0.3 * v[k] + noise(gen);
        }
        q(inst % m, 0) += 0.5 + unit(gen);
        const FitProblem problem(SurfaceSpec::clamped(n, n, d), Dataset::scattered(u, v, q));
        const double mse_uw = ols_state(problem).mse_uw;
        const double target = mse_uw / (1.5 + 2.0 * unit(gen));
        FitOptions opts;
        opts.tol = 1e-13;
        opts.max_iters = 5000;
        const auto fit = gauss_seidel_fit(problem, target, opts);

        Eigen::VectorXd x;
        if (!oracle::newton_path(problem.design().dense(), q.col(0), target, x)) {
            ++newton_fail;
            continue;
        }
        const Eigen::Index nn = n * n;
        Eigen::VectorXd got(nn + 1 + m);
        got << fit.state.net.values.col(0), fit.state.mu, fit.state.w;
        for (Eigen::Index i = 0; i < got.size(); ++i) {
            worst = std::max(worst, std::abs(got[i] - x[i]) / std::max(1.0, std::abs(x[i])));
        }
        worst_constraint = std::max(worst_constraint, std::abs(weighted_mse(fit.state.r2, fit.state.w) - target));
        ++done;
    }
    out.detail << done << " instances, max componentwise diff=" << fmt(worst)
               << " max |wMSE-target|=" << fmt(worst_constraint);
    out.check(newton_fail == 0, "dense Newton oracle converged on every instance");
    out.check(worst <= 1e-8, "agreement 1e-8");
    out.check(worst_constraint <= 1e-10, "constraint 1e-10");
}

void franke_reproduction(Outcome& out) {
    const auto spec = SurfaceSpec::clamped(10, 10, 3);
    SyntheticConfig cfg;
    const auto full = generate_franke_dataset(cfg);
    SyntheticConfig clean_cfg = cfg;
    clean_cfg.n_outliers = 0;
    const auto clean = generate_franke_dataset(clean_cfg);

    const auto ols_clean = ols_state(FitProblem(spec, clean.data));
    const double cv_a = cv_mse(spec, ols_clean.net, franke_reference(), cfg.grid_cv);
    const FitProblem problem(spec, full.data);
    const auto ols_dirty = ols_state(problem);
    const double cv_b = cv_mse(spec, ols_dirty.net, franke_reference(), cfg.grid_cv);
    const auto fit = continuation_fit(problem, ContinuationSchedule::geometric(500.0));
    const double cv_c = cv_mse(spec, fit.state.net, franke_reference(), cfg.grid_cv);

    out.detail << "MSEcv clean OLS=" << fmt(cv_a) << " contaminated OLS=" << fmt(cv_b)
               << " MEWLS r=500=" << fmt(cv_c) << " ratio=" << fmt(cv_b / cv_c)
               << " (MSE_uw clean=" << fmt(ols_clean.mse_uw) << ")";
    out.check(cv_a >= 5e-6 && cv_a <= 1e-4, "(a) in [5e-6, 1e-4]");
    out.check(cv_b >= 5e-4 && cv_b <= 2e-2, "(b) in [5e-4, 2e-2]");
    out.check(cv_c >= 5e-6 && cv_c <= 1e-4, "(c) in [5e-6, 1e-4]");
    out.check(cv_b >= 50.0 * cv_c, "(c) at least 50x below (b)");
}

void theory_diagnostics(Outcome& out) {
    std::mt19937_64 gen(1006);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int nonneg = 0;
    for (int t = 0; t < 10000; ++t) {
        Vector r2(2 + t % 50);
        for (auto& x : r2) x = unit(gen) * unit(gen);
        if (!(s_star(r2) < 0.0)) ++nonneg;
    }

    SyntheticConfig cfg;
    cfg.n_clean = 348;
    cfg.n_outliers = 52;
    const auto ds = generate_franke_dataset(cfg);
    const FitProblem problem(SurfaceSpec::clamped(10, 10, 3), ds.data);
    const auto ols = ols_state(problem);
    const double sstar = s_star(ols.r2);

    FitOptions opts;
    opts.tol = 1e-10;
    opts.max_iters = 2000;
    auto rho_at = [&](const MewlsState& st) { return spectral_radius(g33(jacobian_blocks(problem, st))).value; };

    const auto near = gauss_seidel_fit(problem, ols.mse_uw / 1.001, opts, ols);
    const double rho_near = rho_at(near.state);

    double rho_max = 0.0;
    std::ostringstream curve;
    std::optional<MewlsState> state = ols;
    const std::set<double> report{1.0, 2.0, 10.0, 100.0, 500.0};
    for (double r : ContinuationSchedule::geometric(500.0).factors) {
        auto fit = gauss_seidel_fit(problem, ols.mse_uw / r, opts, state);
        state = std::move(fit.state);
        if (report.count(r)) {
            const double rho = rho_at(*state);
            rho_max = std::max(rho_max, rho);
            curve << " r=" << r << ":" << fmt(rho);
        }
    }
    out.detail << "s* violations=" << nonneg << "/10000, s*(OLS)=" << fmt(sstar) << ", rho(r=1.001)="
               << fmt(rho_near) << ", rho:" << curve.str();
    out.check(nonneg == 0, "s* < 0 on random residuals");
    out.check(sstar < 0.0, "s* < 0 for the OLS fit");
    out.check(rho_max < 0.2, "rho(G33) < 0.2");
    out.check(rho_near < 1e-3, "rho(G33) < 1e-3 at r = 1.001");
}

void sphere_reconstruction(Outcome& out) {
    const auto sphere = generate_sphere_dataset({});
    const auto fit = continuation_fit(sphere_surface_spec(), sphere.data, ContinuationSchedule::geometric(1000.0));
    int perturbed = 0;
    int detected = 0;
    int false_flags = 0;
    for (Eigen::Index k = 0; k < sphere.data.size(); ++k) {
        const bool low = fit.state.w[k] < 1e-7;
        if (sphere.perturbed[k]) {
            ++perturbed;
            detected += low ? 1 : 0;
        } else {
            false_flags += low ? 1 : 0;
        }
    }
    const double frac = static_cast<double>(detected) / perturbed;
    out.detail << "perturbed=" << perturbed << "/" << sphere.data.size() << " detected=" << detected
               << " (" << fmt(100.0 * frac) << "%) unperturbed below 1e-7=" << false_flags;
    out.check(frac >= 0.55, "at least 55% of perturbed points below 1e-7");
    out.check(false_flags == 0, "no unperturbed point below 1e-7");
}

void entropy_properties(Outcome& out) {
    double worst_sum = 0.0;
    double worst_excess = -1.0;
    double worst_increase = -1.0;
    int order_violations = 0;
    int stages = 0;

    auto check_order = [&](const MewlsState& s) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(s.r2.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.r2[a] < s.r2[b]; });
        for (std::size_t i = 1; i < idx.size(); ++i) {
            if (s.w[idx[i]] > s.w[idx[i - 1]]) ++order_violations;
        }
    };

    auto trajectory = [&](const FitProblem& problem, double r_final) {
        const double logm = std::log(static_cast<double>(problem.size()));
        FitOptions opts;
        std::optional<MewlsState> last;
        opts.on_sweep = [&](const SweepInfo& info, const MewlsState& s) {
            worst_sum = std::max(worst_sum, std::abs(s.w.sum() - 1.0));
            worst_excess = std::max(worst_excess, entropy(s.w) - logm);
            if (info.sweep == 1 && last) check_order(*last);  // previous stage converged
            last = s;
        };
        const auto res = continuation_fit(problem, ContinuationSchedule::geometric(r_final), opts);
        check_order(res.state);
        for (std::size_t i = 1; i < res.stages.size(); ++i) {
            worst_increase = std::max(worst_increase, res.stages[i].entropy - res.stages[i - 1].entropy);
        }
        stages += static_cast<int>(res.stages.size());
    };

    trajectory(FitProblem(SurfaceSpec::clamped(10, 10, 3), generate_franke_dataset({}).data), 500.0);
    trajectory(FitProblem(sphere_surface_spec(), generate_sphere_dataset({}).data), 1000.0);
    CrackPhantomConfig pc;
    pc.width = 80;
    pc.height = 80;
    trajectory(FitProblem(SurfaceSpec::clamped(8, 8, 3), image_to_dataset(make_crack_phantom(pc).corrupted)), 5.0);

    out.detail << stages << " stages, max|sum w-1|=" << fmt(worst_sum) << " max(H-log m)=" << fmt(worst_excess)
               << " max H increase=" << fmt(worst_increase) << " order violations=" << order_violations;
    out.check(worst_sum <= 1e-12, "sum w = 1 after every sweep");
    out.check(worst_excess <= 1e-12, "H <= log m");
    out.check(worst_increase <= 1e-9, "H non-increasing along continuation");
    out.check(order_violations == 0, "weights reverse-ordered to residuals");
}

void image_phantom(Outcome& out) {
    const auto ph = make_crack_phantom({});
    ImageFitConfig cfg;
    cfg.n1 = 12;
    cfg.n2 = 12;
    cfg.degree = 3;
    cfg.reduction = 2.0;
    const auto fit = fit_image(ph.corrupted, cfg);
    const auto mask = outlier_mask(weights_to_field(ph.corrupted, fit.state.w), 10.0);
    std::size_t hit = 0;
    std::size_t false_pos = 0;
    const std::size_t cracks = ph.cracks.count();
    for (std::size_t p = 0; p < mask.flags.size(); ++p) {
        if (ph.cracks.flags[p]) {
            hit += mask.flags[p];
        } else {
            false_pos += mask.flags[p];
        }
    }
    const double recall = static_cast<double>(hit) / cracks;
    const double fp_rate = static_cast<double>(false_pos) / (mask.flags.size() - cracks);
    const auto restored = restore_image(ph.corrupted, mask, image_surface_spec(ph.corrupted, cfg), fit.state.net);
    auto mse = [&](const ImageGrid& a) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            s += (a.values[i] - ph.clean.values[i]) * (a.values[i] - ph.clean.values[i]);
        }
        return s / static_cast<double>(a.values.size());
    };
    const double before = mse(ph.corrupted);
    const double after = mse(restored);
    out.detail << "cracks=" << cracks << " recovered=" << fmt(100.0 * recall) << "% false positives="
               << fmt(100.0 * fp_rate) << "% MSE corrupted=" << fmt(before) << " restored=" << fmt(after)
               << " (x" << fmt(before / after) << ")";
    out.check(recall >= 0.9, "recover >= 90% of crack pixels");
    out.check(fp_rate <= 0.02, "false positives <= 2%");
    out.check(before >= 10.0 * after, "restored MSE 10x below corrupted");
}

void fractal_dimension(Outcome& out) {
    OutlierMask square{256, 256, std::vector<std::uint8_t>(256 * 256, 1)};
    OutlierMask line{256, 256, std::vector<std::uint8_t>(256 * 256, 0)};
    for (int x = 0; x < 256; ++x) line.flags[128 * 256 + x] = 1;
    const int side = 729;
    OutlierMask carpet{side, side, std::vector<std::uint8_t>(static_cast<std::size_t>(side) * side, 0)};
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            bool hole = false;
            for (int a = x, b = y; a > 0 || b > 0; a /= 3, b /= 3) {
                if (a % 3 == 1 && b % 3 == 1) hole = true;
            }
            carpet.flags[static_cast<std::size_t>(y) * side + x] = hole ? 0 : 1;
        }
    }
    const auto ds = box_counting_dimension(square);
    const auto dl = box_counting_dimension(line);
    const auto dc = box_counting_dimension(carpet);
    const double target = std::log(8.0) / std::log(3.0);
    out.detail << "square=" << fmt(ds.dimension) << " line=" << fmt(dl.dimension) << " carpet=" << fmt(dc.dimension)
               << " (R^2 " << fmt(dc.r_squared) << ", " << dc.box_sizes.size() << " scales)";
    out.check(std::abs(ds.dimension - 2.0) <= 0.1, "square 2 +- 0.1");
    out.check(std::abs(dl.dimension - 1.0) <= 0.1, "line 1 +- 0.1");
    out.check(std::abs(dc.dimension - target) <= 0.06, "carpet 1.893 +- 0.06");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "basis correctness", 5.0, basis_correctness},
        {2, "WLS oracle equivalence", 10.0, wls_oracle},
        {3, "mu-equation correctness", 5.0, mu_equation_checks},
        {4, "fixed-point oracle", 30.0, fixed_point_oracle},
        {5, "Franke reproduction", 120.0, franke_reproduction},
        {6, "theory diagnostics", 120.0, theory_diagnostics},
        {7, "sphere reconstruction", 60.0, sphere_reconstruction},
        {8, "entropy/weight properties", 120.0, entropy_properties},
        {9, "image pipeline phantom", 120.0, image_phantom},
        {10, "fractal dimension", 10.0, fractal_dimension},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) {
            out.pass = false;
            out.detail << " [runtime over " << c.budget_s << " s budget]";
        }
        std::printf("%s  %2d  %-26s  %7.2fs  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    out.detail.str().c_str());
        std::fflush(stdout);
        if (!out.pass) ++failed;
    }
    std::printf("%s: %d criteria failed\n", failed ? "FAILED" : "OK", failed);
    return failed ? 1 : 0;
}
