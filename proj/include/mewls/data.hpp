/**
 * @file data.hpp
 * @brief Synthetic benchmark datasets and cross-validation error.
 *
 * Franke point cloud: n_clean samples of the Franke function with additive
 * Gaussian noise plus n_outliers points uniform in the unit cube.
 * Sphere: a 15 x 12 structured grid on the unit sphere (closed level circles
 * along u, pole-to-pole meridians along v), about half of the distinct points
 * pushed radially outwards.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/error.hpp"
#include "mewls/random.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace mewls {

inline double franke(double x, double y) {
    const double a = 9.0 * x;
    const double b = 9.0 * y;
    return 0.75 * std::exp(-((a - 2.0) * (a - 2.0) + (b - 2.0) * (b - 2.0)) / 4.0) +
           0.75 * std::exp(-((a + 1.0) * (a + 1.0) / 49.0 + (b + 1.0) / 10.0)) +
           0.5 * std::exp(-((a - 7.0) * (a - 7.0) + (b - 3.0) * (b - 3.0)) / 4.0) -
           0.2 * std::exp(-((a - 4.0) * (a - 4.0) + (b - 7.0) * (b - 7.0)));
}

struct SyntheticConfig {
    std::uint64_t seed = 7;
    int n_clean = 1000;
    double noise_sigma = 1e-3;
    int n_outliers = 150;
    int grid_cv = 101;
};

/// Substreams used by generate_franke_dataset.
enum FrankeStream : std::uint64_t { kCleanPositions = 1, kNoise = 2, kOutliers = 3 };

struct LabelledDataset {
    Dataset data;
    std::vector<std::uint8_t> outlier;  // 1 for points of the outlier cohort
};

/// Clean points first (rows 0..n_clean-1), then outliers.
inline LabelledDataset generate_franke_dataset(const SyntheticConfig& cfg) {
    if (cfg.n_clean < 0 || cfg.n_outliers < 0 || cfg.noise_sigma < 0.0) {
        throw InvalidInput("franke dataset: counts and sigma must be non-negative");
    }
    const int m = cfg.n_clean + cfg.n_outliers;
    std::vector<double> u(static_cast<std::size_t>(m));
    std::vector<double> v(static_cast<std::size_t>(m));
    Matrix q(m, 1);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(m), 0);

    Rng positions(cfg.seed, kCleanPositions);
    Rng noise(cfg.seed, kNoise);
    Rng outliers(cfg.seed, kOutliers);
    for (int k = 0; k < cfg.n_clean; ++k) {
        u[k] = positions.uniform();
        v[k] = positions.uniform();
        q(k, 0) = franke(u[k], v[k]) + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * noise.normal() : 0.0);
    }
    for (int k = cfg.n_clean; k < m; ++k) {
        u[k] = outliers.uniform();
        v[k] = outliers.uniform();
        q(k, 0) = outliers.uniform();
        flags[k] = 1;
    }
    return {Dataset::scattered(std::move(u), std::move(v), std::move(q)), std::move(flags)};
}

struct SphereConfig {
    std::uint64_t seed = 11;
    double perturb_fraction = 0.5;
    double max_radial_factor = 4.0;
    /// A pole is one point repeated m1 times; perturbing it plants m1
    /// identical outliers. Off by default so every outlier is a single point.
    bool perturb_poles = false;
    int m1 = 15;  // points per level circle (first == last)
    int m2 = 12;  // points per meridian (pole to pole)
    /// Parameter interval covered by the closed u direction.
    double u_begin = 0.25;
    double u_end = 0.75;
};

enum SphereStream : std::uint64_t { kPerturbChoice = 1, kPerturbFactor = 2 };

struct SphereDataset {
    Dataset data;  // structured, s = 3
    std::vector<std::uint8_t> perturbed;
    std::vector<double> radial_factor;
};

/// Degree-3 surface closed in u on a 6 x 5 free grid (9 x 5 with wrapped
/// rows, 13 uniform u knots, clamped v knots with one interior knot).
inline SurfaceSpec sphere_surface_spec() { return SurfaceSpec::closed(6, 5, 3, 3); }

/// Level circles run along u (angle 2 pi k / (m1 - 1)), meridians along v
/// (polar angle pi l / (m2 - 1)), both equally spaced. Distinct points are
/// perturbed independently; duplicated entries (closing row, poles) share
/// the perturbation of the point they repeat. Pole draws are always consumed
/// so the interior perturbations do not depend on perturb_poles.
inline SphereDataset generate_sphere_dataset(const SphereConfig& cfg = {}) {
    if (!(cfg.max_radial_factor >= 1.0) || cfg.perturb_fraction < 0.0 || cfg.perturb_fraction > 1.0) {
        throw InvalidInput("sphere dataset: need max_radial_factor >= 1 and fraction in [0,1]");
    }
    if (cfg.m1 < 3 || cfg.m2 < 3) throw InvalidInput("sphere dataset: grid too small");
    const int m1 = cfg.m1;
    const int m2 = cfg.m2;
    std::vector<double> u(static_cast<std::size_t>(m1));
    std::vector<double> v(static_cast<std::size_t>(m2));
    for (int k = 0; k < m1; ++k) u[k] = cfg.u_begin + (cfg.u_end - cfg.u_begin) * k / (m1 - 1);
    for (int l = 0; l < m2; ++l) v[l] = static_cast<double>(l) / (m2 - 1);
    u.back() = cfg.u_end;
    v.back() = 1.0;

    Rng choice(cfg.seed, kPerturbChoice);
    Rng factor(cfg.seed, kPerturbFactor);
    auto draw = [&]() {
        const bool hit = choice.bernoulli(cfg.perturb_fraction);
        const double f = factor.uniform(1.0, cfg.max_radial_factor);
        return hit ? f : 1.0;
    };

    // distinct points: two poles plus (m1 - 1) x (m2 - 2) interior points
    const double north_draw = draw();
    const double south_draw = draw();
    const double north = cfg.perturb_poles ? north_draw : 1.0;
    const double south = cfg.perturb_poles ? south_draw : 1.0;
    std::vector<double> interior(static_cast<std::size_t>((m1 - 1) * (m2 - 2)));
    for (auto& f : interior) f = draw();

    const auto m = static_cast<Eigen::Index>(m1) * m2;
    Matrix q(m, 3);
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(m), 0);
    std::vector<double> radial(static_cast<std::size_t>(m), 1.0);
    for (int l = 0; l < m2; ++l) {
        const double phi = std::numbers::pi * l / (m2 - 1);
        for (int k = 0; k < m1; ++k) {
            const int kk = k == m1 - 1 ? 0 : k;
            const double theta = 2.0 * std::numbers::pi * kk / (m1 - 1);
            double x;
            double y;
            double z;
            double f;
            if (l == 0) {
                x = 0.0, y = 0.0, z = 1.0, f = north;
            } else if (l == m2 - 1) {
                x = 0.0, y = 0.0, z = -1.0, f = south;
            } else {
                x = std::sin(phi) * std::cos(theta);
                y = std::sin(phi) * std::sin(theta);
                z = std::cos(phi);
                f = interior[static_cast<std::size_t>(kk + (m1 - 1) * (l - 1))];
            }
            const auto row = static_cast<Eigen::Index>(k) + static_cast<Eigen::Index>(m1) * l;
            q(row, 0) = f * x;
            q(row, 1) = f * y;
            q(row, 2) = f * z;
            radial[row] = f;
            flags[row] = f != 1.0 ? 1 : 0;
        }
    }
    return {Dataset::structured(std::move(u), std::move(v), std::move(q)), std::move(flags),
            std::move(radial)};
}

using SurfaceFunction = std::function<RowVector(double, double)>;

/// Mean over a g x g grid of the validity rectangle of ||S - reference||^2.
inline double cv_mse(const SurfaceSpec& spec, const ControlNet& net, const SurfaceFunction& reference,
                     int grid = 101) {
    if (grid < 2) throw InvalidInput("cv_mse: grid must have at least 2 points per side");
    const double u0 = spec.knots_u().domain_begin();
    const double u1 = spec.knots_u().domain_end();
    const double v0 = spec.knots_v().domain_begin();
    const double v1 = spec.knots_v().domain_end();
    double acc = 0.0;
    for (int j = 0; j < grid; ++j) {
        const double v = j == grid - 1 ? v1 : v0 + (v1 - v0) * j / (grid - 1);
        for (int i = 0; i < grid; ++i) {
            const double u = i == grid - 1 ? u1 : u0 + (u1 - u0) * i / (grid - 1);
            acc += (eval_surface(spec, net, u, v) - reference(u, v)).squaredNorm();
        }
    }
    return acc / (static_cast<double>(grid) * grid);
}

/// Cross-validation against a reference spline on the same configuration.
inline double cv_mse(const SurfaceSpec& spec, const ControlNet& net, const ControlNet& reference,
                     int grid = 101) {
    return cv_mse(
        spec, net, [&](double u, double v) { return eval_surface(spec, reference, u, v); }, grid);
}

inline SurfaceFunction franke_reference() {
    return [](double u, double v) {
        RowVector r(1);
        r[0] = franke(u, v);
        return r;
    };
}

}  // namespace mewls
