/**
 * @file phantom.hpp
 * @brief Synthetic images with a known defect set for the image pipeline.
 */

#pragma once

#include "mewls/image.hpp"
#include "mewls/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mewls {

struct CrackPhantomConfig {
    std::uint64_t seed = 5;
    int width = 200;
    int height = 200;
    double crack_fraction = 0.015;
    double darkening = 0.3;
    double noise_sigma = 0.05;
};

struct CrackPhantom {
    ImageGrid corrupted;  // clean + cracks
    ImageGrid clean;      // smooth background plus noise, no cracks
    OutlierMask cracks;
};

enum PhantomStream : std::uint64_t { kPhantomNoise = 1, kPhantomCracks = 2 };

/// Smooth grayscale background with pixel noise, crossed by thin random-walk
/// cracks that darken the covered pixels. Values are clipped to [0,1].
inline CrackPhantom make_crack_phantom(const CrackPhantomConfig& cfg = {}) {
    if (cfg.width < 2 || cfg.height < 2) throw InvalidInput("phantom: image too small");
    if (cfg.crack_fraction < 0.0 || cfg.crack_fraction > 0.5) {
        throw InvalidInput("phantom: crack fraction must lie in [0, 0.5]");
    }
    const int W = cfg.width;
    const int H = cfg.height;
    CrackPhantom ph;
    ph.clean = ImageGrid(W, H, 1);
    Rng noise(cfg.seed, kPhantomNoise);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double sx = static_cast<double>(x) / (W - 1);
            const double sy = static_cast<double>(y) / (H - 1);
            const double base = 0.6 + 0.15 * std::sin(2.0 * std::numbers::pi * 1.3 * sx + 0.4) *
                                          std::cos(2.0 * std::numbers::pi * 0.9 * sy) +
                                0.1 * (sx - 0.5);
            ph.clean.at(x, y) = std::clamp(base + cfg.noise_sigma * noise.normal(), 0.0, 1.0);
        }
    }

    ph.cracks = OutlierMask{W, H, std::vector<std::uint8_t>(ph.clean.pixel_count(), 0)};
    const auto wanted = static_cast<std::size_t>(std::llround(cfg.crack_fraction * W * H));
    std::size_t count = 0;
    Rng walk(cfg.seed, kPhantomCracks);
    while (count < wanted) {
        double px = walk.uniform(0.0, W - 1.0);
        double py = walk.uniform(0.0, H - 1.0);
        double angle = walk.uniform(0.0, 2.0 * std::numbers::pi);
        const int length = 40 + static_cast<int>(walk.uniform() * 80.0);
        for (int step = 0; step < length && count < wanted; ++step) {
            const int ix = static_cast<int>(std::lround(px));
            const int iy = static_cast<int>(std::lround(py));
            if (ix < 0 || iy < 0 || ix >= W || iy >= H) break;
            auto& flag = ph.cracks.flags[static_cast<std::size_t>(iy) * W + ix];
            if (!flag) {
                flag = 1;
                ++count;
            }
            angle += 0.35 * walk.normal();
            px += std::cos(angle);
            py += std::sin(angle);
        }
    }

    ph.corrupted = ph.clean;
    for (std::size_t p = 0; p < ph.cracks.flags.size(); ++p) {
        if (ph.cracks.flags[p]) {
            ph.corrupted.values[p] = std::clamp(ph.corrupted.values[p] - cfg.darkening, 0.0, 1.0);
        }
    }
    return ph;
}

/// Field equal to 1 minus Gaussian dips of the given depth and radius.
struct Dip {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;
    double depth = 1.0;
};

inline ScalarField dip_field(int width, int height, const std::vector<Dip>& dips) {
    ScalarField f{width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 1.0)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double v = 1.0;
            for (const auto& d : dips) {
                const double r2 = ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy)) / (d.radius * d.radius);
                v -= d.depth * std::exp(-r2);
            }
            f.values[static_cast<std::size_t>(y) * width + x] = v;
        }
    }
    return f;
}

}  // namespace mewls
