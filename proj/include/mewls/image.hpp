/**
 * @file image.hpp
 * @brief Image restoration and region-of-interest extraction on top of MEWLS.
 *
 * An image is a structured dataset: pixel (x, y) has parameters
 * u = x / (width - 1), v = y / (height - 1), and all channels share one
 * weight. Pixels whose weight falls below w_max / threshold form the outlier
 * mask; restoration replaces exactly those pixels by the fitted surface.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/error.hpp"
#include "mewls/mewls.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mewls {

/// Row-major pixels with interleaved channels, values in [0,1].
struct ImageGrid {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> values;

    ImageGrid() = default;
    ImageGrid(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          values(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    double& at(int x, int y, int c = 0) {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// Scalar field on the pixel grid (weights, masks), row-major.
struct ScalarField {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline Dataset image_to_dataset(const ImageGrid& img) {
    if (img.width < 2 || img.height < 2) {
        throw InvalidInput("image_to_dataset: image must be at least 2 x 2 (got " +
                           std::to_string(img.width) + " x " + std::to_string(img.height) + ")");
    }
    if (img.channels < 1) throw InvalidInput("image_to_dataset: no channels");
    if (img.values.size() != img.pixel_count() * img.channels) {
        throw InvalidInput("image_to_dataset: value count does not match dimensions");
    }
    std::vector<double> u(static_cast<std::size_t>(img.width));
    std::vector<double> v(static_cast<std::size_t>(img.height));
    for (int x = 0; x < img.width; ++x) u[x] = static_cast<double>(x) / (img.width - 1);
    for (int y = 0; y < img.height; ++y) v[y] = static_cast<double>(y) / (img.height - 1);
    // structured row k + m1*l with k = x, l = y is exactly the row-major pixel index
    Matrix q(static_cast<Eigen::Index>(img.pixel_count()), img.channels);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        for (int c = 0; c < img.channels; ++c) {
            q(static_cast<Eigen::Index>(p), c) = img.values[p * img.channels + c];
        }
    }
    return Dataset::structured(std::move(u), std::move(v), std::move(q));
}

inline ImageGrid dataset_to_image(const Dataset& data) {
    if (data.layout != Layout::structured) throw InvalidInput("dataset_to_image: need structured data");
    ImageGrid img(static_cast<int>(data.m1()), static_cast<int>(data.m2()), data.codim());
    for (Eigen::Index p = 0; p < data.size(); ++p) {
        for (int c = 0; c < img.channels; ++c) {
            img.values[static_cast<std::size_t>(p) * img.channels + c] = data.Q(p, c);
        }
    }
    return img;
}

inline ScalarField weights_to_field(const ImageGrid& img, const WeightVector& w) {
    if (static_cast<std::size_t>(w.size()) != img.pixel_count()) {
        throw InvalidInput("weight vector does not match the image size");
    }
    ScalarField f{img.width, img.height, std::vector<double>(w.data(), w.data() + w.size())};
    return f;
}

struct ImageFitConfig {
    int n1 = 40;  // control points along the width
    int n2 = 60;  // control points along the height
    int degree = 3;
    double reduction = 2.0;
    FitOptions options;
};

/// Clamped equispaced n1 x n2 surface over the whole pixel grid.
inline SurfaceSpec image_surface_spec(const ImageGrid& img, const ImageFitConfig& cfg) {
    return SurfaceSpec::clamped(cfg.n1, cfg.n2, cfg.degree, img.channels);
}

/// Continuation to target = mse_uw / reduction with channel-shared weights.
inline ContinuationResult fit_image(const ImageGrid& img, const ImageFitConfig& cfg) {
    FitProblem problem(image_surface_spec(img, cfg), image_to_dataset(img));
    auto schedule = ContinuationSchedule::geometric(cfg.reduction, cfg.options.tol,
                                                    cfg.options.max_iters);
    return continuation_fit(problem, schedule, cfg.options);
}

/// Binary pixel mask, row-major.
struct OutlierMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> flags;

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
    }
    double density() const {
        return flags.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(flags.size());
    }
    std::uint8_t at(int x, int y) const { return flags[static_cast<std::size_t>(y) * width + x]; }
};

/// Omega = 1 where w < max(w) / relative_threshold.
inline OutlierMask outlier_mask(const ScalarField& weights, double relative_threshold = 10.0) {
    if (!(relative_threshold > 0.0)) throw InvalidInput("outlier_mask: threshold must be positive");
    if (weights.values.size() != static_cast<std::size_t>(weights.width) * weights.height) {
        throw InvalidInput("outlier_mask: field size mismatch");
    }
    OutlierMask mask{weights.width, weights.height,
                     std::vector<std::uint8_t>(weights.values.size(), 0)};
    if (weights.values.empty()) return mask;
    const double wmax = *std::max_element(weights.values.begin(), weights.values.end());
    const double cut = wmax / relative_threshold;
    for (std::size_t p = 0; p < weights.values.size(); ++p) {
        mask.flags[p] = weights.values[p] < cut ? 1 : 0;
    }
    return mask;
}

/// Flagged pixels take the model value clamped to [0,1]; others are copied.
inline ImageGrid restore_image(const ImageGrid& img, const OutlierMask& mask,
                               const SurfaceSpec& spec, const ControlNet& net) {
    if (mask.width != img.width || mask.height != img.height) {
        throw InvalidInput("restore_image: mask and image shapes differ");
    }
    if (spec.codim() != img.channels) throw InvalidInput("restore_image: channel count mismatch");
    ImageGrid out = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!mask.at(x, y)) continue;
            const RowVector s = eval_surface(spec, net, static_cast<double>(x) / (img.width - 1),
                                             static_cast<double>(y) / (img.height - 1));
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = std::clamp(s[c], 0.0, 1.0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Isocontours (marching squares)
// ---------------------------------------------------------------------------

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Polyline {
    std::vector<Point2> points;
    bool closed = false;
};

namespace detail {

// Crossing on a grid edge. Horizontal edge (x,y)-(x+1,y) has id 2*(y*W + x),
// vertical edge (x,y)-(x,y+1) has id 2*(y*W + x) + 1.
struct EdgeSegment {
    std::int64_t from = 0;
    std::int64_t to = 0;
};

}  // namespace detail

/// Isolines of the field at `level`, oriented with the region below the level
/// on the left (x to the right, y increasing). Saddle cells are resolved with
/// the cell-centre average. Points are in pixel coordinates.
inline std::vector<Polyline> roi_contours(const ScalarField& field, double level) {
    const int W = field.width;
    const int H = field.height;
    std::vector<Polyline> result;
    if (W < 2 || H < 2) return result;

    auto below = [&](int x, int y) { return field.at(x, y) < level; };
    auto hedge = [&](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * W + x); };
    auto vedge = [&](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * W + x) + 1; };

    auto crossing = [&](std::int64_t id) {
        const std::int64_t cell = id / 2;
        const int x = static_cast<int>(cell % W);
        const int y = static_cast<int>(cell / W);
        const double f0 = field.at(x, y);
        if (id % 2 == 0) {
            const double f1 = field.at(x + 1, y);
            return Point2{x + (level - f0) / (f1 - f0), static_cast<double>(y)};
        }
        const double f1 = field.at(x, y + 1);
        return Point2{static_cast<double>(x), y + (level - f0) / (f1 - f0)};
    };

    // segments keyed by their start edge
    std::map<std::int64_t, std::int64_t> next;
    std::map<std::int64_t, int> incoming;
    for (int y = 0; y + 1 < H; ++y) {
        for (int x = 0; x + 1 < W; ++x) {
            // corners counter-clockwise: (x,y) (x+1,y) (x+1,y+1) (x,y+1)
            const bool in[4] = {below(x, y), below(x + 1, y), below(x + 1, y + 1), below(x, y + 1)};
            const std::int64_t edges[4] = {hedge(x, y), vedge(x + 1, y), hedge(x, y + 1), vedge(x, y)};
            std::int64_t exits[2];
            std::int64_t entries[2];
            int ne = 0;
            int ni = 0;
            for (int e = 0; e < 4; ++e) {
                const bool a = in[e];
                const bool b = in[(e + 1) % 4];
                if (a && !b) exits[ne++] = edges[e];
                if (!a && b) entries[ni++] = edges[e];
            }
            if (ne == 0) continue;
            if (ne == 1) {
                next[exits[0]] = entries[0];
                ++incoming[entries[0]];
                continue;
            }
            // saddle: all four edges cross, exits and entries alternate
            const double centre = 0.25 * (field.at(x, y) + field.at(x + 1, y) +
                                          field.at(x + 1, y + 1) + field.at(x, y + 1));
            const bool connected_inside = centre < level;
            for (int e = 0; e < 4; ++e) {
                if (!(in[e] && !in[(e + 1) % 4])) continue;
                // inside joined through the centre: cut off the outside corner after
                // the exit; otherwise wrap the inside corner before it
                const int partner = connected_inside ? (e + 1) % 4 : (e + 3) % 4;
                next[edges[e]] = edges[partner];
                ++incoming[edges[partner]];
            }
        }
    }

    auto trace = [&](std::int64_t start) {
        Polyline line;
        std::int64_t cur = start;
        line.points.push_back(crossing(cur));
        while (true) {
            auto it = next.find(cur);
            if (it == next.end()) break;
            const std::int64_t to = it->second;
            next.erase(it);
            if (to == start) {
                line.closed = true;
                break;
            }
            line.points.push_back(crossing(to));
            cur = to;
        }
        return line;
    };

    // open chains start where no segment enters
    std::vector<std::int64_t> starts;
    for (const auto& [from, to] : next) {
        if (incoming.find(from) == incoming.end()) starts.push_back(from);
    }
    for (auto s : starts) result.push_back(trace(s));
    while (!next.empty()) result.push_back(trace(next.begin()->first));
    return result;
}

/// Signed area (shoelace) of a closed polyline; positive when traversed
/// counter-clockwise in (x, y).
inline double signed_area(const Polyline& line) {
    double a = 0.0;
    const auto& p = line.points;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& q = p[(i + 1) % p.size()];
        a += p[i].x * q.y - q.x * p[i].y;
    }
    return 0.5 * a;
}

// ---------------------------------------------------------------------------
// Binary masks and box counting
// ---------------------------------------------------------------------------

/// Pixels strictly below the level.
inline OutlierMask threshold_below(const ScalarField& field, double level) {
    OutlierMask m{field.width, field.height, std::vector<std::uint8_t>(field.values.size(), 0)};
    for (std::size_t p = 0; p < field.values.size(); ++p) m.flags[p] = field.values[p] < level ? 1 : 0;
    return m;
}

/// Set pixels with at least one 8-neighbour outside the set (outside the
/// image counts as background): the set minus its 3 x 3 erosion.
inline OutlierMask morphological_boundary(const OutlierMask& set) {
    OutlierMask out{set.width, set.height, std::vector<std::uint8_t>(set.flags.size(), 0)};
    for (int y = 0; y < set.height; ++y) {
        for (int x = 0; x < set.width; ++x) {
            if (!set.at(x, y)) continue;
            bool interior = true;
            for (int dy = -1; dy <= 1 && interior; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    const int yy = y + dy;
                    if (xx < 0 || yy < 0 || xx >= set.width || yy >= set.height || !set.at(xx, yy)) {
                        interior = false;
                        break;
                    }
                }
            }
            out.flags[static_cast<std::size_t>(y) * set.width + x] = interior ? 0 : 1;
        }
    }
    return out;
}

/// Boundary of the region where the weight field drops below `level`.
inline OutlierMask mass_boundary(const ScalarField& weights, double level) {
    return morphological_boundary(threshold_below(weights, level));
}

struct BoxCountingResult {
    double dimension = 0.0;
    double r_squared = 0.0;
    std::vector<int> box_sizes;
    std::vector<std::size_t> counts;
};

/// Slope of log N(s) against log(1/eps), box sizes s = 1, 2, 4, ... up to a
/// quarter of the shorter side. The scale is measured as the number of boxes
/// needed to span the longer side, ceil(L / s), which removes the bias of
/// partially covered boxes at the border.
inline BoxCountingResult box_counting_dimension(const OutlierMask& set) {
    const int side = std::min(set.width, set.height);
    if (side < 32) throw InvalidInput("box_counting_dimension: image side must be >= 32");
    if (set.count() == 0) throw InvalidInput("box_counting_dimension: empty set has no dimension");
    const int longest = std::max(set.width, set.height);

    BoxCountingResult res;
    std::vector<double> xs;
    std::vector<double> ys;
    for (int s = 1; s <= side / 4; s *= 2) {
        const int bw = (set.width + s - 1) / s;
        const int bh = (set.height + s - 1) / s;
        std::vector<std::uint8_t> hit(static_cast<std::size_t>(bw) * bh, 0);
        for (int y = 0; y < set.height; ++y) {
            for (int x = 0; x < set.width; ++x) {
                if (set.at(x, y)) hit[static_cast<std::size_t>(y / s) * bw + x / s] = 1;
            }
        }
        const auto n = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), std::uint8_t{1}));
        res.box_sizes.push_back(s);
        res.counts.push_back(n);
        xs.push_back(std::log(static_cast<double>((longest + s - 1) / s)));
        ys.push_back(std::log(static_cast<double>(n)));
    }

    const auto k = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    res.dimension = sxy / sxx;
    res.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return res;
}

}  // namespace mewls
