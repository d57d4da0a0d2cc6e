/**
 * @file field.hpp
 * @brief Pixel fields as `x,y,w` CSV, one row per pixel in row-major order.
 */

#pragma once

#include "mewls/image.hpp"
#include "mewls/io/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace mewls::io {

inline void write_field_csv(const std::string& path, const ScalarField& field) {
    auto out = detail::open_out(path);
    out << "x,y,w\n";
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) out << x << ',' << y << ',' << format_real(field.at(x, y)) << '\n';
    }
    detail::finish(out, path);
}

/// Rows may come in any order but must cover the grid exactly once.
inline ScalarField read_field_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || detail::split(line) != std::vector<std::string>{"x", "y", "w"}) {
        throw InvalidInput(path + ": expected header 'x,y,w'");
    }
    struct Cell {
        long x, y;
        double w;
    };
    std::vector<Cell> cells;
    long width = 0;
    long height = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (f.size() != 3) throw InvalidInput(where + ": expected 3 fields");
        const double x = detail::parse_real(f[0], where);
        const double y = detail::parse_real(f[1], where);
        if (x < 0 || y < 0 || x != std::floor(x) || y != std::floor(y) || x > 1e8 || y > 1e8) {
            throw InvalidInput(where + ": pixel coordinates must be non-negative integers");
        }
        cells.push_back({static_cast<long>(x), static_cast<long>(y), detail::parse_real(f[2], where)});
        width = std::max(width, cells.back().x + 1);
        height = std::max(height, cells.back().y + 1);
    }
    if (cells.empty()) throw InvalidInput(path + ": no pixels");
    if (static_cast<std::size_t>(width * height) != cells.size()) {
        throw InvalidInput(path + ": pixels do not cover a " + std::to_string(width) + " x " +
                           std::to_string(height) + " grid exactly once");
    }
    ScalarField field{static_cast<int>(width), static_cast<int>(height),
                      std::vector<double>(cells.size(), 0.0)};
    std::vector<std::uint8_t> seen(cells.size(), 0);
    for (const auto& c : cells) {
        const auto idx = static_cast<std::size_t>(c.y * width + c.x);
        if (seen[idx]++) throw InvalidInput(path + ": duplicate pixel (" + std::to_string(c.x) + "," +
                                            std::to_string(c.y) + ")");
        field.values[idx] = c.w;
    }
    return field;
}

}  // namespace mewls::io
