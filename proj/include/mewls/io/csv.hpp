/**
 * @file csv.hpp
 * @brief Dataset and table CSV files.
 *
 * Scattered datasets: header `u,v,q1,...,qs`, one point per row.
 * Structured datasets:
 *
 *     structured,m1,m2,s
 *     u,u_0,...,u_{m1-1}
 *     v,v_0,...,v_{m2-1}
 *     q_1,...,q_s          (m1*m2 rows, row k + m1*l)
 *
 * Reals are written with 17 significant digits so files round-trip exactly.
 */

#pragma once

#include "mewls/bspline.hpp"
#include "mewls/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mewls::io {

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_real(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return x;
    } catch (const std::exception&) {
        throw InvalidInput(where + ": cannot parse '" + s + "' as a number");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    auto out = detail::open_out(path);
    const int s = data.codim();
    if (data.layout == Layout::scattered) {
        out << "u,v";
        for (int c = 1; c <= s; ++c) out << ",q" << c;
        out << '\n';
        for (Eigen::Index k = 0; k < data.size(); ++k) {
            out << format_real(data.u[k]) << ',' << format_real(data.v[k]);
            for (int c = 0; c < s; ++c) out << ',' << format_real(data.Q(k, c));
            out << '\n';
        }
    } else {
        out << "structured," << data.m1() << ',' << data.m2() << ',' << s << '\n';
        out << 'u';
        for (double x : data.u) out << ',' << format_real(x);
        out << "\nv";
        for (double x : data.v) out << ',' << format_real(x);
        out << '\n';
        for (Eigen::Index k = 0; k < data.size(); ++k) {
            for (int c = 0; c < s; ++c) out << (c ? "," : "") << format_real(data.Q(k, c));
            out << '\n';
        }
    }
    detail::finish(out, path);
}

inline Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput(path + ": empty file");
    auto head = detail::split(line);
    int lineno = 1;
    auto where = [&] { return path + ":" + std::to_string(lineno); };

    if (!head.empty() && head[0] == "structured") {
        if (head.size() != 4) throw InvalidInput(where() + ": expected structured,m1,m2,s");
        const auto m1 = static_cast<std::size_t>(detail::parse_real(head[1], where()));
        const auto m2 = static_cast<std::size_t>(detail::parse_real(head[2], where()));
        const int s = static_cast<int>(detail::parse_real(head[3], where()));
        auto read_axis = [&](char name, std::size_t count) {
            ++lineno;
            if (!std::getline(in, line)) throw InvalidInput(where() + ": missing parameter row");
            const auto f = detail::split(line);
            if (f.size() != count + 1 || f[0] != std::string(1, name)) {
                throw InvalidInput(where() + ": malformed '" + std::string(1, name) + "' row");
            }
            std::vector<double> xs(count);
            for (std::size_t i = 0; i < count; ++i) xs[i] = detail::parse_real(f[i + 1], where());
            return xs;
        };
        auto u = read_axis('u', m1);
        auto v = read_axis('v', m2);
        Matrix q(static_cast<Eigen::Index>(m1 * m2), s);
        for (Eigen::Index k = 0; k < q.rows(); ++k) {
            ++lineno;
            if (!std::getline(in, line)) throw InvalidInput(where() + ": missing data row");
            const auto f = detail::split(line);
            if (static_cast<int>(f.size()) != s) throw InvalidInput(where() + ": wrong column count");
            for (int c = 0; c < s; ++c) q(k, c) = detail::parse_real(f[c], where());
        }
        return Dataset::structured(std::move(u), std::move(v), std::move(q));
    }

    if (head.size() < 3 || head[0] != "u" || head[1] != "v") {
        throw InvalidInput(where() + ": expected header u,v,q1,... or structured,m1,m2,s");
    }
    const int s = static_cast<int>(head.size()) - 2;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> q;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split(line);
        if (static_cast<int>(f.size()) != s + 2) throw InvalidInput(where() + ": wrong column count");
        u.push_back(detail::parse_real(f[0], where()));
        v.push_back(detail::parse_real(f[1], where()));
        for (int c = 0; c < s; ++c) q.push_back(detail::parse_real(f[c + 2], where()));
    }
    Matrix qm(static_cast<Eigen::Index>(u.size()), s);
    for (Eigen::Index k = 0; k < qm.rows(); ++k) {
        for (int c = 0; c < s; ++c) qm(k, c) = q[static_cast<std::size_t>(k) * s + c];
    }
    return Dataset::scattered(std::move(u), std::move(v), std::move(qm));
}

/// Generic numeric table with a header row.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size()) throw InvalidInput("CsvTable: row width mismatch");
        rows_.push_back(row);
    }

    void write(const std::string& path) const {
        auto out = detail::open_out(path);
        for (std::size_t c = 0; c < columns_.size(); ++c) out << (c ? "," : "") << columns_[c];
        out << '\n';
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_real(row[c]);
            out << '\n';
        }
        detail::finish(out, path);
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

inline void write_text(const std::string& path, const std::string& text) {
    auto out = detail::open_out(path);
    out << text;
    detail::finish(out, path);
}

}  // namespace mewls::io
