#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mewls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Knot/grid configuration that cannot define a spline (e.g. n <= d).
class InvalidConfiguration : public Error {
public:
    using Error::Error;
};

/// Evaluation parameter outside the admissible domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch, empty input, malformed data.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The weighted least-squares matrix is numerically rank deficient.
class SingularSystem : public Error {
public:
    SingularSystem(const std::string& what, std::ptrdiff_t rank, std::ptrdiff_t cols)
        : Error(what), rank_(rank), cols_(cols) {}

    std::ptrdiff_t rank() const noexcept { return rank_; }
    std::ptrdiff_t cols() const noexcept { return cols_; }

private:
    std::ptrdiff_t rank_;
    std::ptrdiff_t cols_;
};

/// All residual moduli coincide: the multiplier equation is identically zero
/// or has no root, so no entropy-maximal weighting exists.
class DegenerateResiduals : public Error {
public:
    using Error::Error;
};

/// Target MSE outside the open interval (min r^2, max r^2).
class InfeasibleTarget : public Error {
public:
    using Error::Error;
};

/// An iterative procedure ran out of iterations.
class IterationFailure : public Error {
public:
    IterationFailure(const std::string& what, double last_iterate, int iterations)
        : Error(what), last_iterate_(last_iterate), iterations_(iterations) {}

    double last_iterate() const noexcept { return last_iterate_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_iterate_;
    int iterations_;
};

}  // namespace mewls
