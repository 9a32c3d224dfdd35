#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wsmsfem {

template <int Dim>
using point = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using matrix = Eigen::Matrix<double, Dim, Dim>;

constexpr double pi = 3.141592653589793238462643383279502884;

/// Raised when a mesh size does not fit the structured lattice.
struct sizing_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised by solvers (non-convergence, indefinite systems, singular local systems).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Returns n when x is 1/n for an integer n (within tol), otherwise 0.
inline long reciprocal_integer(double x, double tol = 1e-9)
{
    if (!(x > 0))
        return 0;
    const double r = 1.0 / x;
    const double n = std::round(r);
    if (n < 1 || std::abs(r - n) > tol * std::max(1.0, r))
        return 0;
    return static_cast<long>(n);
}

inline long checked_reciprocal(double x, const char* what)
{
    const long n = reciprocal_integer(x);
    if (n == 0)
        throw sizing_error(std::string(what) + " = " + std::to_string(x) +
                           " is not the reciprocal of an integer");
    return n;
}

template <int Dim>
inline point<Dim> make_point(double x, double y = 0.0)
{
    point<Dim> p;
    p(0) = x;
    if constexpr (Dim == 2)
        p(1) = y;
    return p;
}

} // namespace wsmsfem
