#pragma once

#include "common.hpp"

#include <vector>

namespace wsmsfem {

/// Quadrature on the reference simplex (unit interval, or the triangle with
/// vertices (0,0), (1,0), (0,1)). Weights sum to the reference measure.
template <int Dim>
struct quadrature_rule {
    std::vector<point<Dim>> points;
    std::vector<double> weights;
    std::size_t size() const { return points.size(); }
};

/// Gauss-Legendre nodes and weights on [0,1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    if (n < 1)
        throw std::invalid_argument("gauss_legendre: n must be positive");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15)
                break;
        }
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = w[n - 1 - i] = 1.0 / ((1.0 - z * z) * pp * pp);
    }
}

inline quadrature_rule<1> gauss_rule_1d(int n)
{
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    quadrature_rule<1> r;
    for (int i = 0; i < n; ++i) {
        r.points.push_back(make_point<1>(x[i]));
        r.weights.push_back(w[i]);
    }
    return r;
}

/// Degree-2 rule with three interior points.
inline quadrature_rule<2> triangle_rule_3()
{
    quadrature_rule<2> r;
    const double a = 1.0 / 6.0, b = 2.0 / 3.0;
    r.points = {make_point<2>(a, a), make_point<2>(b, a), make_point<2>(a, b)};
    r.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    return r;
}

/// Collapsed (Duffy) tensor Gauss rule, exact for degree 2n-2.
inline quadrature_rule<2> triangle_collapsed_gauss(int n)
{
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    quadrature_rule<2> r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double u = x[i], v = x[j];
            r.points.push_back(make_point<2>(u, v * (1.0 - u)));
            r.weights.push_back(w[i] * w[j] * (1.0 - u));
        }
    return r;
}

/// Default per-element rule: midpoint in 1D, 3-point in 2D.
template <int Dim>
quadrature_rule<Dim> default_rule()
{
    if constexpr (Dim == 1)
        return gauss_rule_1d(1);
    else
        return triangle_rule_3();
}

/// Rule of roughly the given accuracy (number of 1D Gauss points per direction).
template <int Dim>
quadrature_rule<Dim> high_order_rule(int n)
{
    if constexpr (Dim == 1)
        return gauss_rule_1d(n);
    else
        return triangle_collapsed_gauss(n);
}

} // namespace wsmsfem
