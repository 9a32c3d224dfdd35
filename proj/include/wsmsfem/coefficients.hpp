#pragma once

#include "cells.hpp"
#include "random.hpp"

#include <functional>
#include <string>
#include <string_view>

namespace wsmsfem {

enum class preset_kind { oned_multifreq, twod_multifreq, twod_classical, custom };

/// Scalar oscillating coefficient A_eta(x) = (a0(x) + eta X_k(x) b(x)) Id with
/// a0(x) = a_per(x/eps), b(x) = b_per(x/eps) and k(x) the eps-cell of x.
template <int Dim>
struct coefficient_spec {
    std::string name;
    preset_kind kind = preset_kind::custom;
    double eps = 1.0;
    double eta = 0.0;
    double kappa = 0.0;
    double zeta = 1.0;
    double P = 1.8;
    /// Law of X_0 (uniform on [0,1] by default).
    double mean_x = 0.5;
    double var_x = 1.0 / 12.0;
    long q = 1;
    std::function<double(const point<Dim>&)> custom_a;
    std::function<double(const point<Dim>&)> custom_b;

    /// Deterministic part on the unit cell.
    double a_per(const point<Dim>& y) const
    {
        switch (kind) {
        case preset_kind::oned_multifreq: {
            const double s = std::sin(pi * y(0));
            return 5.0 + 50.0 * s * s;
        }
        case preset_kind::twod_multifreq: {
            const double s = std::sin(pi * y(0)), t = std::sin(pi * y(Dim - 1));
            return 5.0 + 50.0 * s * s * t * t;
        }
        case preset_kind::twod_classical: {
            const double s1 = std::sin(2.0 * pi * y(0)), s2 = std::sin(2.0 * pi * y(Dim - 1));
            return (2.0 + P * s1) / (2.0 + P * s2) + (2.0 + s2) / (2.0 + P * s1);
        }
        case preset_kind::custom:
            return custom_a(y);
        }
        return 0.0;
    }

    /// Perturbation profile on the unit cell.
    double b_per(const point<Dim>& y) const
    {
        switch (kind) {
        case preset_kind::oned_multifreq: {
            const double s = std::sin(zeta * pi * y(0));
            return kappa * s * s;
        }
        case preset_kind::twod_multifreq: {
            const double s = std::sin(zeta * pi * y(0)), t = std::sin(zeta * pi * y(Dim - 1));
            return kappa * s * s * t * t;
        }
        case preset_kind::twod_classical:
            return a_per(y);
        case preset_kind::custom:
            return custom_b ? custom_b(y) : 0.0;
        }
        return 0.0;
    }

    double a0(const point<Dim>& x) const { return a_per(x / eps); }
    double b(const point<Dim>& x) const { return b_per(x / eps); }

    /// a0(x) + eta * X * b(x) with a single evaluation of the closed forms
    /// where possible.
    double value(const point<Dim>& x, double X) const
    {
        const point<Dim> y = x / eps;
        if (kind == preset_kind::twod_classical)
            return a_per(y) * (1.0 + eta * X);
        return a_per(y) + eta * X * b_per(y);
    }

    long cell_of(const point<Dim>& x) const
    {
        const long i = cell_coordinate(x(0), eps, q);
        if constexpr (Dim == 1)
            return i;
        else
            return cell_coordinate(x(1), eps, q) * q + i;
    }
    long num_cells() const { return Dim == 1 ? q : q * q; }
};

template <int Dim>
coefficient_spec<Dim> preset(std::string_view name, double eps, double eta, double kappa, double zeta,
                             double P = 1.8)
{
    coefficient_spec<Dim> s;
    s.name = std::string(name);
    if (name == "oned-multifreq")
        s.kind = preset_kind::oned_multifreq;
    else if (name == "twod-multifreq")
        s.kind = preset_kind::twod_multifreq;
    else if (name == "twod-classical")
        s.kind = preset_kind::twod_classical;
    else
        throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    const int dim = s.kind == preset_kind::oned_multifreq ? 1 : 2;
    if (dim != Dim)
        throw std::invalid_argument("preset '" + s.name + "' is " + std::to_string(dim) + "-dimensional");
    if (!(eta >= 0 && eta <= 1))
        throw std::invalid_argument("eta must lie in [0,1]");
    if (!(P > -2 && P < 2))
        throw std::invalid_argument("P must lie in (-2,2)");
    s.eps = eps;
    s.eta = eta;
    s.kappa = kappa;
    s.zeta = zeta;
    s.P = P;
    s.q = checked_reciprocal(eps, "epsilon");
    return s;
}

template <int Dim>
coefficient_spec<Dim> custom_coefficient(double eps, double eta, std::function<double(const point<Dim>&)> a_per,
                                         std::function<double(const point<Dim>&)> b_per = {},
                                         std::string name = "custom")
{
    coefficient_spec<Dim> s;
    s.name = std::move(name);
    s.kind = preset_kind::custom;
    s.eps = eps;
    s.eta = eta;
    s.q = checked_reciprocal(eps, "epsilon");
    s.custom_a = std::move(a_per);
    s.custom_b = std::move(b_per);
    return s;
}

template <int Dim>
std::uint64_t spec_hash(const coefficient_spec<Dim>& s)
{
    // FNV-1a over the identifying parameters (eta excluded: the basis does not depend on it).
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 1099511628211ull;
        }
    };
    mix(s.name.data(), s.name.size());
    for (double v : {s.eps, s.kappa, s.zeta, s.P})
        mix(&v, sizeof v);
    return h;
}

/// One draw of {X_k}, k in I_eps.
template <int Dim>
struct realization {
    long index = 0;
    std::uint64_t seed = 0;
    long q = 0;
    std::vector<double> values;

    double operator[](long k) const { return values[static_cast<std::size_t>(k)]; }
    long num_cells() const { return static_cast<long>(values.size()); }
};

template <int Dim>
realization<Dim> draw_realization(const coefficient_spec<Dim>& spec, long m, std::uint64_t seed)
{
    realization<Dim> r;
    r.index = m;
    r.seed = seed;
    r.q = spec.q;
    r.values.resize(static_cast<std::size_t>(spec.num_cells()));
    for (std::size_t k = 0; k < r.values.size(); ++k)
        r.values[k] = counter_uniform(seed, static_cast<std::uint64_t>(m), k);
    return r;
}

template <int Dim>
std::vector<realization<Dim>> draw_realizations(const coefficient_spec<Dim>& spec, long M, std::uint64_t seed)
{
    if (M < 1)
        throw std::invalid_argument("M must be >= 1");
    std::vector<realization<Dim>> out;
    out.reserve(M);
    for (long m = 0; m < M; ++m)
        out.push_back(draw_realization(spec, m, seed));
    return out;
}

/// Realization with every X_k equal to c.
template <int Dim>
realization<Dim> constant_realization(const coefficient_spec<Dim>& spec, double c)
{
    realization<Dim> r;
    r.q = spec.q;
    r.values.assign(static_cast<std::size_t>(spec.num_cells()), c);
    return r;
}

template <int Dim>
void check_realization(const coefficient_spec<Dim>& spec, const realization<Dim>& r)
{
    if (r.q != spec.q || r.num_cells() != spec.num_cells())
        throw std::invalid_argument("realization does not cover the cell set of the coefficient");
}

/// Scalar value of A_eta at x for the given realization.
template <int Dim>
double coefficient_value(const coefficient_spec<Dim>& spec, const realization<Dim>& r, const point<Dim>& x)
{
    return spec.value(x, r[spec.cell_of(x)]);
}

/// A_eta(x) as a d x d matrix.
template <int Dim>
matrix<Dim> sample(const coefficient_spec<Dim>& spec, const realization<Dim>& r, const point<Dim>& x)
{
    const double tol = 1e-12;
    if (x.minCoeff() < -tol || x.maxCoeff() > 1.0 + tol)
        throw std::out_of_range("sample point outside the domain");
    check_realization(spec, r);
    return coefficient_value(spec, r, x) * matrix<Dim>::Identity();
}

struct control_quantity {
    double kappa = 0.0;
    double zeta = 0.0;
    double value = 0.0;
};

namespace detail {

// Maximises g over the unit cell: dense grid followed by local zooms.
template <int Dim, typename G>
double cell_sup(G&& g, int n)
{
    double best = -std::numeric_limits<double>::infinity();
    point<Dim> arg = point<Dim>::Zero();
    auto scan = [&](const point<Dim>& lo, double width, int m) {
        if constexpr (Dim == 1) {
            for (int i = 0; i <= m; ++i) {
                const point<1> y = make_point<1>(std::clamp(lo(0) + width * i / m, 0.0, 1.0));
                const double v = g(y);
                if (v > best) {
                    best = v;
                    arg = y;
                }
            }
        } else {
            for (int j = 0; j <= m; ++j)
                for (int i = 0; i <= m; ++i) {
                    const point<2> y = make_point<2>(std::clamp(lo(0) + width * i / m, 0.0, 1.0),
                                                     std::clamp(lo(1) + width * j / m, 0.0, 1.0));
                    const double v = g(y);
                    if (v > best) {
                        best = v;
                        arg = y;
                    }
                }
        }
    };
    scan(point<Dim>::Zero(), 1.0, n);
    double width = 4.0 / n;
    for (int round = 0; round < 6; ++round) {
        scan(arg - point<Dim>::Constant(width / 2), width, 40);
        width /= 10.0;
    }
    return best;
}

} // namespace detail

/// K(kappa, zeta) = ess sup |A_1 / a_0| with X = 1.
template <int Dim>
control_quantity compute_control_quantity(const coefficient_spec<Dim>& spec)
{
    control_quantity c{spec.kappa, spec.zeta, 0.0};
    const int n = Dim == 1 ? 20000 : 200;
    c.value = detail::cell_sup<Dim>([&](const point<Dim>& y) { return std::abs(spec.b_per(y) / spec.a_per(y)); }, n);
    return c;
}

struct ellipticity_bounds {
    double a_minus = 0.0;
    double a_plus = 0.0;
};

/// Bounds of A_eta over a dense cell grid with X in {0, 1} (the field is
/// affine in X, so the extremes are attained there).
template <int Dim>
ellipticity_bounds compute_ellipticity_bounds(const coefficient_spec<Dim>& spec)
{
    const int n = Dim == 1 ? 20000 : 200;
    const auto lo0 = -detail::cell_sup<Dim>([&](const point<Dim>& y) { return -spec.a_per(y); }, n);
    const auto hi0 = detail::cell_sup<Dim>([&](const point<Dim>& y) { return spec.a_per(y); }, n);
    const auto lo1 = -detail::cell_sup<Dim>(
        [&](const point<Dim>& y) { return -(spec.a_per(y) + spec.eta * spec.b_per(y)); }, n);
    const auto hi1 =
        detail::cell_sup<Dim>([&](const point<Dim>& y) { return spec.a_per(y) + spec.eta * spec.b_per(y); }, n);
    return {std::min(lo0, lo1), std::max(hi0, hi1)};
}

} // namespace wsmsfem
