#pragma once

#include "quadrature.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace wsmsfem {

/// -(a u')' = f on (0,1), u(0) = u(1) = 0.
struct one_d_problem {
    std::function<double(double)> a;
    std::function<double(double)> f;
    /// Set when f is constant; F(x) = f0 x is then used exactly.
    std::optional<double> f_constant;
    /// Scale of the coefficient's pieces (eps); composite quadrature breaks at
    /// its multiples.
    double period = 1.0;
    int points_per_period = 1000;
    int gauss_points = 4;
    double nu_min = 0.0;
};

inline one_d_problem make_one_d_problem(std::function<double(double)> a, double f0, double period,
                                        double nu_min = 0.0, int points_per_period = 1000)
{
    one_d_problem p;
    p.a = std::move(a);
    p.f = [f0](double) { return f0; };
    p.f_constant = f0;
    p.period = period;
    p.nu_min = nu_min;
    p.points_per_period = points_per_period;
    return p;
}

namespace detail {

struct composite_grid {
    std::vector<double> x; // sub-interval end points covering [0,1]
    std::vector<double> gx, gw;

    composite_grid(double period, int ppp, int ngauss)
    {
        const long periods = std::max(1L, static_cast<long>(std::ceil(1.0 / period - 1e-9)));
        const long n = periods * ppp;
        x.resize(n + 1);
        for (long i = 0; i <= n; ++i) {
            // sub-interval boundaries on multiples of period/ppp, last one clipped to 1
            x[i] = std::min(1.0, static_cast<double>(i) * period / ppp);
        }
        x.back() = 1.0;
        gauss_legendre(ngauss, gx, gw);
    }
    long locate(double t) const
    {
        const auto it = std::upper_bound(x.begin(), x.end(), t);
        long j = static_cast<long>(it - x.begin()) - 1;
        return std::clamp(j, 0L, static_cast<long>(x.size()) - 2);
    }
    template <typename G>
    double integrate(double a, double b, G&& g) const
    {
        double s = 0.0;
        const double L = b - a;
        if (L == 0.0)
            return 0.0;
        for (std::size_t q = 0; q < gx.size(); ++q)
            s += gw[q] * g(a + L * gx[q]);
        return s * L;
    }
};

} // namespace detail

/// Exact solution u' = (c - F)/a, u by cumulative composite Gauss quadrature.
class exact_solution_1d {
public:
    explicit exact_solution_1d(one_d_problem p)
        : p_(std::move(p)), grid_(p_.period, p_.points_per_period, p_.gauss_points)
    {
        const long n = static_cast<long>(grid_.x.size()) - 1;
        F_.assign(n + 1, 0.0);
        if (!p_.f_constant)
            for (long j = 0; j < n; ++j)
                F_[j + 1] = F_[j] + grid_.integrate(grid_.x[j], grid_.x[j + 1], p_.f);
        double I1 = 0.0, I2 = 0.0;
        for (long j = 0; j < n; ++j) {
            I1 += grid_.integrate(grid_.x[j], grid_.x[j + 1], [&](double t) { return 1.0 / p_.a(t); });
            I2 += grid_.integrate(grid_.x[j], grid_.x[j + 1], [&](double t) { return F(t) / p_.a(t); });
        }
        c_ = I2 / I1;
        U_.assign(n + 1, 0.0);
        for (long j = 0; j < n; ++j)
            U_[j + 1] = U_[j] + grid_.integrate(grid_.x[j], grid_.x[j + 1], [&](double t) { return derivative(t); });
    }

    /// F(x) = integral of f over (0,x).
    double F(double x) const
    {
        if (p_.f_constant)
            return *p_.f_constant * x;
        const long j = grid_.locate(x);
        return F_[j] + grid_.integrate(grid_.x[j], x, p_.f);
    }
    double derivative(double x) const { return (c_ - F(x)) / p_.a(x); }
    double value(double x) const
    {
        const long j = grid_.locate(x);
        return U_[j] + grid_.integrate(grid_.x[j], x, [&](double t) { return derivative(t); });
    }
    double flux_constant() const { return c_; }
    /// Residual u(1) of the cumulative quadrature (zero for the exact solution).
    double end_value() const { return U_.back(); }

    // Adapters for norm routines working on points.
    double value(const point<1>& x) const { return value(x(0)); }
    point<1> gradient(const point<1>& x) const { return make_point<1>(derivative(x(0))); }

    const one_d_problem& problem() const { return p_; }

private:
    one_d_problem p_;
    detail::composite_grid grid_;
    std::vector<double> F_, U_;
    double c_ = 0.0;
};

inline exact_solution_1d exact_solution(one_d_problem p) { return exact_solution_1d(std::move(p)); }

/// Operator-adapted 1D basis: on each element the two solutions of
/// (a phi')' = 0 with nodal values delta; phi_right = G/W, G(x) = int 1/a.
class harmonic_basis_1d {
public:
    harmonic_basis_1d(const one_d_problem& p, std::vector<double> nodes)
        : p_(p), nodes_(std::move(nodes)), grid_(p.period, p.points_per_period, p.gauss_points)
    {
        if (nodes_.size() < 2 || nodes_.front() != 0.0 || nodes_.back() != 1.0 ||
            !std::is_sorted(nodes_.begin(), nodes_.end()))
            throw std::invalid_argument("nodes must partition [0,1]");
        const long n = static_cast<long>(grid_.x.size()) - 1;
        Ginv_.assign(n + 1, 0.0);
        for (long j = 0; j < n; ++j)
            Ginv_[j + 1] = Ginv_[j] + grid_.integrate(grid_.x[j], grid_.x[j + 1], [&](double t) { return 1.0 / p_.a(t); });
        W_.resize(nodes_.size() - 1);
        for (std::size_t K = 0; K + 1 < nodes_.size(); ++K)
            W_[K] = inverse_integral(nodes_[K + 1]) - inverse_integral(nodes_[K]);
    }

    std::size_t num_elements() const { return W_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    double W(std::size_t K) const { return W_[K]; }

    /// Integral of 1/a over (0,x).
    double inverse_integral(double x) const
    {
        const long j = grid_.locate(x);
        return Ginv_[j] + grid_.integrate(grid_.x[j], x, [&](double t) { return 1.0 / p_.a(t); });
    }
    /// phi_left (i=0) or phi_right (i=1) on element K.
    double phi(std::size_t K, int i, double x) const
    {
        const double r = (inverse_integral(x) - inverse_integral(nodes_[K])) / W_[K];
        return i == 0 ? 1.0 - r : r;
    }
    double dphi(std::size_t K, int i, double x) const
    {
        const double r = 1.0 / (p_.a(x) * W_[K]);
        return i == 0 ? -r : r;
    }
    template <typename G>
    double integrate(double a, double b, G&& g) const
    {
        // composite over the sub-grid intersected with (a,b)
        double s = 0.0;
        long j = grid_.locate(a);
        double lo = a;
        while (lo < b) {
            const double hi = std::min(b, grid_.x[j + 1]);
            s += grid_.integrate(lo, hi, g);
            lo = hi;
            ++j;
            if (j + 1 >= static_cast<long>(grid_.x.size()))
                break;
        }
        return s;
    }

private:
    one_d_problem p_;
    std::vector<double> nodes_;
    detail::composite_grid grid_;
    std::vector<double> Ginv_, W_;
};

inline harmonic_basis_1d msfem_basis_1d(const one_d_problem& p, std::vector<double> nodes)
{
    return harmonic_basis_1d(p, std::move(nodes));
}

struct energy_bound_report {
    double lhs = 0.0;                 // ||u - u_h||_E
    double rhs = 0.0;                 // h / (pi sqrt(nu_min)) ||f||_L2
    double interpolant_error = 0.0;   // ||u - I_h u||_E in the adapted space
    double max_nodal_error = 0.0;
    double h = 0.0;
    bool holds = false;
};

/// Galerkin solution in the adapted space with the exact bilinear form, and
/// both sides of the 1D energy estimate.
inline energy_bound_report verify_energy_bound(const one_d_problem& p, std::vector<double> nodes)
{
    if (!(p.nu_min > 0))
        throw std::invalid_argument("nu_min must be positive");
    const auto basis = msfem_basis_1d(p, nodes);
    const exact_solution_1d u(p);
    const std::size_t nK = basis.num_elements();
    const std::size_t nn = nK + 1;
    // tridiagonal system over all nodes, Dirichlet at both ends
    std::vector<double> diag(nn, 0.0), off(nn, 0.0), rhs(nn, 0.0);
    for (std::size_t K = 0; K < nK; ++K) {
        const double k = 1.0 / basis.W(K);
        diag[K] += k;
        diag[K + 1] += k;
        off[K] -= k;
        const double a = nodes[K], b = nodes[K + 1];
        rhs[K] += basis.integrate(a, b, [&](double t) { return p.f(t) * basis.phi(K, 0, t); });
        rhs[K + 1] += basis.integrate(a, b, [&](double t) { return p.f(t) * basis.phi(K, 1, t); });
    }
    std::vector<double> U(nn, 0.0);
    if (nn > 2) {
        // Thomas algorithm on the interior nodes 1..nn-2
        const std::size_t m = nn - 2;
        std::vector<double> c(m), d(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double lower = i == 0 ? 0.0 : off[i];
            const double upper = i + 1 < m ? off[i + 1] : 0.0;
            const double den = diag[i + 1] - (i == 0 ? 0.0 : lower * c[i - 1]);
            c[i] = upper / den;
            d[i] = (rhs[i + 1] - (i == 0 ? 0.0 : lower * d[i - 1])) / den;
        }
        for (std::size_t i = m; i-- > 0;) {
            U[i + 1] = d[i] - (i + 1 < m ? c[i] * U[i + 2] : 0.0);
        }
    }
    energy_bound_report r;
    double e2 = 0.0, i2 = 0.0, f2 = 0.0;
    for (std::size_t K = 0; K < nK; ++K) {
        const double a = nodes[K], b = nodes[K + 1];
        r.h = std::max(r.h, b - a);
        const double ua = u.value(a), ub = u.value(b);
        e2 += basis.integrate(a, b, [&](double t) {
            const double duh = U[K] * basis.dphi(K, 0, t) + U[K + 1] * basis.dphi(K, 1, t);
            const double d = u.derivative(t) - duh;
            return p.a(t) * d * d;
        });
        i2 += basis.integrate(a, b, [&](double t) {
            const double dih = ua * basis.dphi(K, 0, t) + ub * basis.dphi(K, 1, t);
            const double d = u.derivative(t) - dih;
            return p.a(t) * d * d;
        });
        f2 += basis.integrate(a, b, [&](double t) { return p.f(t) * p.f(t); });
    }
    for (std::size_t i = 0; i < nn; ++i)
        r.max_nodal_error = std::max(r.max_nodal_error, std::abs(U[i] - u.value(nodes[i])));
    r.lhs = std::sqrt(std::max(0.0, e2));
    r.interpolant_error = std::sqrt(std::max(0.0, i2));
    r.rhs = r.h / (pi * std::sqrt(p.nu_min)) * std::sqrt(f2);
    r.holds = r.lhs <= r.rhs;
    return r;
}

} // namespace wsmsfem
