#pragma once

#include "mesh.hpp"

namespace wsmsfem {

/// Index of the eps-cell containing coordinate v, with the half-open
/// convention (k, k+1] on v/eps, clamped to [0, q-1].
inline long cell_coordinate(double v, double eps, long q)
{
    const double s = v / eps;
    const double r = std::round(s);
    long k = std::abs(s - r) < 1e-10 * std::max(1.0, std::abs(s)) ? static_cast<long>(r) - 1
                                                                   : static_cast<long>(std::ceil(s)) - 1;
    return std::clamp(k, 0L, q - 1);
}

/// The eps-cell lattice I_eps of the unit domain and, per coarse element K,
/// the cells contained in K.
template <int Dim>
struct cell_index_set {
    double eps = 0.0;
    long q = 0; // cells per axis
    std::vector<std::vector<long>> interior; // per coarse element, linear cell ids

    long num_cells() const { return Dim == 1 ? q : q * q; }
    long linear(long i, long j = 0) const { return Dim == 1 ? i : j * q + i; }
    std::array<long, Dim> multi(long k) const
    {
        if constexpr (Dim == 1)
            return {k};
        else
            return {k % q, k / q};
    }
    long cell_of(const point<Dim>& x) const
    {
        const long i = cell_coordinate(x(0), eps, q);
        if constexpr (Dim == 1)
            return i;
        else
            return linear(i, cell_coordinate(x(1), eps, q));
    }
    std::size_t count(int element) const { return interior[element].size(); }
};

namespace detail {

inline long gcd_l(long a, long b) { return std::gcd(a, b); }

// Orientation of (b-a) x (c-a) on integer coordinates.
inline long long orient(const std::array<long long, 2>& a, const std::array<long long, 2>& b,
                        const std::array<long long, 2>& c)
{
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

} // namespace detail

/// Builds I_eps for the unit domain and classifies cells inside each coarse
/// element by exact integer arithmetic on the common refinement of the coarse
/// lattice and the cell lattice. Requires 1/eps integral.
template <int Dim>
cell_index_set<Dim> build_cell_index_set(double eps, const simplex_mesh<Dim>& mesh)
{
    if (!(eps > 0))
        throw std::invalid_argument("eps must be positive");
    cell_index_set<Dim> cs;
    cs.eps = eps;
    cs.q = checked_reciprocal(eps, "epsilon");
    const long nh = mesh.grid.n;
    const long L = nh / detail::gcd_l(nh, cs.q) * cs.q; // lcm
    const long sc = L / cs.q, sh = L / nh;
    cs.interior.resize(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto ln = mesh.grid.element_nodes(mesh.lattice_element[e]);
        if constexpr (Dim == 1) {
            const long a = std::min(ln[0], ln[1]) * sh, b = std::max(ln[0], ln[1]) * sh;
            for (long k = 0; k < cs.q; ++k)
                if (k * sc >= a && (k + 1) * sc <= b)
                    cs.interior[e].push_back(k);
        } else {
            std::array<std::array<long long, 2>, 3> v;
            long long xmin = L, xmax = 0, ymin = L, ymax = 0;
            for (int k = 0; k < 3; ++k) {
                const long id = ln[k];
                v[k] = {static_cast<long long>(id % (nh + 1)) * sh, static_cast<long long>(id / (nh + 1)) * sh};
                xmin = std::min(xmin, v[k][0]);
                xmax = std::max(xmax, v[k][0]);
                ymin = std::min(ymin, v[k][1]);
                ymax = std::max(ymax, v[k][1]);
            }
            const long long s = detail::orient(v[0], v[1], v[2]) > 0 ? 1 : -1;
            auto inside = [&](const std::array<long long, 2>& p) {
                return s * detail::orient(v[0], v[1], p) >= 0 && s * detail::orient(v[1], v[2], p) >= 0 &&
                       s * detail::orient(v[2], v[0], p) >= 0;
            };
            for (long j = ymin / sc; j < (ymax + sc - 1) / sc && j < cs.q; ++j)
                for (long i = xmin / sc; i < (xmax + sc - 1) / sc && i < cs.q; ++i) {
                    const long long x0 = i * sc, y0 = j * sc;
                    if (inside({x0, y0}) && inside({x0 + sc, y0}) && inside({x0, y0 + sc}) &&
                        inside({x0 + sc, y0 + sc}))
                        cs.interior[e].push_back(cs.linear(i, j));
                }
        }
    }
    return cs;
}

} // namespace wsmsfem
