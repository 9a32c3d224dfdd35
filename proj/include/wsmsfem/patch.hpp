#pragma once

#include "mesh.hpp"

#include <optional>

namespace wsmsfem {

/// Oversampling patch S: homothetic image of K about its centroid, clipped to
/// the closed unit domain.
template <int Dim>
struct oversampling_patch {
    int element = -1;
    double ratio = 1.0;
    /// Vertices x_j^S of the (unclipped) homothetic simplex.
    std::array<point<Dim>, Dim + 1> vertices;
    /// S intersected with the closed domain: interval end points in 1D,
    /// counter-clockwise polygon in 2D.
    std::vector<point<Dim>> region;
    bool clipped = false;

    double measure() const
    {
        if constexpr (Dim == 1)
            return region[1](0) - region[0](0);
        else {
            double a = 0.0;
            for (std::size_t i = 0; i < region.size(); ++i) {
                const auto& p = region[i];
                const auto& q = region[(i + 1) % region.size()];
                a += p(0) * q(1) - q(0) * p(1);
            }
            return 0.5 * a;
        }
    }

    /// True when x lies in the unclipped simplex (closed, with tolerance).
    bool in_simplex(const point<Dim>& x, double tol = 1e-12) const
    {
        matrix<Dim> J;
        for (int k = 0; k < Dim; ++k)
            J.col(k) = vertices[k + 1] - vertices[0];
        const point<Dim> l = J.inverse() * (x - vertices[0]);
        return l.minCoeff() >= -tol && l.sum() <= 1.0 + tol;
    }
};

namespace detail {

// Sutherland-Hodgman clip of a convex polygon against the half plane
// sign * (p(axis) - value) >= 0.
inline std::vector<point<2>> clip_half_plane(const std::vector<point<2>>& poly, int axis,
                                             double value, double sign)
{
    std::vector<point<2>> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const point<2>& a = poly[i];
        const point<2>& b = poly[(i + 1) % n];
        const double da = sign * (a(axis) - value), db = sign * (b(axis) - value);
        if (da >= 0)
            out.push_back(a);
        if ((da >= 0) != (db >= 0)) {
            const double t = da / (da - db);
            point<2> p = a + t * (b - a);
            p(axis) = value;
            out.push_back(p);
        }
    }
    return out;
}

} // namespace detail

template <int Dim>
oversampling_patch<Dim> build_patch(const simplex_mesh<Dim>& mesh, int element, double ratio)
{
    if (!(ratio > 1.0))
        throw std::invalid_argument("oversampling ratio must be > 1");
    if (element < 0 || element >= mesh.num_elements())
        throw std::out_of_range("element index out of range");
    oversampling_patch<Dim> s;
    s.element = element;
    s.ratio = ratio;
    const point<Dim> c = mesh.centroid(element);
    for (int k = 0; k <= Dim; ++k)
        s.vertices[k] = c + ratio * (mesh.nodes[mesh.elements[element][k]] - c);
    const double tol = 1e-14;
    for (const auto& v : s.vertices)
        if (v.minCoeff() < -tol || v.maxCoeff() > 1.0 + tol)
            s.clipped = true;
    if constexpr (Dim == 1) {
        double a = std::min(s.vertices[0](0), s.vertices[1](0));
        double b = std::max(s.vertices[0](0), s.vertices[1](0));
        s.region = {make_point<1>(std::max(a, 0.0)), make_point<1>(std::min(b, 1.0))};
    } else {
        std::vector<point<2>> poly(s.vertices.begin(), s.vertices.end());
        // orient counter-clockwise
        const point<2> e1 = poly[1] - poly[0], e2 = poly[2] - poly[0];
        if (e1(0) * e2(1) - e1(1) * e2(0) < 0)
            std::swap(poly[1], poly[2]);
        for (int axis = 0; axis < 2; ++axis) {
            poly = detail::clip_half_plane(poly, axis, 0.0, 1.0);
            poly = detail::clip_half_plane(poly, axis, 1.0, -1.0);
        }
        s.region = std::move(poly);
    }
    return s;
}

/// Fine mesh of the lattice elements whose centroid lies in the simplex with
/// the given vertices (and in the unit domain). The simplex must be a union
/// of lattice elements for the result to represent it exactly.
template <int Dim>
simplex_mesh<Dim> simplex_region_mesh(const std::array<point<Dim>, Dim + 1>& vertices,
                                      const lattice<Dim>& grid)
{
    matrix<Dim> J;
    for (int k = 0; k < Dim; ++k)
        J.col(k) = vertices[k + 1] - vertices[0];
    const matrix<Dim> Jinv = J.inverse();
    point<Dim> lo = vertices[0], hi = vertices[0];
    for (const auto& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const double n = static_cast<double>(grid.n);
    auto range = [&](int k, long& a, long& b) {
        a = std::max(0L, static_cast<long>(std::floor(lo(k) * n + 1e-9)));
        b = std::min(grid.n, static_cast<long>(std::ceil(hi(k) * n - 1e-9)));
    };
    std::vector<long> elems;
    auto inside = [&](const point<Dim>& x) {
        const point<Dim> l = Jinv * (x - vertices[0]);
        const double tol = 1e-9;
        return l.minCoeff() > -tol && l.sum() < 1.0 + tol;
    };
    const lattice<Dim>& g = grid;
    auto centroid = [&](long e) {
        point<Dim> c = point<Dim>::Zero();
        for (long v : g.element_nodes(e))
            c += g.node_coord(v);
        return point<Dim>(c / (Dim + 1.0));
    };
    long i0, i1;
    range(0, i0, i1);
    if constexpr (Dim == 1) {
        for (long i = i0; i < i1; ++i)
            if (inside(centroid(i)))
                elems.push_back(i);
    } else {
        long j0, j1;
        range(1, j0, j1);
        for (long j = j0; j < j1; ++j)
            for (long i = i0; i < i1; ++i)
                for (long t = 0; t < 2; ++t) {
                    const long e = 2 * (j * grid.n + i) + t;
                    if (inside(centroid(e)))
                        elems.push_back(e);
                }
    }
    if (elems.empty())
        throw sizing_error("region contains no lattice element");
    return mesh_from_lattice(grid, std::move(elems));
}

/// True when every vertex lies on a node of the lattice.
template <int Dim>
bool lattice_aligned(const std::array<point<Dim>, Dim + 1>& vertices, long n, double tol = 1e-9)
{
    for (const auto& v : vertices)
        for (int k = 0; k < Dim; ++k) {
            const double s = v(k) * n;
            if (std::abs(s - std::round(s)) > tol)
                return false;
        }
    return true;
}

/// Chooses the number of fine lattice intervals per coarse interval: the
/// smallest n >= h/h_fine such that all patch vertices lie on the fine
/// lattice, preferring n for which eps is a multiple of the fine spacing.
template <int Dim>
long choose_refinement(const simplex_mesh<Dim>& coarse, double ratio, double h_fine, double eps)
{
    const double h = coarse.h;
    const long n_min = std::max(1L, static_cast<long>(std::ceil(h / h_fine - 1e-9)));
    // Patch vertex offsets are translation invariant, so a prototype element
    // of each orientation suffices.
    std::vector<std::array<point<Dim>, Dim + 1>> protos;
    const int nproto = Dim == 1 ? 1 : 2;
    for (int e = 0; e < std::min(nproto, coarse.num_elements()); ++e) {
        const point<Dim> c = coarse.centroid(e);
        std::array<point<Dim>, Dim + 1> v;
        for (int k = 0; k <= Dim; ++k)
            v[k] = (c + ratio * (coarse.nodes[coarse.elements[e][k]] - c)) / h;
        protos.push_back(v);
    }
    std::optional<long> fallback;
    for (long n = n_min; n <= 6 * n_min + 6; ++n) {
        bool ok = true;
        for (const auto& v : protos)
            ok = ok && lattice_aligned<Dim>(v, n);
        if (!ok)
            continue;
        if (eps > 0) {
            const double s = eps / h * n;
            if (std::abs(s - std::round(s)) < 1e-9)
                return n;
        }
        if (!fallback)
            fallback = n;
    }
    if (fallback)
        return *fallback;
    throw sizing_error("no fine lattice aligns the oversampling patches (ratio " +
                       std::to_string(ratio) + ")");
}

} // namespace wsmsfem
