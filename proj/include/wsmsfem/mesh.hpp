#pragma once

#include "common.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <vector>

namespace wsmsfem {

// Structured lattice of the unit interval / unit square with n cells per unit
// length. In 2D square (i,j) is split into the lower triangle
// (i,j),(i+1,j),(i+1,j+1) and the upper triangle (i,j),(i+1,j+1),(i,j+1).
// Every mesh in this library is a set of lattice elements, which makes nested
// transfers and point location exact.
template <int Dim>
struct lattice {
    long n = 1;

    long num_nodes() const { return Dim == 1 ? n + 1 : (n + 1) * (n + 1); }
    long num_elements() const { return Dim == 1 ? n : 2 * n * n; }
    double spacing() const { return 1.0 / static_cast<double>(n); }

    long node_id(long i, long j = 0) const { return Dim == 1 ? i : j * (n + 1) + i; }

    point<Dim> node_coord(long id) const
    {
        if constexpr (Dim == 1)
            return make_point<1>(static_cast<double>(id) / n);
        else
            return make_point<2>(static_cast<double>(id % (n + 1)) / n,
                                 static_cast<double>(id / (n + 1)) / n);
    }

    /// Element id: 1D segment i; 2D 2*(j*n+i)+t with t=0 lower, t=1 upper.
    std::array<long, Dim + 1> element_nodes(long e) const
    {
        if constexpr (Dim == 1) {
            return {e, e + 1};
        } else {
            const long t = e % 2, sq = e / 2, i = sq % n, j = sq / n;
            if (t == 0)
                return {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1)};
            return {node_id(i, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
        }
    }

    /// Lattice element containing x (clamped to the closed domain). Points on
    /// lattice lines go to the element above/right of the line.
    long locate(const point<Dim>& x) const
    {
        auto split = [this](double v, long& i) {
            const double s = v * n;
            i = std::clamp(static_cast<long>(std::floor(s)), 0L, n - 1);
            return s - i;
        };
        long i = 0;
        const double s = split(x(0), i);
        if constexpr (Dim == 1) {
            (void)s;
            return i;
        } else {
            long j = 0;
            const double t = split(x(1), j);
            return 2 * (j * n + i) + (s >= t ? 0 : 1);
        }
    }

    /// Neighbours across each facet (-1 outside the unit domain), facet f
    /// opposite to local vertex f.
    std::array<long, Dim + 1> neighbours(long e) const
    {
        if constexpr (Dim == 1) {
            return {e + 1 < n ? e + 1 : -1, e > 0 ? e - 1 : -1};
        } else {
            const long t = e % 2, sq = e / 2, i = sq % n, j = sq / n;
            auto el = [this](long ii, long jj, long tt) -> long {
                if (ii < 0 || jj < 0 || ii >= n || jj >= n)
                    return -1;
                return 2 * (jj * n + ii) + tt;
            };
            if (t == 0) // opposite (i,j): right edge; opposite (i+1,j): diagonal; opposite (i+1,j+1): bottom
                return {el(i + 1, j, 1), el(i, j, 1), el(i, j - 1, 1)};
            // opposite (i,j): top edge; opposite (i+1,j+1): left edge; opposite (i,j+1): diagonal
            return {el(i, j + 1, 0), el(i - 1, j, 0), el(i, j, 0)};
        }
    }
};

/// Conforming simplicial mesh made of lattice elements.
template <int Dim>
struct simplex_mesh {
    std::vector<point<Dim>> nodes;
    std::vector<std::array<int, Dim + 1>> elements;
    std::vector<char> boundary;
    double h = 0.0; // lattice spacing (leg length of the right triangles in 2D)
    lattice<Dim> grid;
    std::vector<long> lattice_element;
    std::vector<long> lattice_node;
    std::unordered_map<long, int> element_of_lattice;

    double max_diameter() const { return Dim == 1 ? h : std::sqrt(2.0) * h; }
    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int num_elements() const { return static_cast<int>(elements.size()); }
    int num_boundary_nodes() const { return static_cast<int>(std::count(boundary.begin(), boundary.end(), 1)); }

    /// Index of the mesh element containing x, or -1.
    int locate(const point<Dim>& x) const
    {
        const long le = grid.locate(x);
        const auto it = element_of_lattice.find(le);
        if (it != element_of_lattice.end())
            return it->second;
        // x may lie on the boundary of the mesh region while the clamped
        // lattice element is outside: probe the lattice neighbours.
        for (long nb : grid.neighbours(le)) {
            if (nb < 0)
                continue;
            const auto jt = element_of_lattice.find(nb);
            if (jt != element_of_lattice.end() && contains(jt->second, x))
                return jt->second;
        }
        if constexpr (Dim == 2) {
            // lattice vertex whose only triangle in this region is diagonal to le
            const long n = grid.n;
            const long i = static_cast<long>(std::floor(x(0) * n)), j = static_cast<long>(std::floor(x(1) * n));
            for (long jj = j - 1; jj <= j; ++jj)
                for (long ii = i - 1; ii <= i; ++ii) {
                    if (ii < 0 || jj < 0 || ii >= n || jj >= n)
                        continue;
                    for (long t = 0; t < 2; ++t) {
                        const auto kt = element_of_lattice.find(2 * (jj * n + ii) + t);
                        if (kt != element_of_lattice.end() && contains(kt->second, x))
                            return kt->second;
                    }
                }
        }
        return -1;
    }

    /// Barycentric coordinates of x in element e.
    std::array<double, Dim + 1> barycentric(int e, const point<Dim>& x) const
    {
        const auto& el = elements[e];
        matrix<Dim> J;
        for (int k = 0; k < Dim; ++k)
            J.col(k) = nodes[el[k + 1]] - nodes[el[0]];
        const point<Dim> l = J.inverse() * (x - nodes[el[0]]);
        std::array<double, Dim + 1> b;
        b[0] = 1.0 - l.sum();
        for (int k = 0; k < Dim; ++k)
            b[k + 1] = l(k);
        return b;
    }

    bool contains(int e, const point<Dim>& x, double tol = 1e-12) const
    {
        for (double b : barycentric(e, x))
            if (b < -tol)
                return false;
        return true;
    }

    double measure(int e) const
    {
        const auto& el = elements[e];
        if constexpr (Dim == 1)
            return std::abs(nodes[el[1]](0) - nodes[el[0]](0));
        else {
            const point<2> a = nodes[el[1]] - nodes[el[0]], b = nodes[el[2]] - nodes[el[0]];
            return 0.5 * std::abs(a(0) * b(1) - a(1) * b(0));
        }
    }

    point<Dim> centroid(int e) const
    {
        point<Dim> c = point<Dim>::Zero();
        for (int v : elements[e])
            c += nodes[v];
        return c / (Dim + 1.0);
    }
};

/// Per-element affine map data: gradients of the barycentric functions.
template <int Dim>
struct element_geometry {
    point<Dim> x0;
    matrix<Dim> jac;
    double det = 0.0;
    double measure = 0.0;
    std::array<point<Dim>, Dim + 1> grad;

    point<Dim> map(const point<Dim>& xi) const { return x0 + jac * xi; }
};

template <int Dim>
element_geometry<Dim> geometry(const simplex_mesh<Dim>& mesh, int e)
{
    element_geometry<Dim> g;
    const auto& el = mesh.elements[e];
    g.x0 = mesh.nodes[el[0]];
    for (int k = 0; k < Dim; ++k)
        g.jac.col(k) = mesh.nodes[el[k + 1]] - g.x0;
    g.det = g.jac.determinant();
    g.measure = std::abs(g.det) / (Dim == 1 ? 1.0 : 2.0);
    if (!(g.measure > 0))
        throw std::invalid_argument("degenerate element " + std::to_string(e));
    const matrix<Dim> jit = g.jac.inverse().transpose();
    g.grad[0] = point<Dim>::Zero();
    for (int k = 0; k < Dim; ++k) {
        g.grad[k + 1] = jit.col(k);
        g.grad[0] -= g.grad[k + 1];
    }
    return g;
}

/// Builds a mesh from a set of lattice elements. Boundary nodes are those on
/// facets without a neighbour in the set.
template <int Dim>
simplex_mesh<Dim> mesh_from_lattice(const lattice<Dim>& grid, std::vector<long> lattice_elements)
{
    std::sort(lattice_elements.begin(), lattice_elements.end());
    lattice_elements.erase(std::unique(lattice_elements.begin(), lattice_elements.end()),
                           lattice_elements.end());
    simplex_mesh<Dim> m;
    m.grid = grid;
    m.h = grid.spacing();
    std::unordered_map<long, int> node_map;
    node_map.reserve(lattice_elements.size() * (Dim == 1 ? 2 : 1));
    m.element_of_lattice.reserve(lattice_elements.size());
    for (long le : lattice_elements) {
        std::array<int, Dim + 1> el;
        const auto ln = grid.element_nodes(le);
        for (int k = 0; k <= Dim; ++k) {
            auto [it, inserted] = node_map.try_emplace(ln[k], static_cast<int>(m.nodes.size()));
            if (inserted) {
                m.nodes.push_back(grid.node_coord(ln[k]));
                m.lattice_node.push_back(ln[k]);
            }
            el[k] = it->second;
        }
        m.element_of_lattice.emplace(le, static_cast<int>(m.elements.size()));
        m.elements.push_back(el);
        m.lattice_element.push_back(le);
    }
    m.boundary.assign(m.nodes.size(), 0);
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto nb = grid.neighbours(m.lattice_element[e]);
        for (int f = 0; f <= Dim; ++f) {
            if (nb[f] >= 0 && m.element_of_lattice.count(nb[f]))
                continue;
            for (int k = 0; k <= Dim; ++k)
                if (k != f)
                    m.boundary[m.elements[e][k]] = 1;
        }
    }
    return m;
}

/// Full structured mesh of the unit domain with n cells per unit length.
template <int Dim>
simplex_mesh<Dim> lattice_mesh(long n)
{
    lattice<Dim> grid{n};
    std::vector<long> all(grid.num_elements());
    std::iota(all.begin(), all.end(), 0L);
    return mesh_from_lattice(grid, std::move(all));
}

/// Coarse mesh of (0,1) or (0,1)^2 with mesh parameter h (1/h integral).
/// In 2D h is the leg length of the right triangles.
template <int Dim>
simplex_mesh<Dim> build_coarse_mesh(double h)
{
    if (!(h > 0 && h <= 1))
        throw sizing_error("coarse mesh size must lie in (0,1]");
    auto m = lattice_mesh<Dim>(checked_reciprocal(h, "h"));
    return m;
}

/// Text dump: one record per line.
template <int Dim>
void write_mesh(std::ostream& os, const simplex_mesh<Dim>& m, const Eigen::VectorXd* values = nullptr)
{
    os.precision(17);
    os << "# mesh dim=" << Dim << " nodes=" << m.num_nodes() << " elements=" << m.num_elements()
       << " lattice=" << m.grid.n << "\n";
    for (int i = 0; i < m.num_nodes(); ++i) {
        os << "node " << i;
        for (int k = 0; k < Dim; ++k)
            os << ' ' << m.nodes[i](k);
        os << ' ' << int(m.boundary[i]);
        if (values)
            os << ' ' << (*values)(i);
        os << "\n";
    }
    for (int e = 0; e < m.num_elements(); ++e) {
        os << "element " << e;
        for (int v : m.elements[e])
            os << ' ' << v;
        os << "\n";
    }
}

} // namespace wsmsfem
