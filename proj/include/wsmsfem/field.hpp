#pragma once

#include "fem.hpp"

#include <memory>

namespace wsmsfem {

enum class norm_kind { L2, H1_semi, H1, broken_H1 };

/// Squared L2 and squared H1-seminorm contributions.
struct norm_parts {
    double l2 = 0.0;
    double semi = 0.0;

    norm_parts& operator+=(const norm_parts& o)
    {
        l2 += o.l2;
        semi += o.semi;
        return *this;
    }
    double get(norm_kind k) const
    {
        switch (k) {
        case norm_kind::L2:
            return std::sqrt(l2);
        case norm_kind::H1_semi:
            return std::sqrt(semi);
        default:
            return std::sqrt(l2 + semi);
        }
    }
};

/// Exact squared norms of the P1 function with the given nodal values on one element.
template <int Dim>
norm_parts element_norm_parts(const simplex_mesh<Dim>& mesh, int e, const Eigen::VectorXd& v)
{
    const auto g = geometry(mesh, e);
    const auto& el = mesh.elements[e];
    double s = 0.0, s2 = 0.0;
    point<Dim> grad = point<Dim>::Zero();
    for (int i = 0; i <= Dim; ++i) {
        const double vi = v(el[i]);
        s += vi;
        s2 += vi * vi;
        grad += vi * g.grad[i];
    }
    norm_parts p;
    p.l2 = g.measure * (s2 + s * s) / ((Dim + 1.0) * (Dim + 2.0));
    p.semi = g.measure * grad.squaredNorm();
    return p;
}

template <int Dim>
norm_parts mesh_norm_parts(const simplex_mesh<Dim>& mesh, const Eigen::VectorXd& v)
{
    norm_parts p;
    for (int e = 0; e < mesh.num_elements(); ++e)
        p += element_norm_parts(mesh, e, v);
    return p;
}

/// Continuous P1 field on a fine mesh.
template <int Dim>
struct p1_field {
    std::shared_ptr<const simplex_mesh<Dim>> mesh;
    Eigen::VectorXd values;

    double value_in(int e, const point<Dim>& x) const
    {
        const auto b = mesh->barycentric(e, x);
        double v = 0.0;
        for (int i = 0; i <= Dim; ++i)
            v += b[i] * values(mesh->elements[e][i]);
        return v;
    }
    point<Dim> gradient_in(int e) const
    {
        const auto g = geometry(*mesh, e);
        point<Dim> d = point<Dim>::Zero();
        for (int i = 0; i <= Dim; ++i)
            d += values(mesh->elements[e][i]) * g.grad[i];
        return d;
    }
    double value(const point<Dim>& x) const
    {
        const int e = mesh->locate(x);
        if (e < 0)
            throw std::out_of_range("point outside the field's mesh");
        return value_in(e, x);
    }
};

template <int Dim>
double norm(const p1_field<Dim>& u, norm_kind kind = norm_kind::H1)
{
    return mesh_norm_parts(*u.mesh, u.values).get(kind);
}

template <int Dim>
void require_same_mesh(const simplex_mesh<Dim>& a, const simplex_mesh<Dim>& b)
{
    if (&a == &b)
        return;
    if (a.grid.n != b.grid.n || a.lattice_element != b.lattice_element)
        throw std::invalid_argument("fields live on different meshes; transfer one of them first");
}

template <int Dim>
double norm_difference(const p1_field<Dim>& u, const p1_field<Dim>& v, norm_kind kind = norm_kind::H1)
{
    require_same_mesh(*u.mesh, *v.mesh);
    return mesh_norm_parts(*u.mesh, Eigen::VectorXd(u.values - v.values)).get(kind);
}

/// P1 interpolation at the target nodes by point evaluation.
template <int Dim>
p1_field<Dim> transfer(const p1_field<Dim>& u, std::shared_ptr<const simplex_mesh<Dim>> target)
{
    p1_field<Dim> out;
    out.mesh = target;
    out.values.resize(target->num_nodes());
    for (int i = 0; i < target->num_nodes(); ++i)
        out.values(i) = u.value(target->nodes[i]);
    return out;
}

/// Energy norm (integral of a |grad u|^2)^(1/2) by quadrature.
template <int Dim, typename Coeff>
double energy_norm(const p1_field<Dim>& u, Coeff&& coeff, const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const double ref = Dim == 1 ? 1.0 : 0.5;
    double s = 0.0;
    for (int e = 0; e < u.mesh->num_elements(); ++e) {
        const auto g = geometry(*u.mesh, e);
        point<Dim> d = point<Dim>::Zero();
        for (int i = 0; i <= Dim; ++i)
            d += u.values(u.mesh->elements[e][i]) * g.grad[i];
        double asum = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q)
            asum += rule.weights[q] * coeff(g.map(rule.points[q]));
        s += asum * g.measure / ref * d.squaredNorm();
    }
    return std::sqrt(s);
}

/// Index of the coarse element owning x: the lowest-indexed element
/// containing it.
template <int Dim>
int owner_element(const simplex_mesh<Dim>& coarse, const point<Dim>& x)
{
    const long n = coarse.grid.n;
    int best = -1;
    auto consider = [&](long le) {
        const auto it = coarse.element_of_lattice.find(le);
        if (it == coarse.element_of_lattice.end())
            return;
        if (coarse.contains(it->second, x, 1e-12) && (best < 0 || it->second < best))
            best = it->second;
    };
    const long i = static_cast<long>(std::floor(x(0) * n));
    if constexpr (Dim == 1) {
        for (long ii = i - 1; ii <= i; ++ii)
            if (ii >= 0 && ii < n)
                consider(ii);
    } else {
        const long j = static_cast<long>(std::floor(x(1) * n));
        for (long jj = j - 1; jj <= j; ++jj)
            for (long ii = i - 1; ii <= i; ++ii)
                if (ii >= 0 && ii < n && jj >= 0 && jj < n) {
                    consider(2 * (jj * n + ii));
                    consider(2 * (jj * n + ii) + 1);
                }
    }
    return best;
}

/// Sub-meshes of the coarse elements on which broken fields live.
template <int Dim>
struct broken_layout {
    std::shared_ptr<const simplex_mesh<Dim>> coarse;
    std::vector<std::shared_ptr<const simplex_mesh<Dim>>> pieces;
    long fine_n = 0; // lattice intervals per unit length of the pieces
};

/// Element-wise P1 field, possibly discontinuous across coarse elements.
template <int Dim>
struct broken_field {
    std::shared_ptr<const broken_layout<Dim>> layout;
    std::vector<Eigen::VectorXd> values;

    double value_in(int K, const point<Dim>& x) const
    {
        const auto& m = *layout->pieces[K];
        const int e = m.locate(x);
        if (e < 0)
            throw std::out_of_range("point outside coarse element " + std::to_string(K));
        const auto b = m.barycentric(e, x);
        double v = 0.0;
        for (int i = 0; i <= Dim; ++i)
            v += b[i] * values[K](m.elements[e][i]);
        return v;
    }
    double value(const point<Dim>& x) const
    {
        const int K = owner_element(*layout->coarse, x);
        if (K < 0)
            throw std::out_of_range("point outside the domain");
        return value_in(K, x);
    }
};

template <int Dim>
norm_parts broken_norm_parts(const broken_field<Dim>& u)
{
    norm_parts p;
    for (std::size_t K = 0; K < u.values.size(); ++K)
        p += mesh_norm_parts(*u.layout->pieces[K], u.values[K]);
    return p;
}

template <int Dim>
double norm(const broken_field<Dim>& u, norm_kind kind = norm_kind::broken_H1)
{
    return broken_norm_parts(u).get(kind);
}

template <int Dim>
norm_parts broken_difference_parts(const broken_field<Dim>& u, const broken_field<Dim>& v)
{
    if (u.layout != v.layout && (u.layout->fine_n != v.layout->fine_n || u.values.size() != v.values.size()))
        throw std::invalid_argument("broken fields live on different layouts");
    norm_parts p;
    for (std::size_t K = 0; K < u.values.size(); ++K)
        p += mesh_norm_parts(*u.layout->pieces[K], Eigen::VectorXd(u.values[K] - v.values[K]));
    return p;
}

template <int Dim>
double norm_difference(const broken_field<Dim>& u, const broken_field<Dim>& v, norm_kind kind = norm_kind::broken_H1)
{
    return broken_difference_parts(u, v).get(kind);
}

/// Restricts a continuous field to a broken layout (exact when the layout's
/// lattice refines the field's lattice).
template <int Dim>
broken_field<Dim> to_broken(const p1_field<Dim>& u, std::shared_ptr<const broken_layout<Dim>> layout)
{
    broken_field<Dim> out;
    out.layout = layout;
    out.values.resize(layout->pieces.size());
    for (std::size_t K = 0; K < layout->pieces.size(); ++K) {
        const auto& m = *layout->pieces[K];
        out.values[K].resize(m.num_nodes());
        for (int i = 0; i < m.num_nodes(); ++i) {
            const point<Dim>& x = m.nodes[i];
            const int e = u.mesh->locate(x);
            if (e < 0)
                throw std::out_of_range("node outside the source mesh");
            out.values[K](i) = u.value_in(e, x);
        }
    }
    return out;
}

/// Continuous field on a target mesh from a broken field, evaluated with the
/// owning (lowest-indexed) coarse element.
template <int Dim>
p1_field<Dim> to_mesh(const broken_field<Dim>& u, std::shared_ptr<const simplex_mesh<Dim>> target)
{
    p1_field<Dim> out;
    out.mesh = target;
    out.values.resize(target->num_nodes());
    for (int i = 0; i < target->num_nodes(); ++i)
        out.values(i) = u.value(target->nodes[i]);
    return out;
}

/// Differences against a callable exact field (value(x), gradient(x)) by a
/// Gauss rule on every sub-element. Returns squared parts of u - exact and of
/// exact itself.
template <int Dim, typename Exact>
std::pair<norm_parts, norm_parts> broken_exact_parts(const broken_field<Dim>& u, const Exact& exact,
                                                     const quadrature_rule<Dim>& rule)
{
    norm_parts diff, ref;
    const double refm = Dim == 1 ? 1.0 : 0.5;
    for (std::size_t K = 0; K < u.values.size(); ++K) {
        const auto& m = *u.layout->pieces[K];
        for (int e = 0; e < m.num_elements(); ++e) {
            const auto g = geometry(m, e);
            const auto& el = m.elements[e];
            point<Dim> du = point<Dim>::Zero();
            for (int i = 0; i <= Dim; ++i)
                du += u.values[K](el[i]) * g.grad[i];
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const point<Dim>& xi = rule.points[q];
                const point<Dim> x = g.map(xi);
                double uh = u.values[K](el[0]) * (1.0 - xi.sum());
                for (int k = 0; k < Dim; ++k)
                    uh += u.values[K](el[k + 1]) * xi(k);
                const double w = rule.weights[q] * g.measure / refm;
                const double ue = exact.value(x);
                const point<Dim> ge = exact.gradient(x);
                diff.l2 += w * (uh - ue) * (uh - ue);
                diff.semi += w * (du - ge).squaredNorm();
                ref.l2 += w * ue * ue;
                ref.semi += w * ge.squaredNorm();
            }
        }
    }
    return {diff, ref};
}

} // namespace wsmsfem
