#pragma once

#include "analytic_1d.hpp"
#include "cells.hpp"
#include "field.hpp"
#include "parallel.hpp"

namespace wsmsfem {

/// Structured P1 mesh of the unit cell with periodic node identification.
template <int Dim>
struct periodic_cell {
    long N = 0;
    simplex_mesh<Dim> mesh; // unit lattice mesh (geometry)
    std::vector<int> dof;   // mesh node -> periodic dof
    int num_dofs = 0;

    explicit periodic_cell(long n)
        : N(n), mesh(lattice_mesh<Dim>(n))
    {
        if (n < 2)
            throw std::invalid_argument("cell resolution must be >= 2");
        dof.resize(mesh.num_nodes());
        for (int i = 0; i < mesh.num_nodes(); ++i) {
            const long id = mesh.lattice_node[i];
            if constexpr (Dim == 1) {
                dof[i] = static_cast<int>(id % n);
            } else {
                const long a = (id % (n + 1)) % n, b = (id / (n + 1)) % n;
                dof[i] = static_cast<int>(b * n + a);
            }
        }
        num_dofs = static_cast<int>(Dim == 1 ? n : n * n);
    }
};

/// Periodic P1 field on the unit cell (values per periodic dof).
template <int Dim>
struct periodic_field {
    std::shared_ptr<const periodic_cell<Dim>> cell;
    Eigen::VectorXd values;

    point<Dim> gradient_in(int e) const
    {
        const auto g = geometry(cell->mesh, e);
        point<Dim> d = point<Dim>::Zero();
        for (int i = 0; i <= Dim; ++i)
            d += values(cell->dof[cell->mesh.elements[e][i]]) * g.grad[i];
        return d;
    }
    static point<Dim> wrap(point<Dim> y)
    {
        for (int k = 0; k < Dim; ++k)
            y(k) -= std::floor(y(k));
        return y;
    }
    int element_of(const point<Dim>& y) const { return static_cast<int>(cell->mesh.grid.locate(wrap(y))); }
    double value(const point<Dim>& y0) const
    {
        const point<Dim> y = wrap(y0);
        const int e = static_cast<int>(cell->mesh.grid.locate(y));
        const auto b = cell->mesh.barycentric(e, y);
        double v = 0.0;
        for (int i = 0; i <= Dim; ++i)
            v += b[i] * values(cell->dof[cell->mesh.elements[e][i]]);
        return v;
    }
    point<Dim> gradient(const point<Dim>& y) const { return gradient_in(element_of(y)); }
    double mean() const { return values.mean(); }
};

namespace detail {

// Element integrals of a cell coefficient.
template <int Dim, typename Coeff>
std::vector<double> element_integrals(const simplex_mesh<Dim>& m, Coeff&& c, const quadrature_rule<Dim>& rule)
{
    const double ref = Dim == 1 ? 1.0 : 0.5;
    std::vector<double> out(m.num_elements());
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        double s = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q)
            s += rule.weights[q] * c(g.map(rule.points[q]));
        out[e] = s * g.measure / ref;
    }
    return out;
}

template <int Dim>
sparse_matrix periodic_stiffness(const periodic_cell<Dim>& cell, const std::vector<double>& aint)
{
    std::vector<Eigen::Triplet<double>> trip;
    const auto& m = cell.mesh;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        for (int i = 0; i <= Dim; ++i)
            for (int j = 0; j <= Dim; ++j)
                trip.emplace_back(cell.dof[m.elements[e][i]], cell.dof[m.elements[e][j]],
                                  aint[e] * g.grad[i].dot(g.grad[j]));
    }
    sparse_matrix A(cell.num_dofs, cell.num_dofs);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// Solves the singular periodic system by pinning dof 0, then removes the mean.
inline Eigen::VectorXd solve_pinned(const sparse_matrix& A, const Eigen::VectorXd& rhs)
{
    if (std::abs(rhs.sum()) > 1e-9 * std::max(1.0, rhs.cwiseAbs().sum()))
        throw numerical_error("periodic right-hand side is incompatible");
    std::vector<char> pin(A.rows(), 0);
    pin[0] = 1;
    Eigen::VectorXd x = dirichlet_solver(A, pin).solve(rhs, Eigen::VectorXd::Zero(A.rows()));
    x.array() -= x.mean();
    return x;
}

} // namespace detail

/// Periodic corrector: integral of a (p + grad w) . grad v = 0, zero mean.
template <int Dim, typename Coeff>
periodic_field<Dim> solve_corrector(Coeff&& a_per, const point<Dim>& p, std::shared_ptr<const periodic_cell<Dim>> cell,
                                    const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto aint = detail::element_integrals(cell->mesh, a_per, rule);
    const sparse_matrix A = detail::periodic_stiffness(*cell, aint);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cell->num_dofs);
    const auto& m = cell->mesh;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        for (int i = 0; i <= Dim; ++i)
            rhs(cell->dof[m.elements[e][i]]) -= aint[e] * p.dot(g.grad[i]);
    }
    return {cell, detail::solve_pinned(A, rhs)};
}

template <int Dim, typename Coeff>
periodic_field<Dim> solve_corrector(Coeff&& a_per, const point<Dim>& p, long resolution,
                                    const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    return solve_corrector(a_per, p, std::make_shared<const periodic_cell<Dim>>(resolution), rule);
}

/// psi_p: integral of a grad psi . grad v = - integral of b (p + grad w_p) . grad v.
template <int Dim, typename CoeffA, typename CoeffB>
periodic_field<Dim> solve_psi(CoeffA&& a_per, CoeffB&& b_per, const periodic_field<Dim>& w, const point<Dim>& p,
                              const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& cell = w.cell;
    const auto aint = detail::element_integrals(cell->mesh, a_per, rule);
    const auto bint = detail::element_integrals(cell->mesh, b_per, rule);
    const sparse_matrix A = detail::periodic_stiffness(*cell, aint);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cell->num_dofs);
    const auto& m = cell->mesh;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        const point<Dim> flux = p + w.gradient_in(e);
        for (int i = 0; i <= Dim; ++i)
            rhs(cell->dof[m.elements[e][i]]) -= bint[e] * flux.dot(g.grad[i]);
    }
    return {cell, detail::solve_pinned(A, rhs)};
}

/// Relative residual of the weak form defining psi_p.
template <int Dim, typename CoeffA, typename CoeffB>
double psi_residual(CoeffA&& a_per, CoeffB&& b_per, const periodic_field<Dim>& w, const point<Dim>& p,
                    const periodic_field<Dim>& psi, const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& cell = w.cell;
    const auto& m = cell->mesh;
    const auto aint = detail::element_integrals(m, a_per, rule);
    const auto bint = detail::element_integrals(m, b_per, rule);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(cell->num_dofs), s = r;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        const point<Dim> gpsi = psi.gradient_in(e);
        const point<Dim> flux = p + w.gradient_in(e);
        for (int i = 0; i <= Dim; ++i) {
            const int d = cell->dof[m.elements[e][i]];
            r(d) += aint[e] * gpsi.dot(g.grad[i]) + bint[e] * flux.dot(g.grad[i]);
            s(d) += std::abs(bint[e] * flux.dot(g.grad[i]));
        }
    }
    const double scale = s.norm();
    return scale > 0 ? r.norm() / scale : r.norm();
}

/// integral over Q of (e_i + grad w_i)^T c (e_j + grad w_j).
template <int Dim, typename Coeff>
matrix<Dim> cell_tensor(Coeff&& c_per, const std::array<periodic_field<Dim>, Dim>& w,
                        const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& m = w[0].cell->mesh;
    const auto cint = detail::element_integrals(m, c_per, rule);
    matrix<Dim> T = matrix<Dim>::Zero();
    for (int e = 0; e < m.num_elements(); ++e) {
        std::array<point<Dim>, Dim> v;
        for (int i = 0; i < Dim; ++i) {
            v[i] = w[i].gradient_in(e);
            v[i](i) += 1.0;
        }
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j)
                T(i, j) += cint[e] * v[i].dot(v[j]);
    }
    return T;
}

/// A*_per: the symmetrised cell tensor of a_per.
template <int Dim, typename Coeff>
matrix<Dim> homogenized_tensor(Coeff&& a_per, const std::array<periodic_field<Dim>, Dim>& w,
                                  const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    matrix<Dim> T = cell_tensor<Dim>(a_per, w, rule);
    return 0.5 * (T + T.transpose());
}

/// Periodic correctors and derived homogenized tensors.
template <int Dim>
struct cell_correctors {
    long resolution = 0;
    std::shared_ptr<const periodic_cell<Dim>> cell;
    std::array<periodic_field<Dim>, Dim> w;
    std::array<periodic_field<Dim>, Dim> psi;
    bool has_psi = false;
    matrix<Dim> A_star;
    matrix<Dim> B_bar;
    matrix<Dim> A1_star;
    double mean_x = 0.5;
    double var_x = 1.0 / 12.0;
    std::string preset;
};

template <int Dim>
cell_correctors<Dim> compute_cell_correctors(const coefficient_spec<Dim>& spec, long resolution,
                                             bool with_psi = true, unsigned threads = 1,
                                             const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    cell_correctors<Dim> c;
    c.resolution = resolution;
    c.cell = std::make_shared<const periodic_cell<Dim>>(resolution);
    c.mean_x = spec.mean_x;
    c.var_x = spec.var_x;
    c.preset = spec.name;
    auto a = [&spec](const point<Dim>& y) { return spec.a_per(y); };
    auto b = [&spec](const point<Dim>& y) { return spec.b_per(y); };
    parallel_for(Dim, threads, [&](std::size_t p) {
        c.w[p] = solve_corrector(a, point<Dim>(point<Dim>::Unit(p)), c.cell, rule);
    });
    if (with_psi) {
        parallel_for(Dim, threads, [&](std::size_t p) {
            c.psi[p] = solve_psi(a, b, c.w[p], point<Dim>(point<Dim>::Unit(p)), rule);
        });
        c.has_psi = true;
    }
    c.A_star = homogenized_tensor<Dim>(a, c.w, rule);
    c.B_bar = cell_tensor<Dim>(b, c.w, rule);
    c.A1_star = c.mean_x * c.B_bar;
    return c;
}

/// (B_bar, A1_star = E(X_0) B_bar) for the correctors' cell.
template <int Dim, typename Coeff>
std::pair<matrix<Dim>, matrix<Dim>> first_order_tensor(const cell_correctors<Dim>& c, Coeff&& b_per, double mean_x,
                                                       const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const matrix<Dim> B = cell_tensor<Dim>(b_per, c.w, rule);
    return {B, mean_x * B};
}

/// Writes the tensor report with a provenance header.
template <int Dim>
void write_tensor_report(std::ostream& os, const cell_correctors<Dim>& c)
{
    os.precision(12);
    os << "# homogenized tensors\n# preset " << c.preset << "\n# cell_resolution " << c.resolution << "\n"
       << "# E(X0) " << c.mean_x << " Var(X0) " << c.var_x << "\n";
    auto dump = [&](const char* name, const matrix<Dim>& M) {
        os << name << "\n";
        for (int i = 0; i < Dim; ++i) {
            for (int j = 0; j < Dim; ++j)
                os << (j ? " " : "") << M(i, j);
            os << "\n";
        }
    };
    dump("A_star_per", c.A_star);
    dump("B_bar", c.B_bar);
    dump("A1_star", c.A1_star);
}

/// Constant-tensor P1 Dirichlet problem: integral of grad v^T T grad u = rhs(v).
/// The load is integral of f v plus the element-wise linear functional
/// -integral of g_e . grad v where g_e is a per-element vector (may be empty).
template <int Dim, typename Rhs>
p1_field<Dim> solve_homogenized(const matrix<Dim>& T, Rhs&& f, std::shared_ptr<const simplex_mesh<Dim>> mesh,
                                const std::vector<point<Dim>>& flux_load = {})
{
    if ((T - T.transpose()).norm() > 1e-12 * std::max(1.0, T.norm()))
        throw std::invalid_argument("homogenized tensor is not symmetric");
    Eigen::LLT<matrix<Dim>> llt(T);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("homogenized tensor is not positive definite");
    const auto& m = *mesh;
    const auto rule = default_rule<Dim>();
    const double ref = Dim == 1 ? 1.0 : 0.5;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.num_nodes());
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto g = geometry(m, e);
        const auto& el = m.elements[e];
        for (int i = 0; i <= Dim; ++i) {
            for (int j = 0; j <= Dim; ++j)
                trip.emplace_back(el[i], el[j], g.measure * g.grad[i].dot(T * g.grad[j]));
            if (!flux_load.empty())
                rhs(el[i]) -= g.measure * flux_load[e].dot(g.grad[i]);
        }
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const point<Dim>& xi = rule.points[q];
            const double w = rule.weights[q] * g.measure / ref * f(g.map(xi));
            rhs(el[0]) += w * (1.0 - xi.sum());
            for (int k = 0; k < Dim; ++k)
                rhs(el[k + 1]) += w * xi(k);
        }
    }
    sparse_system sys;
    sys.matrix.resize(m.num_nodes(), m.num_nodes());
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.rhs = rhs;
    sys.constrained = m.boundary;
    return {mesh, solve_dirichlet(sys)};
}

/// u0*, u1bar* (with B_bar) and u*_eta (tensor A* + eta A1*) on one mesh.
template <int Dim>
struct homogenized_solves {
    p1_field<Dim> u0;
    p1_field<Dim> u1bar;
    p1_field<Dim> u_eta;
    double eta = 0.0;
};

template <int Dim, typename Rhs>
homogenized_solves<Dim> solve_homogenized_expansion(const cell_correctors<Dim>& c, double eta, Rhs&& f,
                                                    std::shared_ptr<const simplex_mesh<Dim>> mesh)
{
    homogenized_solves<Dim> s;
    s.eta = eta;
    s.u0 = solve_homogenized(c.A_star, f, mesh);
    std::vector<point<Dim>> flux(mesh->num_elements());
    for (int e = 0; e < mesh->num_elements(); ++e)
        flux[e] = c.B_bar * s.u0.gradient_in(e);
    s.u1bar = solve_homogenized(c.A_star, [](const point<Dim>&) { return 0.0; }, mesh, flux);
    s.u_eta = solve_homogenized(matrix<Dim>(c.A_star + eta * c.A1_star), f, mesh);
    return s;
}

/// v = u0 + eta E u1 + eps [w (u0' + eta E u1') + eta E psi u0'
///     + eta sum_k (X_k - E) chi(x/eps - k) u0'] in 1D. Second derivatives of
/// the P1 fields u0, u1 vanish element-wise and are omitted from v'.
class two_scale_1d {
public:
    two_scale_1d(const coefficient_spec<1>& spec, const realization<1>& r, const p1_field<1>& u0,
                 const p1_field<1>& u1bar, const cell_correctors<1>& c)
        : spec_(spec), u0_(u0), u1_(u1bar), c_(c)
    {
        if (!c.has_psi)
            throw std::invalid_argument("two-scale expansion needs psi");
        check_realization(spec, r);
        E_ = c.mean_x;
        prefix_.assign(r.num_cells() + 1, 0.0);
        for (long k = 0; k < r.num_cells(); ++k)
            prefix_[k + 1] = prefix_[k] + (r[k] - E_);
        X_ = r.values;
        // chi on the cell lattice: chi(0) = 0, chi' = -b (1 + w') / a on (0,1)
        const auto& m = c.cell->mesh;
        const long N = c.resolution;
        chi_nodes_.assign(N + 1, 0.0);
        gauss_legendre(6, gx_, gw_);
        const auto& gx = gx_;
        const auto& gw = gw_;
        for (long e = 0; e < N; ++e) {
            const double dw = c.w[0].gradient_in(static_cast<int>(e))(0);
            const double y0 = m.nodes[m.elements[e][0]](0), y1 = m.nodes[m.elements[e][1]](0);
            double s = 0.0;
            for (std::size_t q = 0; q < gx.size(); ++q) {
                const point<1> y = make_point<1>(y0 + (y1 - y0) * gx[q]);
                s += gw[q] * spec.b_per(y) * (1.0 + dw) / spec.a_per(y);
            }
            chi_nodes_[e + 1] = chi_nodes_[e] - s * (y1 - y0);
        }
    }

    /// chi(y) by exact integration on each cell element.
    double chi(double y) const
    {
        if (y <= 0)
            return 0.0;
        if (y >= 1)
            return chi_nodes_.back();
        const long N = c_.resolution;
        const long e = std::min(N - 1, static_cast<long>(std::floor(y * N)));
        const double y0 = static_cast<double>(e) / N;
        const double dw = c_.w[0].gradient_in(static_cast<int>(e))(0);
        double s = 0.0;
        for (std::size_t q = 0; q < gx_.size(); ++q) {
            const point<1> t = make_point<1>(y0 + (y - y0) * gx_[q]);
            s += gw_[q] * spec_.b_per(t) * (1.0 + dw) / spec_.a_per(t);
        }
        return chi_nodes_[e] - s * (y - y0);
    }
    double chi_derivative(double y) const
    {
        if (y <= 0 || y >= 1)
            return 0.0;
        const point<1> t = make_point<1>(y);
        return -spec_.b_per(t) * (1.0 + c_.w[0].gradient(t)(0)) / spec_.a_per(t);
    }

    double value(double x) const
    {
        const double eps = spec_.eps, eta = spec_.eta;
        const point<1> px = make_point<1>(x);
        const point<1> y = make_point<1>(x / eps);
        const double d0 = u0_.gradient_in(u0_.mesh->locate(px))(0);
        const double d1 = u1_.gradient_in(u1_.mesh->locate(px))(0);
        return u0_.value(px) + eta * E_ * u1_.value(px) +
               eps * (c_.w[0].value(y) * (d0 + eta * E_ * d1) + eta * E_ * c_.psi[0].value(y) * d0 +
                      eta * random_sum(x) * d0);
    }
    double derivative(double x) const
    {
        const double eps = spec_.eps, eta = spec_.eta;
        const point<1> px = make_point<1>(x);
        const point<1> y = make_point<1>(x / eps);
        const double d0 = u0_.gradient_in(u0_.mesh->locate(px))(0);
        const double d1 = u1_.gradient_in(u1_.mesh->locate(px))(0);
        const long k0 = spec_.cell_of(px);
        return d0 + eta * E_ * d1 + c_.w[0].gradient(y)(0) * (d0 + eta * E_ * d1) +
               eta * E_ * c_.psi[0].gradient(y)(0) * d0 +
               eta * (X_[k0] - E_) * chi_derivative(x / eps - static_cast<double>(k0)) * d0;
    }
    double value(const point<1>& x) const { return value(x(0)); }
    point<1> gradient(const point<1>& x) const { return make_point<1>(derivative(x(0))); }

private:
    double random_sum(double x) const
    {
        const long k0 = spec_.cell_of(make_point<1>(x));
        return chi_nodes_.back() * prefix_[k0] + (X_[k0] - E_) * chi(x / spec_.eps - static_cast<double>(k0));
    }

    const coefficient_spec<1>& spec_;
    const p1_field<1>& u0_;
    const p1_field<1>& u1_;
    const cell_correctors<1>& c_;
    double E_ = 0.5;
    std::vector<double> prefix_, X_, chi_nodes_, gx_, gw_;
};

inline two_scale_1d two_scale_expansion_1d(const coefficient_spec<1>& spec, const realization<1>& r,
                                           const p1_field<1>& u0, const p1_field<1>& u1bar,
                                           const cell_correctors<1>& c)
{
    return two_scale_1d(spec, r, u0, u1bar, c);
}

/// lambda statistic: per coarse element K and index pair (m,p),
/// S = tau^{m,p} (1/N_K) sum_{i in I_K} (X_i - E)/sqrt(Var) with
/// tau^{m,p} = sqrt(Var) integral_Q (e_p + grad w_p)^T B (e_m + grad w_m).
template <int Dim>
struct lambda_stat {
    std::vector<matrix<Dim>> S;
    matrix<Dim> tau;
    double lambda = 0.0;
};

template <int Dim>
lambda_stat<Dim> compute_lambda(const cell_correctors<Dim>& c, const realization<Dim>& r,
                                const cell_index_set<Dim>& cells)
{
    lambda_stat<Dim> out;
    const double sd = std::sqrt(c.var_x);
    out.tau = sd * c.B_bar.transpose();
    out.S.resize(cells.interior.size());
    for (std::size_t K = 0; K < cells.interior.size(); ++K) {
        const auto& I = cells.interior[K];
        if (I.empty())
            throw std::invalid_argument("element " + std::to_string(K) + " contains no complete eps-cell");
        double s = 0.0;
        for (long i : I)
            s += r[i] - c.mean_x;
        const double mean_centered = s / static_cast<double>(I.size());
        // tau / sqrt(Var) = B_bar^T; written without the division so Var = 0 gives 0.
        out.S[K] = c.B_bar.transpose() * mean_centered;
        out.lambda = std::max(out.lambda, out.S[K].cwiseAbs().maxCoeff());
    }
    return out;
}

/// Deterministic almost-sure bound 2 |B|_inf max |e_m + grad w_m| |e_p + grad w_p|.
template <int Dim>
double lambda_bound(const coefficient_spec<Dim>& spec, const cell_correctors<Dim>& c)
{
    const double binf = detail::cell_sup<Dim>([&](const point<Dim>& y) { return std::abs(spec.b_per(y)); },
                                              Dim == 1 ? 20000 : 200);
    double mx = 0.0;
    const auto& m = c.cell->mesh;
    for (int p = 0; p < Dim; ++p) {
        double s = 0.0;
        for (int e = 0; e < m.num_elements(); ++e) {
            point<Dim> v = c.w[p].gradient_in(e);
            v(p) += 1.0;
            s += m.measure(e) * v.squaredNorm();
        }
        mx = std::max(mx, std::sqrt(s));
    }
    return 2.0 * binf * mx * mx;
}

struct lambda_study_row {
    double h = 0.0;
    long num_elements = 0;
    long realizations = 0;
    double mean_lambda2 = 0.0;
    double halfwidth = 0.0;
};

/// Monte Carlo estimate of E[lambda^2] on the coarse mesh of size h.
template <int Dim>
lambda_study_row lambda_study(const coefficient_spec<Dim>& spec, const cell_correctors<Dim>& c, double h,
                              long realizations, std::uint64_t seed, unsigned threads = 1)
{
    if (realizations < 2)
        throw std::invalid_argument("lambda study needs at least two realizations");
    const auto mesh = build_coarse_mesh<Dim>(h);
    const auto cells = build_cell_index_set(spec.eps, mesh);
    std::vector<double> l2(realizations);
    parallel_for(static_cast<std::size_t>(realizations), threads, [&](std::size_t m) {
        const double l = compute_lambda(c, draw_realization(spec, static_cast<long>(m), seed), cells).lambda;
        l2[m] = l * l;
    });
    lambda_study_row row;
    row.h = h;
    row.num_elements = mesh.num_elements();
    row.realizations = realizations;
    double s = 0.0;
    for (double v : l2)
        s += v;
    row.mean_lambda2 = s / realizations;
    double ss = 0.0;
    for (double v : l2)
        ss += (v - row.mean_lambda2) * (v - row.mean_lambda2);
    row.halfwidth = 1.96 * std::sqrt(ss / (realizations - 1)) / std::sqrt(static_cast<double>(realizations));
    return row;
}

/// Growth of E[lambda^2] from h to h/2 predicted by the (eps/h)^d ln^2 N(h)
/// scaling, with N the number of coarse elements.
inline double lambda_growth_prediction(int dim, long elements_h, long elements_half)
{
    const double r = std::log(static_cast<double>(elements_half)) / std::log(static_cast<double>(elements_h));
    return std::pow(2.0, dim) * r * r;
}

} // namespace wsmsfem
