#pragma once

#include "field.hpp"
#include "parallel.hpp"
#include "patch.hpp"

#include <map>
#include <unordered_map>

namespace wsmsfem {

template <int Dim>
using elem_matrix = Eigen::Matrix<double, Dim + 1, Dim + 1>;
template <int Dim>
using elem_vector = Eigen::Matrix<double, Dim + 1, 1>;

/// Discretisation parameters shared by the weakly stochastic basis and the
/// per-realization baseline, so both live on identical fine lattices.
template <int Dim>
struct msfem_geometry {
    std::shared_ptr<const simplex_mesh<Dim>> coarse;
    double ratio = 1.0;
    long refinement = 1; // fine intervals per coarse interval
    long fine_n = 1;     // fine intervals per unit length
    std::shared_ptr<const broken_layout<Dim>> layout;

    lattice<Dim> fine_grid() const { return lattice<Dim>{fine_n}; }
};

/// Sets up the fine lattice (see choose_refinement) and the fine mesh of
/// every coarse element.
template <int Dim>
std::shared_ptr<const msfem_geometry<Dim>> make_geometry(std::shared_ptr<const simplex_mesh<Dim>> coarse,
                                                         double ratio, double h_basis, double eps,
                                                         long refinement = 0)
{
    if (!(ratio >= 1.0))
        throw std::invalid_argument("oversampling ratio must be >= 1");
    auto g = std::make_shared<msfem_geometry<Dim>>();
    g->coarse = coarse;
    g->ratio = ratio;
    g->refinement = refinement > 0 ? refinement : choose_refinement(*coarse, ratio, h_basis, eps);
    g->fine_n = coarse->grid.n * g->refinement;
    auto layout = std::make_shared<broken_layout<Dim>>();
    layout->coarse = coarse;
    layout->fine_n = g->fine_n;
    const lattice<Dim> grid{g->fine_n};
    for (int K = 0; K < coarse->num_elements(); ++K) {
        std::array<point<Dim>, Dim + 1> v;
        for (int k = 0; k <= Dim; ++k)
            v[k] = coarse->nodes[coarse->elements[K][k]];
        layout->pieces.push_back(std::make_shared<const simplex_mesh<Dim>>(simplex_region_mesh<Dim>(v, grid)));
    }
    g->layout = layout;
    return g;
}

/// Solutions chi_j of the local problems on the patch S with affine
/// boundary data chi0_j (chi0_j(x_l^S) = delta_jl).
template <int Dim>
struct patch_harmonics {
    oversampling_patch<Dim> patch;
    std::shared_ptr<const simplex_mesh<Dim>> mesh;
    Eigen::MatrixXd chi; // patch nodes x (Dim+1)

    /// Affine boundary data: barycentric coordinates w.r.t. the unclipped S.
    elem_vector<Dim> chi0(const point<Dim>& x) const
    {
        matrix<Dim> J;
        for (int k = 0; k < Dim; ++k)
            J.col(k) = patch.vertices[k + 1] - patch.vertices[0];
        const point<Dim> l = J.inverse() * (x - patch.vertices[0]);
        elem_vector<Dim> b;
        b(0) = 1.0 - l.sum();
        for (int k = 0; k < Dim; ++k)
            b(k + 1) = l(k);
        return b;
    }
};

/// Patch S of coarse element K and its fine mesh (K itself when ratio = 1).
template <int Dim>
patch_harmonics<Dim> patch_geometry(const msfem_geometry<Dim>& geo, int K)
{
    patch_harmonics<Dim> ph;
    const auto& coarse = *geo.coarse;
    if (geo.ratio > 1.0) {
        ph.patch = build_patch(coarse, K, geo.ratio);
    } else {
        ph.patch.element = K;
        ph.patch.ratio = 1.0;
        for (int k = 0; k <= Dim; ++k)
            ph.patch.vertices[k] = coarse.nodes[coarse.elements[K][k]];
        ph.patch.region.assign(ph.patch.vertices.begin(), ph.patch.vertices.end());
        if constexpr (Dim == 1)
            if (ph.patch.region[0](0) > ph.patch.region[1](0))
                std::swap(ph.patch.region[0], ph.patch.region[1]);
    }
    if (!lattice_aligned<Dim>(ph.patch.vertices, geo.fine_n) && geo.ratio > 1.0)
        throw sizing_error("patch vertices are not on the fine lattice");
    ph.mesh = std::make_shared<const simplex_mesh<Dim>>(simplex_region_mesh<Dim>(ph.patch.vertices, geo.fine_grid()));
    return ph;
}

/// Affine boundary data chi0 at every patch node (rows), zero inside.
template <int Dim>
Eigen::MatrixXd patch_boundary_data(const patch_harmonics<Dim>& ph)
{
    const auto& m = *ph.mesh;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.num_nodes(), Dim + 1);
    for (int i = 0; i < m.num_nodes(); ++i)
        if (m.boundary[i])
            g.row(i) = ph.chi0(m.nodes[i]).transpose();
    return g;
}

template <int Dim, typename Coeff>
patch_harmonics<Dim> solve_patch_harmonics(const msfem_geometry<Dim>& geo, int K, Coeff&& coeff,
                                           const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    auto ph = patch_geometry(geo, K);
    const auto& m = *ph.mesh;
    const auto sys = assemble_p1(m, coeff, [](const point<Dim>&) { return 0.0; }, rule);
    dirichlet_solver solver(sys.matrix, sys.constrained);
    const Eigen::MatrixXd g = patch_boundary_data(ph);
    ph.chi.resize(m.num_nodes(), Dim + 1);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.num_nodes());
    for (int j = 0; j <= Dim; ++j)
        ph.chi.col(j) = solver.solve(zero, g.col(j));
    return ph;
}

/// Basis restricted to one coarse element.
template <int Dim>
struct local_basis {
    elem_matrix<Dim> alpha;
    Eigen::MatrixXd phi; // piece nodes x (Dim+1); column i is phi_i
    bool clipped = false;
    double patch_measure = 0.0;
};

template <int Dim>
struct ms_basis {
    std::shared_ptr<const msfem_geometry<Dim>> geo;
    std::vector<local_basis<Dim>> local;
    bool has_pieces = false;
    std::vector<elem_matrix<Dim>> k0;
    std::vector<std::vector<std::pair<long, elem_matrix<Dim>>>> k1; // sorted by cell id
    std::vector<elem_vector<Dim>> load;

    const simplex_mesh<Dim>& coarse() const { return *geo->coarse; }
    const simplex_mesh<Dim>& piece(int K) const { return *geo->layout->pieces[K]; }
};

/// Row of the patch mesh holding each node of the piece of K; the two
/// meshes share the fine lattice, so nodes are matched by lattice id.
template <int Dim>
std::vector<int> piece_rows(const msfem_geometry<Dim>& geo, int K, const simplex_mesh<Dim>& patch_mesh)
{
    const auto& piece = *geo.layout->pieces[K];
    std::unordered_map<long, int> patch_node;
    for (int v = 0; v < patch_mesh.num_nodes(); ++v)
        patch_node.emplace(patch_mesh.lattice_node[v], v);
    std::vector<int> rows(piece.num_nodes());
    for (int i = 0; i < piece.num_nodes(); ++i) {
        const auto it = patch_node.find(piece.lattice_node[i]);
        if (it == patch_node.end())
            throw std::logic_error("coarse element not covered by its patch");
        rows[i] = it->second;
    }
    return rows;
}

/// Recombination chi_sub alpha^T restricted to the piece of K.
template <int Dim>
local_basis<Dim> local_basis_from_harmonics(const msfem_geometry<Dim>& geo, int K, const patch_harmonics<Dim>& ph,
                                            const std::vector<int>& rows)
{
    const auto& coarse = *geo.coarse;
    local_basis<Dim> lb;
    lb.clipped = ph.patch.clipped;
    lb.patch_measure = ph.patch.measure();
    elem_matrix<Dim> C; // C(j,l) = chi0_j(x_l^K)
    for (int l = 0; l <= Dim; ++l)
        C.col(l) = ph.chi0(coarse.nodes[coarse.elements[K][l]]);
    if (std::abs(C.determinant()) < 1e-12)
        throw numerical_error("singular recombination system on element " + std::to_string(K));
    lb.alpha = C.inverse();
    Eigen::MatrixXd chi_sub(rows.size(), Dim + 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        chi_sub.row(i) = ph.chi.row(rows[i]);
    lb.phi = chi_sub * lb.alpha.transpose();
    return lb;
}

template <int Dim>
local_basis<Dim> local_basis_from_harmonics(const msfem_geometry<Dim>& geo, int K, const patch_harmonics<Dim>& ph)
{
    return local_basis_from_harmonics(geo, K, ph, piece_rows(geo, K, *ph.mesh));
}

/// Patch problems of one coarse element for the affine coefficient of a
/// spec: the operator and the symbolic factorisation are reused for every
/// realization passed to solve().
template <int Dim>
class patch_solver {
public:
    patch_solver(const msfem_geometry<Dim>& geo, int K, const coefficient_spec<Dim>& spec,
                 const quadrature_rule<Dim>& rule = default_rule<Dim>())
        : ph_(patch_geometry(geo, K)),
          op_(ph_.mesh, [&spec](const point<Dim>& x) { return spec.a0(x); },
              [&spec](const point<Dim>& x) { return spec.b(x); },
              [&spec](const point<Dim>& x) { return spec.cell_of(x); }, [](const point<Dim>&) { return 0.0; },
              rule),
          g_(patch_boundary_data(ph_)), rows_(piece_rows(geo, K, *ph_.mesh)), geo_(geo), K_(K)
    {
        rhs0_ = Eigen::MatrixXd::Zero(ph_.mesh->num_nodes(), Dim + 1);
        if (op_.num_free() > 0)
            ldlt_.analyzePattern(op_.matrix());
    }

    /// Harmonics for draws X (nullptr: the deterministic part a0).
    patch_harmonics<Dim> solve(const std::vector<double>* X, double eta)
    {
        patch_harmonics<Dim> ph = ph_;
        if (op_.num_free() == 0) {
            ph.chi = g_;
            return ph;
        }
        const sparse_matrix A = op_.matrix(X, eta);
        factorize_spd(ldlt_, A);
        const Eigen::MatrixXd r = op_.reduced_rhs(rhs0_, g_, X, eta);
        const Eigen::MatrixXd x = ldlt_.solve(r);
        check_residual(A, x, r, 1e-12);
        ph.chi = op_.expand(x, g_);
        return ph;
    }

    local_basis<Dim> basis(const std::vector<double>* X, double eta)
    {
        return local_basis_from_harmonics(geo_, K_, solve(X, eta), rows_);
    }

private:
    patch_harmonics<Dim> ph_;
    affine_operator<Dim> op_;
    Eigen::MatrixXd g_, rhs0_;
    std::vector<int> rows_;
    const msfem_geometry<Dim>& geo_;
    int K_;
    natural_ldlt ldlt_;
};

template <int Dim, typename Coeff>
local_basis<Dim> build_local_basis(const msfem_geometry<Dim>& geo, int K, Coeff&& coeff,
                                   const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    return local_basis_from_harmonics(geo, K, solve_patch_harmonics(geo, K, coeff, rule));
}

/// Builds the basis for every coarse element with the given coefficient.
template <int Dim, typename Coeff>
ms_basis<Dim> build_basis(std::shared_ptr<const msfem_geometry<Dim>> geo, Coeff&& coeff, unsigned threads = 1,
                          const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    ms_basis<Dim> b;
    b.geo = geo;
    b.local.resize(geo->coarse->num_elements());
    parallel_for(b.local.size(), threads, [&](std::size_t K) {
        b.local[K] = build_local_basis(*geo, static_cast<int>(K), coeff, rule);
    });
    return b;
}

/// Basis of the deterministic part a0 of a spec. Shares the patch operator
/// with the direct MsFEM, so at eta = 0 both bases agree bit for bit.
template <int Dim>
ms_basis<Dim> build_deterministic_basis(std::shared_ptr<const msfem_geometry<Dim>> geo,
                                        const coefficient_spec<Dim>& spec, unsigned threads = 1,
                                        const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    ms_basis<Dim> b;
    b.geo = geo;
    b.local.resize(geo->coarse->num_elements());
    parallel_for(b.local.size(), threads, [&](std::size_t K) {
        patch_solver<Dim> ps(*geo, static_cast<int>(K), spec, rule);
        b.local[K] = ps.basis(nullptr, 0.0);
    });
    return b;
}

namespace detail {

template <int Dim>
struct fine_element_data {
    element_geometry<Dim> g;
    std::array<point<Dim>, Dim + 1> grad_phi; // gradient of each phi_i on the fine element
};

template <int Dim>
fine_element_data<Dim> fine_element(const simplex_mesh<Dim>& piece, const local_basis<Dim>& lb, int e)
{
    fine_element_data<Dim> d;
    d.g = geometry(piece, e);
    const auto& el = piece.elements[e];
    for (int i = 0; i <= Dim; ++i) {
        d.grad_phi[i] = point<Dim>::Zero();
        for (int v = 0; v <= Dim; ++v)
            d.grad_phi[i] += lb.phi(el[v], i) * d.g.grad[v];
    }
    return d;
}

template <int Dim>
elem_matrix<Dim> gram(const std::array<point<Dim>, Dim + 1>& gp)
{
    elem_matrix<Dim> G;
    for (int i = 0; i <= Dim; ++i)
        for (int j = 0; j <= Dim; ++j)
            G(i, j) = gp[i].dot(gp[j]);
    return G;
}

} // namespace detail

/// Integral over K of grad phi_i . a grad phi_j by the fine quadrature.
template <int Dim, typename Coeff>
elem_matrix<Dim> element_stiffness(const ms_basis<Dim>& b, int K, Coeff&& coeff,
                                   const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& piece = b.piece(K);
    const double ref = Dim == 1 ? 1.0 : 0.5;
    elem_matrix<Dim> S = elem_matrix<Dim>::Zero();
    for (int e = 0; e < piece.num_elements(); ++e) {
        const auto d = detail::fine_element(piece, b.local[K], e);
        double asum = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q)
            asum += rule.weights[q] * coeff(d.g.map(rule.points[q]));
        S += (asum * d.g.measure / ref) * detail::gram<Dim>(d.grad_phi);
    }
    return S;
}

/// Integral over K of f phi_i.
template <int Dim, typename Rhs>
elem_vector<Dim> element_load(const ms_basis<Dim>& b, int K, Rhs&& f,
                              const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& piece = b.piece(K);
    const auto& lb = b.local[K];
    const double ref = Dim == 1 ? 1.0 : 0.5;
    elem_vector<Dim> F = elem_vector<Dim>::Zero();
    for (int e = 0; e < piece.num_elements(); ++e) {
        const auto g = geometry(piece, e);
        const auto& el = piece.elements[e];
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const point<Dim>& xi = rule.points[q];
            const double w = rule.weights[q] * g.measure / ref * f(g.map(xi));
            std::array<double, Dim + 1> lam;
            lam[0] = 1.0 - xi.sum();
            for (int k = 0; k < Dim; ++k)
                lam[k + 1] = xi(k);
            for (int v = 0; v <= Dim; ++v)
                F += (w * lam[v]) * lb.phi.row(el[v]).transpose();
        }
    }
    return F;
}

/// Precomputes K0 (with a0), the cell-indexed K1 family (with b and the
/// indicator of each eps-cell) and the load vector.
template <int Dim, typename Rhs>
void precompute_pieces(ms_basis<Dim>& b, const coefficient_spec<Dim>& spec, Rhs&& f, unsigned threads = 1,
                       const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const int nK = b.coarse().num_elements();
    b.k0.assign(nK, elem_matrix<Dim>::Zero());
    b.k1.assign(nK, {});
    b.load.assign(nK, elem_vector<Dim>::Zero());
    const double ref = Dim == 1 ? 1.0 : 0.5;
    parallel_for(static_cast<std::size_t>(nK), threads, [&](std::size_t Ks) {
        const int K = static_cast<int>(Ks);
        b.k0[K] = element_stiffness(b, K, [&](const point<Dim>& x) { return spec.a0(x); }, rule);
        b.load[K] = element_load(b, K, f, rule);
        std::map<long, elem_matrix<Dim>> acc;
        const auto& piece = b.piece(K);
        for (int e = 0; e < piece.num_elements(); ++e) {
            const auto d = detail::fine_element(piece, b.local[K], e);
            const elem_matrix<Dim> G = detail::gram<Dim>(d.grad_phi);
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const point<Dim> x = d.g.map(rule.points[q]);
                const double w = rule.weights[q] * d.g.measure / ref * spec.b(x);
                auto [it, inserted] = acc.try_emplace(spec.cell_of(x), elem_matrix<Dim>::Zero());
                it->second += w * G;
            }
        }
        b.k1[K].assign(acc.begin(), acc.end());
    });
    b.has_pieces = true;
}

/// Coarse stiffness/load: K0 + eta sum_k X_k K1_k per element, no quadrature.
template <int Dim>
sparse_system assemble_realization(const ms_basis<Dim>& b, const realization<Dim>& r, double eta)
{
    if (!b.has_pieces)
        throw std::logic_error("assemble_realization requires precomputed pieces");
    const auto& coarse = b.coarse();
    std::vector<Eigen::Triplet<double>> trip;
    sparse_system sys;
    sys.rhs = Eigen::VectorXd::Zero(coarse.num_nodes());
    for (int K = 0; K < coarse.num_elements(); ++K) {
        elem_matrix<Dim> S = b.k0[K];
        for (const auto& [k, M] : b.k1[K]) {
            if (k < 0 || k >= r.num_cells())
                throw std::out_of_range("missing draw for cell " + std::to_string(k));
            S += (eta * r[k]) * M;
        }
        const auto& el = coarse.elements[K];
        for (int i = 0; i <= Dim; ++i) {
            sys.rhs(el[i]) += b.load[K](i);
            for (int j = 0; j <= Dim; ++j)
                trip.emplace_back(el[i], el[j], S(i, j));
        }
    }
    sys.matrix.resize(coarse.num_nodes(), coarse.num_nodes());
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.constrained = coarse.boundary;
    return sys;
}

/// Coarse system by direct quadrature with an arbitrary coefficient.
template <int Dim, typename Coeff, typename Rhs>
sparse_system assemble_by_quadrature(const ms_basis<Dim>& b, Coeff&& coeff, Rhs&& f,
                                     const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    const auto& coarse = b.coarse();
    std::vector<Eigen::Triplet<double>> trip;
    sparse_system sys;
    sys.rhs = Eigen::VectorXd::Zero(coarse.num_nodes());
    for (int K = 0; K < coarse.num_elements(); ++K) {
        const elem_matrix<Dim> S = element_stiffness(b, K, coeff, rule);
        const elem_vector<Dim> F = element_load(b, K, f, rule);
        const auto& el = coarse.elements[K];
        for (int i = 0; i <= Dim; ++i) {
            sys.rhs(el[i]) += F(i);
            for (int j = 0; j <= Dim; ++j)
                trip.emplace_back(el[i], el[j], S(i, j));
        }
    }
    sys.matrix.resize(coarse.num_nodes(), coarse.num_nodes());
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.constrained = coarse.boundary;
    return sys;
}

enum class solution_tag { weak_stochastic, direct, deterministic };

struct coarse_solution {
    Eigen::VectorXd U; // all coarse nodes, zero on the boundary
    solution_tag tag = solution_tag::weak_stochastic;
};

inline coarse_solution solve_coarse(const sparse_system& sys, solution_tag tag = solution_tag::weak_stochastic)
{
    coarse_solution s;
    s.tag = tag;
    try {
        s.U = solve_dirichlet(sys);
    } catch (const numerical_error& e) {
        throw numerical_error(std::string("coarse system: ") + e.what() +
                              " (eta too large for coercivity?)");
    }
    return s;
}

template <int Dim>
broken_field<Dim> reconstruct(const coarse_solution& sol, const ms_basis<Dim>& b)
{
    broken_field<Dim> u;
    u.layout = b.geo->layout;
    const auto& coarse = b.coarse();
    u.values.resize(coarse.num_elements());
    for (int K = 0; K < coarse.num_elements(); ++K) {
        elem_vector<Dim> UK;
        for (int i = 0; i <= Dim; ++i)
            UK(i) = sol.U(coarse.elements[K][i]);
        u.values[K] = b.local[K].phi * UK;
    }
    return u;
}

template <int Dim>
p1_field<Dim> reconstruct(const coarse_solution& sol, const ms_basis<Dim>& b,
                          std::shared_ptr<const simplex_mesh<Dim>> target)
{
    return to_mesh(reconstruct(sol, b), target);
}

/// Coefficient sampler x -> A_eta(x) for one realization.
template <int Dim>
auto realization_sampler(const coefficient_spec<Dim>& spec, const realization<Dim>& r)
{
    check_realization(spec, r);
    return [&spec, &r](const point<Dim>& x) { return spec.value(x, r[spec.cell_of(x)]); };
}

template <int Dim>
struct direct_msfem_result {
    ms_basis<Dim> basis;
    coarse_solution solution;
};

/// Baseline u_M for several realizations at once: basis rebuilt with the
/// full A_eta of each realization, then assembled and solved with the same
/// coefficient. Loops over patches outermost so each patch operator is set
/// up once per batch.
template <int Dim, typename Rhs>
std::vector<direct_msfem_result<Dim>> solve_direct_msfem_batch(const coefficient_spec<Dim>& spec,
                                                               const std::vector<realization<Dim>>& rs,
                                                               std::shared_ptr<const msfem_geometry<Dim>> geo,
                                                               Rhs&& f, unsigned threads = 1,
                                                               const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    for (const auto& r : rs)
        check_realization(spec, r);
    const int nK = geo->coarse->num_elements();
    std::vector<direct_msfem_result<Dim>> out(rs.size());
    for (auto& o : out) {
        o.basis.geo = geo;
        o.basis.local.resize(nK);
    }
    parallel_for(static_cast<std::size_t>(nK), threads, [&](std::size_t Ks) {
        const int K = static_cast<int>(Ks);
        patch_solver<Dim> ps(*geo, K, spec, rule);
        for (std::size_t m = 0; m < rs.size(); ++m) {
            try {
                out[m].basis.local[K] = ps.basis(&rs[m].values, spec.eta);
            } catch (const numerical_error& e) {
                throw numerical_error("realization " + std::to_string(rs[m].index) + ", element " +
                                      std::to_string(K) + ": " + e.what());
            }
        }
    });
    parallel_for(rs.size(), threads, [&](std::size_t m) {
        const auto a = realization_sampler(spec, rs[m]);
        const auto sys = assemble_by_quadrature(out[m].basis, a, f, rule);
        out[m].solution = solve_coarse(sys, spec.eta == 0.0 ? solution_tag::deterministic : solution_tag::direct);
    });
    return out;
}

template <int Dim, typename Rhs>
direct_msfem_result<Dim> solve_direct_msfem(const coefficient_spec<Dim>& spec, const realization<Dim>& r,
                                            std::shared_ptr<const msfem_geometry<Dim>> geo, Rhs&& f,
                                            unsigned threads = 1,
                                            const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    auto v = solve_direct_msfem_batch(spec, std::vector<realization<Dim>>{r}, geo, f, threads, rule);
    return std::move(v.front());
}

} // namespace wsmsfem
