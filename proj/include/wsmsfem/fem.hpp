#pragma once

#include "coefficients.hpp"
#include "quadrature.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace wsmsfem {

using sparse_matrix = Eigen::SparseMatrix<double>;
/// LDLT without reordering, for matrices already numbered for low fill.
using natural_ldlt = Eigen::SimplicialLDLT<sparse_matrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

namespace detail {

/// Maximum absolute row sum.
inline double inf_norm(const sparse_matrix& A)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
    for (int k = 0; k < A.outerSize(); ++k)
        for (sparse_matrix::InnerIterator it(A, k); it; ++it)
            rows(it.row()) += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
}

} // namespace detail

/// Stiffness matrix and load vector over all mesh nodes plus the set of
/// Dirichlet-constrained nodes. Symmetric, so the compressed column storage
/// is also the compressed row storage.
struct sparse_system {
    sparse_matrix matrix;
    Eigen::VectorXd rhs;
    std::vector<char> constrained;
};

/// P1 assembly of a(x) grad u . grad v and f v with a scalar coefficient.
/// The Dirichlet set defaults to the mesh boundary nodes.
template <int Dim, typename Coeff, typename Rhs>
sparse_system assemble_p1(const simplex_mesh<Dim>& mesh, Coeff&& coeff, Rhs&& f,
                          const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    constexpr int nl = Dim + 1;
    sparse_system sys;
    const int n = mesh.num_nodes();
    sys.rhs = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * nl * nl);
    std::vector<std::array<double, nl>> lambda(rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
        lambda[q][0] = 1.0 - rule.points[q].sum();
        for (int k = 0; k < Dim; ++k)
            lambda[q][k + 1] = rule.points[q](k);
    }
    const double ref = Dim == 1 ? 1.0 : 0.5;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto g = geometry(mesh, e);
        const double scale = g.measure / ref;
        double asum = 0.0;
        std::array<double, nl> fl{};
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const point<Dim> x = g.map(rule.points[q]);
            const double w = rule.weights[q] * scale;
            asum += w * coeff(x);
            const double fx = f(x);
            for (int i = 0; i < nl; ++i)
                fl[i] += w * fx * lambda[q][i];
        }
        const auto& el = mesh.elements[e];
        for (int i = 0; i < nl; ++i) {
            sys.rhs(el[i]) += fl[i];
            for (int j = 0; j < nl; ++j)
                trip.emplace_back(el[i], el[j], asum * g.grad[i].dot(g.grad[j]));
        }
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    sys.constrained = mesh.boundary;
    return sys;
}

enum class solver_kind { direct, cg };

struct solve_options {
    solver_kind kind = solver_kind::direct;
    double tolerance = 1e-10;
    int max_iterations = 50000;
};

/// Dirichlet problem with the constraints eliminated (rows and columns of
/// constrained nodes removed, their values moved to the right-hand side).
/// Factorises once; solve() may be called for several (rhs, data) pairs.
class dirichlet_solver {
public:
    dirichlet_solver(const sparse_matrix& A, const std::vector<char>& constrained,
                     solve_options opts = {})
        : opts_(opts)
    {
        const int n = static_cast<int>(A.rows());
        map_.assign(n, -1);
        for (int i = 0; i < n; ++i)
            if (!constrained[i]) {
                map_[i] = static_cast<int>(free_.size());
                free_.push_back(i);
            } else {
                dmap_.push_back(i);
            }
        std::vector<int> cmap(n, -1);
        for (std::size_t k = 0; k < dmap_.size(); ++k)
            cmap[dmap_[k]] = static_cast<int>(k);
        std::vector<Eigen::Triplet<double>> tff, tfd;
        for (int c = 0; c < A.outerSize(); ++c)
            for (sparse_matrix::InnerIterator it(A, c); it; ++it) {
                const int r = static_cast<int>(it.row());
                if (map_[r] < 0)
                    continue;
                if (map_[c] >= 0)
                    tff.emplace_back(map_[r], map_[c], it.value());
                else
                    tfd.emplace_back(map_[r], cmap[c], it.value());
            }
        aff_.resize(static_cast<int>(free_.size()), static_cast<int>(free_.size()));
        aff_.setFromTriplets(tff.begin(), tff.end());
        afd_.resize(static_cast<int>(free_.size()), static_cast<int>(dmap_.size()));
        afd_.setFromTriplets(tfd.begin(), tfd.end());
        if (free_.empty())
            return;
        if (opts_.kind == solver_kind::direct) {
            ldlt_.compute(aff_);
            if (ldlt_.info() != Eigen::Success)
                throw numerical_error("sparse factorisation failed");
            if (ldlt_.vectorD().minCoeff() <= 0)
                throw numerical_error("system is not positive definite (min pivot " +
                                      std::to_string(ldlt_.vectorD().minCoeff()) + ")");
        } else {
            cg_.setTolerance(opts_.tolerance);
            cg_.setMaxIterations(opts_.max_iterations);
            cg_.compute(aff_);
            if (cg_.info() != Eigen::Success)
                throw numerical_error("preconditioner setup failed");
        }
    }

    int num_free() const { return static_cast<int>(free_.size()); }

    /// Solves with full-length load vector b and boundary data g (only the
    /// constrained entries of g are read).
    Eigen::VectorXd solve(const Eigen::VectorXd& b, const Eigen::VectorXd& g) const
    {
        const int n = static_cast<int>(map_.size());
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd gd(static_cast<int>(dmap_.size()));
        for (std::size_t k = 0; k < dmap_.size(); ++k) {
            gd(k) = g(dmap_[k]);
            x(dmap_[k]) = gd(k);
        }
        if (free_.empty())
            return x;
        Eigen::VectorXd r(static_cast<int>(free_.size()));
        for (std::size_t k = 0; k < free_.size(); ++k)
            r(k) = b(free_[k]);
        if (gd.size() > 0)
            r -= afd_ * gd;
        const double rn = r.norm();
        Eigen::VectorXd xf;
        if (rn == 0.0) {
            xf = Eigen::VectorXd::Zero(r.size());
        } else if (opts_.kind == solver_kind::direct) {
            xf = ldlt_.solve(r);
        } else {
            xf = cg_.solve(r);
            if (cg_.info() != Eigen::Success)
                throw numerical_error("CG did not converge: relative residual " + std::to_string(cg_.error()) +
                                      " after " + std::to_string(cg_.iterations()) + " iterations");
        }
        if (rn > 0) {
            // direct: normwise backward error; CG stops on the preconditioned estimate, allow a small slack
            const bool direct = opts_.kind == solver_kind::direct;
            const double scale = direct ? detail::inf_norm(aff_) * xf.norm() + rn : rn;
            const double res = (aff_ * xf - r).norm() / scale;
            const double limit = direct ? 1e-12 : 10 * opts_.tolerance;
            if (!(res <= limit))
                throw numerical_error("linear solve residual " + std::to_string(res) + " exceeds tolerance");
        }
        for (std::size_t k = 0; k < free_.size(); ++k)
            x(free_[k]) = xf(k);
        return x;
    }

private:
    solve_options opts_;
    std::vector<int> map_, free_, dmap_;
    sparse_matrix aff_, afd_;
    Eigen::SimplicialLDLT<sparse_matrix> ldlt_;
    Eigen::ConjugateGradient<sparse_matrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg_;
};

namespace detail {

// Geometric nested dissection on integer lattice coordinates: split along the
// longer extent at the median line, order both halves recursively, then the
// separator. Grid lines separate P1 lattice meshes, so fill stays low.
inline void nested_dissection(std::vector<int>& ids, const std::vector<std::array<long, 2>>& c,
                              std::vector<int>& out)
{
    constexpr std::size_t leaf = 16;
    if (ids.size() <= leaf) {
        out.insert(out.end(), ids.begin(), ids.end());
        return;
    }
    std::array<long, 2> lo{c[ids[0]]}, hi{c[ids[0]]};
    for (int i : ids)
        for (int d = 0; d < 2; ++d) {
            lo[d] = std::min(lo[d], c[i][d]);
            hi[d] = std::max(hi[d], c[i][d]);
        }
    const int ax = hi[0] - lo[0] >= hi[1] - lo[1] ? 0 : 1;
    if (hi[ax] - lo[ax] < 2) {
        out.insert(out.end(), ids.begin(), ids.end());
        return;
    }
    std::vector<long> v;
    v.reserve(ids.size());
    for (int i : ids)
        v.push_back(c[i][ax]);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    const long mid = std::clamp(v[v.size() / 2], lo[ax] + 1, hi[ax] - 1);
    std::vector<int> a, b, sep;
    for (int i : ids)
        (c[i][ax] < mid ? a : c[i][ax] > mid ? b : sep).push_back(i);
    ids.clear();
    ids.shrink_to_fit();
    nested_dissection(a, c, out);
    nested_dissection(b, c, out);
    out.insert(out.end(), sep.begin(), sep.end());
}

} // namespace detail

/// P1 stiffness of a coefficient affine in the cell draws,
/// a(x) = a0(x) + eta X_{cell(x)} b(x), with the Dirichlet rows and columns
/// eliminated. The per-element quadrature sums, the sparsity pattern and the
/// scatter slots are computed once, so assembling a realization is a single
/// pass over the elements. Used for the patch problems of the direct MsFEM
/// and for the fine reference.
template <int Dim>
class affine_operator {
public:
    static constexpr int nl = Dim + 1;

    template <typename A0, typename B, typename CellOf, typename Rhs>
    affine_operator(std::shared_ptr<const simplex_mesh<Dim>> mesh, A0&& a0, B&& b, CellOf&& cell_of, Rhs&& f,
                    const quadrature_rule<Dim>& rule = default_rule<Dim>())
        : mesh_(std::move(mesh))
    {
        const auto& m = *mesh_;
        const int n = m.num_nodes();
        const int ne = m.num_elements();
        const std::size_t nq = rule.size();
        nq_ = static_cast<int>(nq);
        // free nodes are numbered in nested dissection order so that the
        // factorisations need no fill-reducing permutation
        std::vector<int> ids;
        std::vector<std::array<long, 2>> coord(n, std::array<long, 2>{0, 0});
        for (int i = 0; i < n; ++i)
            if (!m.boundary[i]) {
                ids.push_back(i);
                const long id = m.lattice_node[i];
                coord[i] = Dim == 1 ? std::array<long, 2>{id, 0}
                                    : std::array<long, 2>{id % (m.grid.n + 1), id / (m.grid.n + 1)};
            }
        if (Dim == 1)
            free_ = ids;
        else
            detail::nested_dissection(ids, coord, free_);
        map_.assign(n, -1);
        for (std::size_t k = 0; k < free_.size(); ++k)
            map_[free_[k]] = static_cast<int>(k);
        c0_.resize(ne);
        qcell_.resize(static_cast<std::size_t>(ne) * nq);
        qweight_.resize(static_cast<std::size_t>(ne) * nq);
        gram_.resize(ne);
        load_ = Eigen::VectorXd::Zero(n);
        std::vector<std::array<double, nl>> lambda(nq);
        for (std::size_t q = 0; q < nq; ++q) {
            lambda[q][0] = 1.0 - rule.points[q].sum();
            for (int k = 0; k < Dim; ++k)
                lambda[q][k + 1] = rule.points[q](k);
        }
        const double ref = Dim == 1 ? 1.0 : 0.5;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(ne) * nl * nl);
        for (int e = 0; e < ne; ++e) {
            const auto g = geometry(m, e);
            const double scale = g.measure / ref;
            double asum = 0.0;
            for (std::size_t q = 0; q < nq; ++q) {
                const point<Dim> x = g.map(rule.points[q]);
                const double w = rule.weights[q] * scale;
                asum += w * a0(x);
                qcell_[e * nq + q] = cell_of(x);
                qweight_[e * nq + q] = w * b(x);
                const double fx = f(x);
                for (int i = 0; i < nl; ++i)
                    load_(m.elements[e][i]) += w * fx * lambda[q][i];
            }
            c0_[e] = asum;
            for (int i = 0; i < nl; ++i)
                for (int j = 0; j < nl; ++j) {
                    gram_[e][i * nl + j] = g.grad[i].dot(g.grad[j]);
                    const int r = map_[m.elements[e][i]], c = map_[m.elements[e][j]];
                    if (r >= 0 && c >= 0)
                        trip.emplace_back(r, c, 1.0);
                }
        }
        const int nf = num_free();
        pattern_.resize(nf, nf);
        pattern_.setFromTriplets(trip.begin(), trip.end());
        pattern_.makeCompressed();
        slot_.assign(static_cast<std::size_t>(ne) * nl * nl, -1);
        for (int e = 0; e < ne; ++e)
            for (int i = 0; i < nl; ++i)
                for (int j = 0; j < nl; ++j) {
                    const int r = map_[m.elements[e][i]], c = map_[m.elements[e][j]];
                    if (r < 0 || c < 0)
                        continue;
                    const int* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c];
                    const int* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c + 1];
                    slot_[(static_cast<std::size_t>(e) * nl + i) * nl + j] =
                        static_cast<int>(std::lower_bound(begin, end, r) - pattern_.innerIndexPtr());
                }
    }

    const simplex_mesh<Dim>& mesh() const { return *mesh_; }
    std::shared_ptr<const simplex_mesh<Dim>> mesh_ptr() const { return mesh_; }
    int num_free() const { return static_cast<int>(free_.size()); }
    const std::vector<int>& free_nodes() const { return free_; }
    /// Full-length load vector of f.
    const Eigen::VectorXd& load() const { return load_; }

    /// Element coefficient integral for draws X (nullptr: the eta = 0 part).
    double element_coefficient(int e, const std::vector<double>* X, double eta) const
    {
        if (!X)
            return c0_[e];
        double s = 0.0;
        for (int q = 0; q < nq_; ++q) {
            const long k = qcell_[static_cast<std::size_t>(e) * nq_ + q];
            if (k < 0 || k >= static_cast<long>(X->size()))
                throw std::out_of_range("missing draw for cell " + std::to_string(k));
            s += (*X)[k] * qweight_[static_cast<std::size_t>(e) * nq_ + q];
        }
        return c0_[e] + eta * s;
    }

    /// Free-free block of the stiffness matrix.
    sparse_matrix matrix(const std::vector<double>* X = nullptr, double eta = 0.0) const
    {
        sparse_matrix A = pattern_;
        std::fill(A.valuePtr(), A.valuePtr() + A.nonZeros(), 0.0);
        double* v = A.valuePtr();
        for (int e = 0; e < mesh_->num_elements(); ++e) {
            const double c = element_coefficient(e, X, eta);
            for (int k = 0; k < nl * nl; ++k) {
                const int s = slot_[static_cast<std::size_t>(e) * nl * nl + k];
                if (s >= 0)
                    v[s] += c * gram_[e][k];
            }
        }
        return A;
    }

    /// Free-node right-hand sides b - A_fd g for every column of g (full length).
    Eigen::MatrixXd reduced_rhs(const Eigen::MatrixXd& b, const Eigen::MatrixXd& g,
                                const std::vector<double>* X = nullptr, double eta = 0.0) const
    {
        Eigen::MatrixXd r(num_free(), b.cols());
        for (int k = 0; k < num_free(); ++k)
            r.row(k) = b.row(free_[k]);
        const auto& m = *mesh_;
        for (int e = 0; e < m.num_elements(); ++e) {
            const auto& el = m.elements[e];
            bool touches = false;
            for (int j = 0; j < nl; ++j)
                touches = touches || map_[el[j]] < 0;
            if (!touches)
                continue;
            const double c = element_coefficient(e, X, eta);
            for (int i = 0; i < nl; ++i) {
                const int ri = map_[el[i]];
                if (ri < 0)
                    continue;
                for (int j = 0; j < nl; ++j)
                    if (map_[el[j]] < 0)
                        r.row(ri) -= (c * gram_[e][i * nl + j]) * g.row(el[j]);
            }
        }
        return r;
    }

    /// Full-length solution: free values from x, constrained values from g.
    Eigen::MatrixXd expand(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g) const
    {
        Eigen::MatrixXd u = g;
        for (int k = 0; k < num_free(); ++k)
            u.row(free_[k]) = x.row(k);
        return u;
    }

private:
    std::shared_ptr<const simplex_mesh<Dim>> mesh_;
    int nq_ = 0;
    std::vector<int> map_, free_;
    std::vector<double> c0_;
    std::vector<long> qcell_;
    std::vector<double> qweight_;
    std::vector<std::array<double, nl * nl>> gram_;
    Eigen::VectorXd load_;
    sparse_matrix pattern_;
    std::vector<int> slot_;
};

/// LDLT factorisation with a positive-pivot check.
template <typename Solver>
void factorize_spd(Solver& ldlt, const sparse_matrix& A)
{
    ldlt.factorize(A);
    if (ldlt.info() != Eigen::Success)
        throw numerical_error("sparse factorisation failed");
    if (A.rows() > 0 && ldlt.vectorD().minCoeff() <= 0)
        throw numerical_error("system is not positive definite (min pivot " +
                              std::to_string(ldlt.vectorD().minCoeff()) + ")");
}

/// Normwise backward-error check used after every direct solve.
inline void check_residual(const sparse_matrix& A, const Eigen::MatrixXd& x, const Eigen::MatrixXd& r,
                           double limit)
{
    const double an = detail::inf_norm(A);
    for (int c = 0; c < r.cols(); ++c) {
        const double rn = r.col(c).norm();
        if (rn == 0.0)
            continue;
        const double res = (A * x.col(c) - r.col(c)).norm() / (an * x.col(c).norm() + rn);
        if (!(res <= limit))
            throw numerical_error("linear solve residual " + std::to_string(res) + " exceeds tolerance");
    }
}

/// Preconditioned CG on A x = r with the factorised preconditioner M.
/// Stops on the true relative residual.
inline Eigen::VectorXd preconditioned_cg(const sparse_matrix& A, const Eigen::VectorXd& r,
                                         const natural_ldlt& M, double tol,
                                         int max_iterations, int* iterations = nullptr)
{
    const double rn = r.norm();
    Eigen::VectorXd x = M.solve(r);
    if (rn == 0.0)
        return x;
    Eigen::VectorXd res = r - A * x;
    Eigen::VectorXd z = M.solve(res);
    Eigen::VectorXd p = z;
    double rz = res.dot(z);
    int it = 0;
    while (res.norm() > tol * rn) {
        if (it >= max_iterations)
            throw numerical_error("PCG did not converge: relative residual " + std::to_string(res.norm() / rn) +
                                  " after " + std::to_string(it) + " iterations");
        const Eigen::VectorXd Ap = A * p;
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        res -= alpha * Ap;
        z = M.solve(res);
        const double rz_new = res.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++it;
        if (it % 50 == 0)
            res = r - A * x;
    }
    if (iterations)
        *iterations = it;
    return x;
}

inline Eigen::VectorXd solve_dirichlet(const sparse_system& sys, const Eigen::VectorXd& g, solve_options opts = {})
{
    return dirichlet_solver(sys.matrix, sys.constrained, opts).solve(sys.rhs, g);
}

inline Eigen::VectorXd solve_dirichlet(const sparse_system& sys, solve_options opts = {})
{
    return solve_dirichlet(sys, Eigen::VectorXd::Zero(sys.rhs.size()), opts);
}

} // namespace wsmsfem
