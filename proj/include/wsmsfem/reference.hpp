#pragma once

#include "field.hpp"

namespace wsmsfem {

/// Number of fine intervals per unit for the reference mesh: the smallest
/// divisor of basis_n that resolves h_fine, preferring multiples of q = 1/eps
/// so that fine elements never straddle eps-cells. Falls back to basis_n.
inline long choose_reference_n(long basis_n, double h_fine, long q)
{
    const long need = std::max(1L, static_cast<long>(std::ceil(1.0 / h_fine - 1e-9)));
    long plain = 0;
    for (long d = need; d <= basis_n; ++d) {
        if (basis_n % d != 0)
            continue;
        if (d % q == 0)
            return d;
        if (plain == 0)
            plain = d;
    }
    return plain ? plain : basis_n;
}

/// Fine P1 Galerkin solver of the full problem on a structured mesh. The
/// deterministic part a0 is factorised once and preconditions CG for each
/// realization; the spectrum of the preconditioned operator lies in the
/// range of a(x)/a0(x), so few iterations are needed for moderate eta.
template <int Dim>
class reference_solver {
public:
    template <typename Rhs>
    reference_solver(const coefficient_spec<Dim>& spec, std::shared_ptr<const simplex_mesh<Dim>> mesh, Rhs&& f,
                     const quadrature_rule<Dim>& rule = default_rule<Dim>(), double tolerance = 1e-12)
        : spec_(spec),
          op_(mesh, [&spec](const point<Dim>& x) { return spec.a0(x); },
              [&spec](const point<Dim>& x) { return spec.b(x); },
              [&spec](const point<Dim>& x) { return spec.cell_of(x); }, f, rule),
          tol_(tolerance)
    {
        if (mesh->h > spec.eps * (1.0 + 1e-12))
            throw std::invalid_argument("reference mesh does not resolve eps (h_fine > eps)");
        rhs_.resize(op_.num_free());
        for (int k = 0; k < op_.num_free(); ++k)
            rhs_(k) = op_.load()(op_.free_nodes()[k]);
        if (op_.num_free() > 0) {
            a0_ = op_.matrix();
            ldlt_.analyzePattern(a0_);
            factorize_spd(ldlt_, a0_);
        }
    }

    std::shared_ptr<const simplex_mesh<Dim>> mesh() const { return op_.mesh_ptr(); }

    p1_field<Dim> solve(const realization<Dim>& r, int* iterations = nullptr) const
    {
        check_realization(spec_, r);
        Eigen::VectorXd x;
        if (op_.num_free() > 0) {
            const sparse_matrix A = spec_.eta == 0.0 ? a0_ : op_.matrix(&r.values, spec_.eta);
            x = preconditioned_cg(A, rhs_, ldlt_, tol_, 5000, iterations);
        }
        const Eigen::MatrixXd zero = Eigen::VectorXd::Zero(op_.mesh().num_nodes());
        const Eigen::MatrixXd u = op_.expand(x, zero);
        return {op_.mesh_ptr(), u.col(0)};
    }

private:
    coefficient_spec<Dim> spec_;
    affine_operator<Dim> op_;
    double tol_;
    Eigen::VectorXd rhs_;
    sparse_matrix a0_;
    natural_ldlt ldlt_;
};

template <int Dim, typename Rhs>
p1_field<Dim> solve_reference(const coefficient_spec<Dim>& spec, const realization<Dim>& r, Rhs&& f,
                              std::shared_ptr<const simplex_mesh<Dim>> mesh,
                              const quadrature_rule<Dim>& rule = default_rule<Dim>())
{
    return reference_solver<Dim>(spec, mesh, f, rule).solve(r);
}

template <int Dim, typename Rhs>
p1_field<Dim> solve_reference(const coefficient_spec<Dim>& spec, const realization<Dim>& r, Rhs&& f, double h_fine)
{
    auto mesh = std::make_shared<const simplex_mesh<Dim>>(lattice_mesh<Dim>(checked_reciprocal(h_fine, "h_fine")));
    return solve_reference(spec, r, f, mesh);
}

} // namespace wsmsfem
