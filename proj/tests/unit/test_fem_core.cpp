#include <gtest/gtest.h>

#include "wsmsfem/wsmsfem.hpp"

#include <random>

using namespace wsmsfem;

namespace {

template <int Dim>
std::shared_ptr<const simplex_mesh<Dim>> grid(long n)
{
    return std::make_shared<const simplex_mesh<Dim>>(lattice_mesh<Dim>(n));
}

double one(const point<1>&) { return 1.0; }

// dense symmetric matrix of a sparse one
Eigen::MatrixXd dense(const sparse_matrix& A) { return Eigen::MatrixXd(A); }

} // namespace

TEST(Assembly, LaplacianStencil1D)
{
    const auto m = grid<1>(2);
    const auto sys = assemble_p1(*m, one, [](const point<1>&) { return 0.0; });
    Eigen::Matrix3d expect;
    expect << 2, -2, 0, -2, 4, -2, 0, -2, 2;
    EXPECT_LT((dense(sys.matrix) - expect).norm(), 1e-13);
}

TEST(Assembly, LinearInCoefficient)
{
    const auto m = grid<2>(5);
    const auto f = [](const point<2>&) { return 1.0; };
    const auto a = assemble_p1(*m, [](const point<2>&) { return 1.0; }, f);
    const auto c = assemble_p1(*m, [](const point<2>&) { return 3.5; }, f);
    EXPECT_LT((dense(c.matrix) - 3.5 * dense(a.matrix)).norm(), 1e-12 * dense(c.matrix).norm());
}

TEST(Assembly, Symmetric)
{
    const auto spec = preset<2>("twod-multifreq", 0.1, 0, 0, 1);
    const auto m = grid<2>(20);
    const auto sys = assemble_p1(*m, [&](const point<2>& x) { return spec.a0(x); }, [](const point<2>&) { return 1.0; });
    const Eigen::MatrixXd A = dense(sys.matrix);
    EXPECT_LT((A - A.transpose()).norm(), 1e-12 * A.norm());
}

TEST(Assembly, OscillatoryCoefficientAgainstClosedForm1D)
{
    // a = 5 + 50 sin^2(pi x) = 30 - 25 cos(2 pi x); integral over (x0,x1) in closed form
    const auto m = grid<1>(3);
    const auto a = [](const point<1>& x) { return 5 + 50 * std::pow(std::sin(pi * x(0)), 2); };
    const auto sys = assemble_p1(*m, a, [](const point<1>&) { return 0.0; }, high_order_rule<1>(12));
    const Eigen::MatrixXd A = dense(sys.matrix);
    for (int e = 0; e < 3; ++e) {
        const double x0 = e / 3.0, x1 = (e + 1) / 3.0, h = 1.0 / 3;
        const double I = 30 * h - 25 / (2 * pi) * (std::sin(2 * pi * x1) - std::sin(2 * pi * x0));
        // off-diagonal entries receive a single element contribution
        EXPECT_NEAR(A(e, e + 1), -I / (h * h), 1e-8 * I / (h * h));
    }
}

TEST(Assembly, OscillatoryCoefficientAgainstDenseOracle2D)
{
    const auto a = [](const point<2>& x) {
        return 5 + 50 * std::pow(std::sin(pi * x(0) * 3), 2) * std::pow(std::sin(pi * x(1) * 3), 2);
    };
    const auto m = grid<2>(2);
    const auto sys = assemble_p1(*m, a, [](const point<2>&) { return 0.0; }, high_order_rule<2>(16));
    // oracle: tensor Gauss on the square [0,1]^2 mapped by the Duffy transform
    std::vector<double> gx, gw;
    gauss_legendre(40, gx, gw);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m->num_nodes(), m->num_nodes());
    for (int e = 0; e < m->num_elements(); ++e) {
        const auto g = geometry(*m, e);
        double I = 0.0;
        for (std::size_t i = 0; i < gx.size(); ++i)
            for (std::size_t j = 0; j < gx.size(); ++j) {
                const double u = gx[i], v = gx[j] * (1 - gx[i]);
                I += gw[i] * gw[j] * (1 - gx[i]) * a(g.map(make_point<2>(u, v)));
            }
        I *= 2 * g.measure;
        const auto& el = m->elements[e];
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                A(el[p], el[q]) += I * g.grad[p].dot(g.grad[q]);
    }
    const Eigen::MatrixXd B = dense(sys.matrix);
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            EXPECT_NEAR(B(i, j), A(i, j), 1e-8 * std::max(1.0, std::abs(A(i, j))));
}

TEST(Dirichlet, PoissonNodalValuesExact1D)
{
    const auto m = grid<1>(16);
    const auto sys = assemble_p1(*m, one, one, high_order_rule<1>(2));
    const Eigen::VectorXd u = solve_dirichlet(sys);
    for (int i = 0; i < m->num_nodes(); ++i) {
        const double x = m->nodes[i](0);
        EXPECT_NEAR(u(i), x * (1 - x) / 2, 1e-13);
    }
}

TEST(Dirichlet, ZeroLoadZeroSolution)
{
    const auto m = grid<2>(8);
    const auto sys = assemble_p1(*m, [](const point<2>&) { return 2.0; }, [](const point<2>&) { return 0.0; });
    EXPECT_EQ(solve_dirichlet(sys).norm(), 0.0);
}

TEST(Dirichlet, AffineDataIsDiscreteHarmonic)
{
    const auto m = grid<2>(9);
    const auto sys = assemble_p1(*m, [](const point<2>&) { return 1.0; }, [](const point<2>&) { return 0.0; });
    Eigen::VectorXd g(m->num_nodes());
    for (int i = 0; i < m->num_nodes(); ++i)
        g(i) = 0.3 + 2 * m->nodes[i](0) - m->nodes[i](1);
    const Eigen::VectorXd u = solve_dirichlet(sys, g);
    EXPECT_LT((u - g).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Dirichlet, BoundaryValuesImposedExactly)
{
    const auto spec = preset<2>("twod-classical", 0.25, 0, 0, 1);
    const auto m = grid<2>(8);
    const auto sys = assemble_p1(*m, [&](const point<2>& x) { return spec.a0(x); }, [](const point<2>&) { return 1.0; });
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m->num_nodes());
    for (int i = 0; i < m->num_nodes(); ++i)
        if (m->boundary[i])
            g(i) = std::sin(3.0 * i);
    const Eigen::VectorXd u = solve_dirichlet(sys, g);
    for (int i = 0; i < m->num_nodes(); ++i) {
        if (m->boundary[i]) {
            EXPECT_EQ(u(i), g(i));
        }
    }
}

TEST(Dirichlet, GalerkinOrthogonalityAndEnergyIdentity)
{
    const auto spec = preset<2>("twod-multifreq", 0.125, 0.5, 10, 1);
    const auto r = draw_realization(spec, 1, 5);
    const auto a = [&](const point<2>& x) { return spec.value(x, r[spec.cell_of(x)]); };
    const auto m = grid<2>(32);
    const auto sys = assemble_p1(*m, a, [](const point<2>&) { return 1.0; });
    const Eigen::VectorXd u = solve_dirichlet(sys);
    const Eigen::VectorXd res = sys.matrix * u - sys.rhs;
    double worst = 0.0;
    for (int i = 0; i < m->num_nodes(); ++i)
        if (!m->boundary[i])
            worst = std::max(worst, std::abs(res(i)));
    EXPECT_LT(worst, 1e-9 * sys.rhs.lpNorm<Eigen::Infinity>());
    const double E = energy_norm(p1_field<2>{m, u}, a);
    const double uAu = u.dot(sys.matrix * u);
    EXPECT_NEAR(E * E, uAu, 1e-12 * uAu);
}

TEST(Dirichlet, IterativeMatchesDirect)
{
    const auto spec = preset<2>("twod-classical", 0.125, 0, 0, 1);
    const auto m = grid<2>(24);
    const auto sys = assemble_p1(*m, [&](const point<2>& x) { return spec.a0(x); }, [](const point<2>&) { return 1.0; });
    solve_options cg;
    cg.kind = solver_kind::cg;
    cg.tolerance = 1e-12;
    const Eigen::VectorXd a = solve_dirichlet(sys), b = solve_dirichlet(sys, cg);
    EXPECT_LT((a - b).norm(), 1e-9 * a.norm());
}

TEST(Dirichlet, SmallestEigenvalueBoundedByEllipticity)
{
    const auto spec = preset<1>("oned-multifreq", 0.25, 0, 0, 1);
    const auto m = grid<1>(40);
    const auto f = [](const point<1>&) { return 0.0; };
    const auto A = assemble_p1(*m, [&](const point<1>& x) { return spec.a0(x); }, f);
    const auto L = assemble_p1(*m, one, f);
    const auto interior = [&](const sparse_matrix& S) { return dense(S).block(1, 1, 39, 39).eval(); };
    const double la = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(interior(A.matrix)).eigenvalues().minCoeff();
    const double ll = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(interior(L.matrix)).eigenvalues().minCoeff();
    EXPECT_GE(la, 5.0 * ll * (1 - 1e-12));
}

TEST(AffineOperator, MatchesDirectAssemblyOnFreeNodes)
{
    const auto spec = preset<2>("twod-multifreq", 0.125, 0.7, 10, 1);
    const auto r = draw_realization(spec, 2, 8);
    const auto m = grid<2>(16);
    affine_operator<2> op(
        m, [&](const point<2>& x) { return spec.a0(x); }, [&](const point<2>& x) { return spec.b(x); },
        [&](const point<2>& x) { return spec.cell_of(x); }, [](const point<2>&) { return 1.0; });
    const auto full = assemble_p1(*m, [&](const point<2>& x) { return spec.value(x, r[spec.cell_of(x)]); },
                                  [](const point<2>&) { return 1.0; });
    const Eigen::MatrixXd F = dense(full.matrix);
    const Eigen::MatrixXd A = dense(op.matrix(&r.values, spec.eta));
    const auto& fr = op.free_nodes();
    ASSERT_EQ(op.num_free(), 15 * 15);
    for (int k = 0; k < op.num_free(); ++k)
        for (int l = 0; l < op.num_free(); ++l)
            EXPECT_NEAR(A(k, l), F(fr[k], fr[l]), 1e-11 * F.norm());
    // free nodes are a permutation of the interior nodes
    std::vector<int> sorted(fr.begin(), fr.end());
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    for (int i : sorted)
        EXPECT_FALSE(m->boundary[i]);
    const std::vector<double> short_draw(3, 0.5);
    EXPECT_THROW(op.matrix(&short_draw, 0.5), std::out_of_range);
    EXPECT_LT((dense(op.matrix(nullptr, 0.5)) - dense(op.matrix())).norm(), 1e-15);
}

TEST(AffineOperator, SolveMatchesDirichletSolver)
{
    const auto spec = preset<2>("twod-classical", 0.125, 0.3, 0, 1);
    const auto r = draw_realization(spec, 0, 3);
    const auto m = grid<2>(16);
    affine_operator<2> op(
        m, [&](const point<2>& x) { return spec.a0(x); }, [&](const point<2>& x) { return spec.b(x); },
        [&](const point<2>& x) { return spec.cell_of(x); }, [](const point<2>&) { return 0.0; });
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m->num_nodes(), 1);
    for (int i = 0; i < m->num_nodes(); ++i)
        if (m->boundary[i])
            g(i, 0) = m->nodes[i](0) * m->nodes[i](1);
    const sparse_matrix A = op.matrix(&r.values, spec.eta);
    natural_ldlt ldlt;
    ldlt.analyzePattern(A);
    factorize_spd(ldlt, A);
    const Eigen::MatrixXd b = op.reduced_rhs(Eigen::MatrixXd::Zero(m->num_nodes(), 1), g, &r.values, spec.eta);
    const Eigen::MatrixXd u = op.expand(ldlt.solve(b), g);
    const auto full = assemble_p1(*m, [&](const point<2>& x) { return spec.value(x, r[spec.cell_of(x)]); },
                                  [](const point<2>&) { return 0.0; });
    const Eigen::VectorXd v = solve_dirichlet(full, Eigen::VectorXd(g.col(0)));
    EXPECT_LT((u.col(0) - v).norm(), 1e-11 * v.norm());
}

TEST(PreconditionedCG, ConvergesToDirectSolution)
{
    const auto spec = preset<2>("twod-classical", 0.125, 1.0, 0, 1);
    const auto r = draw_realization(spec, 4, 1);
    const auto m = grid<2>(32);
    affine_operator<2> op(
        m, [&](const point<2>& x) { return spec.a0(x); }, [&](const point<2>& x) { return spec.b(x); },
        [&](const point<2>& x) { return spec.cell_of(x); }, [](const point<2>&) { return 1.0; });
    const sparse_matrix A0 = op.matrix(), A = op.matrix(&r.values, 1.0);
    natural_ldlt M;
    M.analyzePattern(A0);
    factorize_spd(M, A0);
    Eigen::VectorXd rhs(op.num_free());
    for (int k = 0; k < op.num_free(); ++k)
        rhs(k) = op.load()(op.free_nodes()[k]);
    int it = 0;
    const Eigen::VectorXd x = preconditioned_cg(A, rhs, M, 1e-12, 500, &it);
    Eigen::SimplicialLDLT<sparse_matrix> direct(A);
    EXPECT_LT((x - direct.solve(rhs)).norm(), 1e-10 * x.norm());
    EXPECT_GT(it, 0);
    EXPECT_LT(it, 60);
    EXPECT_THROW(preconditioned_cg(A, rhs, M, 1e-14, 1, nullptr), numerical_error);
}

TEST(Reference, MatchesAnalyticSolutionWithoutNoise)
{
    const auto spec = preset<1>("oned-multifreq", 0.025, 0.0, 55, 1);
    const auto r = draw_realization(spec, 0, 1);
    double prev = 0.0;
    for (long n : {800L, 1600L}) {
        const auto u = solve_reference(spec, r, one, 1.0 / n);
        const exact_solution_1d ex(make_one_d_problem([&](double x) { return spec.a0(make_point<1>(x)); }, 1.0, 0.025));
        double e2 = 0.0, n2 = 0.0;
        std::vector<double> gx, gw;
        gauss_legendre(4, gx, gw);
        for (int e = 0; e < u.mesh->num_elements(); ++e) {
            const auto g = geometry(*u.mesh, e);
            const double du = u.gradient_in(e)(0);
            for (std::size_t q = 0; q < gx.size(); ++q) {
                const double x = g.map(make_point<1>(gx[q]))(0);
                const double d = ex.derivative(x);
                e2 += gw[q] * g.measure * (du - d) * (du - d);
                n2 += gw[q] * g.measure * d * d;
            }
        }
        const double rel = std::sqrt(e2 / n2);
        EXPECT_LT(rel, 0.1);
        if (prev > 0) {
            EXPECT_NEAR(prev / rel, 2.0, 0.2); // first order in h_fine
        }
        prev = rel;
    }
}

TEST(Reference, ConstantCoefficientScaling)
{
    const auto spec = custom_coefficient<2>(1.0 / 32, 0.0, [](const point<2>&) { return 4.0; });
    const auto unit = custom_coefficient<2>(1.0 / 32, 0.0, [](const point<2>&) { return 1.0; });
    const auto m = grid<2>(64);
    const auto f = [](const point<2>&) { return 1.0; };
    const auto u4 = solve_reference(spec, constant_realization(spec, 0.0), f, m);
    const auto u1 = solve_reference(unit, constant_realization(unit, 0.0), f, m);
    EXPECT_LT((4.0 * u4.values - u1.values).norm(), 1e-9 * u1.values.norm());
    // centre value of the unit-square Poisson problem with f = 1
    EXPECT_NEAR(u1.value(make_point<2>(0.5, 0.5)), 0.0736713532, 2e-4);
}

TEST(Reference, RejectsUnderresolvedMesh)
{
    const auto spec = preset<1>("oned-multifreq", 0.025, 0.1, 55, 1);
    EXPECT_THROW(reference_solver<1>(spec, grid<1>(20), one), std::invalid_argument);
}

TEST(Norms, ClosedForms)
{
    const auto m = grid<1>(10);
    p1_field<1> u{m, Eigen::VectorXd(m->num_nodes())};
    for (int i = 0; i < m->num_nodes(); ++i)
        u.values(i) = m->nodes[i](0);
    EXPECT_NEAR(norm(u, norm_kind::L2), 1 / std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(norm(u, norm_kind::H1_semi), 1.0, 1e-14);
    EXPECT_NEAR(norm(u, norm_kind::H1), std::sqrt(4.0 / 3), 1e-14);
    const p1_field<1> z{m, Eigen::VectorXd::Zero(m->num_nodes())};
    for (auto k : {norm_kind::L2, norm_kind::H1_semi, norm_kind::H1})
        EXPECT_EQ(norm(z, k), 0.0);
}

TEST(Norms, BrokenNormOfConformingField)
{
    const auto coarse = std::make_shared<const simplex_mesh<2>>(build_coarse_mesh<2>(0.25));
    const auto geo = make_geometry<2>(coarse, 1.0, 1.0 / 32, 1.0 / 8);
    const auto fine = grid<2>(geo->fine_n);
    p1_field<2> u{fine, Eigen::VectorXd(fine->num_nodes())};
    for (int i = 0; i < fine->num_nodes(); ++i)
        u.values(i) = std::sin(5 * fine->nodes[i](0)) * std::cos(3 * fine->nodes[i](1));
    const auto b = to_broken(u, geo->layout);
    EXPECT_NEAR(norm(b, norm_kind::broken_H1), norm(u, norm_kind::H1), 1e-12 * norm(u, norm_kind::H1));
    EXPECT_NEAR(norm(b, norm_kind::L2), norm(u, norm_kind::L2), 1e-12);
    const auto back = to_mesh(b, fine);
    EXPECT_LT((back.values - u.values).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Transfer, ReproducesAffineFields)
{
    const auto a = grid<2>(4), b = grid<2>(12);
    p1_field<2> u{a, Eigen::VectorXd(a->num_nodes())};
    for (int i = 0; i < a->num_nodes(); ++i)
        u.values(i) = 1 - 2 * a->nodes[i](0) + 0.5 * a->nodes[i](1);
    const auto v = transfer(u, b);
    for (int i = 0; i < b->num_nodes(); ++i)
        EXPECT_NEAR(v.values(i), 1 - 2 * b->nodes[i](0) + 0.5 * b->nodes[i](1), 1e-14);
    const auto w = transfer(u, a);
    EXPECT_LT((w.values - u.values).norm(), 1e-14);
}

TEST(Transfer, RoundTripLosesOscillations)
{
    const auto fine = grid<1>(48), coarse = grid<1>(4);
    p1_field<1> u{fine, Eigen::VectorXd(fine->num_nodes())};
    for (int i = 0; i < fine->num_nodes(); ++i)
        u.values(i) = std::sin(40 * fine->nodes[i](0));
    const auto back = transfer(transfer(u, coarse), fine);
    EXPECT_GT(norm_difference(u, back, norm_kind::H1), 1.0);
}

TEST(NestedDissection, ProducesPermutation)
{
    std::vector<int> ids;
    std::vector<std::array<long, 2>> c;
    for (long j = 0; j < 30; ++j)
        for (long i = 0; i < 45; ++i) {
            ids.push_back(static_cast<int>(c.size()));
            c.push_back({i, j});
        }
    std::vector<int> out;
    detail::nested_dissection(ids, c, out);
    ASSERT_EQ(out.size(), c.size());
    std::sort(out.begin(), out.end());
    for (std::size_t k = 0; k < out.size(); ++k)
        EXPECT_EQ(out[k], static_cast<int>(k));
}
