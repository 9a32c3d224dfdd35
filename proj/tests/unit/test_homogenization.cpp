#include <gtest/gtest.h>

#include "wsmsfem/homogenization.hpp"

using namespace wsmsfem;

namespace {

// Relative H1 seminorm and L2 errors of an expansion against the exact 1D solution,
// by composite Gauss over a grid aligned with the eps-cells.
template <typename Approx>
double relative_h1(const exact_solution_1d& u, const Approx& v, double eps)
{
    std::vector<double> gx, gw;
    gauss_legendre(6, gx, gw);
    const long n = std::lround(1.0 / eps) * 200;
    double e2 = 0.0, n2 = 0.0;
    for (long j = 0; j < n; ++j) {
        const double a = static_cast<double>(j) / n, h = 1.0 / n;
        for (std::size_t q = 0; q < gx.size(); ++q) {
            const double x = a + h * gx[q];
            const double d = u.derivative(x) - v.derivative(x);
            e2 += gw[q] * h * d * d;
            n2 += gw[q] * h * u.derivative(x) * u.derivative(x);
        }
    }
    return std::sqrt(e2 / n2);
}

template <typename Approx>
double relative_l2(const exact_solution_1d& u, const Approx& v, double eps)
{
    std::vector<double> gx, gw;
    gauss_legendre(6, gx, gw);
    const long n = std::lround(1.0 / eps) * 200;
    double e2 = 0.0, n2 = 0.0;
    for (long j = 0; j < n; ++j) {
        const double a = static_cast<double>(j) / n, h = 1.0 / n;
        for (std::size_t q = 0; q < gx.size(); ++q) {
            const double x = a + h * gx[q];
            const double d = u.value(x) - v.value(x);
            e2 += gw[q] * h * d * d;
            n2 += gw[q] * h * u.value(x) * u.value(x);
        }
    }
    return std::sqrt(e2 / n2);
}

double one(const point<1>&) { return 1.0; }

} // namespace

TEST(Correctors, OneDimensionalHarmonicMean)
{
    const auto c = compute_cell_correctors(preset<1>("oned-multifreq", 0.025, 0.1, 55, 1), 400);
    EXPECT_NEAR(c.A_star(0, 0), std::sqrt(275.0), 0.005 * std::sqrt(275.0));
}

TEST(Correctors, LaminateTensor)
{
    const auto spec = custom_coefficient<2>(0.1, 0.0, [](const point<2>& y) {
        const double s = std::sin(pi * y(0));
        return 5.0 + 50.0 * s * s;
    });
    const auto c = compute_cell_correctors(spec, 64, false);
    EXPECT_NEAR(c.A_star(0, 0), std::sqrt(275.0), 0.01 * std::sqrt(275.0));
    EXPECT_NEAR(c.A_star(1, 1), 30.0, 0.01 * 30.0);
    EXPECT_NEAR(c.A_star(0, 1), 0.0, 1e-8);
}

TEST(Correctors, ConstantCoefficientHasZeroCorrector)
{
    const auto spec = custom_coefficient<2>(0.1, 0.0, [](const point<2>&) { return 3.5; });
    const auto c = compute_cell_correctors(spec, 16, false);
    EXPECT_LT((c.A_star - 3.5 * matrix<2>::Identity()).norm(), 1e-12);
    EXPECT_LT(c.w[0].values.norm(), 1e-12);
    EXPECT_LT(c.w[1].values.norm(), 1e-12);
}

TEST(Correctors, ZeroMean)
{
    const auto c = compute_cell_correctors(preset<2>("twod-classical", 0.1, 0.1, 0, 1), 32, false);
    EXPECT_NEAR(c.w[0].mean(), 0.0, 1e-12);
    EXPECT_NEAR(c.w[1].mean(), 0.0, 1e-12);
}

TEST(Correctors, PerturbationEqualToCoefficient)
{
    // b = a gives B_bar = A*
    const auto c = compute_cell_correctors(preset<2>("twod-classical", 0.1, 0.1, 0, 1), 32);
    EXPECT_LT((c.B_bar - c.A_star).norm(), 1e-10 * c.A_star.norm());
    EXPECT_LT((c.A1_star - 0.5 * c.A_star).norm(), 1e-10 * c.A_star.norm());
}

TEST(Correctors, PsiSolvesItsWeakForm)
{
    const auto spec = preset<2>("twod-multifreq", 0.1, 0.1, 10, 3);
    const auto c = compute_cell_correctors(spec, 32);
    auto a = [&](const point<2>& y) { return spec.a_per(y); };
    auto b = [&](const point<2>& y) { return spec.b_per(y); };
    for (int p = 0; p < 2; ++p)
        EXPECT_LE(psi_residual(a, b, c.w[p], point<2>(point<2>::Unit(p)), c.psi[p]), 1e-9);
}

TEST(Correctors, BetweenHarmonicAndArithmeticMeans)
{
    const auto spec = preset<2>("twod-multifreq", 0.1, 0.1, 10, 1);
    const auto c = compute_cell_correctors(spec, 64, false);
    double am = 0.0, hm = 0.0;
    const int n = 400;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double a = spec.a_per(make_point<2>((i + 0.5) / n, (j + 0.5) / n));
            am += a;
            hm += 1.0 / a;
        }
    am /= n * n;
    hm = n * n / hm;
    const Eigen::SelfAdjointEigenSolver<matrix<2>> es(c.A_star);
    EXPECT_GE(es.eigenvalues()(0), hm * (1 - 1e-3));
    EXPECT_LE(es.eigenvalues()(1), am * (1 + 1e-3));
    EXPECT_NEAR(c.A_star(0, 0), c.A_star(1, 1), 1e-8 * c.A_star(0, 0));
}

TEST(Correctors, RefinementDecreasesEnergy)
{
    // conforming refinement enlarges the corrector space, so A* decreases
    const auto spec = preset<2>("twod-classical", 0.1, 0.1, 0, 1);
    double prev = 1e300;
    for (long n : {8L, 16L, 32L}) {
        const double v = compute_cell_correctors(spec, n, false).A_star(0, 0);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(Correctors, RejectsTinyCell)
{
    EXPECT_THROW(periodic_cell<2>(1), std::invalid_argument);
}

TEST(Homogenized, IdentityTensorParabola)
{
    const auto mesh = std::make_shared<const simplex_mesh<1>>(build_coarse_mesh<1>(0.1));
    const auto u = solve_homogenized(matrix<1>(matrix<1>::Identity()), one, mesh);
    for (int i = 0; i < mesh->num_nodes(); ++i) {
        const double x = mesh->nodes[i](0);
        EXPECT_NEAR(u.values(i), x * (1 - x) / 2, 1e-13);
    }
}

TEST(Homogenized, RejectsNonSymmetricTensor)
{
    const auto mesh = std::make_shared<const simplex_mesh<2>>(build_coarse_mesh<2>(0.5));
    matrix<2> T = matrix<2>::Identity();
    T(0, 1) = 0.5;
    EXPECT_THROW(solve_homogenized(T, [](const point<2>&) { return 1.0; }, mesh), std::invalid_argument);
}

TEST(Homogenized, FirstOrderExpansionInEta)
{
    // u_eta - (u0 + eta E u1) = O(eta^2)
    const auto spec = preset<2>("twod-multifreq", 0.1, 0.1, 10, 1);
    const auto c = compute_cell_correctors(spec, 32, false);
    const auto mesh = std::make_shared<const simplex_mesh<2>>(build_coarse_mesh<2>(1.0 / 16));
    double prev = 0.0;
    for (double eta : {0.2, 0.1, 0.05}) {
        const auto s = solve_homogenized_expansion(c, eta, [](const point<2>&) { return 1.0; }, mesh);
        p1_field<2> lin = s.u0;
        lin.values += eta * c.mean_x * s.u1bar.values;
        const double d = norm_difference(s.u_eta, lin, norm_kind::H1);
        if (prev > 0) {
            EXPECT_GT(prev / d, 3.5);
        }
        prev = d;
    }
}

namespace {

struct two_scale_errors {
    double h1 = 0.0, l2 = 0.0;
};

two_scale_errors two_scale_error(double eps, double eta)
{
    const auto spec = preset<1>("oned-multifreq", eps, eta, 55, 3);
    const auto c = compute_cell_correctors(spec, 400);
    const auto r = draw_realization(spec, 0, 5);
    const auto mesh = std::make_shared<const simplex_mesh<1>>(build_coarse_mesh<1>(1.0 / 800));
    const auto s = solve_homogenized_expansion(c, spec.eta, one, mesh);
    const auto v = two_scale_expansion_1d(spec, r, s.u0, s.u1bar, c);
    const auto u = exact_solution(make_one_d_problem(
        [&](double x) { return spec.value(make_point<1>(x), r[spec.cell_of(make_point<1>(x))]); }, 1.0, eps));
    return {relative_h1(u, v, eps), relative_l2(u, v, eps)};
}

} // namespace

TEST(TwoScale, DeterministicExpansionConverges)
{
    double prev = 0.0;
    for (double eps : {0.1, 0.05, 0.025}) {
        const auto e = two_scale_error(eps, 0.0);
        // H1 floor set by the P1 corrector at cell resolution 400
        EXPECT_LT(e.h1, 0.01);
        if (prev > 0) {
            EXPECT_GT(prev / e.l2, 3.0);
        }
        prev = e.l2;
    }
}

TEST(TwoScale, StochasticTermIsFirstOrderInEta)
{
    const double base = two_scale_error(0.025, 0.0).h1;
    const double small = two_scale_error(0.025, 0.05).h1, large = two_scale_error(0.025, 0.2).h1;
    EXPECT_LT(small, 0.02);
    EXPECT_GT((large - base) / (small - base), 6.0);
}

TEST(Lambda, VanishesWithoutPerturbation)
{
    const auto spec = preset<2>("twod-multifreq", 1.0 / 16, 0.1, 0.0, 1);
    const auto c = compute_cell_correctors(spec, 16, false);
    const auto mesh = build_coarse_mesh<2>(0.25);
    const auto cells = build_cell_index_set(spec.eps, mesh);
    EXPECT_EQ(compute_lambda(c, draw_realization(spec, 0, 1), cells).lambda, 0.0);
}

TEST(Lambda, VanishesAtTheMean)
{
    const auto spec = preset<2>("twod-multifreq", 1.0 / 16, 0.1, 10, 1);
    const auto c = compute_cell_correctors(spec, 16, false);
    const auto mesh = build_coarse_mesh<2>(0.25);
    const auto cells = build_cell_index_set(spec.eps, mesh);
    EXPECT_NEAR(compute_lambda(c, constant_realization(spec, c.mean_x), cells).lambda, 0.0, 1e-14);
}

TEST(Lambda, BelowDeterministicBound)
{
    const auto spec = preset<2>("twod-multifreq", 1.0 / 16, 0.1, 10, 1);
    const auto c = compute_cell_correctors(spec, 32, false);
    const double bound = lambda_bound(spec, c);
    for (double h : {0.5, 0.25}) {
        const auto mesh = build_coarse_mesh<2>(h);
        const auto cells = build_cell_index_set(spec.eps, mesh);
        for (long m = 0; m < 20; ++m)
            EXPECT_LE(compute_lambda(c, draw_realization(spec, m, 3), cells).lambda, bound);
        // extreme draws
        EXPECT_LE(compute_lambda(c, constant_realization(spec, 1.0), cells).lambda, bound);
    }
}

TEST(Lambda, ShrinksWithMoreCellsPerElement)
{
    const auto spec = preset<1>("oned-multifreq", 1.0 / 400, 0.1, 55, 1);
    const auto c = compute_cell_correctors(spec, 200, false);
    const auto coarse = lambda_study(spec, c, 0.1, 50, 2);
    const auto fine = lambda_study(spec, c, 0.02, 50, 2);
    EXPECT_GT(fine.mean_lambda2, coarse.mean_lambda2);
    EXPECT_THROW(lambda_study(spec, c, 0.1, 1, 2), std::invalid_argument);
}

TEST(Lambda, GrowthPrediction)
{
    EXPECT_NEAR(lambda_growth_prediction(1, 10, 20), 2.0 * std::pow(std::log(20.0) / std::log(10.0), 2), 1e-14);
    EXPECT_NEAR(lambda_growth_prediction(2, 32, 128), 4.0 * 1.4 * 1.4, 1e-12);
}
