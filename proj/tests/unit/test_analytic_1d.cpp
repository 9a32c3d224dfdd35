#include <gtest/gtest.h>

#include "wsmsfem/analytic_1d.hpp"
#include "wsmsfem/coefficients.hpp"

#include <random>

using namespace wsmsfem;

namespace {

std::vector<double> uniform_nodes(int n)
{
    std::vector<double> x(n + 1);
    for (int i = 0; i <= n; ++i)
        x[i] = static_cast<double>(i) / n;
    return x;
}

} // namespace

TEST(ExactSolution, ConstantCoefficientParabola)
{
    const auto u = exact_solution(make_one_d_problem([](double) { return 1.0; }, 1.0, 0.1));
    for (double x : {0.0, 0.13, 0.5, 0.91, 1.0}) {
        EXPECT_NEAR(u.value(x), x * (1 - x) / 2, 1e-13);
        EXPECT_NEAR(u.derivative(x), 0.5 - x, 1e-13);
    }
    EXPECT_NEAR(u.flux_constant(), 0.5, 1e-14);
    EXPECT_NEAR(u.end_value(), 0.0, 1e-14);
}

TEST(ExactSolution, OscillatingCoefficientSatisfiesBoundaryAndFlux)
{
    const auto spec = preset<1>("oned-multifreq", 0.025, 0, 55, 1);
    const auto u = exact_solution(make_one_d_problem([&](double x) { return spec.a0(make_point<1>(x)); }, 1.0, 0.025));
    EXPECT_NEAR(u.end_value(), 0.0, 1e-12);
    // a u' + x is constant
    for (double x : {0.01, 0.3, 0.77})
        EXPECT_NEAR(spec.a0(make_point<1>(x)) * u.derivative(x) + x, u.flux_constant(), 1e-12);
}

TEST(ExactSolution, ZeroLoad)
{
    const auto u = exact_solution(make_one_d_problem([](double x) { return 2 + std::sin(30 * x); }, 0.0, 0.1));
    for (double x : {0.2, 0.6})
        EXPECT_EQ(u.value(x), 0.0);
}

TEST(ExactSolution, GeneralLoad)
{
    one_d_problem p = make_one_d_problem([](double) { return 1.0; }, 0.0, 0.1);
    p.f = [](double x) { return pi * pi * std::sin(pi * x); };
    p.f_constant.reset();
    const auto u = exact_solution(p);
    for (double x : {0.1, 0.5, 0.8})
        EXPECT_NEAR(u.value(x), std::sin(pi * x), 1e-10);
}

TEST(HarmonicBasis, PartitionOfUnityAndNodalValues)
{
    const auto b = msfem_basis_1d(make_one_d_problem([](double x) { return 3 + std::cos(40 * x); }, 1.0, 0.05),
                                  uniform_nodes(7));
    for (std::size_t K = 0; K < b.num_elements(); ++K) {
        const double a = b.nodes()[K], c = b.nodes()[K + 1];
        EXPECT_NEAR(b.phi(K, 0, a), 1.0, 1e-14);
        EXPECT_NEAR(b.phi(K, 1, a), 0.0, 1e-14);
        EXPECT_NEAR(b.phi(K, 0, c), 0.0, 1e-12);
        EXPECT_NEAR(b.phi(K, 1, c), 1.0, 1e-12);
        for (double t : {0.1, 0.5, 0.9}) {
            const double x = a + t * (c - a);
            EXPECT_NEAR(b.phi(K, 0, x) + b.phi(K, 1, x), 1.0, 1e-14);
            EXPECT_NEAR(b.dphi(K, 0, x) + b.dphi(K, 1, x), 0.0, 1e-14);
        }
    }
}

TEST(HarmonicBasis, ConstantCoefficientGivesHats)
{
    const auto b = msfem_basis_1d(make_one_d_problem([](double) { return 4.0; }, 1.0, 0.1), uniform_nodes(4));
    EXPECT_NEAR(b.phi(1, 1, 0.3), 0.2, 1e-14);
    EXPECT_NEAR(b.dphi(1, 1, 0.3), 4.0, 1e-12);
}

TEST(HarmonicBasis, RejectsBadNodes)
{
    const auto p = make_one_d_problem([](double) { return 1.0; }, 1.0, 0.1);
    EXPECT_THROW(msfem_basis_1d(p, {0.0}), std::invalid_argument);
    EXPECT_THROW(msfem_basis_1d(p, {0.1, 1.0}), std::invalid_argument);
    EXPECT_THROW(msfem_basis_1d(p, {0.0, 0.6, 0.4, 1.0}), std::invalid_argument);
}

TEST(EnergyBound, ConstantCoefficientClosedForm)
{
    // u_h is the P1 interpolant; ||u - u_h||_E = h / (2 sqrt 3) against the bound h / pi
    const auto r = verify_energy_bound(make_one_d_problem([](double) { return 1.0; }, 1.0, 0.25, 1.0), uniform_nodes(4));
    EXPECT_NEAR(r.lhs, 0.25 / (2 * std::sqrt(3.0)), 1e-12);
    EXPECT_NEAR(r.rhs, 0.25 / pi, 1e-14);
    EXPECT_TRUE(r.holds);
}

TEST(EnergyBound, NodallyExactAndOptimal)
{
    const auto spec = preset<1>("oned-multifreq", 0.025, 0, 55, 1);
    const auto p = make_one_d_problem([&](double x) { return spec.a0(make_point<1>(x)); }, 1.0, 0.025, 5.0);
    const auto r = verify_energy_bound(p, uniform_nodes(10));
    EXPECT_LT(r.max_nodal_error, 1e-12);
    EXPECT_NEAR(r.lhs, r.interpolant_error, 1e-10);
    EXPECT_TRUE(r.holds);
    EXPECT_GT(r.lhs, 0.0);
}

TEST(EnergyBound, RandomCoefficients)
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double nu = 0.5 + 4 * u(rng), amp = 5 * u(rng), freq = 5 + 200 * u(rng), ph = 6 * u(rng);
        const auto p = make_one_d_problem([=](double x) { return nu + amp * std::pow(std::sin(freq * x + ph), 2); },
                                          0.5 + u(rng), 2 * pi / freq, nu, 200);
        std::vector<double> nodes{0.0};
        const int n = 2 + static_cast<int>(10 * u(rng));
        for (int i = 1; i < n; ++i)
            nodes.push_back((i + 0.4 * (u(rng) - 0.5)) / n);
        nodes.push_back(1.0);
        const auto r = verify_energy_bound(p, nodes);
        EXPECT_TRUE(r.holds) << "case " << t << ": " << r.lhs << " > " << r.rhs;
        EXPECT_LT(r.max_nodal_error, 1e-9);
    }
}

TEST(EnergyBound, RequiresPositiveLowerBound)
{
    EXPECT_THROW(verify_energy_bound(make_one_d_problem([](double) { return 1.0; }, 1.0, 0.1), uniform_nodes(3)),
                 std::invalid_argument);
}
