#include <gtest/gtest.h>

#include "wsmsfem/cells.hpp"
#include "wsmsfem/patch.hpp"

#include <algorithm>
#include <random>
#include <sstream>

using namespace wsmsfem;

TEST(CoarseMesh, IntervalCounts)
{
    const auto m = build_coarse_mesh<1>(1.0 / 30);
    EXPECT_EQ(m.num_nodes(), 31);
    EXPECT_EQ(m.num_elements(), 30);
    EXPECT_EQ(m.num_boundary_nodes(), 2);
}

TEST(CoarseMesh, SquareCounts)
{
    const auto one = build_coarse_mesh<2>(1.0);
    EXPECT_EQ(one.num_nodes(), 4);
    EXPECT_EQ(one.num_elements(), 2);
    EXPECT_EQ(one.num_boundary_nodes(), 4);

    const auto q = build_coarse_mesh<2>(0.25);
    EXPECT_EQ(q.num_nodes(), 25);
    EXPECT_EQ(q.num_elements(), 32);
    EXPECT_EQ(q.num_boundary_nodes(), 16);
}

TEST(CoarseMesh, MeasuresSumToDomain)
{
    for (double h : {1.0 / 7, 1.0 / 30}) {
        const auto m1 = build_coarse_mesh<1>(h);
        const auto m2 = build_coarse_mesh<2>(h);
        double s1 = 0.0, s2 = 0.0;
        for (int e = 0; e < m1.num_elements(); ++e)
            s1 += m1.measure(e);
        for (int e = 0; e < m2.num_elements(); ++e)
            s2 += m2.measure(e);
        EXPECT_NEAR(s1, 1.0, 1e-12);
        EXPECT_NEAR(s2, 1.0, 1e-12);
    }
}

TEST(CoarseMesh, RejectsNonIntegralReciprocal)
{
    EXPECT_THROW(build_coarse_mesh<1>(0.3), sizing_error);
    EXPECT_THROW(build_coarse_mesh<2>(0.0), sizing_error);
    EXPECT_THROW(build_coarse_mesh<2>(-0.25), std::invalid_argument);
}

TEST(CoarseMesh, DeterministicOrdering)
{
    const auto a = build_coarse_mesh<2>(0.125), b = build_coarse_mesh<2>(0.125);
    ASSERT_EQ(a.num_elements(), b.num_elements());
    for (int e = 0; e < a.num_elements(); ++e)
        EXPECT_EQ(a.elements[e], b.elements[e]);
}

TEST(CoarseMesh, DumpListsNodesAndElements)
{
    const auto m = build_coarse_mesh<2>(0.5);
    std::ostringstream os;
    write_mesh(os, m);
    const std::string s = os.str();
    EXPECT_NE(s.find("nodes=9 elements=8"), std::string::npos);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 9 + 8);
}

TEST(Patch, InteriorTriangleScalesAreaByRatioSquared)
{
    const auto m = build_coarse_mesh<2>(0.125);
    int tested = 0;
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto S = build_patch(m, e, 3.0);
        if (S.clipped)
            continue;
        EXPECT_NEAR(S.measure(), 9.0 * m.measure(e), 1e-14);
        ++tested;
    }
    EXPECT_GT(tested, 0);
}

TEST(Patch, ContainsElementAndStaysInDomain)
{
    const auto m = build_coarse_mesh<2>(0.25);
    for (int e = 0; e < m.num_elements(); ++e) {
        const auto S = build_patch(m, e, 3.0);
        for (int k = 0; k < 3; ++k)
            EXPECT_TRUE(S.in_simplex(m.nodes[m.elements[e][k]]));
        for (const auto& p : S.region) {
            EXPECT_GE(p.minCoeff(), -1e-14);
            EXPECT_LE(p.maxCoeff(), 1.0 + 1e-14);
        }
        EXPECT_LE(S.measure(), 9.0 * m.measure(e) + 1e-14);
    }
}

TEST(Patch, CornerElementIsClipped)
{
    const auto m = build_coarse_mesh<2>(0.25);
    const auto S = build_patch(m, 0, 3.0);
    EXPECT_TRUE(S.clipped);
    EXPECT_LT(S.measure(), 9.0 * m.measure(0));
}

TEST(Patch, RatioNearOneShrinksToElement)
{
    const auto m = build_coarse_mesh<2>(0.25);
    const int e = 13;
    const auto S = build_patch(m, e, 1.0 + 1e-12);
    EXPECT_NEAR(S.measure() / m.measure(e), 1.0, 1e-9);
}

TEST(Patch, IntervalPatch)
{
    const auto m = build_coarse_mesh<1>(0.1);
    const auto S = build_patch(m, 5, 3.0);
    EXPECT_FALSE(S.clipped);
    EXPECT_NEAR(S.measure(), 0.3, 1e-14);
    EXPECT_TRUE(build_patch(m, 0, 3.0).clipped);
}

TEST(Patch, RejectsRatioAtMostOne)
{
    const auto m = build_coarse_mesh<2>(0.5);
    EXPECT_THROW(build_patch(m, 0, 1.0), std::invalid_argument);
    EXPECT_THROW(build_patch(m, 0, 0.5), std::invalid_argument);
}

TEST(Patch, IndependentOfEnumerationOrder)
{
    const auto m = build_coarse_mesh<2>(0.25);
    const auto a = build_patch(m, 17, 3.0);
    for (int e = m.num_elements() - 1; e >= 0; --e)
        build_patch(m, e, 3.0);
    const auto b = build_patch(m, 17, 3.0);
    ASSERT_EQ(a.region.size(), b.region.size());
    for (std::size_t i = 0; i < a.region.size(); ++i)
        EXPECT_EQ(a.region[i], b.region[i]);
}

TEST(Cells, OneDimensionalIndexSet)
{
    const auto m = build_coarse_mesh<1>(1.0 / 30);
    const auto c = build_cell_index_set(0.025, m);
    EXPECT_EQ(c.num_cells(), 40);
    EXPECT_EQ(c.count(0), 1u);
    EXPECT_EQ(c.interior[0].front(), 0);
}

TEST(Cells, TwoDimensionalIndexSet)
{
    const auto m = build_coarse_mesh<2>(1.0);
    const auto c = build_cell_index_set(0.5, m);
    EXPECT_EQ(c.num_cells(), 4);
}

TEST(Cells, HalfOpenConvention)
{
    const double eps = 0.25;
    EXPECT_EQ(cell_coordinate(0.25, eps, 4), 0);
    EXPECT_EQ(cell_coordinate(0.2500001, eps, 4), 1);
    EXPECT_EQ(cell_coordinate(0.0, eps, 4), 0);
    EXPECT_EQ(cell_coordinate(1.0, eps, 4), 3);
}

TEST(Cells, EveryPointInExactlyOneCell)
{
    const auto m = build_coarse_mesh<2>(0.25);
    const auto c = build_cell_index_set(1.0 / 12, m);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const point<2> x = make_point<2>(u(rng), u(rng));
        const long k = c.cell_of(x);
        ASSERT_GE(k, 0);
        ASSERT_LT(k, c.num_cells());
        const auto ij = c.multi(k);
        EXPECT_GT(x(0), ij[0] * c.eps - 1e-15);
        EXPECT_LE(x(0), (ij[0] + 1) * c.eps + 1e-15);
        EXPECT_GT(x(1), ij[1] * c.eps - 1e-15);
        EXPECT_LE(x(1), (ij[1] + 1) * c.eps + 1e-15);
    }
}

TEST(Cells, InteriorCountsBoundedByElementMeasure)
{
    for (double eps : {0.25 / 3, 0.025, 0.05}) {
        const auto m = build_coarse_mesh<2>(0.25);
        const auto c = build_cell_index_set(eps, m);
        long total = 0;
        for (int e = 0; e < m.num_elements(); ++e) {
            EXPECT_LE(c.count(e) * eps * eps, m.measure(e) * (1 + 1e-12));
            EXPECT_GT(c.count(e), 0u);
            total += static_cast<long>(c.count(e));
        }
        // interior cells of distinct elements are disjoint
        EXPECT_LE(total, c.num_cells());
    }
}

TEST(Cells, InteriorCountScalesWithResolution1D)
{
    // N_K eps >= alpha h with alpha independent of h and eps
    for (long n : {5L, 10L, 30L})
        for (long r : {1L, 2L, 8L}) {
            const double h = 1.0 / n, eps = h / r;
            const auto m = build_coarse_mesh<1>(h);
            const auto c = build_cell_index_set(eps, m);
            for (int e = 0; e < m.num_elements(); ++e)
                EXPECT_GE(c.count(e) * eps, 0.99 * h);
        }
}
