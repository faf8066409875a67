#include <cmath>

#include <gtest/gtest.h>

#include "mmi/isotonic.hpp"
#include "mmi/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace mmi;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

template <class F>
std::string error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Unconstrained isotonic regression on a DAG by Dykstra over the pairwise
// halfspaces Fᵢ ≤ Fⱼ, run to a tight tolerance.
Vector dykstra_isotonic(const std::vector<std::pair<std::size_t, std::size_t>>& edges, const Vector& y) {
    Vector x = y;
    std::vector<double> q(edges.size(), 0.0);
    for (int cycle = 0; cycle < 200000; ++cycle) {
        double moved = 0.0;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto [i, j] = edges[e];
            const double yi = x(i) + q[e], yj = x(j) - q[e];
            const double t = std::max(0.0, 0.5 * (yi - yj));
            moved = std::max(moved, std::abs(t - q[e]));
            x(i) = yi - t;
            x(j) = yj + t;
            q[e] = t;
        }
        if (moved < 1e-13) break;
    }
    return x;
}

TEST(InducedOrder, Examples) {
    Matrix m(2, 1);
    m << 1, 0;
    Matrix x(2, 2);
    x << 0, 5, 1, -3;
    const PartialOrder po = induced_order(m, {0}, x);
    EXPECT_EQ(po.group_count(), 2u);
    EXPECT_EQ(po.edges, (std::vector<PartialOrder::Edge>{{0, 1}}));

    Matrix m2 = Matrix::Identity(2, 2);
    Matrix x2(2, 2);
    x2 << 0, 1, 1, 0;
    EXPECT_TRUE(induced_order(m2, {0, 1}, x2).edges.empty());

    Matrix x3(3, 2);
    x3 << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
    const PartialOrder tied = induced_order(m2, {0, 1}, x3);
    EXPECT_EQ(tied.group_count(), 1u);
    EXPECT_TRUE(tied.edges.empty());
}

TEST(InducedOrder, RejectsNegativeEntries) {
    Matrix m(2, 1);
    m << 1, -0.1;
    EXPECT_EQ(error_code([&] { induced_order(m, {0}, Matrix::Zero(2, 2)); }), "nonnegativity-violated");
}

TEST(InducedOrder, MatchesPairwiseDominance) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index n = 8, d = 3;
        Matrix x(n, d), m(d, 2);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j) x(i, j) = double(uniform_index(rng, 3));
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < 2; ++j) m(i, j) = double(uniform_index(rng, 2));
        const IndexSet rows{0, 2};
        const PartialOrder po = induced_order(m, rows, x);
        const Matrix p = oracle::projections(x, m, rows);
        // Edges are covering pairs: their closure is the order, and none is implied by the others.
        const std::size_t g = po.group_count();
        std::vector<std::vector<char>> closure(g, std::vector<char>(g, 0));
        for (const auto& [a, b] : po.edges) closure[a][b] = 1;
        for (std::size_t via = 0; via < g; ++via)
            for (std::size_t a = 0; a < g; ++a)
                for (std::size_t b = 0; b < g; ++b) closure[a][b] |= closure[a][via] && closure[via][b];
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const std::size_t gi = po.groupOf[i], gj = po.groupOf[j];
                const bool equal = (p.row(i) - p.row(j)).cwiseAbs().maxCoeff() == 0.0;
                EXPECT_EQ(gi == gj, equal);
                EXPECT_EQ(bool(closure[gi][gj]), !equal && oracle::dominated(p, i, j));
            }
        for (const auto& [a, b] : po.edges)
            for (std::size_t via = 0; via < g; ++via) EXPECT_FALSE(closure[a][via] && closure[via][b]);
    }
}

TEST(IsotonicFit, Examples) {
    const PartialOrder chain = PartialOrder::chain(2);
    EXPECT_EQ(isotonic_fit(chain, vec({1, 0}), 1.0), vec({0.5, 0.5}));
    EXPECT_EQ(isotonic_fit(chain, vec({0, 1}), 1.0), vec({0, 1}));
    const PartialOrder anti = PartialOrder::from_point_edges(2, {});
    EXPECT_EQ(isotonic_fit(anti, vec({0.8, -0.2}), 0.5), vec({0.5, 0}));
}

TEST(IsotonicFit, CycleIsInconsistent) {
    const PartialOrder cyc = PartialOrder::from_point_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    EXPECT_EQ(error_code([&] { isotonic_fit(cyc, vec({0, 0, 0}), 1.0); }), "inconsistent-order");
}

TEST(IsotonicProjection, FrozenDagInstances) {
    // Reference values from an interior-point QP solver.
    const PartialOrder a = PartialOrder::from_point_edges(6, {{0, 2}, {1, 2}, {2, 3}, {2, 4}, {4, 5}, {1, 5}});
    const Vector fa = isotonic_projection(a, vec({3, 1, 2, 0.5, 4, 0}));
    const Vector want_a = vec({11.0 / 6, 1, 11.0 / 6, 11.0 / 6, 2, 2});
    EXPECT_LT((fa - want_a).cwiseAbs().maxCoeff(), 1e-12);

    const PartialOrder b = PartialOrder::from_point_edges(5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}});
    const Vector fb = isotonic_projection(b, vec({2, 0, 1, -1, 0.5}));
    EXPECT_LT((fb - Vector::Constant(5, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(IsotonicProjection, MatchesDykstraOnRandomDags) {
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + uniform_index(rng, 9);
        std::vector<PartialOrder::Edge> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (uniform01(rng) < 0.3) edges.emplace_back(i, j);
        Vector y(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = standard_normal(rng);
        const PartialOrder po = PartialOrder::from_point_edges(n, edges);
        const Vector f = isotonic_projection(po, y);
        EXPECT_TRUE(po.respected_by(f));
        EXPECT_LT((f - dykstra_isotonic(edges, y)).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(IsotonicProjection, PartitioningAgreesWithPava) {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 30);
        std::vector<double> mean(n), weight(n);
        std::vector<std::size_t> chain(n);
        for (std::size_t i = 0; i < n; ++i) {
            mean[i] = standard_normal(rng);
            weight[i] = 1.0 + double(uniform_index(rng, 3));
            chain[i] = i;
        }
        const detail::GroupGraph gg = detail::group_graph(PartialOrder::chain(n));
        const auto a = detail::pava(chain, mean, weight);
        const auto b = detail::partition_isotonic(gg, mean, weight);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
    }
}

TEST(IsotonicFit, ClippingCommutesAndMatchesBruteForce) {
    Rng rng(4);
    const std::size_t steps = 21;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 7);
        std::vector<PartialOrder::Edge> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (uniform01(rng) < 0.4) edges.emplace_back(i, j);
        Vector y(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = -0.3 + 1.6 * uniform01(rng);
        const double b = 1.0;
        const PartialOrder po = PartialOrder::from_point_edges(n, edges);
        const Vector f = isotonic_fit(po, y, b);
        EXPECT_EQ(f, isotonic_projection(po, y).cwiseMax(0.0).cwiseMin(b));
        EXPECT_TRUE(po.respected_by(f));
        const double exact = squared_error(y, f);
        const double grid = squared_error(y, brute_force_fit(po, y, b, steps));
        EXPECT_LE(exact, grid + 1e-12);
        EXPECT_LE(grid - exact, b * b * double(n) / double((steps - 1) * (steps - 1)));
    }
}

TEST(BruteForce, Examples) {
    EXPECT_EQ(brute_force_fit(PartialOrder::chain(2), vec({1, 0}), 1.0, 21), vec({0.5, 0.5}));
    const Vector f = brute_force_fit(PartialOrder::from_point_edges(3, {}), vec({0.52, 1.4, -0.3}), 1.0, 11);
    EXPECT_LT((f - vec({0.5, 1.0, 0.0})).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(error_code([] { brute_force_fit(PartialOrder::chain(9), Vector::Zero(9), 1.0, 5); }), "size-guard");
    EXPECT_EQ(error_code([] { brute_force_fit(PartialOrder::chain(2), Vector::Zero(2), 1.0, 40); }), "size-guard");
}

TEST(BruteForce, AgreesWithNaiveGridSearch) {
    Rng rng(5);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 4);
        std::vector<PartialOrder::Edge> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (uniform01(rng) < 0.5) edges.emplace_back(i, j);
        Vector y(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = -0.3 + 1.6 * uniform01(rng);
        const PartialOrder po = PartialOrder::from_point_edges(n, edges);
        const double ref = oracle::grid_search(y, 1.0, 11, [&](Eigen::Index i, Eigen::Index j, double fi, double fj) {
            const bool constrained = std::find(edges.begin(), edges.end(), PartialOrder::Edge{std::size_t(i), std::size_t(j)}) != edges.end();
            return !constrained || fi <= fj;
        });
        EXPECT_NEAR(squared_error(y, brute_force_fit(po, y, 1.0, 11)), ref, 1e-12);
    }
}

TEST(SparseIsotonic, Example) {
    Matrix m(2, 1);
    m << 1, 1;
    Matrix x(3, 2);
    x << 0, 1, 1, 0, 2, -1;
    const SparseIsoResult r = sparse_isotonic(x, vec({0, 0.5, 1}), m, 1, 1.0);
    EXPECT_EQ(r.I, (IndexSet{0}));
    EXPECT_EQ(r.F, vec({0, 0.5, 1}));
    EXPECT_EQ(r.objective, 0.0);
    // The other index set reverses the chain and pools everything.
    const Vector other = isotonic_fit(induced_order(m, {1}, x), vec({0, 0.5, 1}), 1.0);
    EXPECT_NEAR(squared_error(vec({0, 0.5, 1}), other), 0.5, 1e-15);
}

TEST(SparseIsotonic, ConstantResponseTakesFirstSet) {
    Rng rng(6);
    Matrix x(5, 4), m(4, 2);
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = standard_normal(rng);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) m(i, j) = uniform01(rng);
    const SparseIsoResult r = sparse_isotonic(x, Vector::Constant(5, 0.3), m, 2, 1.0);
    EXPECT_EQ(r.I, (IndexSet{0, 1}));
    EXPECT_EQ(r.objective, 0.0);
}

TEST(SparseIsotonic, FullSupportIsAPlainFit) {
    Rng rng(7);
    Matrix x(6, 3), m(3, 2);
    for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = standard_normal(rng);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) m(i, j) = uniform01(rng);
    Vector y(6);
    for (Eigen::Index i = 0; i < 6; ++i) y(i) = uniform01(rng);
    const SparseIsoResult r = sparse_isotonic(x, y, m, 3, 1.0);
    EXPECT_EQ(r.I, (IndexSet{0, 1, 2}));
    EXPECT_EQ(r.F, isotonic_fit(induced_order(m, {0, 1, 2}, x), y, 1.0));
}

TEST(SparseIsotonic, EarlyExitMatchesFullEnumeration) {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + uniform_index(rng, 6), d = 2 + uniform_index(rng, 5);
        const std::size_t s = 1 + uniform_index(rng, std::min<std::size_t>(3, d));
        Matrix x(n, d), m(d, 2);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = double(uniform_index(rng, 4));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < 2; ++j) m(i, j) = uniform01(rng) < 0.4 ? 0.0 : uniform01(rng);
        Vector y(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = t % 3 == 0 ? 0.5 : -0.2 + 1.4 * uniform01(rng);

        const SparseIsoResult r = sparse_isotonic(x, y, m, s, 1.0);
        double best = std::numeric_limits<double>::infinity();
        IndexSet best_set;
        for (const auto& set : oracle::subsets(d, s)) {
            const double obj = squared_error(y, isotonic_fit(induced_order(m, set, x), y, 1.0));
            if (obj < best - 1e-12) {
                best = obj;
                best_set = set;
            }
        }
        EXPECT_NEAR(r.objective, best, 1e-12);
        EXPECT_EQ(r.I, best_set);
    }
}

TEST(SparseIsotonic, Errors) {
    Matrix m = Matrix::Ones(30, 1);
    Matrix x = Matrix::Zero(2, 30);
    SearchOptions opts;
    opts.enumerationBudget = 1000;
    EXPECT_EQ(error_code([&] { sparse_isotonic(x, vec({0, 1}), m, 3, 1.0, opts); }), "enumeration-budget");
    m(0, 0) = -1;
    EXPECT_EQ(error_code([&] { sparse_isotonic(x, vec({0, 1}), m, 1, 1.0); }), "nonnegativity-violated");
}

TEST(StepInterpolant, Examples) {
    Matrix a(3, 2);
    a << 0, 0, 1, 0, 1, 1;
    const StepInterpolant f(a, vec({0.2, 0.5, 0.9}));
    EXPECT_EQ(f(Vector(Eigen::Vector2d(-1, -1))), 0.0);
    EXPECT_EQ(f(Vector(Eigen::Vector2d(0, 0))), 0.2);
    EXPECT_EQ(f(Vector(Eigen::Vector2d(1, 0))), 0.5);
    EXPECT_EQ(f(Vector(Eigen::Vector2d(1, 1))), 0.9);
    EXPECT_EQ(f(Vector(Eigen::Vector2d(5, 5))), 0.9);
    EXPECT_EQ(f(Vector(Eigen::Vector2d(0.5, 3))), 0.2);
    EXPECT_THROW(StepInterpolant(a, vec({1, 2})), Error);
}

TEST(StepInterpolant, MonotoneOnRandomPairs) {
    Rng rng(9);
    Matrix a(40, 3);
    Vector v(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = standard_normal(rng);
        v(i) = uniform01(rng);
    }
    const StepInterpolant f(a, v);
    for (int t = 0; t < 100000; ++t) {
        Vector x(3), y(3);
        for (Eigen::Index j = 0; j < 3; ++j) {
            x(j) = 2 * standard_normal(rng);
            y(j) = x(j) + std::abs(standard_normal(rng));
        }
        ASSERT_LE(f(x), f(y));
    }
}

}  // namespace
