#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mmi/near_net.hpp"

namespace {

using namespace mmi;

TEST(SampleSphere, NormAndZeroSphere) {
    Rng rng(1);
    for (std::size_t k : {1, 2, 3, 7})
        for (int t = 0; t < 100; ++t) EXPECT_NEAR(sample_sphere(k, 2.5, rng).norm(), 2.5, 1e-12);
    bool seen_pos = false, seen_neg = false;
    for (int t = 0; t < 100; ++t) {
        const double v = sample_sphere(1, 1.5, rng)(0);
        EXPECT_TRUE(v == 1.5 || v == -1.5);
        seen_pos |= v > 0;
        seen_neg |= v < 0;
    }
    EXPECT_TRUE(seen_pos && seen_neg);
}

TEST(SampleSphere, CoordinateMeansNearZero) {
    Rng rng(2);
    const int n = 10000;
    Vector sum = Vector::Zero(3);
    for (int t = 0; t < n; ++t) sum += sample_sphere(3, 1.0, rng);
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(sum(j) / n), 5.0 / std::sqrt(double(n)));
}

TEST(NearNet, SizesAndOrder) {
    EXPECT_EQ(build_net(1, 2, 1.0, 3).size(), 1u);
    const NearNet net = build_net(3, 2, 1.0, 3);
    EXPECT_EQ(net.size(), 9u);
    EXPECT_EQ(net.tuple(0), (std::vector<std::size_t>{0, 0}));
    EXPECT_EQ(net.tuple(1), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(net.tuple(3), (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(net.tuple(8), (std::vector<std::size_t>{2, 2}));
    const Matrix m = net.matrix(5);  // tuple (1, 2)
    EXPECT_EQ(m.col(0), net.points().col(1));
    EXPECT_EQ(m.col(1), net.points().col(2));
    for (Eigen::Index i = 0; i < net.points().cols(); ++i) EXPECT_NEAR(net.points().col(i).norm(), 1.0, 1e-12);
}

TEST(NearNet, Deterministic) {
    EXPECT_EQ(build_net(5, 3, 2.0, 9).points(), build_net(5, 3, 2.0, 9).points());
    EXPECT_NE(build_net(5, 3, 2.0, 9).points(), build_net(5, 3, 2.0, 10).points());
}

TEST(NearNet, NearestDistanceMatchesEnumeration) {
    Rng rng(4);
    const NearNet net = build_net(5, 2, 1.0, 7);
    for (int t = 0; t < 20; ++t) {
        Matrix target(2, 2);
        target.col(0) = sample_sphere(2, 1.0, rng);
        target.col(1) = sample_sphere(2, 1.0, rng);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < net.size(); ++i) best = std::min(best, (net.matrix(i) - target).norm());
        EXPECT_NEAR(net.nearest_distance(target), best, 1e-12);
    }
}

TEST(NearNet, OverflowIsReported) {
    const NearNet net = build_net(1 << 20, 4, 1.0, 1);
    EXPECT_THROW(net.size(), Error);
}

TEST(CapFraction, Examples) {
    for (std::size_t k : {1, 2, 3, 5}) EXPECT_EQ(cap_fraction(k, 1.0, 2.0), 1.0);
    for (std::size_t k : {1, 2, 3, 4, 6}) EXPECT_NEAR(cap_fraction(k, 2.0, 2.0 * std::sqrt(2.0)), 0.5, 1e-9);
    EXPECT_NEAR(cap_fraction(2, 1.0, 1.0), 1.0 / 3.0, 1e-12);
}

TEST(CapFraction, ThreeSphereIsArchimedes) {
    // On S² the cap of angular radius φ has area fraction (1 − cos φ)/2.
    for (double delta : {0.1, 0.5, 1.0, 1.7}) {
        const double phi = 2 * std::asin(delta / 2);
        EXPECT_NEAR(cap_fraction(3, 1.0, delta), (1 - std::cos(phi)) / 2, 1e-10);
    }
}

TEST(CapFraction, MonteCarloOnTheCircle) {
    Rng rng(5);
    const int n = 1000000;
    int inside = 0;
    Vector e1 = Vector::Zero(2);
    e1(0) = 1.0;
    for (int t = 0; t < n; ++t) inside += (sample_sphere(2, 1.0, rng) - e1).norm() <= 1.0;
    const double p = 1.0 / 3.0;
    EXPECT_NEAR(inside / double(n), p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(CapFraction, MonteCarloInFourDimensions) {
    Rng rng(6);
    const int n = 200000;
    int inside = 0;
    Vector e1 = Vector::Zero(4);
    e1(0) = 1.0;
    for (int t = 0; t < n; ++t) inside += (sample_sphere(4, 1.0, rng) - e1).norm() <= 0.8;
    const double p = cap_fraction(4, 1.0, 0.8);
    EXPECT_NEAR(inside / double(n), p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(CoverageBound, Examples) {
    EXPECT_EQ(coverage_bound(3, 2, 1.0, 2.0 * std::sqrt(2.0)), 1.0);
    EXPECT_EQ(coverage_bound(0, 2, 1.0, 0.5), 0.0);
    EXPECT_NEAR(coverage_bound(1, 1, 1.0, 1.0), 0.5, 1e-15);
    // 1 − k(1 − frac)^N₀ by hand for k = 2, frac = 1/3 (δ = ε/√2 = 1).
    EXPECT_NEAR(coverage_bound(4, 2, 1.0, std::sqrt(2.0)), 1 - 2 * std::pow(2.0 / 3.0, 4), 1e-12);
}

TEST(NetCoverage, EmpiricalAboveBound) {
    const NetCheckResult r = net_coverage_experiment(2, 1.0, 64, 0.6, 1000, 11);
    EXPECT_GE(r.empiricalCoverage, r.lemmaBound - 3 * r.binomialSigma);
}

TEST(NetCoverage, WholeSphereAndSingleTrial) {
    const NetCheckResult all = net_coverage_experiment(2, 1.0, 4, 2.0 * std::sqrt(2.0), 50, 3);
    EXPECT_EQ(all.empiricalCoverage, 1.0);
    EXPECT_EQ(all.lemmaBound, 1.0);
    const NetCheckResult one = net_coverage_experiment(3, 1.0, 8, 0.5, 1, 3);
    EXPECT_TRUE(one.empiricalCoverage == 0.0 || one.empiricalCoverage == 1.0);
    EXPECT_THROW(net_coverage_experiment(2, 1.0, 4, 0.5, 0, 3), Error);
}

}  // namespace
