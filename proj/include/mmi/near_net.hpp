#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mmi/error.hpp"
#include "mmi/linalg.hpp"
#include "mmi/rng.hpp"

namespace mmi {

// Uniform point on the radius-r sphere in ℝᵏ: r·Z/‖Z‖ with Z standard normal.
inline Vector sample_sphere(std::size_t k, double r, Rng& rng) {
    require(k >= 1 && r > 0.0, "invalid-sphere", "need k >= 1 and r > 0");
    Vector z(static_cast<Eigen::Index>(k));
    double norm = 0.0;
    while (norm == 0.0) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
        norm = z.norm();
    }
    return (z / norm) * r;  // dividing first keeps k = 1 exactly at ±r
}

// N₀ sphere points; the implied net is every k×k matrix whose columns are net
// points, addressed by index tuples in lexicographic order.
class NearNet {
public:
    NearNet() = default;
    explicit NearNet(Matrix points) : points_(std::move(points)) {}

    std::size_t k() const { return static_cast<std::size_t>(points_.rows()); }
    std::size_t base_size() const { return static_cast<std::size_t>(points_.cols()); }
    const Matrix& points() const { return points_; }

    // |𝓡| = N₀ᵏ.
    std::size_t size() const {
        std::size_t total = 1;
        for (std::size_t j = 0; j < k(); ++j) {
            if (base_size() != 0 && total > std::numeric_limits<std::size_t>::max() / base_size())
                throw Error("net-too-large", "N0^k overflows the index range");
            total *= base_size();
        }
        return base_size() == 0 ? 0 : total;
    }

    std::vector<std::size_t> tuple(std::size_t index) const {
        std::vector<std::size_t> t(k());
        for (std::size_t j = k(); j-- > 0;) {
            t[j] = index % base_size();
            index /= base_size();
        }
        return t;
    }

    Matrix matrix(std::size_t index) const {
        const auto t = tuple(index);
        Matrix m(points_.rows(), points_.rows());
        for (std::size_t j = 0; j < t.size(); ++j)
            m.col(static_cast<Eigen::Index>(j)) = points_.col(static_cast<Eigen::Index>(t[j]));
        return m;
    }

    // min over net matrices of ‖M − R‖_F; columns decouple, so this is exact
    // without enumerating the N₀ᵏ tuples.
    double nearest_distance(const Matrix& target) const {
        require(static_cast<std::size_t>(target.rows()) == k() && target.cols() == target.rows(), "dimension-mismatch",
                "target must be k×k");
        double total = 0.0;
        for (Eigen::Index j = 0; j < target.cols(); ++j)
            total += (points_.colwise() - target.col(j)).colwise().squaredNorm().minCoeff();
        return std::sqrt(total);
    }

private:
    Matrix points_;  // k×N₀
};

inline NearNet build_net(std::size_t n0, std::size_t k, double r, std::uint64_t seed) {
    require(n0 >= 1, "invalid-net", "N0 must be at least 1");
    Rng rng(seed);
    Matrix pts(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n0));
    for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = sample_sphere(k, r, rng);
    return NearNet(std::move(pts));
}

// Relative surface measure of {u on the radius-r sphere in ℝᵏ : ‖u − r·e₁‖ ≤ δ}.
inline double cap_fraction(std::size_t k, double r, double delta) {
    require(k >= 1 && r > 0.0 && delta >= 0.0, "invalid-cap", "need k >= 1, r > 0, delta >= 0");
    if (delta >= 2.0 * r) return 1.0;
    if (k == 1) return 0.5;  // the 0-sphere {−r, r}: only r·e₁ itself is within δ < 2r
    const double phi = 2.0 * std::asin(delta / (2.0 * r));
    const double m = static_cast<double>(k) - 2.0;
    if (k == 2) return phi / std::numbers::pi;
    const double whole = std::sqrt(std::numbers::pi) * std::tgamma((m + 1.0) / 2.0) / std::tgamma(m / 2.0 + 1.0);
    auto integrand = [m](double t) { return std::pow(std::sin(t), m); };
    const double part =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, phi, 15, 1e-10);
    return std::clamp(part / whole, 0.0, 1.0);
}

// Lower bound on P(some net matrix lies within ε of a fixed target), clamped to [0, 1].
inline double coverage_bound(std::size_t n0, std::size_t k, double r, double eps) {
    require(eps > 0.0, "invalid-cap", "eps must be positive");
    const double frac = cap_fraction(k, r, eps / std::sqrt(static_cast<double>(k)));
    const double miss = static_cast<double>(k) * std::pow(1.0 - frac, static_cast<double>(n0));
    return std::clamp(1.0 - miss, 0.0, 1.0);
}

struct NetCheckResult {
    double empiricalCoverage = 0.0;
    double lemmaBound = 0.0;
    double binomialSigma = 0.0;  // sd of the coverage frequency at p = lemmaBound
};

// Fraction of independently built nets containing a matrix within ε of one
// fixed random target with columns on the radius-r sphere.
inline NetCheckResult net_coverage_experiment(std::size_t k, double r, std::size_t n0, double eps,
                                              std::size_t trials, std::uint64_t seed) {
    require(trials >= 1, "invalid-trials", "trials must be at least 1");
    Rng target_rng(derive_seed(seed, "target"));
    Matrix target(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (Eigen::Index j = 0; j < target.cols(); ++j) target.col(j) = sample_sphere(k, r, target_rng);

    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const NearNet net = build_net(n0, k, r, derive_seed(seed, "net-" + std::to_string(t)));
        if (net.nearest_distance(target) <= eps) ++hits;
    }
    NetCheckResult res;
    res.empiricalCoverage = static_cast<double>(hits) / static_cast<double>(trials);
    res.lemmaBound = coverage_bound(n0, k, r, eps);
    res.binomialSigma = std::sqrt(res.lemmaBound * (1.0 - res.lemmaBound) / static_cast<double>(trials));
    return res;
}

}  // namespace mmi
