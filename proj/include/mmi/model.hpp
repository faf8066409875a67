#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mmi/error.hpp"
#include "mmi/linalg.hpp"
#include "mmi/rng.hpp"

namespace mmi {

// A fitted or true regression function on ℝᵈ (or on ℝᵏ for transfer maps).
using Function = std::function<double(const Vector&)>;

struct ModelConstants {
    std::size_t d = 1;
    std::size_t k = 1;
    std::size_t sStar = 1;
    double r = 1.0;
    double C = 1.0;
    double b = 1.0;
    double eta = 0.0;
    double theta = 0.0;    // bound on sixth moments; filled by make_ground_truth
    double rhoZero = 0.0;  // min eigenvalue of E[∇²f*(β*ᵀX)]; filled by make_ground_truth
    double pStar = 0.0;    // sup of the coordinate density; filled by make_ground_truth

    // Checks the user-supplied fields; the derived ones may still be unset.
    void validate_inputs() const {
        require(d >= 1, "invalid-constants", "d must be at least 1");
        require(k >= 1, "invalid-constants", "k must be at least 1");
        require(sStar >= 1, "invalid-constants", "sStar must be at least 1");
        require(r > 0.0 && std::isfinite(r), "invalid-constants", "r must be positive");
        require(C > 0.0 && std::isfinite(C), "invalid-constants", "C must be positive");
        require(b > 0.0 && std::isfinite(b), "invalid-constants", "b must be positive");
        require(eta >= 0.0 && std::isfinite(eta), "invalid-constants", "eta must be nonnegative");
    }

    void validate() const {
        validate_inputs();
        require(d >= sStar && sStar >= k, "invalid-constants", "need d >= sStar >= k");
        require(theta > 0.0, "invalid-constants", "theta must be positive");
        require(pStar > 0.0, "invalid-constants", "pStar must be positive");
    }
};

// ---------------------------------------------------------------------------
// Coordinate density p0(x) ∝ (1 − (x/C)²)⁶ on [−C, C].

enum class DensityFamily { PolyBump6 };

namespace detail {

inline constexpr int kBumpPower = 6;

inline double binom6(int j) {
    static constexpr std::array<double, 7> c{1, 6, 15, 20, 15, 6, 1};
    return c[static_cast<std::size_t>(j)];
}

// ∫_{-1}^{1} (1 − u²)⁶ du.
inline double bump_normalizer() {
    double z = 0.0;
    for (int j = 0; j <= kBumpPower; ++j) z += binom6(j) * (j % 2 ? -2.0 : 2.0) / (2 * j + 1);
    return z;
}

// CDF of the unit-scale density at u ∈ [−1, 1].
inline double bump_cdf_unit(double u) {
    double acc = 0.0;
    double u2 = u * u, pow = u;  // u^{2j+1}
    for (int j = 0; j <= kBumpPower; ++j) {
        acc += binom6(j) * (j % 2 ? -1.0 : 1.0) * (pow + 1.0) / (2 * j + 1);
        pow *= u2;
    }
    return acc / bump_normalizer();
}

// Inverse CDF on the lower half by bisection; the upper half uses symmetry,
// which keeps the search away from the cancellation-prone right tail.
inline double bump_quantile_unit(double p) {
    if (p > 0.5) return -bump_quantile_unit(1.0 - p);
    double lo = -1.0, hi = 0.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (bump_cdf_unit(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline double density(DensityFamily, double C, double x) {
    if (std::abs(x) >= C) return 0.0;
    const double u = x / C;
    return std::pow(1.0 - u * u, detail::kBumpPower) / (detail::bump_normalizer() * C);
}

inline double density_sup(DensityFamily family, double C) { return density(family, C, 0.0); }

inline double density_cdf(DensityFamily, double C, double x) {
    if (x <= -C) return 0.0;
    if (x >= C) return 1.0;
    return detail::bump_cdf_unit(x / C);
}

inline double sample_coordinate(DensityFamily, double C, Rng& rng) {
    return C * detail::bump_quantile_unit(uniform_open(rng));
}

struct ScoreValue {
    double s0;       // p0'/p0
    double s0prime;  // derivative of s0
};

inline ScoreValue score(DensityFamily, double C, double x) {
    if (!(std::abs(x) < C)) throw Error("outside-support", "score evaluated at |x| >= C");
    const double gap = C * C - x * x;
    return {-2.0 * detail::kBumpPower * x / gap, -2.0 * detail::kBumpPower * (C * C + x * x) / (gap * gap)};
}

// E[s0(X)⁶] under p0 by adaptive Gauss-Kronrod quadrature.
inline double score_sixth_moment(DensityFamily family, double C) {
    auto integrand = [&](double x) {
        if (std::abs(x) >= C) return 0.0;
        const double s = score(family, C, x).s0;
        return std::pow(s, 6) * density(family, C, x);
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -C, C, 15, 1e-12);
}

// ---------------------------------------------------------------------------
// Transfer functions f* : ℝᵏ → [0, b].

enum class TransferFamily { SeparableSoftCurve, CustomTable };

struct TransferSpec {
    TransferFamily family = TransferFamily::SeparableSoftCurve;
    double b = 1.0;
    std::size_t k = 1;
    // Soft curve: f(v) = (b/k) Σⱼ h((vⱼ − offset)/width) with
    // h(t) = [softplus(t) − softplus(t − b/width)]·width/b.
    double offset = 0.0;
    double width = 1.0;
    // Custom table: f(v) = (b/k) Σⱼ g(vⱼ), g piecewise linear through
    // (knots[i], levels[i]), constant outside, levels in [0, 1].
    std::vector<double> knots;
    std::vector<double> levels;
};

namespace detail {

inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
inline double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}
inline double logistic_slope(double t) {
    const double s = logistic(t);
    return s * (1.0 - s);
}

}  // namespace detail

class TransferFunction {
public:
    TransferFunction() = default;

    explicit TransferFunction(TransferSpec spec) : spec_(std::move(spec)) {
        require(spec_.b > 0.0 && spec_.k >= 1, "invalid-transfer", "need b > 0 and k >= 1");
        if (spec_.family == TransferFamily::SeparableSoftCurve) {
            require(spec_.width > 0.0, "invalid-transfer", "soft curve width must be positive");
            return;
        }
        const auto& t = spec_.knots;
        const auto& g = spec_.levels;
        require(t.size() >= 2 && t.size() == g.size(), "invalid-transfer", "table needs >= 2 matching knots and levels");
        for (std::size_t i = 0; i < t.size(); ++i) {
            require(g[i] >= 0.0 && g[i] <= 1.0, "invalid-transfer", "table levels must lie in [0, 1]");
            if (i == 0) continue;
            require(t[i] > t[i - 1], "invalid-transfer", "table knots must increase");
            require(g[i] >= g[i - 1], "invalid-transfer", "table levels must be nondecreasing");
            // Per-coordinate slope (b/k)·Δg/Δt ≤ 1/k keeps the sum 1-Lipschitz.
            require((g[i] - g[i - 1]) * spec_.b <= (t[i] - t[i - 1]) * (1.0 + 1e-12), "invalid-transfer",
                    "table slope exceeds 1/b");
        }
    }

    // The default curve for a set of constants: saturating at b, inflection at
    // or beyond the reachable radius rC√s*, so the curvature is strictly
    // positive wherever β*ᵀX can land.
    static TransferFunction soft_curve(const ModelConstants& c) {
        TransferSpec spec;
        spec.b = c.b;
        spec.k = c.k;
        spec.width = c.r * c.C / 4.0;
        spec.offset = std::max(0.0, c.r * c.C * std::sqrt(static_cast<double>(c.sStar)) - c.b / 2.0);
        return TransferFunction(std::move(spec));
    }

    const TransferSpec& spec() const { return spec_; }

    double operator()(const Vector& v) const {
        require(static_cast<std::size_t>(v.size()) == spec_.k, "dimension-mismatch", "transfer input has wrong length");
        double acc = 0.0;
        for (Eigen::Index j = 0; j < v.size(); ++j) acc += unit(v(j));
        return spec_.b / static_cast<double>(spec_.k) * acc;
    }

    // Analytic Hessian (diagonal for separable families; zero almost
    // everywhere for piecewise-linear tables).
    Matrix hessian(const Vector& v) const {
        const auto k = static_cast<Eigen::Index>(spec_.k);
        Matrix h = Matrix::Zero(k, k);
        if (spec_.family != TransferFamily::SeparableSoftCurve) return h;
        const double ramp = spec_.b / spec_.width;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double t = (v(j) - spec_.offset) / spec_.width;
            h(j, j) = (detail::logistic_slope(t) - detail::logistic_slope(t - ramp)) /
                      (static_cast<double>(spec_.k) * spec_.width);
        }
        return h;
    }

private:
    double unit(double x) const {
        if (spec_.family == TransferFamily::SeparableSoftCurve) {
            const double ramp = spec_.b / spec_.width;
            const double t = (x - spec_.offset) / spec_.width;
            return (detail::softplus(t) - detail::softplus(t - ramp)) / ramp;
        }
        const auto& t = spec_.knots;
        const auto& g = spec_.levels;
        if (x <= t.front()) return g.front();
        if (x >= t.back()) return g.back();
        const auto it = std::upper_bound(t.begin(), t.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
        return g[i - 1] + w * (g[i] - g[i - 1]);
    }

    TransferSpec spec_;
};

// ---------------------------------------------------------------------------

struct GroundTruth {
    Matrix beta;     // d×k, nonnegative, columns of norm r
    IndexSet Istar;  // support rows
    Matrix Qstar;    // d×k orthonormal
    Matrix Rstar;    // k×k upper triangular, positive diagonal
    TransferFunction fstar;
    DensityFamily p0 = DensityFamily::PolyBump6;
    ModelConstants constants;

    double mean_response(const Vector& x) const { return fstar(beta.transpose() * x); }
    Function as_function() const {
        return [gt = *this](const Vector& x) { return gt.mean_response(x); };
    }
};

struct Dataset {
    Matrix X;  // n×d
    Vector Y;  // n
    ModelConstants constants;

    std::size_t size() const { return static_cast<std::size_t>(Y.size()); }
};

namespace detail {

// β*ᵀX for a fresh X, drawing only the support coordinates (the rest cannot
// influence the response).
inline Vector draw_index(const GroundTruth& gt, Rng& rng) {
    Vector v = Vector::Zero(gt.beta.cols());
    for (std::size_t row : gt.Istar) {
        const double x = sample_coordinate(gt.p0, gt.constants.C, rng);
        v += x * gt.beta.row(static_cast<Eigen::Index>(row)).transpose();
    }
    return v;
}

inline double draw_noise(double eta, Rng& rng) { return eta == 0.0 ? 0.0 : eta * (2.0 * uniform01(rng) - 1.0); }

}  // namespace detail

inline GroundTruth make_ground_truth(const ModelConstants& constants, std::uint64_t seed) {
    constants.validate_inputs();
    if (constants.sStar < constants.k || constants.sStar > constants.d)
        throw Error("infeasible-ground-truth", "need k <= sStar <= d for a rank-k sparse index matrix");

    GroundTruth gt;
    gt.constants = constants;
    const auto d = static_cast<Eigen::Index>(constants.d);
    const auto k = static_cast<Eigen::Index>(constants.k);
    Rng rng(seed);

    std::vector<std::size_t> pool(constants.d);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < constants.sStar; ++i) {
        const auto j = i + uniform_index(rng, constants.d - i);
        std::swap(pool[i], pool[j]);
    }
    gt.Istar.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(constants.sStar));
    std::sort(gt.Istar.begin(), gt.Istar.end());

    bool full_rank = false;
    for (int attempt = 0; attempt < 100 && !full_rank; ++attempt) {
        gt.beta = Matrix::Zero(d, k);
        for (std::size_t row : gt.Istar)
            for (Eigen::Index j = 0; j < k; ++j) gt.beta(static_cast<Eigen::Index>(row), j) = uniform_open(rng);
        for (Eigen::Index j = 0; j < k; ++j) gt.beta.col(j) *= constants.r / gt.beta.col(j).norm();
        const Vector sv2 = sym_eigen(gt.beta.transpose() * gt.beta).eigenvalues;
        full_rank = sv2.minCoeff() > 1e-16 * constants.r * constants.r;
    }
    if (!full_rank) throw Error("infeasible-ground-truth", "could not draw a rank-k index matrix");

    Eigen::HouseholderQR<Matrix> qr(gt.beta);
    gt.Qstar = qr.householderQ() * Matrix::Identity(d, k);
    gt.Rstar = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (gt.Rstar(j, j) < 0.0) {
            gt.Rstar.row(j) *= -1.0;
            gt.Qstar.col(j) *= -1.0;
        }
    }

    gt.fstar = TransferFunction::soft_curve(constants);
    gt.p0 = DensityFamily::PolyBump6;

    // Derived constants: computed, not assumed.
    gt.constants.pStar = density_sup(gt.p0, constants.C);
    constexpr int kMomentDraws = 20000;
    Rng moment_rng(derive_seed(seed, "moments"));
    double y6 = 0.0;
    Matrix hess = Matrix::Zero(k, k);
    for (int i = 0; i < kMomentDraws; ++i) {
        const Vector v = detail::draw_index(gt, moment_rng);
        const double y = gt.fstar(v) + detail::draw_noise(constants.eta, moment_rng);
        y6 += std::pow(y, 6);
        hess += gt.fstar.hessian(v);
    }
    gt.constants.theta = std::max(score_sixth_moment(gt.p0, constants.C), y6 / kMomentDraws);
    gt.constants.rhoZero = sym_eigen(hess / kMomentDraws).eigenvalues.minCoeff();
    return gt;
}

inline Dataset sample_dataset(const GroundTruth& gt, std::size_t n, std::uint64_t seed) {
    require(n >= 1, "invalid-size", "sample_dataset needs n >= 1");
    const auto d = static_cast<Eigen::Index>(gt.constants.d);
    Dataset data{Matrix(static_cast<Eigen::Index>(n), d), Vector(static_cast<Eigen::Index>(n)), gt.constants};
    Rng rng(seed);
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data.X(i, j) = sample_coordinate(gt.p0, gt.constants.C, rng);
        data.Y(i) = gt.mean_response(data.X.row(i).transpose()) + detail::draw_noise(gt.constants.eta, rng);
    }
    return data;
}

inline double loss(const Vector& x, double y, const Function& f) {
    const double e = f(x) - y;
    return e * e;
}

// f ∘ β ≡ f(l·) ∘ β/l.
inline std::pair<Function, Matrix> rescale_model(Function f, const Matrix& beta, double l) {
    require(l > 0.0 && std::isfinite(l), "invalid-scale", "rescale factor must be positive");
    Function scaled = [f = std::move(f), l](const Vector& v) { return f(l * v); };
    return {std::move(scaled), beta / l};
}

// Brings every nonzero column of β to norm r and compensates inside f, so the
// composite f ∘ βᵀ is unchanged (the class with norm-r columns loses nothing).
inline std::pair<Function, Matrix> normalize_columns(Function f, const Matrix& beta, double r) {
    require(r > 0.0, "invalid-scale", "target column norm must be positive");
    Vector factor = Vector::Ones(beta.cols());
    Matrix out = beta;
    for (Eigen::Index j = 0; j < beta.cols(); ++j) {
        const double t = beta.col(j).norm();
        require(t > 0.0, "invalid-scale", "cannot normalize a zero column");
        factor(j) = t / r;
        out.col(j) *= r / t;
    }
    Function g = [f = std::move(f), factor](const Vector& v) { return f(v.cwiseProduct(factor)); };
    return {std::move(g), out};
}

}  // namespace mmi
