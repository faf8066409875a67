#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "mmi/error.hpp"
#include "mmi/fantope.hpp"
#include "mmi/isotonic.hpp"
#include "mmi/linalg.hpp"
#include "mmi/lipschitz.hpp"
#include "mmi/model.hpp"
#include "mmi/near_net.hpp"
#include "mmi/parallel.hpp"
#include "mmi/rng.hpp"

namespace mmi {

enum class FitMode { Step, Lipschitz };

inline std::string to_string(FitMode mode) { return mode == FitMode::Step ? "step" : "lipschitz"; }

inline FitMode parse_fit_mode(const std::string& s) {
    if (s == "step") return FitMode::Step;
    if (s == "lipschitz") return FitMode::Lipschitz;
    throw Error("invalid-mode", "mode must be 'step' or 'lipschitz', got '" + s + "'");
}

struct TheoryParams {
    double tau;
    double lambda;
};

// τ = (3θn / (2 log d))^{1/6} and λ = 10·√(θ log d / n).
inline TheoryParams theory_params(double theta, double n, std::size_t d) {
    require(d >= 2, "invalid-dimension", "schedules need d >= 2 (log d must be positive)");
    require(n >= 1.0 && theta > 0.0, "invalid-schedule", "need n >= 1 and theta > 0");
    const double logd = std::log(static_cast<double>(d));
    return {std::pow(3.0 * theta * n / (2.0 * logd), 1.0 / 6.0), 10.0 * std::sqrt(theta * logd / n)};
}

// z(ε₁, ε₂, C) = 2ηC√k(ε₁ + ε₂r) + C²k(ε₁ + ε₂r)².
inline double z_bound(double eps1, double eps2, double C, double eta, std::size_t k, double r) {
    const double kk = static_cast<double>(k);
    const double e = eps1 + eps2 * r;
    return 2.0 * eta * C * std::sqrt(kk) * e + C * C * kk * e * e;
}

// ---------------------------------------------------------------------------
// Procrustes alignment over rotations (det P = 1).

inline Matrix procrustes_align(const Matrix& qhat, const Matrix& qstar) {
    require(qhat.rows() == qstar.rows() && qhat.cols() == qstar.cols(), "dimension-mismatch",
            "frames must have the same shape");
    require(is_orthonormal(qhat, 1e-6) && is_orthonormal(qstar, 1e-6), "not-orthonormal",
            "Procrustes inputs must have orthonormal columns");
    const Matrix a = qhat.transpose() * qstar;
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix u = svd.matrixU(), v = svd.matrixV();
    Vector fix = Vector::Ones(a.cols());
    fix(fix.size() - 1) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    return u * fix.asDiagonal() * v.transpose();
}

inline double procrustes_dist(const Matrix& qhat, const Matrix& qstar) {
    return (qhat * procrustes_align(qhat, qstar) - qstar).norm();
}

// ---------------------------------------------------------------------------
// Fitted model: x ↦ f(M(I)ᵀx) with a step or Lipschitz interpolant.

struct FitResult {
    FitMode mode = FitMode::Step;
    Matrix Qn;       // d×k orthonormal
    Matrix Rbar;     // k×k, columns of norm r
    IndexSet In;     // selected rows, |In| = s*
    Matrix anchors;  // n×k projections M(In)ᵀXᵢ of the second half
    Vector values;   // fitted values Fᵢ paired with anchors
    double empiricalLoss = 0.0;
    bool sdpConverged = false;
    std::size_t sdpIterations = 0;
    double tau = 0.0;
    double lambda = 0.0;
    std::size_t netIndex = 0;

    Matrix M() const { return positive_part(Qn * Rbar); }
};

class FittedModel {
public:
    explicit FittedModel(const FitResult& fit) : mode_(fit.mode), proj_(restrict_rows(fit.M(), fit.In)) {
        if (mode_ == FitMode::Step) step_ = StepInterpolant(fit.anchors, fit.values);
        else lip_ = LipschitzInterpolant(fit.anchors, fit.values);
    }

    double operator()(const Vector& x) const {
        const Vector z = proj_.transpose() * x;
        return mode_ == FitMode::Step ? step_(z) : lip_(z);
    }

    Function as_function() const {
        return [model = *this](const Vector& x) { return model(x); };
    }

private:
    FitMode mode_;
    Matrix proj_;  // M(In), d×k
    StepInterpolant step_;
    LipschitzInterpolant lip_;
};

struct FitOptions {
    std::size_t N0 = 32;
    std::uint64_t netSeed = 1;
    FitMode mode = FitMode::Step;
    SdpConfig sdp;
    std::optional<double> tau;     // default: theory_params schedule
    std::optional<double> lambda;  // default: theory_params schedule
    SearchOptions search;
    PolytopeOptions polytope;
    std::size_t workers = 0;  // 0 = hardware concurrency
};

// One (R, I_R) candidate of the net scan.
struct Candidate {
    std::size_t netIndex = 0;
    Matrix R;
    IndexSet I;
    Vector F;
    Matrix anchors;
    double empiricalLoss = 0.0;
};

// Fits every net matrix R against the given (second-half) samples with
// M = (QₙR)⁺. Identical M matrices share a single evaluation.
inline std::vector<Candidate> scan_candidates(const Matrix& qn, const NearNet& net, const Matrix& x, const Vector& y,
                                              const ModelConstants& c, const FitOptions& opts) {
    const std::size_t count = net.size();
    if (count == 0) throw Error("empty-net", "the near-net has no elements");
    require(x.rows() == y.size() && y.size() >= 1, "dimension-mismatch", "need matching, nonempty X and Y");

    std::vector<Candidate> out(count);
    std::vector<Matrix> ms(count);
    std::map<std::vector<double>, std::size_t> first_with;
    std::vector<std::size_t> unique_of(count), uniques;
    for (std::size_t i = 0; i < count; ++i) {
        out[i].netIndex = i;
        out[i].R = net.matrix(i);
        ms[i] = positive_part(qn * out[i].R);
        std::vector<double> key(ms[i].data(), ms[i].data() + ms[i].size());
        auto [it, fresh] = first_with.emplace(std::move(key), i);
        if (fresh) uniques.push_back(i);
        unique_of[i] = it->second;
    }

    const double n = static_cast<double>(y.size());
    parallel_for(
        uniques.size(),
        [&](std::size_t u) {
            Candidate& cand = out[uniques[u]];
            const Matrix& m = ms[uniques[u]];
            if (opts.mode == FitMode::Step) {
                SparseIsoResult r = sparse_isotonic(x, y, m, c.sStar, c.b, opts.search);
                cand.I = std::move(r.I);
                cand.F = std::move(r.F);
                cand.anchors = std::move(r.anchors);
                cand.empiricalLoss = r.objective / n;
            } else {
                LipschitzFit r = lipschitz_sparse_fit(x, y, m, c.sStar, c.b, opts.search, opts.polytope);
                cand.I = std::move(r.I);
                cand.F = std::move(r.F);
                cand.anchors = std::move(r.anchors);
                cand.empiricalLoss = r.objective / n;
            }
        },
        opts.workers);
    for (std::size_t i = 0; i < count; ++i) {
        if (unique_of[i] == i) continue;
        const Candidate& src = out[unique_of[i]];
        out[i].I = src.I;
        out[i].F = src.F;
        out[i].anchors = src.anchors;
        out[i].empiricalLoss = src.empiricalLoss;
    }
    return out;
}

inline Dataset slice_rows(const Dataset& data, std::size_t begin, std::size_t count) {
    const auto b = static_cast<Eigen::Index>(begin), n = static_cast<Eigen::Index>(count);
    return Dataset{data.X.middleRows(b, n), data.Y.segment(b, n), data.constants};
}

// Two-stage fit: the first half estimates the index subspace, the second half
// picks the best (R, I) over the near-net by sparse isotonic (or Lipschitz)
// regression.
inline FitResult fit_mmi(const Dataset& data, const FitOptions& opts) {
    const std::size_t total = data.size();
    if (total < 2 || total % 2 != 0) throw Error("odd-sample-count", "sample split requires even N");
    const ModelConstants& c = data.constants;
    require(c.sStar >= c.k && c.d >= c.sStar, "invalid-constants", "need d >= sStar >= k");
    const std::size_t n = total / 2;
    const Dataset first = slice_rows(data, 0, n);
    const Dataset second = slice_rows(data, n, n);

    FitResult res;
    res.mode = opts.mode;
    if (!opts.tau || !opts.lambda) {
        const TheoryParams tp = theory_params(c.theta, static_cast<double>(n), c.d);
        res.tau = opts.tau.value_or(tp.tau);
        res.lambda = opts.lambda.value_or(tp.lambda);
    } else {
        res.tau = *opts.tau;
        res.lambda = *opts.lambda;
    }

    const SubspaceEstimate est = estimate_Q(first, res.tau, res.lambda, c.k, opts.sdp);
    res.Qn = est.Q;
    res.sdpConverged = est.sdp.converged;
    res.sdpIterations = est.sdp.iterations;

    const NearNet net = build_net(opts.N0, c.k, c.r, opts.netSeed);
    std::vector<Candidate> cands = scan_candidates(res.Qn, net, second.X, second.Y, c, opts);
    std::size_t best = 0;
    for (std::size_t i = 1; i < cands.size(); ++i)
        if (cands[i].empiricalLoss < cands[best].empiricalLoss) best = i;

    Candidate& win = cands[best];
    res.netIndex = win.netIndex;
    res.Rbar = std::move(win.R);
    res.In = std::move(win.I);
    res.values = std::move(win.F);
    res.anchors = std::move(win.anchors);
    res.empiricalLoss = win.empiricalLoss;
    return res;
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation against a known ground truth.

struct McEstimate {
    double value = 0.0;
    double stdError = 0.0;
};

namespace detail {

struct MeanAccumulator {
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;

    void add(double v) {
        sum += v;
        sumsq += v * v;
        ++count;
    }
    McEstimate estimate() const {
        const double n = static_cast<double>(count);
        const double mean = sum / n;
        const double var = count > 1 ? std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0)) : 0.0;
        return {mean, std::sqrt(var / n)};
    }
};

inline Vector draw_covariate(const GroundTruth& gt, Rng& rng) {
    Vector x(static_cast<Eigen::Index>(gt.constants.d));
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = sample_coordinate(gt.p0, gt.constants.C, rng);
    return x;
}

}  // namespace detail

// ‖f̂ − f*∘Q*R*‖₂² over fresh covariate draws.
inline McEstimate l2_loss_mc(const Function& fhat, const GroundTruth& gt, std::size_t nMC, std::uint64_t seed) {
    require(nMC >= 1, "invalid-size", "nMC must be at least 1");
    Rng rng(seed);
    detail::MeanAccumulator acc;
    for (std::size_t i = 0; i < nMC; ++i) {
        const Vector x = detail::draw_covariate(gt, rng);
        const double e = fhat(x) - gt.mean_response(x);
        acc.add(e * e);
    }
    return acc.estimate();
}

struct NormIntegralReport {
    McEstimate direct;     // mean of (g − f*)²
    McEstimate viaLoss;    // mean of L(g) − L(f*) on the same draws
    double diffStdError;   // std. error of the per-draw difference of the two
};

// Two estimators of ‖g − f*∘Q*R*‖₂² from one stream of (X, Y) draws: the
// squared distance directly, and the excess squared-error loss.
inline NormIntegralReport norm_integral_check(const Function& g, const GroundTruth& gt, std::size_t nMC,
                                              std::uint64_t seed) {
    require(nMC >= 1, "invalid-size", "nMC must be at least 1");
    Rng rng(seed);
    detail::MeanAccumulator direct, via, diff;
    for (std::size_t i = 0; i < nMC; ++i) {
        const Vector x = detail::draw_covariate(gt, rng);
        const double f = gt.mean_response(x);
        const double y = f + detail::draw_noise(gt.constants.eta, rng);
        const double gx = g(x);
        const double a = (gx - f) * (gx - f);
        const double b = (gx - y) * (gx - y) - (f - y) * (f - y);
        direct.add(a);
        via.add(b);
        diff.add(a - b);
    }
    return {direct.estimate(), via.estimate(), diff.estimate().stdError};
}

struct SensitivityReport {
    McEstimate lhs;  // ∫L(f*∘(QₙR)⁺(I*)) − ∫L(f*∘Q*R*)
    double rhs = 0.0;
    double eps1 = 0.0;  // ‖PR* − R‖_F
    double eps2 = 0.0;  // ‖QₙP − Q*‖_F
};

inline SensitivityReport sensitivity_check(const GroundTruth& gt, const Matrix& qn, const Matrix& r, std::size_t nMC,
                                           std::uint64_t seed) {
    const Matrix p = procrustes_align(qn, gt.Qstar);
    SensitivityReport rep;
    rep.eps1 = (p * gt.Rstar - r).norm();
    rep.eps2 = (qn * p - gt.Qstar).norm();
    const ModelConstants& c = gt.constants;
    rep.rhs = z_bound(rep.eps1, rep.eps2, c.C, c.eta, c.k, c.r);

    const Matrix m = restrict_rows(positive_part(qn * r), gt.Istar);
    Rng rng(seed);
    detail::MeanAccumulator acc;
    for (std::size_t i = 0; i < nMC; ++i) {
        const Vector x = detail::draw_covariate(gt, rng);
        const double f = gt.mean_response(x);
        const double y = f + detail::draw_noise(c.eta, rng);
        const double g = gt.fstar(m.transpose() * x);
        acc.add((g - y) * (g - y) - (f - y) * (f - y));
    }
    rep.lhs = acc.estimate();
    return rep;
}

// ---------------------------------------------------------------------------
// Finite-sample risk bound calculator.

struct TheoryReport {
    double tau = 0.0;
    double lambda = 0.0;
    double procrustesBound = 0.0;  // (1/ρ₀)·4√2·s*·λ
    double zValue = 0.0;           // z(δ, procrustesBound, C)
    double eps0 = 0.0;
    double alpha = 0.0;
    double netTerm = 0.0;  // probability the net misses the target
    double dimTerm = 0.0;  // 1/d²
    // The sample term overflows double range at any desk-scale constants, so
    // its logarithm is reported as well.
    double logSampleTerm = 0.0;
    double sampleTerm = 0.0;
    double theorem3BoundRaw = 0.0;  // sum of the three terms (may be +inf)
    double theorem3Bound = 0.0;     // the same, capped at 1
};

inline TheoryReport theorem3_bound(double eps, double delta, const ModelConstants& c, double n, std::size_t d,
                                   std::size_t n0) {
    require(c.rhoZero > 0.0 && c.pStar > 0.0, "invalid-constants", "rhoZero and pStar must be positive");
    TheoryReport rep;
    const TheoryParams tp = theory_params(c.theta, n, d);
    rep.tau = tp.tau;
    rep.lambda = tp.lambda;
    const double s = static_cast<double>(c.sStar);
    rep.procrustesBound = 4.0 * std::sqrt(2.0) * s * tp.lambda / c.rhoZero;
    rep.zValue = z_bound(delta, rep.procrustesBound, c.C, c.eta, c.k, c.r);
    if (!(eps > rep.zValue)) throw Error("epsilon-too-small", "eps must exceed z(delta, procrustes bound, C)");
    rep.eps0 = eps - rep.zValue;
    rep.alpha = rep.eps0 / (64.0 * (c.b + c.eta));

    rep.netTerm = 1.0 - coverage_bound(n0, c.k, c.r, delta);
    rep.dimTerm = 1.0 / (static_cast<double>(d) * static_cast<double>(d));

    using ld = long double;
    const ld ratio = static_cast<ld>(c.b) / static_cast<ld>(rep.alpha);
    const ld log_big = ratio * std::log(2.0L) + static_cast<ld>(s) * std::log(4.0L * c.pStar * c.C);
    const ld coeff = 2.0L * std::log(2.0L) * ratio + std::exp(log_big);
    const ld log_binom = std::lgamma(static_cast<ld>(d) + 1) - std::lgamma(static_cast<ld>(s) + 1) -
                         std::lgamma(static_cast<ld>(d) - static_cast<ld>(s) + 1);
    const ld log_term = std::log(4.0L) + log_binom + static_cast<ld>(c.k) * std::log(static_cast<ld>(n0)) +
                        coeff * std::pow(static_cast<ld>(n), (static_cast<ld>(s) - 1) / static_cast<ld>(s)) -
                        static_cast<ld>(rep.eps0) * rep.eps0 * n / (512.0L * c.b * c.b);
    rep.logSampleTerm = static_cast<double>(log_term);
    rep.sampleTerm = static_cast<double>(std::exp(log_term));
    rep.theorem3BoundRaw = rep.netTerm + rep.dimTerm + rep.sampleTerm;
    rep.theorem3Bound = std::min(1.0, rep.theorem3BoundRaw);
    return rep;
}

}  // namespace mmi
