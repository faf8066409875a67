#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "mmi/error.hpp"
#include "mmi/linalg.hpp"
#include "mmi/model.hpp"
#include "mmi/stein.hpp"

namespace mmi {

enum class PenaltySign {
    Subtract,     // maximize Tr(WΣ) − λ‖W‖₁ (a proper sparsity penalty)
    AddAsPrinted  // maximize Tr(WΣ) + λ‖W‖₁ (kept for fidelity experiments)
};

struct SdpConfig {
    double lambda = 0.0;
    double admmRho = 1.0;
    std::size_t maxIter = 5000;
    double primalTol = 1e-7;
    double dualTol = 1e-7;
    PenaltySign penaltySign = PenaltySign::Subtract;

    void validate() const {
        require(lambda >= 0.0 && std::isfinite(lambda), "invalid-sdp-config", "lambda must be finite and >= 0");
        require(admmRho > 0.0, "invalid-sdp-config", "admmRho must be positive");
        require(maxIter >= 1, "invalid-sdp-config", "maxIter must be at least 1");
        require(primalTol > 0.0 && dualTol > 0.0, "invalid-sdp-config", "tolerances must be positive");
    }
};

struct SdpResult {
    Matrix W;
    bool converged = false;
    std::size_t iterations = 0;
    double objective = 0.0;
};

namespace detail {

// Shift θ with Σ clip(λᵢ − θ, 0, 1) = k: bisection, then an exact solve on the
// active pattern the bisection settled on.
inline double fantope_shift(const Vector& lambda, std::size_t k) {
    const double target = static_cast<double>(k);
    auto mass = [&](double theta) { return (lambda.array() - theta).cwiseMax(0.0).cwiseMin(1.0).sum(); };
    double lo = lambda.minCoeff() - 1.0;  // mass = d ≥ k
    double hi = lambda.maxCoeff();        // mass = 0 ≤ k
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double m = mass(mid);
        if (std::abs(m - target) <= 1e-12) {
            lo = hi = mid;
            break;
        }
        if (m > target) lo = mid;
        else hi = mid;
    }
    const double theta = 0.5 * (lo + hi);

    double full = 0.0, mid_sum = 0.0;
    int mid_count = 0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double g = lambda(i) - theta;
        if (g >= 1.0) full += 1.0;
        else if (g > 0.0) {
            mid_sum += lambda(i);
            ++mid_count;
        }
    }
    if (mid_count == 0) return theta;
    const double exact = (mid_sum + full - target) / mid_count;
    return std::abs(mass(exact) - target) <= std::abs(mass(theta) - target) ? exact : theta;
}

inline Matrix fantope_from_spectrum(const SpectralDecomposition& eig, std::size_t k) {
    const double theta = fantope_shift(eig.eigenvalues, k);
    const Vector gamma = (eig.eigenvalues.array() - theta).cwiseMax(0.0).cwiseMin(1.0).matrix();
    Matrix out = eig.eigenvectors * gamma.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace detail

// Frobenius projection onto {0 ⪯ W ⪯ I, Tr W = k}.
inline Matrix fantope_project(const Matrix& a, std::size_t k) {
    const auto d = static_cast<std::size_t>(a.rows());
    require(k >= 1 && k <= d, "invalid-rank", "fantope rank must satisfy 1 <= k <= d");
    if (k == d) return Matrix::Identity(a.rows(), a.cols());
    return detail::fantope_from_spectrum(sym_eigen(a), k);
}

inline double sdp_objective(const Matrix& w, const Matrix& sigma, double lambda, PenaltySign sign) {
    const double l1 = w.cwiseAbs().sum();
    const double fit = (w.transpose() * sigma).trace();
    return sign == PenaltySign::Subtract ? fit - lambda * l1 : fit + lambda * l1;
}

// ADMM on the split W = Z: W carries the Fantope constraint, Z the ℓ₁ term.
inline SdpResult solve_sdp(const Matrix& sigma, std::size_t k, const SdpConfig& cfg) {
    cfg.validate();
    require(sigma.rows() == sigma.cols(), "not-square", "sigma must be square");
    require(all_finite(sigma), "non-finite", "sigma has non-finite entries");
    const Eigen::Index d = sigma.rows();
    require(k >= 1 && k <= static_cast<std::size_t>(d), "invalid-rank", "need 1 <= k <= d");

    SdpResult res;
    if (static_cast<std::size_t>(d) == k) {
        res.W = Matrix::Identity(d, d);
        res.converged = true;
        res.objective = sdp_objective(res.W, sigma, cfg.lambda, cfg.penaltySign);
        return res;
    }

    // The maximizer is unchanged when Σ and λ are scaled together; working at
    // max(|Σᵢⱼ|, λ) = 1 keeps the ℓ₁ threshold and the dual variable on the
    // same scale as W whatever the schedule produced.
    const double scale = std::max({sigma.cwiseAbs().maxCoeff(), cfg.lambda, std::numeric_limits<double>::min()});
    const Matrix s = sigma / scale;
    const double lambda = cfg.lambda / scale;
    double rho = cfg.admmRho;
    Matrix z = Matrix::Zero(d, d), u = Matrix::Zero(d, d), w;
    // Successive W-updates have nearly the same eigenbasis, so each Jacobi
    // solve starts from the previous basis; the basis is refreshed
    // periodically to keep rounding drift out of its orthonormality.
    Matrix basis = Matrix::Identity(d, d);
    for (std::size_t it = 1; it <= cfg.maxIter; ++it) {
        if (it % 200 == 0) basis = Matrix::Identity(d, d);
        const Matrix target = z - u + s / rho;
        SpectralDecomposition eig = sym_eigen(basis.transpose() * target * basis);
        eig.eigenvectors = basis * eig.eigenvectors;
        basis = eig.eigenvectors;
        w = detail::fantope_from_spectrum(eig, k);

        const Matrix z_prev = z;
        const Matrix v = w + u;
        const double shrink = lambda / rho;
        if (cfg.penaltySign == PenaltySign::Subtract)
            z = v.unaryExpr([shrink](double x) { return x > shrink ? x - shrink : (x < -shrink ? x + shrink : 0.0); });
        else
            z = v.unaryExpr([shrink](double x) { return x >= 0.0 ? x + shrink : x - shrink; });
        u += w - z;

        res.iterations = it;
        const double primal = (w - z).norm();
        const double dual = rho * (z - z_prev).norm();
        if (primal <= cfg.primalTol && dual <= cfg.dualTol) {
            res.converged = true;
            break;
        }
        // Residual balancing; u is the scaled dual, so it rescales with ρ.
        if (primal > 10.0 * dual) {
            rho *= 2.0;
            u /= 2.0;
        } else if (dual > 10.0 * primal) {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    res.W = 0.5 * (w + w.transpose());
    res.objective = sdp_objective(res.W, sigma, cfg.lambda, cfg.penaltySign);
    return res;
}

// The k leading eigenvectors of a symmetric matrix, as columns.
inline Matrix leading_eigenvectors(const Matrix& w, std::size_t k) {
    return sym_eigen(w).eigenvectors.leftCols(static_cast<Eigen::Index>(k));
}

struct SubspaceEstimate {
    Matrix Q;      // d×k orthonormal
    Matrix sigma;  // Σ̃ that was fed to the SDP
    SdpResult sdp;
};

inline SubspaceEstimate estimate_Q(const Dataset& data, double tau, double lambda, std::size_t k, SdpConfig cfg,
                                   DensityFamily family = DensityFamily::PolyBump6) {
    require(data.size() >= 1, "invalid-size", "estimate_Q needs at least one sample");
    cfg.lambda = lambda;
    SubspaceEstimate est;
    est.sigma = sigma_tilde(data, family, tau);
    est.sdp = solve_sdp(est.sigma, k, cfg);
    est.Q = leading_eigenvectors(est.sdp.W, k);
    return est;
}

}  // namespace mmi
