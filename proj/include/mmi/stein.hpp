#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmi/error.hpp"
#include "mmi/linalg.hpp"
#include "mmi/model.hpp"

namespace mmi {

struct SteinConfig {
    double tau = std::numeric_limits<double>::infinity();

    void validate() const { require(tau > 0.0, "invalid-tau", "truncation level must be positive"); }
};

// T[i][j] = sᵢsⱼ off the diagonal and T[i][i] = sᵢ² − s'ᵢ.
inline Matrix stein_matrix(const Vector& s, const Vector& sprime) {
    require(s.size() == sprime.size(), "dimension-mismatch", "score vectors differ in length");
    Matrix t = s * s.transpose();
    t.diagonal() -= sprime;
    return t;
}

inline double truncate(double v, double tau) {
    const double m = std::min(std::abs(v), tau);
    return v < 0.0 ? -m : m;
}

// Per-sample score values, laid out like X.
struct ScoreTable {
    Matrix s0;
    Matrix s0prime;
};

inline ScoreTable compute_scores(const Matrix& x, DensityFamily family, double C) {
    ScoreTable t{Matrix(x.rows(), x.cols()), Matrix(x.rows(), x.cols())};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const ScoreValue sv = score(family, C, x(i, j));
            t.s0(i, j) = sv.s0;
            t.s0prime(i, j) = sv.s0prime;
        }
    }
    return t;
}

// Σ̃ = (1/n) Σᵢ trunc_τ(Yᵢ) · trunc_τ²(T(Xᵢ)).
//
// The score table holds s0 = p0'/p0. The kernel is fed (−s0, −s0'), for which
// s² − s' = s0² + s0' = p0''/p0, the sign that makes E[Y·T(X)] = E[∇²(f∘βᵀ)]
// hold. Off-diagonal products are unaffected by the flip.
inline Matrix sigma_tilde(const Vector& y, const ScoreTable& scores, double tau) {
    SteinConfig{tau}.validate();
    const Eigen::Index n = y.size();
    const Eigen::Index d = scores.s0.cols();
    require(n >= 1 && scores.s0.rows() == n && scores.s0prime.rows() == n && scores.s0prime.cols() == d,
            "dimension-mismatch", "sigma_tilde inputs disagree in shape");
    const double tau2 = tau * tau;
    Matrix acc = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double yt = truncate(y(i), tau);
        const Matrix t = stein_matrix(-scores.s0.row(i).transpose(), -scores.s0prime.row(i).transpose());
        for (Eigen::Index c = 0; c < d; ++c)
            for (Eigen::Index r = 0; r <= c; ++r) acc(r, c) += yt * truncate(t(r, c), tau2);
    }
    acc /= static_cast<double>(n);
    for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = c + 1; r < d; ++r) acc(r, c) = acc(c, r);
    return acc;
}

inline Matrix sigma_tilde(const Dataset& data, DensityFamily family, double tau) {
    return sigma_tilde(data.Y, compute_scores(data.X, family, data.constants.C), tau);
}

}  // namespace mmi
