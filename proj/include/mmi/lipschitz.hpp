#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mmi/error.hpp"
#include "mmi/isotonic.hpp"
#include "mmi/linalg.hpp"

namespace mmi {

// ‖(u)⁺‖₂ for a difference of two anchor rows.
inline double positive_gap(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    return (a - b).cwiseMax(0.0).norm();
}

// A point set admits a coordinate-wise monotone 1-Lipschitz interpolant iff
// yᵢ − yⱼ ≤ ‖(xᵢ − xⱼ)⁺‖ for every ordered pair.
inline bool interpolable(const Matrix& points, const Vector& values, double tol = 1e-12) {
    require(points.rows() == values.size(), "dimension-mismatch", "one value per point required");
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (Eigen::Index j = 0; j < points.rows(); ++j)
            if (i != j && values(i) - values(j) > positive_gap(points.row(i), points.row(j)) + tol) return false;
    return true;
}

// c[i][j] = ‖(pᵢ − pⱼ)⁺‖ for projection rows p.
inline Matrix caps_from_projections(const Matrix& p) {
    const Eigen::Index n = p.rows();
    Matrix c = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) c(i, j) = positive_gap(p.row(i), p.row(j));
    return c;
}

inline Matrix pairwise_caps(const Matrix& m, const IndexSet& rows, const Matrix& x) {
    require_nonnegative(m);
    return caps_from_projections(project_rows(x, m, rows));
}

struct PolytopeOptions {
    double tol = 1e-10;
    std::size_t maxCycles = 1000000;
};

struct PolytopeResult {
    Vector F;
    bool converged = false;
    std::size_t cycles = 0;
};

// Euclidean projection of Y onto {F : Fᵢ − Fⱼ ≤ c[i][j]} ∩ [0, b]ⁿ.
//
// Dykstra's cyclic scheme over the pairwise halfspaces and the box. A cap of
// at least b can never bind inside the box and is skipped. The converged
// iterate is then snapped to exact feasibility with Fᵢ ← minⱼ(Fⱼ + c[i][j]):
// the caps obey the triangle inequality, so this lands in the polytope and
// moves F by no more than its residual violation.
inline PolytopeResult project_polytope(const Vector& y, const Matrix& caps, double b, const PolytopeOptions& opts = {}) {
    const Eigen::Index n = y.size();
    require(caps.rows() == n && caps.cols() == n, "dimension-mismatch", "caps must be n×n");
    require(b > 0.0, "invalid-bound", "b must be positive");
    require(opts.tol > 0.0 && opts.maxCycles >= 1, "invalid-options", "tol > 0 and maxCycles >= 1 required");

    struct Halfspace {
        Eigen::Index i, j;
        double cap;
        double mu;  // Dykstra correction along eᵢ − eⱼ
    };
    std::vector<Halfspace> hs;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && caps(i, j) < b) hs.push_back({i, j, caps(i, j), 0.0});

    PolytopeResult res;
    Vector x = y;
    Vector box_corr = Vector::Zero(n);
    for (std::size_t cycle = 1; cycle <= opts.maxCycles; ++cycle) {
        // x alone can return to where it started while the corrections are
        // still moving, so the stopping rule watches both.
        const Vector prev = x;
        double moved = 0.0;
        for (Halfspace& h : hs) {
            const double violation = x(h.i) - x(h.j) + 2.0 * h.mu - h.cap;
            const double mu = std::max(0.0, 0.5 * violation);
            x(h.i) += h.mu - mu;
            x(h.j) -= h.mu - mu;
            moved = std::max(moved, std::abs(h.mu - mu));
            h.mu = mu;
        }
        const Vector shifted = x + box_corr;
        x = shifted.cwiseMax(0.0).cwiseMin(b);
        moved = std::max(moved, (shifted - x - box_corr).cwiseAbs().maxCoeff());
        box_corr = shifted - x;
        res.cycles = cycle;
        if (std::max(moved, (x - prev).cwiseAbs().maxCoeff()) < opts.tol) {
            res.converged = true;
            break;
        }
    }

    Vector snapped = x;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) snapped(i) = std::min(snapped(i), x(j) + caps(i, j));
    res.F = snapped.cwiseMax(0.0).cwiseMin(b);
    return res;
}

struct LipschitzFit {
    IndexSet I;
    Vector F;
    Matrix anchors;  // n×k projections paired with F
    double objective = 0.0;
    bool converged = true;  // every polytope projection met its tolerance
};

inline LipschitzFit lipschitz_sparse_fit(const Matrix& x, const Vector& y, const Matrix& m, std::size_t s, double b,
                                         const SearchOptions& search = {}, const PolytopeOptions& poly = {}) {
    require_nonnegative(m);
    require(x.rows() == y.size() && x.cols() == m.rows(), "dimension-mismatch", "X, Y and M disagree in shape");
    require(b > 0.0, "invalid-bound", "b must be positive");
    LipschitzFit fit;
    auto [set, f] = search_index_sets(static_cast<std::size_t>(m.rows()), s, m, y, clip_floor(y, b), search,
                                      [&](const IndexSet& eff) {
                                          PolytopeResult r = project_polytope(y, pairwise_caps(m, eff, x), b, poly);
                                          fit.converged = fit.converged && r.converged;
                                          return r.F;
                                      });
    fit.I = std::move(set);
    fit.F = std::move(f);
    fit.objective = squared_error(y, fit.F);
    fit.anchors = project_rows(x, m, fit.I);
    return fit;
}

// f̂(z) = max(0, maxᵢ{yᵢ − ‖(aᵢ − z)⁺‖}): the smallest monotone 1-Lipschitz
// nonnegative interpolant of the anchors.
class LipschitzInterpolant {
public:
    LipschitzInterpolant() = default;
    LipschitzInterpolant(Matrix anchors, Vector values) : anchors_(std::move(anchors)), values_(std::move(values)) {
        if (!interpolable(anchors_, values_))
            throw Error("not-interpolable", "anchors violate yᵢ − yⱼ ≤ ‖(xᵢ − xⱼ)⁺‖");
    }

    double operator()(const Vector& z) const {
        require(z.size() == anchors_.cols(), "dimension-mismatch", "query has wrong length");
        double best = 0.0;
        for (Eigen::Index i = 0; i < anchors_.rows(); ++i) {
            if (values_(i) <= best) continue;
            best = std::max(best, values_(i) - (anchors_.row(i) - z.transpose()).cwiseMax(0.0).norm());
        }
        return best;
    }

    const Matrix& anchors() const { return anchors_; }
    const Vector& values() const { return values_; }

private:
    Matrix anchors_;
    Vector values_;
};

}  // namespace mmi
