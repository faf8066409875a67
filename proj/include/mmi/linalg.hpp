#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "mmi/error.hpp"

namespace mmi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Sorted, 0-based row indices into a d-row matrix.
using IndexSet = std::vector<std::size_t>;

struct SpectralDecomposition {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // column j pairs with eigenvalues(j)
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

// Cyclic Jacobi eigensolver. Eigenvalues are sorted descending with ties kept
// in diagonal order, and each eigenvector is signed so that its entry of
// largest magnitude is positive; both choices make the output deterministic.
inline SpectralDecomposition sym_eigen(const Matrix& input) {
    require(input.rows() == input.cols(), "not-square", "sym_eigen needs a square matrix");
    require(all_finite(input), "non-finite", "sym_eigen input has non-finite entries");
    const Eigen::Index n = input.rows();
    Matrix a = 0.5 * (input + input.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double scale = a.norm();

    auto off_mass = [&] {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) sum += a(i, j) * a(i, j);
        return std::sqrt(sum);
    };

    for (int sweep = 0; sweep < 100 && scale > 0.0; ++sweep) {
        if (off_mass() < 1e-12 * scale) break;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    SpectralDecomposition out{Vector(n), Matrix(n, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        out.eigenvalues(j) = a(src, src);
        Vector col = v.col(src);
        Eigen::Index arg = 0;
        for (Eigen::Index i = 1; i < n; ++i)
            if (std::abs(col(i)) > std::abs(col(arg))) arg = i;
        if (col(arg) < 0.0) col = -col;
        out.eigenvectors.col(j) = col;
    }
    return out;
}

inline Matrix positive_part(const Matrix& m) { return m.cwiseMax(0.0); }

// M(I): keep the rows listed in I, zero the others.
inline Matrix restrict_rows(const Matrix& m, const IndexSet& rows) {
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (std::size_t r : rows) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(r));
    return out;
}

// Projections M(I)ᵀXᵢ for every sample, one per row (n×k).
inline Matrix project_rows(const Matrix& x, const Matrix& m, const IndexSet& rows) {
    Matrix out = Matrix::Zero(x.rows(), m.cols());
    for (std::size_t r : rows) {
        const auto ri = static_cast<Eigen::Index>(r);
        out.noalias() += x.col(ri) * m.row(ri);
    }
    return out;
}

inline bool is_orthonormal(const Matrix& q, double tol) {
    const Matrix gram = q.transpose() * q;
    return (gram - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff() <= tol;
}

// Number of size-s subsets of a d-set, saturating at `cap` to avoid overflow.
inline std::size_t binomial_capped(std::size_t d, std::size_t s, std::size_t cap) {
    if (s > d) return 0;
    s = std::min(s, d - s);
    long double acc = 1.0L;
    for (std::size_t i = 1; i <= s; ++i) {
        acc = acc * static_cast<long double>(d - s + i) / static_cast<long double>(i);
        if (acc > static_cast<long double>(cap)) return cap;
    }
    return static_cast<std::size_t>(std::llround(acc));
}

// Visits every size-s subset of {0..d-1} in lexicographic order. The visitor
// returns false to stop early.
template <class Visitor>
void for_each_subset(std::size_t d, std::size_t s, Visitor&& visit) {
    if (s > d) return;
    IndexSet set(s);
    std::iota(set.begin(), set.end(), std::size_t{0});
    while (true) {
        if (!visit(static_cast<const IndexSet&>(set))) return;
        std::size_t i = s;
        while (i > 0 && set[i - 1] == d - s + (i - 1)) --i;
        if (i == 0) return;
        ++set[i - 1];
        for (std::size_t j = i; j < s; ++j) set[j] = set[j - 1] + 1;
    }
}

}  // namespace mmi
