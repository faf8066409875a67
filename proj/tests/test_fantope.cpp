#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mmi/fantope.hpp"

namespace {

using namespace mmi;

Matrix random_symmetric(Eigen::Index d, Rng& rng, double scale = 1.0) {
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = scale * standard_normal(rng);
    return 0.5 * (a + a.transpose());
}

// A random member of the Fantope: spectrum clipped and water-filled by hand.
Matrix random_fantope_point(Eigen::Index d, std::size_t k, Rng& rng) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(random_symmetric(d, rng));
    Vector g(d);
    for (Eigen::Index i = 0; i < d; ++i) g(i) = uniform01(rng);
    // Rescale toward trace k while staying in [0, 1]: bisection on a shift.
    double lo = -1.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((g.array() + mid).cwiseMax(0.0).cwiseMin(1.0).sum() > double(k) ? hi : lo) = mid;
    }
    g = (g.array() + 0.5 * (lo + hi)).cwiseMax(0.0).cwiseMin(1.0).matrix();
    return es.eigenvectors() * g.asDiagonal() * es.eigenvectors().transpose();
}

TEST(SymEigen, Examples) {
    Matrix a = Vector(Eigen::Vector3d(3, 1, 2)).asDiagonal();
    const SpectralDecomposition e = sym_eigen(a);
    EXPECT_EQ(e.eigenvalues, Vector(Eigen::Vector3d(3, 2, 1)));

    Matrix b(2, 2);
    b << 2, 1, 1, 2;
    const SpectralDecomposition f = sym_eigen(b);
    EXPECT_NEAR(f.eigenvalues(0), 3.0, 1e-14);
    EXPECT_NEAR(f.eigenvalues(1), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(f.eigenvectors(0, 0)), 1 / std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(f.eigenvectors(0, 0), f.eigenvectors(1, 0), 1e-14);
    EXPECT_NEAR(f.eigenvectors(0, 1), -f.eigenvectors(1, 1), 1e-14);
}

TEST(SymEigen, AgreesWithEigenAndReconstructs) {
    Rng rng(1);
    for (int t = 0; t < 40; ++t) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(uniform_index(rng, 15));
        const Matrix a = random_symmetric(d, rng);
        const SpectralDecomposition e = sym_eigen(a);
        Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
        const Vector expected = ref.eigenvalues().reverse();
        EXPECT_LT((e.eigenvalues - expected).cwiseAbs().maxCoeff(), 1e-10);
        const Matrix& v = e.eigenvectors;
        EXPECT_LT((v.transpose() * v - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((a * v - v * e.eigenvalues.asDiagonal()).norm(), 1e-8 * std::max(1.0, a.norm()));
        EXPECT_LT((v * e.eigenvalues.asDiagonal() * v.transpose() - a).cwiseAbs().maxCoeff(), 1e-9);
        for (Eigen::Index j = 0; j < d; ++j) {
            Eigen::Index imax;
            v.col(j).cwiseAbs().maxCoeff(&imax);
            EXPECT_GT(v(imax, j), 0.0);
        }
    }
}

TEST(SymEigen, TiesKeepIndexOrder) {
    const SpectralDecomposition e = sym_eigen(Matrix::Identity(4, 4));
    EXPECT_EQ(e.eigenvectors, Matrix::Identity(4, 4));
}

TEST(SymEigen, RejectsNonFinite) {
    Matrix a = Matrix::Identity(2, 2);
    a(0, 1) = a(1, 0) = std::nan("");
    EXPECT_THROW(sym_eigen(a), Error);
}

TEST(FantopeProject, Examples) {
    const Matrix a = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    Matrix want = Matrix::Zero(3, 3);
    want(0, 0) = 1.0;
    EXPECT_LT((fantope_project(a, 1) - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(fantope_project(Matrix::Identity(3, 3), 3), Matrix::Identity(3, 3));
    EXPECT_THROW(fantope_project(a, 0), Error);
    EXPECT_THROW(fantope_project(a, 4), Error);
}

TEST(FantopeProject, FeasiblePointsAreFixed) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const std::size_t k = 1 + uniform_index(rng, 5);
        const Matrix w = random_fantope_point(6, k, rng);
        EXPECT_LT((fantope_project(w, k) - w).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(FantopeProject, InvariantsAndVariationalInequality) {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(uniform_index(rng, 9));
        const std::size_t k = 1 + uniform_index(rng, static_cast<std::size_t>(d));
        const Matrix a = random_symmetric(d, rng, 2.0), b = random_symmetric(d, rng, 2.0);
        const Matrix pa = fantope_project(a, k), pb = fantope_project(b, k);
        Eigen::SelfAdjointEigenSolver<Matrix> es(pa);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
        EXPECT_LE(es.eigenvalues().maxCoeff(), 1 + 1e-9);
        EXPECT_NEAR(pa.trace(), double(k), 1e-9);
        EXPECT_LT((fantope_project(pa, k) - pa).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-8);
        // P(A) is the projection iff ⟨A − P(A), B − P(A)⟩ ≤ 0 for all feasible B.
        for (int s = 0; s < 20; ++s) {
            const Matrix w = random_fantope_point(d, k, rng);
            EXPECT_LE(((a - pa).transpose() * (w - pa)).trace(), 1e-8);
        }
    }
}

TEST(SolveSdp, Examples) {
    const Matrix sigma = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    const SdpResult r = solve_sdp(sigma, 1, SdpConfig{});
    EXPECT_TRUE(r.converged);
    Matrix want = Matrix::Zero(3, 3);
    want(0, 0) = 1.0;
    EXPECT_LT((r.W - want).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r.objective, 3.0, 1e-6);

    Rng rng(4);
    const Matrix any = random_symmetric(4, rng);
    EXPECT_EQ(solve_sdp(any, 4, SdpConfig{}).W, Matrix::Identity(4, 4));
}

// With Σ diagonal the penalty only touches off-diagonal mass, so the optimum
// is the diagonal indicator of the k largest Σᵢᵢ.
TEST(SolveSdp, DiagonalSigmaGivesDiagonalW) {
    Rng rng(5);
    for (double lambda : {0.0, 0.1, 1.0, 50.0}) {
        Vector diag(5);
        for (Eigen::Index i = 0; i < 5; ++i) diag(i) = 3 * uniform01(rng);
        SdpConfig cfg;
        cfg.lambda = lambda;
        const SdpResult r = solve_sdp(Matrix(diag.asDiagonal()), 2, cfg);
        Matrix off = r.W;
        off.diagonal().setZero();
        EXPECT_LT(off.cwiseAbs().maxCoeff(), 1e-6);
        std::vector<Eigen::Index> idx{0, 1, 2, 3, 4};
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return diag(a) > diag(b); });
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(r.W(idx[j], idx[j]), j < 2 ? 1.0 : 0.0, 1e-5);
    }
}

TEST(SolveSdp, LambdaZeroMatchesTopEigenvalues) {
    Rng rng(6);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(uniform_index(rng, 11));
        const std::size_t k = 1 + uniform_index(rng, static_cast<std::size_t>(d));
        const Matrix sigma = random_symmetric(d, rng);
        const SdpResult r = solve_sdp(sigma, k, SdpConfig{});
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
        EXPECT_NEAR(r.objective, es.eigenvalues().tail(static_cast<Eigen::Index>(k)).sum(), 1e-5);
    }
}

TEST(SolveSdp, FeasibleAndBeatsRandomFeasiblePoints) {
    Rng rng(7);
    for (double lambda : {0.05, 0.3, 2.0}) {
        const Eigen::Index d = 6;
        const std::size_t k = 2;
        const Matrix sigma = random_symmetric(d, rng);
        SdpConfig cfg;
        cfg.lambda = lambda;
        const SdpResult r = solve_sdp(sigma, k, cfg);
        EXPECT_TRUE(r.converged);
        Eigen::SelfAdjointEigenSolver<Matrix> es(r.W);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
        EXPECT_LE(es.eigenvalues().maxCoeff(), 1 + 1e-6);
        EXPECT_NEAR(r.W.trace(), double(k), 1e-6);
        for (int s = 0; s < 100; ++s) {
            const Matrix w = fantope_project(random_symmetric(d, rng, 3.0), k);
            EXPECT_GE(r.objective, sdp_objective(w, sigma, lambda, PenaltySign::Subtract) - 1e-6);
        }
    }
}

TEST(SolveSdp, LargePenaltySelectsTheLargestDiagonal) {
    Rng rng(8);
    Matrix sigma = 0.3 * random_symmetric(8, rng);
    sigma(5, 5) = 2.0;
    SdpConfig cfg;
    cfg.lambda = 500.0;
    const SdpResult r = solve_sdp(sigma, 1, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.W(5, 5), 1.0, 1e-6);
}

TEST(SolveSdp, PrintedSignIsFeasible) {
    Rng rng(9);
    SdpConfig cfg;
    cfg.lambda = 0.2;
    cfg.penaltySign = PenaltySign::AddAsPrinted;
    const SdpResult r = solve_sdp(random_symmetric(5, rng), 2, cfg);
    EXPECT_NEAR(r.W.trace(), 2.0, 1e-6);
    Eigen::SelfAdjointEigenSolver<Matrix> es(r.W);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1 + 1e-6);
}

TEST(SolveSdp, ConfigValidation) {
    SdpConfig cfg;
    cfg.lambda = -1;
    EXPECT_THROW(solve_sdp(Matrix::Identity(3, 3), 1, cfg), Error);
    cfg = SdpConfig{};
    cfg.maxIter = 1;
    const SdpResult r = solve_sdp(Matrix(Vector(Eigen::Vector3d(1, 2, 3)).asDiagonal()) + Matrix::Ones(3, 3), 1, cfg);
    EXPECT_EQ(r.iterations, 1u);
    EXPECT_FALSE(r.converged);
}

TEST(EstimateQ, OrthonormalAndRecoversTheIndex) {
    ModelConstants c;
    c.d = 10;
    c.k = 1;
    c.sStar = 1;
    c.b = 4.0;
    c.eta = 0.0;
    const GroundTruth gt = make_ground_truth(c, 3);
    const Dataset data = sample_dataset(gt, 2000, 4);
    const double logd = std::log(10.0);
    const double tau = std::pow(3 * gt.constants.theta * 2000 / (2 * logd), 1.0 / 6);
    const double lambda = 10 * std::sqrt(gt.constants.theta * logd / 2000);
    const SubspaceEstimate est = estimate_Q(data, tau, lambda, 1, SdpConfig{});
    EXPECT_NEAR(est.Q.norm(), 1.0, 1e-8);
    EXPECT_GE(std::abs(est.Q.col(0).dot(gt.Qstar.col(0))), 0.9);
}

TEST(EstimateQ, DegenerateSpectrumBreaksTiesByIndex) {
    const Matrix q = leading_eigenvectors(Matrix::Identity(5, 5) / 5.0, 2);
    EXPECT_EQ(q, Matrix::Identity(5, 2));
}

TEST(EstimateQ, TwoDimensionalIndexIsOrthonormal) {
    ModelConstants c;
    c.d = 6;
    c.k = 2;
    c.sStar = 3;
    c.b = 4.0;
    c.eta = 0.1;
    const GroundTruth gt = make_ground_truth(c, 5);
    const SubspaceEstimate est = estimate_Q(sample_dataset(gt, 1000, 6), 20.0, 0.0, 2, SdpConfig{});
    EXPECT_LT((est.Q.transpose() * est.Q - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace
