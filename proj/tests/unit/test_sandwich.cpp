#include "oracles.hpp"
#include "rankcorr/estimator.hpp"
#include "rankcorr/sandwich.hpp"
#include "rankcorr/simulation.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace rankcorr;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = g(rng);
    return m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

Eigen::VectorXd random_theta(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> g;
    Eigen::VectorXd t(d);
    for (Eigen::Index k = 0; k < d; ++k) t(k) = g(rng);
    return t;
}

bool is_psd(const Eigen::MatrixXd& m, double tol) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    return eig.eigenvalues().minCoeff() >= -tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(HessianEstimate, EqualResponsesGiveZero) {
    const Dataset base = oracle::random_dataset(1, 30, 2);
    const Dataset flat = base.with_transformed_response([](double) { return 1.0; });
    const ParamVector theta{0.3, -0.1};
    EXPECT_TRUE(hessian_estimate(flat, theta, SmoothingMatrix::identity(2)).isZero(0.0));
    EXPECT_TRUE(score_variance_estimate(flat, theta, SmoothingMatrix::identity(2)).isZero(0.0));
}

// The implemented A is the exact Hessian of the smoothed objective, so the
// finite-difference Jacobian of the score is compared with factor 1.
TEST(HessianEstimate, MatchesFiniteDifferenceOfScore) {
    const Dataset data = oracle::random_dataset(50, 50, 1);
    const SmoothingMatrix s = SmoothingMatrix::identity(1);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.3);
    const auto score = [&](const Eigen::VectorXd& t) { return smoothed_score(data, ParamVector(t), s); };
    const Eigen::MatrixXd fd = oracle::fd_jacobian(score, theta, 1e-5);
    EXPECT_NEAR(hessian_estimate(data, ParamVector(theta), s)(0, 0), fd(0, 0), 5e-4);
}

TEST(HessianEstimate, ExactlySymmetric) {
    std::mt19937_64 rng(2);
    const Dataset data = oracle::random_dataset(51, 60, 3, true);
    const Eigen::MatrixXd a = hessian_estimate(data, ParamVector(random_theta(rng, 3)), SmoothingMatrix(random_spd(rng, 3)));
    EXPECT_EQ(a, a.transpose());
}

TEST(HessianEstimate, NegativeDefiniteAtFittedOptimum) {
    const Dataset data = generate_design(DesignSpec::make(Design::I, 500), 2024);
    const EstimateResult r = fit(data);
    const Eigen::MatrixXd a = hessian_estimate(data, r.theta_hat, SmoothingMatrix(r.sigma_star));
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(-a).info(), Eigen::Success);
}

TEST(ScoreVarianceEstimate, MatchesPsiOracle) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 6; ++t) {
        const int d = 1 + t % 3;
        const Dataset data = oracle::random_dataset(60 + t, 30, d, t % 2 == 1);
        const Eigen::VectorXd theta = random_theta(rng, d);
        const Eigen::MatrixXd s = random_spd(rng, d);
        const Eigen::MatrixXd v = score_variance_estimate(data, ParamVector(theta), SmoothingMatrix(s));
        const Eigen::MatrixXd ref = oracle::score_variance(data, theta, s);
        EXPECT_LT((v - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
}

TEST(ScoreVarianceEstimate, PositiveSemidefiniteProbes) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 5; ++t) {
        const Dataset data = oracle::random_dataset(70 + t, 40, 2, t % 2 == 0);
        const Eigen::MatrixXd v =
            score_variance_estimate(data, ParamVector(random_theta(rng, 2)), SmoothingMatrix(random_spd(rng, 2)));
        for (int p = 0; p < 100; ++p) {
            const Eigen::Vector2d x(g(rng), g(rng));
            EXPECT_GE(x.dot(v * x), 0.0);
        }
        EXPECT_EQ(v, v.transpose());
    }
}

TEST(Sandwich, ScalarArithmetic) {
    const Eigen::MatrixXd d = sandwich_from_parts(Eigen::MatrixXd::Constant(1, 1, -2.0), Eigen::MatrixXd::Constant(1, 1, 8.0));
    EXPECT_DOUBLE_EQ(d(0, 0), 2.0);
}

TEST(Sandwich, PartsAreConsistentAndPsd) {
    std::mt19937_64 rng(5);
    const Dataset data = generate_design(DesignSpec::make(Design::III, 150), 5);
    const ParamVector theta{1.6, 0.5};
    const SandwichParts parts = sandwich_parts(data, theta, SmoothingMatrix(random_spd(rng, 2)));
    EXPECT_TRUE(is_psd(parts.v_hat, 1e-10));
    EXPECT_TRUE(is_psd(parts.d_hat, 1e-10));
    const Eigen::MatrixXd a_inv = parts.a_hat.inverse();
    EXPECT_LT((parts.d_hat - a_inv * parts.v_hat * a_inv).cwiseAbs().maxCoeff(), 1e-9 * parts.d_hat.cwiseAbs().maxCoeff());
}

TEST(Sandwich, SingularHessianIsDiagnosed) {
    const Dataset base = oracle::random_dataset(80, 20, 1);
    const Dataset flat = base.with_transformed_response([](double) { return 0.0; });
    try {
        sandwich_covariance(flat, ParamVector{0.5}, SmoothingMatrix::identity(1));
        FAIL();
    } catch (const DiagnosticsError& e) {
        EXPECT_FALSE(e.condition() <= kMaxCondition);
    }
}

TEST(Sandwich, CensoredPathReducesBitIdentically) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 5; ++t) {
        const int d = 1 + t % 2;
        const Dataset data = oracle::random_dataset(90 + t, 50, d);
        const Dataset flagged = data.with_events(std::vector<bool>(50, true));
        const ParamVector theta(random_theta(rng, d));
        const SmoothingMatrix s(random_spd(rng, d));
        const SandwichParts a = sandwich_parts(data, theta, s);
        const SandwichParts b = sandwich_parts(flagged, theta, s);
        EXPECT_EQ(a.a_hat, b.a_hat);
        EXPECT_EQ(a.v_hat, b.v_hat);
        EXPECT_EQ(a.d_hat, b.d_hat);
    }
}

TEST(Sandwich, MonotoneTransformInvariance) {
    const Dataset data = generate_design(DesignSpec::make(Design::II, 200), 12);
    const Dataset moved = data.with_transformed_response([](double v) { return std::log(v) * 3.0 + 1.0; });
    const ParamVector theta{1.55};
    EXPECT_EQ(sandwich_covariance(moved, theta, SmoothingMatrix::identity(1)),
              sandwich_covariance(data, theta, SmoothingMatrix::identity(1)));
}

TEST(Sandwich, StandardErrorScaleAtLargeN) {
    // sqrt(D / n) at the step estimate, averaged over draws.
    double total = 0.0;
    const int draws = 4;
    for (int s = 0; s < draws; ++s) {
        const Dataset data = generate_design(DesignSpec::make(Design::I, 2000), 3000 + s);
        const StepMaximum step = maximize_step_objective(data);
        total += std::sqrt(sandwich_covariance(data, step.theta, SmoothingMatrix::identity(1))(0, 0) / 2000.0);
    }
    EXPECT_NEAR(total / draws, 0.0144, 0.2 * 0.0144);
}

TEST(InvertSpd, Examples) {
    EXPECT_EQ(invert_spd(Eigen::MatrixXd::Identity(3, 3)), Eigen::MatrixXd::Identity(3, 3));
    const Eigen::MatrixXd inv = invert_spd(Eigen::Vector2d(4.0, 0.25).asDiagonal().toDenseMatrix());
    EXPECT_DOUBLE_EQ(inv(0, 0), 0.25);
    EXPECT_DOUBLE_EQ(inv(1, 1), 4.0);
    EXPECT_EQ(inv(0, 1), 0.0);
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd m = random_spd(rng, 3);
    EXPECT_LT((m * invert_spd(m) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(InvertSpd, IllConditionedAndIndefinite) {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_spd(rng, 3)).householderQ();
    // The residual of any double-precision inverse is about cond * eps.
    for (double cond : {1e4, 1e6, 1e10}) {
        Eigen::MatrixXd m = q * Eigen::Vector3d(1.0, 1.0 / std::sqrt(cond), 1.0 / cond).asDiagonal() * q.transpose();
        m = 0.5 * (m + m.transpose());
        const double bound = std::max(1e-8, 1e4 * cond * std::numeric_limits<double>::epsilon());
        EXPECT_LT((m * invert_spd(m) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), bound) << cond;
    }
    const Eigen::MatrixXd scaled = Eigen::Vector3d(1.0, 1e-5, 1e-10).asDiagonal();
    EXPECT_LT((scaled * invert_spd(scaled) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
    Eigen::Matrix2d indefinite;
    indefinite << 1.0, 2.0, 2.0, 1.0;
    EXPECT_LT((indefinite * invert_spd(indefinite) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::Matrix2d singular;
    singular << 1.0, 1.0, 1.0, 1.0;
    EXPECT_THROW(invert_spd(singular), DiagnosticsError);
    EXPECT_THROW(invert_spd(Eigen::MatrixXd(2, 3)), InputError);
}
