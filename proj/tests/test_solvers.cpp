#include <gtest/gtest.h>

#include "oracles.hpp"
#include "repro/repro.hpp"

using namespace repro;

namespace {

Dataset random_instance(std::uint64_t seed, Index n, Index p, double scale = 1.0) {
    Vector b = Vector::Zero(std::min<Index>(p, 3));
    for (Index j = 0; j < b.size(); ++j) b[j] = scale * (j % 2 == 0 ? 1.5 : -1.0);
    return simulate_logistic(seed, n, p, ThetaPoint(SupportSet::first_k(static_cast<std::size_t>(b.size())), b), 0.2)
        .data;
}

Dataset from_columns(const Matrix& x, std::initializer_list<int> labels) {
    Eigen::VectorXi y(static_cast<Index>(labels.size()));
    Index i = 0;
    for (int v : labels) y[i++] = v;
    return validate_dataset(x, y);
}

std::string error_of(auto&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

// --- lasso path -----------------------------------------------------------

TEST(LassoPath, ZeroAtLambdaMaxAndDecreasingGrid) {
    const Dataset d = random_instance(3, 60, 12);
    const auto path = logistic_lasso_path(d);
    ASSERT_EQ(path.size(), 100u);
    EXPECT_EQ(path.betas[0].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(path.supports[0].empty());
    for (std::size_t k = 1; k < path.size(); ++k) EXPECT_LT(path.lambdas[k], path.lambdas[k - 1]);
    EXPECT_NEAR(path.lambdas.back() / path.lambdas.front(), 1e-3, 1e-12);
    // lambda_max is the largest null-model gradient entry
    const Vector g0 = oracle::mean_loss_grad(d.x(), oracle::signs_of(d.y()), Vector::Zero(12));
    EXPECT_NEAR(path.lambdas[0], g0.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LassoPath, OneDimensionalSeparable) {
    Matrix x(50, 1);
    Eigen::VectorXi y(50);
    for (Index i = 0; i < 50; ++i) {
        x(i, 0) = static_cast<double>(i) - 24.5;
        y[i] = x(i, 0) > 0 ? 1 : 0;
    }
    const auto path = logistic_lasso_path(validate_dataset(x, y));
    bool grew = false;
    for (const auto& s : path.supports) {
        EXPECT_LE(s.size(), 1u);
        if (s.size() == 1) {
            EXPECT_EQ(s.indices()[0], 0);
            grew = true;
        } else {
            EXPECT_FALSE(grew);  // {} then {0}
        }
    }
    EXPECT_TRUE(grew);
}

TEST(LassoPath, KktAtEveryGridPoint) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Dataset d = random_instance(seed, 40, 10);
        const auto path = logistic_lasso_path(d);
        for (std::size_t k = 0; k < path.size(); ++k)
            ASSERT_LE(oracle::kkt_violation(d.x(), d.y(), path.betas[k], path.lambdas[k], Vector::Ones(10)), 1e-6)
                << "seed " << seed << " point " << k;
    }
}

TEST(LassoPath, KktWithWeights) {
    const Dataset d = random_instance(9, 40, 10);
    Vector w(10);
    for (Index j = 0; j < 10; ++j) w[j] = 0.5 + 0.25 * static_cast<double>(j);
    w[4] = 0.0;  // unpenalized
    PathOptions opt;
    opt.weights = w;
    const auto path = logistic_lasso_path(d, opt);
    for (std::size_t k = 0; k < path.size(); ++k)
        ASSERT_LE(oracle::kkt_violation(d.x(), d.y(), path.betas[k], path.lambdas[k], w), 1e-6);
}

TEST(LassoPath, WarmStartNeverWorsens) {
    const Dataset d = random_instance(4, 50, 15);
    const Vector s = oracle::signs_of(d.y());
    const auto path = logistic_lasso_path(d);
    auto obj = [&](const Vector& b, double lam) { return oracle::mean_loss(d.x(), s, b) + lam * b.lpNorm<1>(); };
    for (std::size_t k = 1; k < path.size(); ++k)
        EXPECT_LE(obj(path.betas[k], path.lambdas[k]), obj(path.betas[k - 1], path.lambdas[k]) + 1e-8);
}

TEST(LassoPath, DegenerateLabels) {
    Matrix x = Matrix::Identity(3, 2);
    EXPECT_NE(error_of([&] { logistic_lasso_path(from_columns(x, {1, 1, 1})); }).find("degenerate labels"),
              std::string::npos);
    EXPECT_NE(error_of([&] { logistic_lasso_path(from_columns(x, {0, 0, 0})); }).find("degenerate labels"),
              std::string::npos);
}

TEST(LassoPath, EarlyStop) {
    const Dataset d = random_instance(6, 60, 20);
    PathOptions opt;
    opt.stop_above_support = 2;
    const auto path = logistic_lasso_path(d, opt);
    EXPECT_GT(path.supports.back().size(), 2u);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) EXPECT_LE(path.supports[k].size(), 2u);
}

TEST(SupportAtCardinality, Examples) {
    LassoPath path;
    path.lambdas = {4, 3, 2, 1};
    path.supports = {SupportSet{}, SupportSet{3}, SupportSet{3, 7}, SupportSet{1, 3, 7}};
    EXPECT_EQ(support_at_cardinality(path, 2), (SupportSet{3, 7}));
    EXPECT_TRUE(support_at_cardinality(path, 0).empty());
    EXPECT_EQ(support_at_cardinality(path, 10), (SupportSet{1, 3, 7}));

    LassoPath tie;
    tie.lambdas = {4, 3, 2};
    tie.supports = {SupportSet{}, SupportSet{3, 7}, SupportSet{3, 8}};
    EXPECT_EQ(support_at_cardinality(tie, 2), (SupportSet{3, 7}));
}

// --- joint fits -------------------------------------------------------------

TEST(JointGradient, MatchesCentralDifferences) {
    RngStream rng(12, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Dataset d = random_instance(100 + static_cast<std::uint64_t>(trial), 30, 6);
        const Vector eps = draw_logistic(RngStream(7, static_cast<std::uint64_t>(trial)), 30);
        Vector c(7);
        for (Index j = 0; j < 7; ++j) c[j] = rng.normal();
        auto f = [&](const Vector& v) { return joint_loss_sum(Loss::logistic, joint_margins(d, eps, v.head(6), v[6])); };
        const Vector g = joint_loss_gradient(d, eps, Loss::logistic, c.head(6), c[6]);
        const double h = 1e-5;
        for (Index j = 0; j < 7; ++j) {
            Vector up = c, dn = c;
            up[j] += h;
            dn[j] -= h;
            const double fd = (f(up) - f(dn)) / (2 * h);
            EXPECT_LE(std::abs(fd - g[j]), 1e-6 * std::max(1.0, std::abs(g[j]))) << trial << ":" << j;
        }
    }
}

TEST(AdaptiveJoint, HugeLambdaFitsSigmaAlone) {
    const Dataset d = random_instance(21, 80, 10);
    const Vector eps = draw_logistic(RngStream(21, 999), 80);
    JointFit pilot;
    pilot.beta = Vector::Ones(10);
    const JointFit fit = fit_adaptive_joint(d, eps, Loss::logistic, 1e8, pilot);
    EXPECT_EQ(fit.beta.cwiseAbs().maxCoeff(), 0.0);
    // sigma is stationary for the loss with beta = 0
    const Vector g = joint_loss_gradient(d, eps, Loss::logistic, fit.beta, fit.sigma);
    EXPECT_LT(std::abs(g[10]), 1e-6 * 80);
}

TEST(AdaptiveJoint, StrongSignalWithRealizedNoise) {
    Vector b(4);
    b << 5, 4, 3, 2;
    const ThetaPoint truth(SupportSet::first_k(4), b);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sim = simulate_logistic(seed, 150, 20, truth, 0.2);
        JointFit pilot;
        pilot.beta = Vector::Ones(20);
        const Vector w = adaptive_penalty_weights(pilot.beta, AdaptiveWeights::global);
        JointL1Problem prob(sim.data, sim.realized_noise, Loss::logistic, w);
        const double lam = 0.01 * prob.lambda_max();
        const JointFit fit = prob.solve(lam);
        const Vector b0 = truth.dense(20);
        const double at_truth =
            joint_loss_sum(Loss::logistic, joint_margins(sim.data, sim.realized_noise, b0, 1.0)) + lam * w.dot(b0.cwiseAbs());
        EXPECT_LE(fit.objective, at_truth + 1e-8);
        const Vector m = joint_margins(sim.data, sim.realized_noise, fit.beta, fit.sigma);
        EXPECT_EQ((m.array() <= 0.0).count(), 0) << "seed " << seed;
    }
}

TEST(AdaptiveJoint, DegeneratePilot) {
    const Dataset d = random_instance(2, 20, 5);
    JointFit pilot;
    pilot.beta = Vector::Zero(5);
    EXPECT_NE(error_of([&] { fit_adaptive_joint(d, Vector::Zero(20), Loss::logistic, 1.0, pilot); })
                  .find("degenerate pilot"),
              std::string::npos);
}

TEST(AdaptiveJoint, HingeToyIsPenaltyOnly) {
    Matrix x(6, 1);
    x << -3, -2, -1, 1, 2, 3;
    const Dataset d = from_columns(x, {0, 0, 0, 1, 1, 1});
    Vector eps(6);
    eps << 0.1, -0.1, 0.1, -0.1, 0.1, -0.1;
    JointFit pilot;
    pilot.beta = Vector::Ones(1);
    const double lam = 0.5;
    const JointFit fit = fit_adaptive_joint(d, eps, Loss::hinge, lam, pilot);
    const Vector m = joint_margins(d, eps, fit.beta, fit.sigma);
    EXPECT_EQ((m.array() <= 0.0).count(), 0);
    EXPECT_NEAR(fit.objective, lam * std::abs(fit.beta[0]), 1e-6);
    EXPECT_NEAR(joint_loss_sum(Loss::hinge, m), 0.0, 1e-6);
}

TEST(AdaptiveJoint, SweepShape) {
    const Dataset d = random_instance(5, 60, 15, 2.0);
    const Vector eps = draw_logistic(RngStream(5, 50), 60);
    const auto fits = adaptive_joint_sweep(d, eps, Loss::logistic, Vector::Ones(15));
    ASSERT_EQ(fits.size(), 30u);
    EXPECT_TRUE(fits.front().support().empty());
    EXPECT_NEAR(fits.back().lambda / fits.front().lambda, 1e-2, 1e-12);
    for (const auto& f : fits) EXPECT_TRUE(std::isfinite(f.objective));
}

// --- ridge pilot ------------------------------------------------------------

TEST(RidgePilot, SingleValueGrid) {
    const Dataset d = random_instance(8, 30, 6);
    RidgeOptions opt;
    opt.grid = std::vector<double>{0.7};
    const auto r = fit_ridge_joint(d, draw_logistic(RngStream(8, 1), 30), Loss::logistic, opt);
    EXPECT_EQ(r.fit.lambda, 0.7);
    EXPECT_EQ(r.selected, 0u);
}

TEST(RidgePilot, PureNoisePrefersHeavyShrinkage) {
    int heavy = 0;
    const ThetaPoint null_model(SupportSet{}, Vector(0));
    for (std::uint64_t r = 0; r < 50; ++r) {
        const auto sim = simulate_logistic(derive_seed(77, r), 60, 20, null_model, 0.2);
        RidgeOptions opt;
        opt.fold_seed = r;
        const auto fit = fit_ridge_joint(sim.data, draw_logistic(RngStream(r, 3), 60), Loss::logistic, opt);
        ASSERT_EQ(fit.grid.size(), 10u);
        if (fit.selected < 5) ++heavy;
    }
    EXPECT_GE(heavy, 40);
}

TEST(RidgePilot, FoldsDeterministicAndBalanced) {
    const auto a = cv_fold_labels(31, 3, 5), b = cv_fold_labels(31, 3, 5);
    EXPECT_EQ(a, b);
    std::array<int, 3> count{};
    for (auto f : a) ++count[f];
    EXPECT_EQ(count[0], 11);
    EXPECT_EQ(count[1], 10);
    EXPECT_EQ(count[2], 10);
    EXPECT_NE(cv_fold_labels(31, 3, 6), a);
}

// --- MLE ----------------------------------------------------------------------

TEST(Mle, EmptySupport) {
    const Dataset d = random_instance(1, 25, 4);
    const auto fit = mle_logistic(d, SupportSet{});
    EXPECT_EQ(fit.coef.size(), 0);
    EXPECT_NEAR(fit.loglik, -25.0 * std::log(2.0), 1e-12);
}

TEST(Mle, SeparatedFlag) {
    Matrix x(4, 1);
    x << -2, -1, 1, 2;
    const auto fit = mle_logistic(from_columns(x, {0, 0, 1, 1}), SupportSet{0});
    EXPECT_TRUE(fit.separated);
}

TEST(Mle, SignSymmetry) {
    Matrix x(100, 1);
    Eigen::VectorXi y(100), yf(100);
    for (Index i = 0; i < 100; ++i) {
        x(i, 0) = i % 2 == 0 ? -1.0 : 1.0;
        y[i] = i % 2 == 0 ? 1 : 0;
        yf[i] = 1 - y[i];
    }
    const auto a = mle_logistic(validate_dataset(x, y), SupportSet{0});
    const auto b = mle_logistic(validate_dataset(x, yf), SupportSet{0});
    EXPECT_TRUE(a.separated);
    EXPECT_NEAR(a.coef[0], -b.coef[0], 1e-8);

    // with overlap the MLE is finite: P(y=1 | x=-1) = 5/6 gives b = -log 5
    Matrix x2(120, 1);
    Eigen::VectorXi y2(120), y2f(120);
    for (Index i = 0; i < 120; ++i) {
        const bool neg = i % 2 == 0;
        x2(i, 0) = neg ? -1.0 : 1.0;
        const bool flip = i >= 100;
        y2[i] = (neg != flip) ? 1 : 0;
        y2f[i] = 1 - y2[i];
    }
    const auto c = mle_logistic(validate_dataset(x2, y2), SupportSet{0});
    const auto e = mle_logistic(validate_dataset(x2, y2f), SupportSet{0});
    EXPECT_FALSE(c.separated);
    EXPECT_NEAR(c.coef[0], -std::log(5.0), 1e-8);
    EXPECT_NEAR(c.coef[0], -e.coef[0], 1e-8);
}

TEST(Mle, StationaryAndPsdHessian) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Dataset d = random_instance(seed, 80, 8, 0.5);
        const SupportSet tau{0, 2, 5};
        const auto fit = mle_logistic(d, tau);
        ASSERT_FALSE(fit.separated);
        const Matrix z = restrict_columns(d.x(), tau);
        const Vector g = -80.0 * oracle::mean_loss_grad(z, oracle::signs_of(d.y()), fit.coef);
        EXPECT_LT(g.lpNorm<Eigen::Infinity>(), 1e-8);
        EXPECT_LT((fit.hessian - fit.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> es(fit.hessian);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
        EXPECT_NEAR(fit.loglik, -80.0 * oracle::mean_loss(z, oracle::signs_of(d.y()), fit.coef), 1e-9);
    }
}

TEST(MleConstrained, FullyPinned) {
    const Dataset d = random_instance(3, 50, 6);
    const SupportSet tau{1, 4};
    Vector bstar(2);
    bstar << 0.3, -0.8;
    const auto fit = mle_logistic_constrained(d, tau, Matrix::Identity(2, 2), bstar);
    EXPECT_LT((fit.coef - bstar).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix z = restrict_columns(d.x(), tau);
    EXPECT_NEAR(fit.loglik, -50.0 * oracle::mean_loss(z, oracle::signs_of(d.y()), bstar), 1e-10);
}

TEST(MleConstrained, NoConstraintMatchesUnconstrained) {
    const Dataset d = random_instance(4, 50, 6);
    const SupportSet tau{0, 1, 3};
    const auto a = mle_logistic_constrained(d, tau, Matrix(0, 3), Vector(0));
    const auto b = mle_logistic(d, tau);
    EXPECT_LT((a.coef - b.coef).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(a.loglik, b.loglik);
}

TEST(MleConstrained, NestingAndLrtNonnegative) {
    RngStream rng(31, 4);
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const Dataset d = random_instance(seed, 70, 10, 0.6);
        std::vector<Index> pick;
        while (pick.size() < 3) {
            const auto j = static_cast<Index>(rng.below(10));
            if (std::find(pick.begin(), pick.end(), j) == pick.end()) pick.push_back(j);
        }
        const SupportSet tau(pick);
        const auto full = mle_logistic(d, tau);
        Matrix a(1, 3);
        for (Index j = 0; j < 3; ++j) a(0, j) = rng.normal();
        Vector t(1);
        t << rng.normal();
        const auto con = mle_logistic_constrained(d, tau, a, t);
        EXPECT_LE(con.loglik, full.loglik + 1e-8);
        EXPECT_GE(-2.0 * (con.loglik - full.loglik), -1e-6);
        EXPECT_NEAR((a * con.coef)(0), t[0], 1e-9);
        if (!full.separated) {
            const Vector at_mle = a * full.coef;
            const auto tight = mle_logistic_constrained(d, tau, a, at_mle);
            EXPECT_NEAR(tight.loglik, full.loglik, 1e-8);
        }
    }
}

TEST(MleConstrained, IncompatibleTarget) {
    const Dataset d = random_instance(5, 30, 4);
    Matrix a(2, 2);
    a << 1, 0, 1, 0;
    Vector t(2);
    t << 1, 2;
    EXPECT_NE(error_of([&] { mle_logistic_constrained(d, SupportSet{0, 1}, a, t); }).find("incompatible target"),
              std::string::npos);
    EXPECT_FALSE(try_mle_logistic_constrained(d, SupportSet{0, 1}, a, t).has_value());
}
