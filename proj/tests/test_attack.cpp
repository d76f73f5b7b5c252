#include <doctest.h>

#include <cmath>
#include <numbers>

#include "alphaadv/attack.hpp"
#include "alphaadv/special.hpp"
#include "alphaadv/verification.hpp"
#include "test_support.hpp"

using namespace alphaadv;
using testing::make_surrogate;

namespace {

// Unsquared condition: mean + sd * Phi^{-1}(alpha_eff) at lambda, computed from scratch.
double condition_residual(const AttackRequest& req, const Eigen::VectorXd& delta0, double lambda, double& mean)
{
    const Eigen::Index p = req.x0.size();
    Eigen::VectorXd x(p + 1);
    x[0] = 1.0;
    x.tail(p) = req.x0 + lambda * delta0;
    mean = x.dot(req.surrogate->model.beta_hat);
    const double sd = std::sqrt(x.dot(req.surrogate->covariance.matrix * x));
    const double alpha_eff = req.y0 == 1 ? req.alpha : 1.0 - req.alpha;
    return mean + sd * std::numbers::sqrt2 * erfinv(2.0 * alpha_eff - 1.0);
}

AttackStatus status_of(const AttackRequest& req, const Eigen::VectorXd& delta0)
{
    return try_solve_intensity(req, delta0).status;
}

} // namespace

TEST_CASE("orthogonal perturbation")
{
    SUBCASE("hand example")
    {
        FittedModel m;
        m.beta_hat = Eigen::Vector3d(0, 1, 0);
        const Eigen::VectorXd d = orthogonal_perturbation(m, Eigen::Vector2d(2, 3));
        CHECK(d == Eigen::Vector2d(-2, 0));
    }
    SUBCASE("point already on the hyperplane")
    {
        FittedModel m;
        m.beta_hat = Eigen::Vector3d(1, 1, 1);
        CHECK(orthogonal_perturbation(m, Eigen::Vector2d(-0.5, -0.5)).isZero(0.0));
    }
    SUBCASE("random models land on the hyperplane at the analytic distance")
    {
        Rng rng = make_rng(300);
        for (int t = 0; t < 200; ++t) {
            const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 8);
            FittedModel m;
            m.beta_hat = testing::random_vector(rng, p + 1);
            const Eigen::VectorXd x0 = testing::random_vector(rng, p, 3.0);
            const Eigen::VectorXd d = orthogonal_perturbation(m, x0);
            const double m0 = margin(m, x0);
            CHECK(std::fabs(margin(m, x0 + d)) <= 1e-9 * (1.0 + std::fabs(m0)));
            CHECK(d.norm() == doctest::Approx(std::fabs(m0) / m.slopes().norm()).epsilon(1e-12));
            // parallel to the slopes
            CHECK(std::fabs(std::fabs(d.dot(m.slopes())) - d.norm() * m.slopes().norm()) <=
                  1e-12 * (1.0 + d.norm() * m.slopes().norm()));
        }
    }
    SUBCASE("degenerate slopes")
    {
        FittedModel m;
        m.beta_hat = Eigen::Vector3d(1, 0, 0);
        CHECK_THROWS_AS(orthogonal_perturbation(m, Eigen::Vector2d(1, 1)), AttackError);
    }
}

TEST_CASE("alpha = 0.5 lands exactly on the surrogate hyperplane")
{
    Rng rng = make_rng(301);
    for (int t = 0; t < 100; ++t) {
        const auto inst = testing::random_instance(rng, 2 + static_cast<Eigen::Index>(t % 7), 0.5);
        const AttackResult r = solve_intensity(inst.request, inst.delta0);
        CHECK(r.saturated);
        CHECK(std::fabs(r.lambda_star - 1.0) <= 1e-9);
        CHECK(r.quadratic.linear);
        CHECK(std::fabs(r.achieved_prob_estimate - 0.5) <= 1e-6);
    }
}

TEST_CASE("misclassification probability")
{
    Rng rng = make_rng(302);
    const auto inst = testing::random_instance(rng, 4, 0.8);
    SUBCASE("zero mean gives one half")
    {
        // lambda = 1 on the orthogonal ray zeroes the mean.
        CHECK(misclassification_probability(inst.request, 1.0, inst.delta0) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("complementary labels sum to one")
    {
        AttackRequest flipped = inst.request;
        flipped.y0 = 1 - flipped.y0;
        for (double lambda : {-2.0, 0.0, 0.3, 1.7, 5.0}) {
            const double a = misclassification_probability(inst.request, lambda, inst.delta0);
            const double b = misclassification_probability(flipped, lambda, inst.delta0);
            CHECK(a + b == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    SUBCASE("zero variance is a degenerate belief")
    {
        auto s = make_surrogate(inst.request.surrogate->model.beta_hat, Eigen::MatrixXd::Zero(5, 5));
        AttackRequest req{inst.request.x0, inst.request.y0, 0.8, s};
        CHECK_THROWS_AS(misclassification_probability(req, 0.5, inst.delta0), AttackError);
        CHECK(status_of(req, inst.delta0) == AttackStatus::DegenerateBelief);
    }
}

TEST_CASE("probability 0.88 at the original point and alpha 0.75 gives lambda* = 0")
{
    // beta = (0, 1), Var = diag(0, s): along x the belief is Z ~ N(x, s x^2), so a
    // negative x with label 1 is misclassified with probability Phi(1 / sqrt(s)).
    const double s = std::pow(1.0 / normal_quantile(0.88), 2);
    auto surrogate = make_surrogate(Eigen::Vector2d(0.0, 1.0), (Eigen::Matrix2d() << 0, 0, 0, s).finished());
    const AttackRequest req{Eigen::VectorXd::Constant(1, -0.7), 1, 0.75, surrogate};
    const Eigen::VectorXd delta0 = orthogonal_perturbation(surrogate->model, req.x0);
    CHECK(misclassification_probability(req, 0.0, delta0) == doctest::Approx(0.88).epsilon(1e-12));

    const AttackResult r = solve_intensity(req, delta0);
    CHECK(r.lambda_star == 0.0);
    CHECK_FALSE(r.saturated);
    CHECK(r.x_adv == req.x0);
    CHECK(r.achieved_prob_estimate == doctest::Approx(0.88).epsilon(1e-12));
    CHECK(try_solve_intensity(req, delta0).status == AttackStatus::Unsaturated);
}

TEST_CASE("closed form matches the bisection oracle on random instances")
{
    Rng rng = make_rng(303);
    const double alphas[] = {0.6, 0.75, 0.9, 0.95, 0.99};
    int compared = 0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(t % 7);
        const double alpha = alphas[t % 5];
        const auto inst = testing::random_instance(rng, p, alpha, t % 2 == 0 ? 0.01 : 0.1);
        const AttackOutcome out = try_solve_intensity(inst.request, inst.delta0);
        const auto bracket = scan_for_bracket(inst.request, inst.delta0);
        if (bracket) {
            REQUIRE(out.ok());
            const double oracle = bisection_oracle(inst.request, inst.delta0, bracket->first, bracket->second);
            CHECK(std::fabs(out.result->lambda_star - oracle) <= 1e-6);
            ++compared;
        } else {
            CHECK_FALSE(out.ok());
        }
        if (out.ok() && out.result->saturated) {
            double mean = 0.0;
            const double res = condition_residual(inst.request, inst.delta0, out.result->lambda_star, mean);
            CHECK(std::fabs(res) <= 1e-8 * (1.0 + std::fabs(mean)));
            CHECK(std::fabs(out.result->achieved_prob_estimate - alpha) <= 1e-6);
            CHECK(out.result->x_adv == inst.request.x0 + out.result->lambda_star * inst.delta0);
        }
    }
    CHECK(compared >= 80);
}

TEST_CASE("arbitrary non-orthogonal directions are solved to the nearest crossing")
{
    Rng rng = make_rng(304);
    int compared = 0;
    for (int t = 0; t < 60; ++t) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(t % 5);
        auto inst = testing::random_instance(rng, p, 0.85, 0.05);
        inst.delta0 = testing::random_vector(rng, p);
        const AttackOutcome out = try_solve_intensity(inst.request, inst.delta0);
        const auto bracket = scan_for_bracket(inst.request, inst.delta0);
        if (!bracket)
            continue;
        REQUIRE(out.ok());
        CHECK(std::fabs(out.result->lambda_star -
                        bisection_oracle(inst.request, inst.delta0, bracket->first, bracket->second)) <= 1e-6);
        ++compared;
    }
    CHECK(compared >= 20);
}

TEST_CASE("label and sign flip leave lambda* unchanged")
{
    Rng rng = make_rng(305);
    for (int t = 0; t < 50; ++t) {
        const auto inst = testing::random_instance(rng, 3 + t % 4, 0.9, 0.02);
        const AttackOutcome a = try_solve_intensity(inst.request, inst.delta0);
        auto flipped_s = make_surrogate(-inst.request.surrogate->model.beta_hat, inst.request.surrogate->covariance.matrix);
        const AttackRequest flipped{inst.request.x0, 1 - inst.request.y0, 0.9, flipped_s};
        const AttackOutcome b = try_solve_intensity(flipped, orthogonal_perturbation(flipped_s->model, inst.request.x0));
        REQUIRE(a.status == b.status);
        if (a.ok())
            CHECK(std::fabs(a.result->lambda_star - b.result->lambda_star) <= 1e-9);
    }
}

TEST_CASE("dispatch: unsaturated exactly when P[miss](0) > alpha")
{
    Rng rng = make_rng(306);
    for (int t = 0; t < 100; ++t) {
        // Points on either side of the boundary, with a wide belief.
        auto inst = testing::random_instance(rng, 3, 0.6, 0.5);
        inst.request.y0 = static_cast<int>(rng() % 2);
        for (double alpha : {0.3, 0.55, 0.7, 0.9}) {
            const AttackRequest req = inst.request.with_alpha(alpha);
            const double p0 = misclassification_probability(req, 0.0, inst.delta0);
            const AttackOutcome out = try_solve_intensity(req, inst.delta0);
            CHECK((out.status == AttackStatus::Unsaturated) == (p0 > alpha));
            if (out.status == AttackStatus::Unsaturated)
                CHECK(out.result->lambda_star == 0.0);
        }
    }
}

TEST_CASE("sweep_alpha")
{
    Rng rng = make_rng(307);
    const auto inst = testing::random_instance(rng, 5, 0.5, 0.02);

    SUBCASE("single alpha of one half")
    {
        const std::vector<double> alphas{0.5};
        const auto out = sweep_alpha(inst.request, alphas, inst.delta0);
        REQUIRE(out.size() == 1);
        CHECK(std::fabs(out[0].outcome.result->lambda_star - 1.0) <= 1e-9);
    }
    SUBCASE("non-decreasing in alpha above one half, matching bisection")
    {
        std::vector<double> alphas;
        for (int i = 0; i < 20; ++i)
            alphas.push_back(0.5 + 0.024 * i);
        const auto out = sweep_alpha(inst.request, alphas, inst.delta0);
        double prev = -std::numeric_limits<double>::infinity();
        for (const auto& e : out) {
            REQUIRE(e.outcome.ok());
            CHECK(e.outcome.result->lambda_star >= prev);
            prev = e.outcome.result->lambda_star;
            const AttackRequest req = inst.request.with_alpha(e.alpha);
            const auto bracket = scan_for_bracket(req, inst.delta0);
            REQUIRE(bracket);
            CHECK(std::fabs(prev - bisection_oracle(req, inst.delta0, bracket->first, bracket->second)) <= 1e-6);
        }
    }
    SUBCASE("zeros exactly where the original point already exceeds alpha")
    {
        auto wide = testing::random_instance(rng, 3, 0.5, 0.5);
        wide.request.y0 = 1 - wide.request.y0; // misclassified on the surrogate
        std::vector<double> alphas;
        for (int i = 1; i < 20; ++i)
            alphas.push_back(i / 20.0);
        const double p0 = misclassification_probability(wide.request, 0.0, wide.delta0);
        for (const auto& e : sweep_alpha(wide.request, alphas, wide.delta0)) {
            CHECK((e.outcome.ok() && e.outcome.result->lambda_star == 0.0 && !e.outcome.result->saturated) ==
                  (p0 > e.alpha));
        }
    }
    SUBCASE("failures are recorded per entry")
    {
        // An orthogonal direction with a very wide belief saturates below alpha = 0.99.
        auto surrogate = make_surrogate(Eigen::Vector2d(0.0, 1.0), (Eigen::Matrix2d() << 0.1, 0, 0, 1.0).finished());
        const AttackRequest req{Eigen::VectorXd::Constant(1, 1.0), 1, 0.5, surrogate};
        const std::vector<double> alphas{0.6, 0.99};
        const auto out = sweep_alpha(req, alphas, orthogonal_perturbation(surrogate->model, req.x0));
        CHECK(out[0].outcome.ok());
        CHECK(out[1].outcome.status == AttackStatus::NoFeasibleIntensity);
        const std::vector<double> bad{0.5, 1.0};
        CHECK_THROWS_AS(sweep_alpha(req, bad, Eigen::VectorXd::Ones(1)), InvalidArgument);
    }
}

TEST_CASE("intensity failure modes")
{
    SUBCASE("no feasible intensity")
    {
        // Along the ray P[miss] tends to Phi(1) ~ 0.84 < 0.9.
        auto surrogate = make_surrogate(Eigen::Vector2d(0.0, 1.0), (Eigen::Matrix2d() << 0.1, 0, 0, 1.0).finished());
        const AttackRequest req{Eigen::VectorXd::Constant(1, 1.0), 1, 0.9, surrogate};
        const Eigen::VectorXd d = orthogonal_perturbation(surrogate->model, req.x0);
        CHECK(status_of(req, d) == AttackStatus::NoFeasibleIntensity);
        CHECK_FALSE(scan_for_bracket(req, d).has_value());
    }
    SUBCASE("spurious roots only")
    {
        // The direction leaves the margin unchanged, so only mean = +q sd solutions exist.
        auto surrogate = make_surrogate(Eigen::Vector3d(0.5, 1.0, 0.0), Eigen::Matrix3d::Identity() * 0.01);
        const AttackRequest req{Eigen::Vector2d(1.0, 0.0), 1, 0.9, surrogate};
        const AttackOutcome out = try_solve_intensity(req, Eigen::Vector2d(0.0, 1.0));
        CHECK(out.status == AttackStatus::SpuriousRootsOnly);
        CHECK_THROWS_AS(solve_intensity(req, Eigen::Vector2d(0.0, 1.0)), AttackError);
    }
    SUBCASE("zero direction is degenerate")
    {
        auto surrogate = make_surrogate(Eigen::Vector3d(0.5, 1.0, 0.0), Eigen::Matrix3d::Identity() * 0.01);
        for (double alpha : {0.5, 0.9}) {
            const AttackRequest req{Eigen::Vector2d(1.0, 0.0), 1, alpha, surrogate};
            CHECK(status_of(req, Eigen::Vector2d::Zero()) == AttackStatus::DegenerateDirection);
        }
    }
    SUBCASE("request validation")
    {
        auto surrogate = make_surrogate(Eigen::Vector3d(0.5, 1.0, 0.0), Eigen::Matrix3d::Identity() * 0.01);
        const Eigen::Vector2d d(1.0, 0.0);
        CHECK_THROWS_AS(solve_intensity({Eigen::Vector2d(1, 0), 1, 0.0, surrogate}, d), InvalidArgument);
        CHECK_THROWS_AS(solve_intensity({Eigen::Vector2d(1, 0), 1, 1.0, surrogate}, d), InvalidArgument);
        CHECK_THROWS_AS(solve_intensity({Eigen::Vector3d(1, 0, 0), 1, 0.7, surrogate}, Eigen::Vector3d(1, 0, 0)),
                        InvalidArgument);
        CHECK_THROWS_AS(solve_intensity({Eigen::Vector2d(1, 0), 2, 0.7, surrogate}, d), InvalidArgument);
        CHECK_THROWS_AS(solve_intensity({Eigen::Vector2d(1, 0), 1, 0.7, nullptr}, d), InvalidArgument);
    }
}

TEST_CASE("intensities are individual across a test set")
{
    const Dataset train = testing::random_dataset(308, 3000, 5);
    const FittedModel m = fit(train, FitConfig::mle());
    auto surrogate = std::make_shared<const Surrogate>(Surrogate{m, covariance_mle(train, m)});
    const Dataset test = testing::random_dataset(309, 100, 5);
    std::vector<double> ratios;
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
        const Eigen::VectorXd x0 = test.X.row(i).transpose();
        const AttackRequest req{x0, decide(m, x0), 0.9, surrogate};
        const AttackOutcome out = try_solve_intensity(req, orthogonal_perturbation(m, x0));
        if (out.ok())
            ratios.push_back(out.result->lambda_star / 1.0);
    }
    REQUIRE(ratios.size() > 50);
    double mean = 0.0;
    for (double r : ratios)
        mean += r;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double r : ratios)
        var += (r - mean) * (r - mean);
    CHECK(var / static_cast<double>(ratios.size() - 1) > 0.0);
}
