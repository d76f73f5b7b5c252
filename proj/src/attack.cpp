#include "alphaadv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "alphaadv/special.hpp"

namespace alphaadv {

namespace {

constexpr double kRootTolerance = 1e-8;
constexpr double kDegenerateRelative = 1e-12;

Eigen::VectorXd augment_point(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    Eigen::VectorXd xt(x.size() + 1);
    xt[0] = 1.0;
    xt.tail(x.size()) = x;
    return xt;
}

Eigen::VectorXd augment_direction(const Eigen::Ref<const Eigen::VectorXd>& d)
{
    Eigen::VectorXd dt(d.size() + 1);
    dt[0] = 0.0;
    dt.tail(d.size()) = d;
    return dt;
}

// Mean and variance of Z(lambda) = (x~0 + lambda d~0)' beta_d under the belief.
struct RayMoments {
    double mean0, mean1;       // mean(lambda) = mean0 + lambda mean1
    double var00, var01, var11; // var(lambda) = var00 + 2 lambda var01 + lambda^2 var11

    double mean(double lambda) const { return mean0 + lambda * mean1; }
    double variance(double lambda) const { return var00 + lambda * (2.0 * var01 + lambda * var11); }
};

RayMoments ray_moments(const AttackRequest& req, const Eigen::VectorXd& xt, const Eigen::VectorXd& dt)
{
    const Eigen::VectorXd& beta = req.surrogate->model.beta_hat;
    const Eigen::MatrixXd& cov = req.surrogate->covariance.matrix;
    const Eigen::VectorXd cov_x = cov * xt;
    const Eigen::VectorXd cov_d = cov * dt;
    return {xt.dot(beta), dt.dot(beta), xt.dot(cov_x), 0.5 * (xt.dot(cov_d) + dt.dot(cov_x)), dt.dot(cov_d)};
}

// P(Z <= 0) for y0 = 1, P(Z > 0) for y0 = 0.
double oriented_miss_probability(int y0, double mean, double variance)
{
    if (!(variance > 0.0))
        throw AttackError(AttackStatus::DegenerateBelief,
                          "attack: belief variance along the ray is not positive");
    const double z = mean / std::sqrt(variance);
    return y0 == 1 ? normal_cdf(-z) : normal_cdf(z);
}

void check_direction(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0)
{
    if (delta0.size() != req.x0.size())
        throw InvalidArgument("attack: delta0 has dimension " + std::to_string(delta0.size()) + ", expected " +
                              std::to_string(req.x0.size()));
    if (!delta0.allFinite())
        throw InvalidArgument("attack: delta0 must be finite");
}

AttackResult unsaturated_result(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0,
                                double p_miss0)
{
    AttackResult r;
    r.delta0 = delta0;
    r.lambda_star = 0.0;
    r.x_adv = req.x0 + r.lambda_star * r.delta0;
    r.saturated = false;
    r.achieved_prob_estimate = p_miss0;
    return r;
}

} // namespace

std::string to_string(AttackStatus status)
{
    switch (status) {
    case AttackStatus::Saturated:
        return "saturated";
    case AttackStatus::Unsaturated:
        return "unsaturated";
    case AttackStatus::NoFeasibleIntensity:
        return "no_feasible_intensity";
    case AttackStatus::SpuriousRootsOnly:
        return "spurious_roots_only";
    case AttackStatus::DegenerateDirection:
        return "degenerate_direction";
    case AttackStatus::DegenerateBelief:
        return "degenerate_belief";
    }
    return "unknown";
}

void AttackRequest::validate() const
{
    if (!surrogate)
        throw InvalidArgument("attack: request has no surrogate");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidArgument("attack: alpha must lie in (0, 1)");
    if (y0 != 0 && y0 != 1)
        throw InvalidArgument("attack: y0 must be 0 or 1");
    const Eigen::Index dim = surrogate->model.beta_hat.size();
    if (x0.size() + 1 != dim)
        throw InvalidArgument("attack: x0 has " + std::to_string(x0.size()) + " features, surrogate expects " +
                              std::to_string(dim - 1));
    if (!x0.allFinite())
        throw InvalidArgument("attack: x0 must be finite");
    const auto& cov = surrogate->covariance.matrix;
    if (cov.rows() != dim || cov.cols() != dim)
        throw InvalidArgument("attack: covariance must be (p+1) x (p+1)");
}

AttackRequest AttackRequest::with_alpha(double a) const
{
    AttackRequest copy = *this;
    copy.alpha = a;
    return copy;
}

Eigen::VectorXd orthogonal_perturbation(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x0)
{
    const auto slopes = m.slopes();
    const double norm2 = slopes.squaredNorm();
    if (!(norm2 > 0.0))
        throw AttackError(AttackStatus::DegenerateDirection,
                          "attack: all non-intercept coefficients are zero, no decision hyperplane");
    return (-margin(m, x0) / norm2) * slopes;
}

double misclassification_probability(const AttackRequest& req, double lambda,
                                     const Eigen::Ref<const Eigen::VectorXd>& delta0)
{
    req.validate();
    check_direction(req, delta0);
    const RayMoments mom = ray_moments(req, augment_point(req.x0), augment_direction(delta0));
    return oriented_miss_probability(req.y0, mom.mean(lambda), mom.variance(lambda));
}

AttackResult solve_intensity(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0)
{
    req.validate();
    check_direction(req, delta0);

    const Eigen::VectorXd xt = augment_point(req.x0);
    const Eigen::VectorXd dt = augment_direction(delta0);
    const RayMoments mom = ray_moments(req, xt, dt);

    const double p_miss0 = oriented_miss_probability(req.y0, mom.mean0, mom.var00);
    if (p_miss0 > req.alpha)
        return unsaturated_result(req, delta0, p_miss0);

    // P(Z <= 0) = alpha_eff  <=>  mean + sd * sqrt(2) erfinv(2 alpha_eff - 1) = 0.
    const double alpha_eff = req.y0 == 1 ? req.alpha : 1.0 - req.alpha;
    const double e = alpha_eff == 0.5 ? 0.0 : erfinv(2.0 * alpha_eff - 1.0);
    const double quantile = std::numbers::sqrt2 * e;

    auto residual = [&](double lambda) {
        const double var = std::max(mom.variance(lambda), 0.0);
        return mom.mean(lambda) + std::sqrt(var) * quantile;
    };

    AttackResult result;
    result.delta0 = delta0;

    std::vector<double> candidates;
    IntensityQuadratic& quad = result.quadratic;
    if (e == 0.0) {
        // Condition collapses to mean(lambda) = 0.
        quad.linear = true;
        quad.b = mom.mean1;
        quad.c = mom.mean0;
        if (std::fabs(quad.b) <= kDegenerateRelative * std::fabs(quad.c) || quad.b == 0.0)
            throw AttackError(AttackStatus::DegenerateDirection,
                              "attack: the perturbation direction does not change the margin");
        candidates.push_back(-quad.c / quad.b);
    } else {
        const Eigen::VectorXd& beta = req.surrogate->model.beta_hat;
        const Eigen::MatrixXd A = beta * beta.transpose() - 2.0 * e * e * req.surrogate->covariance.matrix;
        quad.a = dt.dot(A * dt);
        quad.b = xt.dot(A * dt) + dt.dot(A * xt);
        quad.c = xt.dot(A * xt);

        const double a_scale = A.cwiseAbs().maxCoeff();
        if (std::fabs(quad.a) <= kDegenerateRelative * a_scale * dt.squaredNorm()) {
            quad.linear = true;
            if (std::fabs(quad.b) <= kDegenerateRelative * a_scale * xt.norm() * dt.norm())
                throw AttackError(AttackStatus::DegenerateDirection,
                                  "attack: degenerate intensity equation along this direction");
            candidates.push_back(-quad.c / quad.b);
        } else {
            double disc = quad.b * quad.b - 4.0 * quad.a * quad.c;
            const double disc_scale = quad.b * quad.b + std::fabs(4.0 * quad.a * quad.c);
            if (disc < 0.0 && -disc <= 1e-14 * disc_scale)
                disc = 0.0;
            if (disc < 0.0) {
                std::ostringstream msg;
                msg << "attack: no real intensity reaches alpha = " << req.alpha
                    << " along this direction (discriminant " << disc << ")";
                throw AttackError(AttackStatus::NoFeasibleIntensity, msg.str());
            }
            const double sq = std::sqrt(disc);
            const double q = -0.5 * (quad.b + std::copysign(sq, quad.b));
            if (q == 0.0) {
                candidates.push_back(0.0);
            } else {
                candidates.push_back(q / quad.a);
                candidates.push_back(quad.c / q);
            }
            // Newton polish on the quadratic itself keeps each root on its own branch.
            for (double& lambda : candidates) {
                for (int it = 0; it < 2; ++it) {
                    const double value = quad.c + lambda * (quad.b + lambda * quad.a);
                    const double slope = quad.b + 2.0 * quad.a * lambda;
                    if (slope == 0.0)
                        break;
                    lambda -= value / slope;
                }
            }
        }
    }

    for (double lambda : candidates) {
        RootCandidate rc;
        rc.lambda = lambda;
        rc.residual = residual(lambda);
        rc.valid = std::isfinite(lambda) &&
                   std::fabs(rc.residual) <= kRootTolerance * (1.0 + std::fabs(mom.mean(lambda)));
        result.roots.push_back(rc);
    }

    const RootCandidate* best = nullptr;
    for (const auto& rc : result.roots) {
        if (!rc.valid)
            continue;
        if (best == nullptr) {
            best = &rc;
            continue;
        }
        const double l2 = rc.lambda * rc.lambda;
        const double best_l2 = best->lambda * best->lambda;
        if (l2 < best_l2 || (l2 == best_l2 && rc.lambda > best->lambda))
            best = &rc;
    }
    if (best == nullptr) {
        std::ostringstream msg;
        msg << "attack: " << result.roots.size()
            << " real root(s) found but none satisfies the unsquared probability condition";
        throw AttackError(AttackStatus::SpuriousRootsOnly, msg.str());
    }

    result.lambda_star = best->lambda;
    result.x_adv = req.x0 + result.lambda_star * result.delta0;
    result.saturated = true;
    result.achieved_prob_estimate =
        oriented_miss_probability(req.y0, mom.mean(result.lambda_star), mom.variance(result.lambda_star));
    return result;
}

AttackOutcome try_solve_intensity(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0)
{
    AttackOutcome out;
    try {
        out.result = solve_intensity(req, delta0);
        out.status = out.result->saturated ? AttackStatus::Saturated : AttackStatus::Unsaturated;
    } catch (const AttackError& err) {
        out.status = err.status();
        out.message = err.what();
    }
    return out;
}

AttackResult attack(const AttackRequest& req)
{
    req.validate();
    return solve_intensity(req, orthogonal_perturbation(req.surrogate->model, req.x0));
}

std::vector<SweepEntry> sweep_alpha(const AttackRequest& tmpl, std::span<const double> alphas,
                                    const Eigen::Ref<const Eigen::VectorXd>& delta0)
{
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw InvalidArgument("sweep_alpha: every alpha must lie in (0, 1)");
    std::vector<SweepEntry> out;
    out.reserve(alphas.size());
    for (double a : alphas)
        out.push_back({a, try_solve_intensity(tmpl.with_alpha(a), delta0)});
    return out;
}

} // namespace alphaadv
