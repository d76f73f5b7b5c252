#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "alphaadv/asymptotics.hpp"
#include "alphaadv/error.hpp"
#include "alphaadv/glm.hpp"

namespace alphaadv {

/// The attacker's picture of the defender: its own fit stands in for
/// E(beta_d) and the fit's asymptotic covariance stands in for Var(beta_d).
struct Surrogate {
    FittedModel model;
    CovarianceEstimate covariance;
};

struct AttackRequest {
    Eigen::VectorXd x0;
    int y0 = 1;
    double alpha = 0.5;
    std::shared_ptr<const Surrogate> surrogate;

    void validate() const;
    /// Same request with a different target rate.
    AttackRequest with_alpha(double a) const;
};

enum class AttackStatus {
    Saturated,           ///< lambda* solves P[miss] = alpha
    Unsaturated,         ///< x0 already misclassified with probability > alpha, lambda* = 0
    NoFeasibleIntensity, ///< the quadratic has no real root along this direction
    SpuriousRootsOnly,   ///< real roots exist but none satisfies the unsquared condition
    DegenerateDirection, ///< the perturbation does not move the margin
    DegenerateBelief,    ///< zero belief variance along the ray
};

std::string to_string(AttackStatus status);

class AttackError : public NumericalError {
public:
    AttackError(AttackStatus status, const std::string& what) : NumericalError(what), status_(status) {}
    AttackStatus status() const noexcept { return status_; }

private:
    AttackStatus status_;
};

struct RootCandidate {
    double lambda = 0.0;
    double residual = 0.0; ///< mean + sd * quantile(alpha_eff) at lambda
    bool valid = false;
};

/// Coefficients of  c + b lambda + a lambda^2 = 0  built from
/// A = beta beta' - 2 erfinv(2 alpha_eff - 1)^2 Var.
struct IntensityQuadratic {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool linear = false; ///< leading coefficient negligible, solved as b lambda + c = 0
};

struct AttackResult {
    Eigen::VectorXd delta0;
    double lambda_star = 0.0;
    Eigen::VectorXd x_adv;
    bool saturated = false;
    std::vector<RootCandidate> roots;
    IntensityQuadratic quadratic;
    double achieved_prob_estimate = 0.0;
};

/// Either a result or the reason there is none.
struct AttackOutcome {
    AttackStatus status = AttackStatus::Saturated;
    std::optional<AttackResult> result;
    std::string message;

    bool ok() const noexcept { return result.has_value(); }
};

/// Minimal L2 move onto the surrogate's decision hyperplane:
/// delta0 = -(x~0' beta / ||beta_{-0}||^2) beta_{-0}.
Eigen::VectorXd orthogonal_perturbation(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x0);

/// Attacker-estimated probability that the defender misclassifies x0 + lambda delta0,
/// treating beta_d ~ N(beta_a, Var_a). Throws AttackError(DegenerateBelief) when
/// the belief variance along the ray vanishes.
double misclassification_probability(const AttackRequest& req, double lambda,
                                     const Eigen::Ref<const Eigen::VectorXd>& delta0);

/// Smallest |lambda| such that x0 + lambda delta0 is misclassified with
/// probability at least alpha under the surrogate belief. Throws AttackError.
AttackResult solve_intensity(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0);

/// Non-throwing variant of solve_intensity.
AttackOutcome try_solve_intensity(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0);

/// Orthogonal perturbation followed by solve_intensity.
AttackResult attack(const AttackRequest& req);

struct SweepEntry {
    double alpha = 0.0;
    AttackOutcome outcome;
};

/// One outcome per alpha, in input order; failures are recorded per entry.
std::vector<SweepEntry> sweep_alpha(const AttackRequest& tmpl, std::span<const double> alphas,
                                    const Eigen::Ref<const Eigen::VectorXd>& delta0);

} // namespace alphaadv
