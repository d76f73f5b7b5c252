#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "alphaadv/attack.hpp"
#include "alphaadv/dataset.hpp"
#include "alphaadv/glm.hpp"

namespace alphaadv {

/// How an McReport decides pass/fail.
enum class PassRule {
    Equality, ///< saturated attack: |rate - alpha| <= 3 sigma
    AtLeast,  ///< lambda* = 0 branch: rate >= alpha - 3 sigma
};

struct McReport {
    long long n_trials = 0;
    long long success_count = 0;
    double empirical_rate = 0.0;
    double target_alpha = 0.0;
    double binomial_3sigma = 0.0;
    PassRule rule = PassRule::Equality;
    bool pass = false;
};

/// Draws beta_d ~ N(beta_a, Var_a) n_trials times and counts how often the
/// drawn defender misclassifies result.x_adv. Deterministic per seed and
/// independent of the worker count.
McReport mc_belief_check(const AttackRequest& req, const AttackResult& result, long long n_trials,
                         std::uint64_t seed);

/// Root of P[miss](lambda) - alpha on [lo, hi] by plain bisection on
/// misclassification_probability. Throws InvalidArgument without a sign change.
double bisection_oracle(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0, double lo,
                        double hi, double tol = 1e-12);

/// Walks a geometric grid outward from lambda = 0 on both sides and returns the
/// sign-change bracket of P[miss](lambda) - alpha closest to zero, if any.
std::optional<std::pair<double, double>> scan_for_bracket(const AttackRequest& req,
                                                          const Eigen::Ref<const Eigen::VectorXd>& delta0,
                                                          double max_abs_lambda = 1e4);

struct TransferConfig {
    DgpSpec dgp; ///< beta_true and feature law; n and seed are ignored
    Eigen::Index attacker_n = 0;
    Eigen::Index defender_n = 0;
    int n_defenders = 0;
    std::vector<double> alphas;
    FitConfig attacker_fit;
    std::optional<FitConfig> defender_fit; ///< defaults to attacker_fit
    int n_test_points = 0;
    std::uint64_t seed = 0;
};

struct AlphaRate {
    double alpha = 0.0;
    double empirical_rate = 0.0;
    long long n_evaluations = 0; ///< (resolved attacks) x (successful defender fits)
    int n_unresolved = 0;        ///< test points with no intensity at this alpha
};

struct TransferReport {
    int n_defenders = 0;
    int n_failed_fits = 0;
    int n_test_points = 0;
    Eigen::Index attacker_n = 0;
    Eigen::Index defender_n = 0;
    DgpSpec dgp;
    Estimator attacker_estimator = Estimator::MleIrls;
    Estimator defender_estimator = Estimator::MleIrls;
    std::vector<AlphaRate> per_alpha;
};

/// End-to-end check of the threat model: the attacker fits once on its own
/// draw from the DGP, crafts x_adv for correctly classified test points, and
/// fresh defenders fitted on independent draws are asked to classify them.
TransferReport transfer_experiment(const TransferConfig& cfg);

struct RegularizationRow {
    double lambda_l2 = 0.0;
    double acc_out = 0.0;
    double q10 = 0.0;
    double median = 0.0;
    double q90 = 0.0;
    int n_zero_lambda = 0;
    int n_failed = 0;
    double variance_trace = 0.0;
    std::vector<double> intensities; ///< per test row; NaN where unresolved
    std::string error;               ///< non-empty when the fit itself failed
};

struct RegularizationConfig {
    std::vector<double> lambda_grid; ///< nonnegative, sorted ascending
    double alpha = 0.9;
    FitConfig base_fit; ///< penalty convention and solver settings
};

/// Fits a ridge model per grid value on `train`, attacks every row of `test`
/// at fixed alpha, and summarizes the intensity distribution.
std::vector<RegularizationRow> regularization_sweep(const Dataset& train, const Dataset& test,
                                                    const RegularizationConfig& cfg);

/// Linear-interpolation quantile (R type 7) of finite values; NaN when empty.
double quantile(std::vector<double> values, double q);

} // namespace alphaadv
