#pragma once

#include <Eigen/Dense>

#include "alphaadv/dataset.hpp"

namespace alphaadv {

enum class Estimator {
    MleIrls,     ///< unpenalized maximum likelihood by IRLS
    RidgeNewton, ///< L2-penalized (MAP) fit by Newton's method
};

struct FitConfig {
    Estimator estimator = Estimator::MleIrls;
    double lambda_l2 = 0.0; ///< penalty is lambda_l2 * ||beta||^2 over the penalized coordinates
    int max_iter = 100;
    double tol = 1e-8;
    bool penalize_intercept = false;
    double divergence_cap = 1e4; ///< MLE aborts with SeparationError once ||beta||_inf exceeds this

    static FitConfig mle() { return {}; }
    static FitConfig ridge(double lambda_l2, bool penalize_intercept = false)
    {
        FitConfig cfg;
        cfg.estimator = Estimator::RidgeNewton;
        cfg.lambda_l2 = lambda_l2;
        cfg.penalize_intercept = penalize_intercept;
        return cfg;
    }

    void validate() const;
};

struct FittedModel {
    Eigen::VectorXd beta_hat; ///< intercept at index 0
    FitConfig config;
    bool converged = false;
    int n_iter = 0;
    double final_step_norm = 0.0;  ///< max |Newton step| of the last iteration
    double final_score_norm = 0.0; ///< max |gradient of the penalized objective| at beta_hat

    Eigen::Index features() const noexcept { return beta_hat.size() - 1; }
    /// beta_hat without the intercept.
    auto slopes() const { return beta_hat.tail(beta_hat.size() - 1); }
};

/// Fits the logistic regression. Non-convergence is reported through
/// `converged == false`; separation during MLE throws SeparationError.
FittedModel fit(const Dataset& ds, const FitConfig& cfg);

/// Linear predictor x~' beta_hat with x~ = (1, x).
double margin(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_proba(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);
/// 1 iff margin > 0; the boundary itself is class 0.
int decide(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Fraction of rows whose decision matches the label.
double accuracy(const FittedModel& m, const Dataset& ds);

double sigmoid(double eta);

/// Design matrix with a leading column of ones.
Eigen::MatrixXd augmented_design(const Eigen::MatrixXd& X);

/// Bernoulli/binomial log-likelihood sum_i m_i [y_i eta_i - log(1 + e^eta_i)].
double log_likelihood(const Dataset& ds, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Gradient of the log-likelihood: X~'(m .* (y - pi)).
Eigen::VectorXd score(const Dataset& ds, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Diagonal of the penalty matrix: 1 on penalized coordinates, 0 on the
/// intercept unless it is penalized.
Eigen::VectorXd penalty_mask(Eigen::Index dim, bool penalize_intercept);

} // namespace alphaadv
