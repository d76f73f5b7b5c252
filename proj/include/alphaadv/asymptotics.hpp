#pragma once

#include <Eigen/Dense>

#include "alphaadv/dataset.hpp"
#include "alphaadv/glm.hpp"

namespace alphaadv {

/// Estimated asymptotic covariance of beta_hat, (p+1) x (p+1), intercept first.
struct CovarianceEstimate {
    Eigen::MatrixXd matrix;
    Estimator estimator = Estimator::MleIrls;
    double lambda_l2 = 0.0;
    bool penalize_intercept = false;
    /// Reciprocal condition number estimate of the matrix that was inverted
    /// (Fisher information for MLE, the penalized "bread" for ridge).
    double condition_estimate = 0.0;
};

/// Inversions with a reciprocal condition estimate below this are refused.
inline constexpr double kMinReciprocalCondition = 1e-12;

/// w_i = m_i * pi_i * (1 - pi_i), evaluated at the model's own beta_hat.
Eigen::VectorXd weight_matrix(const Dataset& ds, const FittedModel& m);

/// Observed Fisher information X~' W X~ at the model's beta_hat.
Eigen::MatrixXd fisher_information(const Dataset& ds, const FittedModel& m);

/// (X~' W X~)^{-1}, symmetrized. Throws SingularMatrixError when ill-conditioned.
CovarianceEstimate covariance_mle(const Dataset& ds, const FittedModel& m);

/// Sandwich B^{-1} (X~' W X~) B^{-1} with B = X~' W X~ + 2 lambda_l2 P, where
/// P is the penalty mask of the model's config. Symmetrized.
CovarianceEstimate covariance_ridge(const Dataset& ds, const FittedModel& m);

/// Dispatches on m.config.estimator.
CovarianceEstimate estimate_covariance(const Dataset& ds, const FittedModel& m);

/// Inverse of a symmetric positive-definite matrix via Cholesky, symmetrized.
/// `rcond` receives the 1-norm reciprocal condition estimate.
Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a, double& rcond);

} // namespace alphaadv
