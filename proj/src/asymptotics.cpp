#include "alphaadv/asymptotics.hpp"

#include <sstream>

#include "alphaadv/error.hpp"

namespace alphaadv {

namespace {

void check_dimensions(const Dataset& ds, const FittedModel& m)
{
    if (m.beta_hat.size() != ds.features() + 1)
        throw InvalidArgument("covariance: model has " + std::to_string(m.features()) +
                              " features, dataset has " + std::to_string(ds.features()));
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a)
{
    return 0.5 * (a + a.transpose());
}

} // namespace

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a, double& rcond)
{
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        rcond = 0.0;
        throw SingularMatrixError("covariance: matrix is not positive definite", rcond);
    }
    rcond = llt.rcond();
    if (!(rcond >= kMinReciprocalCondition)) {
        std::ostringstream msg;
        msg << "covariance: matrix is ill-conditioned (reciprocal condition " << rcond << ")";
        throw SingularMatrixError(msg.str(), rcond);
    }
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    return symmetrized(inv);
}

Eigen::VectorXd weight_matrix(const Dataset& ds, const FittedModel& m)
{
    check_dimensions(ds, m);
    Eigen::VectorXd w(ds.rows());
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const double pi = predict_proba(m, ds.X.row(i).transpose());
        w[i] = ds.trials[i] * pi * (1.0 - pi);
    }
    return w;
}

Eigen::MatrixXd fisher_information(const Dataset& ds, const FittedModel& m)
{
    const Eigen::VectorXd w = weight_matrix(ds, m);
    const Eigen::MatrixXd design = augmented_design(ds.X);
    return symmetrized(design.transpose() * (w.asDiagonal() * design));
}

CovarianceEstimate covariance_mle(const Dataset& ds, const FittedModel& m)
{
    CovarianceEstimate est;
    est.estimator = Estimator::MleIrls;
    est.matrix = invert_spd(fisher_information(ds, m), est.condition_estimate);
    return est;
}

CovarianceEstimate covariance_ridge(const Dataset& ds, const FittedModel& m)
{
    const Eigen::MatrixXd info = fisher_information(ds, m);
    Eigen::MatrixXd bread = info;
    bread.diagonal() += 2.0 * m.config.lambda_l2 * penalty_mask(info.rows(), m.config.penalize_intercept);

    CovarianceEstimate est;
    est.estimator = Estimator::RidgeNewton;
    est.lambda_l2 = m.config.lambda_l2;
    est.penalize_intercept = m.config.penalize_intercept;
    const Eigen::MatrixXd bread_inv = invert_spd(bread, est.condition_estimate);
    est.matrix = symmetrized(bread_inv * info * bread_inv);
    return est;
}

CovarianceEstimate estimate_covariance(const Dataset& ds, const FittedModel& m)
{
    return m.config.estimator == Estimator::RidgeNewton ? covariance_ridge(ds, m) : covariance_mle(ds, m);
}

} // namespace alphaadv
