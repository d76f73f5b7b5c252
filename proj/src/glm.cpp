#include "alphaadv/glm.hpp"

#include <cmath>
#include <string>

#include "alphaadv/error.hpp"

namespace alphaadv {

namespace {

double softplus(double eta)
{
    return std::max(eta, 0.0) + std::log1p(std::exp(-std::fabs(eta)));
}

struct Objective {
    const Dataset& ds;
    const Eigen::MatrixXd& design;
    Eigen::VectorXd mask;
    double lambda;

    double value(const Eigen::VectorXd& beta) const
    {
        const Eigen::VectorXd eta = design * beta;
        double nll = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i)
            nll += ds.trials[i] * (softplus(eta[i]) - ds.y[i] * eta[i]);
        return nll + lambda * (mask.array() * beta.array().square()).sum();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& prob) const
    {
        prob = (design * beta).unaryExpr([](double e) { return sigmoid(e); });
        const Eigen::VectorXd resid = (ds.trials.array() * (ds.y - prob).array()).matrix();
        return -(design.transpose() * resid) + 2.0 * lambda * (mask.array() * beta.array()).matrix();
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& prob) const
    {
        const Eigen::VectorXd w = (ds.trials.array() * prob.array() * (1.0 - prob.array())).matrix();
        Eigen::MatrixXd h = design.transpose() * (w.asDiagonal() * design);
        h.diagonal() += 2.0 * lambda * mask;
        return h;
    }
};

} // namespace

void FitConfig::validate() const
{
    if (!(lambda_l2 >= 0.0) || !std::isfinite(lambda_l2))
        throw InvalidArgument("fit: lambda_l2 must be a finite nonnegative number");
    if (estimator == Estimator::MleIrls && lambda_l2 != 0.0)
        throw InvalidArgument("fit: lambda_l2 is only meaningful for the ridge estimator");
    if (max_iter < 1)
        throw InvalidArgument("fit: max_iter must be positive");
    if (!(tol > 0.0))
        throw InvalidArgument("fit: tol must be positive");
    if (!(divergence_cap > 0.0))
        throw InvalidArgument("fit: divergence_cap must be positive");
}

double sigmoid(double eta)
{
    if (eta >= 0.0)
        return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

Eigen::MatrixXd augmented_design(const Eigen::MatrixXd& X)
{
    Eigen::MatrixXd design(X.rows(), X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(X.cols()) = X;
    return design;
}

Eigen::VectorXd penalty_mask(Eigen::Index dim, bool penalize_intercept)
{
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(dim);
    if (!penalize_intercept && dim > 0)
        mask[0] = 0.0;
    return mask;
}

double log_likelihood(const Dataset& ds, const Eigen::Ref<const Eigen::VectorXd>& beta)
{
    if (beta.size() != ds.features() + 1)
        throw InvalidArgument("log_likelihood: beta has the wrong dimension");
    double ll = 0.0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const double eta = beta[0] + ds.X.row(i).dot(beta.tail(ds.features()));
        ll += ds.trials[i] * (ds.y[i] * eta - softplus(eta));
    }
    return ll;
}

Eigen::VectorXd score(const Dataset& ds, const Eigen::Ref<const Eigen::VectorXd>& beta)
{
    if (beta.size() != ds.features() + 1)
        throw InvalidArgument("score: beta has the wrong dimension");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(beta.size());
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const double eta = beta[0] + ds.X.row(i).dot(beta.tail(ds.features()));
        const double r = ds.trials[i] * (ds.y[i] - sigmoid(eta));
        g[0] += r;
        g.tail(ds.features()) += r * ds.X.row(i).transpose();
    }
    return g;
}

FittedModel fit(const Dataset& ds, const FitConfig& cfg)
{
    cfg.validate();
    ds.validate();
    const Eigen::Index n = ds.rows();
    const Eigen::Index p = ds.features();
    if (n < p + 2)
        throw InvalidArgument("fit: need at least p + 2 = " + std::to_string(p + 2) + " rows, got " +
                              std::to_string(n));

    const Eigen::MatrixXd design = augmented_design(ds.X);
    const double lambda = cfg.estimator == Estimator::RidgeNewton ? cfg.lambda_l2 : 0.0;
    const Objective objective{ds, design, penalty_mask(p + 1, cfg.penalize_intercept), lambda};

    FittedModel model;
    model.config = cfg;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd prob;
    Eigen::VectorXd grad = objective.gradient(beta, prob);
    const double score_scale = 1.0 + grad.lpNorm<Eigen::Infinity>();
    double current = objective.value(beta);

    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        const Eigen::MatrixXd hess = objective.hessian(prob);
        Eigen::LLT<Eigen::MatrixXd> llt(hess);
        Eigen::VectorXd step;
        if (llt.info() == Eigen::Success) {
            step = llt.solve(-grad);
        } else {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
            if (ldlt.info() != Eigen::Success)
                throw NumericalError("fit: Hessian factorization failed at iteration " + std::to_string(iter));
            step = ldlt.solve(-grad);
        }
        if (!step.allFinite())
            throw NumericalError("fit: non-finite Newton step at iteration " + std::to_string(iter) +
                                 " (collinear or constant columns?)");

        // Step halving when the objective gets worse.
        double t = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double value = objective.value(candidate);
        const double slack = 1e-12 * (1.0 + std::fabs(current));
        for (int halving = 0; halving < 30 && !(value <= current + slack); ++halving) {
            t *= 0.5;
            candidate = beta + t * step;
            value = objective.value(candidate);
        }

        beta = std::move(candidate);
        current = value;
        model.n_iter = iter;
        model.final_step_norm = t * step.lpNorm<Eigen::Infinity>();

        if (cfg.estimator == Estimator::MleIrls && beta.lpNorm<Eigen::Infinity>() > cfg.divergence_cap)
            throw SeparationError("fit: coefficients exceeded " + std::to_string(cfg.divergence_cap) +
                                  " after " + std::to_string(iter) +
                                  " iterations; the classes look linearly separable");

        grad = objective.gradient(beta, prob);
        model.final_score_norm = grad.lpNorm<Eigen::Infinity>();
        if (model.final_step_norm <= cfg.tol && model.final_score_norm <= cfg.tol * score_scale) {
            model.converged = true;
            break;
        }
        // Fitted probabilities collapsed onto the labels while the step is still
        // large: the weights have underflowed before the norm cap could trip.
        if (cfg.estimator == Estimator::MleIrls && (ds.y - prob).cwiseAbs().maxCoeff() < 1e-10)
            throw SeparationError("fit: fitted probabilities reached 0/1 for every row after " +
                                  std::to_string(iter) + " iterations; the classes look linearly separable");
    }
    model.beta_hat = std::move(beta);
    return model;
}

double margin(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != m.features())
        throw InvalidArgument("margin: point has " + std::to_string(x.size()) + " features, model expects " +
                              std::to_string(m.features()));
    return m.beta_hat[0] + x.dot(m.slopes());
}

double predict_proba(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return sigmoid(margin(m, x));
}

int decide(const FittedModel& m, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    return margin(m, x) > 0.0 ? 1 : 0;
}

double accuracy(const FittedModel& m, const Dataset& ds)
{
    if (ds.rows() == 0)
        throw InvalidArgument("accuracy: empty dataset");
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        hits += decide(m, ds.X.row(i).transpose()) == static_cast<int>(ds.y[i]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(ds.rows());
}

} // namespace alphaadv
