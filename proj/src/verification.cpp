#include "alphaadv/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "alphaadv/error.hpp"
#include "alphaadv/parallel.hpp"
#include "alphaadv/random.hpp"

namespace alphaadv {

namespace {

constexpr std::size_t kMcChunks = 64;

// Square root factor of a covariance matrix, tolerating tiny negative
// eigenvalues from round-off.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericalError("mc: eigen-decomposition of the covariance failed");
    Eigen::VectorXd values = eig.eigenvalues();
    const double largest = std::max(values.maxCoeff(), 0.0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) {
            if (-values[i] > 1e-8 * largest) {
                std::ostringstream msg;
                msg << "mc: covariance has eigenvalue " << values[i] << " (largest " << largest
                    << "), not positive semidefinite";
                throw NumericalError(msg.str());
            }
            values[i] = 0.0;
        }
    }
    return eig.eigenvectors() * values.cwiseSqrt().asDiagonal();
}

} // namespace

McReport mc_belief_check(const AttackRequest& req, const AttackResult& result, long long n_trials,
                         std::uint64_t seed)
{
    req.validate();
    if (n_trials < 10000)
        throw InvalidArgument("mc: n_trials must be at least 10^4");
    if (result.x_adv.size() != req.x0.size())
        throw InvalidArgument("mc: x_adv dimension does not match the request");

    const Eigen::VectorXd& mean = req.surrogate->model.beta_hat;
    const Eigen::MatrixXd factor = covariance_factor(req.surrogate->covariance.matrix);
    const Eigen::Index dim = mean.size();

    Eigen::VectorXd xt(dim);
    xt[0] = 1.0;
    xt.tail(dim - 1) = result.x_adv;

    std::vector<long long> hits(kMcChunks, 0);
    parallel_for(kMcChunks, [&](std::size_t chunk) {
        const long long begin = n_trials * static_cast<long long>(chunk) / static_cast<long long>(kMcChunks);
        const long long end = n_trials * static_cast<long long>(chunk + 1) / static_cast<long long>(kMcChunks);
        Rng rng = make_rng(seed, chunk);
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd z(dim);
        Eigen::VectorXd beta(dim);
        long long count = 0;
        for (long long t = begin; t < end; ++t) {
            for (Eigen::Index j = 0; j < dim; ++j)
                z[j] = normal(rng);
            beta.noalias() = mean + factor * z;
            const int predicted = xt.dot(beta) > 0.0 ? 1 : 0;
            count += predicted != req.y0 ? 1 : 0;
        }
        hits[chunk] = count;
    });

    McReport report;
    report.n_trials = n_trials;
    for (long long h : hits)
        report.success_count += h;
    report.empirical_rate = static_cast<double>(report.success_count) / static_cast<double>(n_trials);
    report.target_alpha = req.alpha;
    report.binomial_3sigma = 3.0 * std::sqrt(req.alpha * (1.0 - req.alpha) / static_cast<double>(n_trials));
    report.rule = result.saturated ? PassRule::Equality : PassRule::AtLeast;
    report.pass = report.rule == PassRule::Equality
                      ? std::fabs(report.empirical_rate - req.alpha) <= report.binomial_3sigma
                      : report.empirical_rate >= req.alpha - report.binomial_3sigma;
    return report;
}

double bisection_oracle(const AttackRequest& req, const Eigen::Ref<const Eigen::VectorXd>& delta0, double lo,
                        double hi, double tol)
{
    auto h = [&](double lambda) { return misclassification_probability(req, lambda, delta0) - req.alpha; };
    double h_lo = h(lo);
    const double h_hi = h(hi);
    if (h_lo == 0.0)
        return lo;
    if (h_hi == 0.0)
        return hi;
    if ((h_lo > 0.0) == (h_hi > 0.0))
        throw InvalidArgument("bisection: no sign change on the bracket");

    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi))
            break;
        const double h_mid = h(mid);
        if (h_mid == 0.0)
            return mid;
        if ((h_mid > 0.0) == (h_lo > 0.0)) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    const double root = 0.5 * (lo + hi);
    if (std::fabs(h(root)) > tol)
        throw NumericalError("bisection: converged bracket but |h| exceeds the tolerance");
    return root;
}

std::optional<std::pair<double, double>> scan_for_bracket(const AttackRequest& req,
                                                          const Eigen::Ref<const Eigen::VectorXd>& delta0,
                                                          double max_abs_lambda)
{
    auto h = [&](double lambda) { return misclassification_probability(req, lambda, delta0) - req.alpha; };
    const double h0 = h(0.0);
    // Walk both sides in lockstep so the first crossing found is the one nearest zero.
    double prev = 0.0;
    double h_prev_pos = h0;
    double h_prev_neg = h0;
    for (double step = 1e-4; step <= max_abs_lambda; step *= 1.01) {
        const double h_pos = h(step);
        if ((h_pos > 0.0) != (h_prev_pos > 0.0))
            return std::make_pair(prev, step);
        const double h_neg = h(-step);
        if ((h_neg > 0.0) != (h_prev_neg > 0.0))
            return std::make_pair(-step, -prev);
        h_prev_pos = h_pos;
        h_prev_neg = h_neg;
        prev = step;
    }
    return std::nullopt;
}

TransferReport transfer_experiment(const TransferConfig& cfg)
{
    DgpSpec probe = cfg.dgp;
    probe.n = 1; // sizes come from attacker_n and defender_n
    probe.validate();
    if (cfg.attacker_n < 1 || cfg.defender_n < 1 || cfg.n_defenders < 1 || cfg.n_test_points < 1)
        throw InvalidArgument("transfer: sample sizes and counts must be positive");
    if (cfg.alphas.empty())
        throw InvalidArgument("transfer: need at least one alpha");
    for (double a : cfg.alphas)
        if (!(a > 0.0 && a < 1.0))
            throw InvalidArgument("transfer: every alpha must lie in (0, 1)");
    const FitConfig defender_fit = cfg.defender_fit.value_or(cfg.attacker_fit);

    TransferReport report;
    report.n_defenders = cfg.n_defenders;
    report.n_test_points = cfg.n_test_points;
    report.attacker_n = cfg.attacker_n;
    report.defender_n = cfg.defender_n;
    report.dgp = cfg.dgp;
    report.attacker_estimator = cfg.attacker_fit.estimator;
    report.defender_estimator = defender_fit.estimator;

    // Attacker: one fit on its own draw.
    DgpSpec attacker_spec = cfg.dgp;
    attacker_spec.n = cfg.attacker_n;
    attacker_spec.seed = derive_seed(cfg.seed, 0);
    const Dataset attacker_data = generate_dgp(attacker_spec);
    const FittedModel attacker = fit(attacker_data, cfg.attacker_fit);
    if (!attacker.converged)
        throw NumericalError("transfer: attacker fit did not converge");
    auto surrogate = std::make_shared<const Surrogate>(Surrogate{attacker, estimate_covariance(attacker_data, attacker)});

    // Test points the surrogate classifies correctly.
    std::vector<Eigen::VectorXd> points;
    std::vector<int> labels;
    for (std::uint64_t batch = 0; static_cast<int>(points.size()) < cfg.n_test_points; ++batch) {
        if (batch > 1000)
            throw NumericalError("transfer: could not find enough correctly classified test points");
        DgpSpec test_spec = cfg.dgp;
        test_spec.n = 4 * static_cast<Eigen::Index>(cfg.n_test_points);
        test_spec.seed = derive_seed(cfg.seed, 1 + batch);
        const Dataset test = generate_dgp(test_spec);
        for (Eigen::Index i = 0; i < test.rows() && static_cast<int>(points.size()) < cfg.n_test_points; ++i) {
            const Eigen::VectorXd x = test.X.row(i).transpose();
            const int y = static_cast<int>(test.y[i]);
            if (decide(attacker, x) == y) {
                points.push_back(x);
                labels.push_back(y);
            }
        }
    }

    // Adversarial points per alpha.
    struct Crafted {
        Eigen::VectorXd x_adv;
        int y0;
    };
    std::vector<std::vector<Crafted>> crafted(cfg.alphas.size());
    report.per_alpha.resize(cfg.alphas.size());
    for (std::size_t k = 0; k < cfg.alphas.size(); ++k) {
        report.per_alpha[k].alpha = cfg.alphas[k];
        for (std::size_t i = 0; i < points.size(); ++i) {
            AttackRequest req{points[i], labels[i], cfg.alphas[k], surrogate};
            const AttackOutcome out = try_solve_intensity(req, orthogonal_perturbation(attacker, points[i]));
            if (out.ok())
                crafted[k].push_back({out.result->x_adv, labels[i]});
            else
                ++report.per_alpha[k].n_unresolved;
        }
    }

    // Defenders: independent draws, independent fits.
    const auto n_def = static_cast<std::size_t>(cfg.n_defenders);
    std::vector<std::vector<long long>> hits(n_def, std::vector<long long>(cfg.alphas.size(), 0));
    std::vector<char> failed(n_def, 0);
    parallel_for(n_def, [&](std::size_t d) {
        DgpSpec spec = cfg.dgp;
        spec.n = cfg.defender_n;
        spec.seed = derive_seed(cfg.seed, 1000000 + d);
        const Dataset data = generate_dgp(spec);
        FittedModel defender;
        try {
            defender = fit(data, defender_fit);
        } catch (const NumericalError&) {
            failed[d] = 1;
            return;
        }
        if (!defender.converged) {
            failed[d] = 1;
            return;
        }
        for (std::size_t k = 0; k < crafted.size(); ++k)
            for (const auto& c : crafted[k])
                hits[d][k] += decide(defender, c.x_adv) != c.y0 ? 1 : 0;
    });

    for (char f : failed)
        report.n_failed_fits += f;
    if (report.n_failed_fits * 10 > cfg.n_defenders)
        throw NumericalError("transfer: " + std::to_string(report.n_failed_fits) + " of " +
                             std::to_string(cfg.n_defenders) + " defender fits failed");
    const long long good = cfg.n_defenders - report.n_failed_fits;
    for (std::size_t k = 0; k < cfg.alphas.size(); ++k) {
        long long total = 0;
        for (std::size_t d = 0; d < n_def; ++d)
            if (!failed[d])
                total += hits[d][k];
        auto& rate = report.per_alpha[k];
        rate.n_evaluations = good * static_cast<long long>(crafted[k].size());
        rate.empirical_rate = rate.n_evaluations > 0
                                  ? static_cast<double>(total) / static_cast<double>(rate.n_evaluations)
                                  : std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

double quantile(std::vector<double> values, double q)
{
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<RegularizationRow> regularization_sweep(const Dataset& train, const Dataset& test,
                                                    const RegularizationConfig& cfg)
{
    if (cfg.lambda_grid.empty())
        throw InvalidArgument("sweep-l2: empty lambda grid");
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
        if (!(cfg.lambda_grid[i] >= 0.0))
            throw InvalidArgument("sweep-l2: lambda values must be nonnegative");
        if (i > 0 && cfg.lambda_grid[i] < cfg.lambda_grid[i - 1])
            throw InvalidArgument("sweep-l2: lambda grid must be sorted ascending");
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw InvalidArgument("sweep-l2: alpha must lie in (0, 1)");
    if (test.features() != train.features())
        throw InvalidArgument("sweep-l2: train and test have different feature counts");

    std::vector<RegularizationRow> rows(cfg.lambda_grid.size());
    parallel_for(rows.size(), [&](std::size_t k) {
        RegularizationRow& row = rows[k];
        row.lambda_l2 = cfg.lambda_grid[k];
        row.intensities.assign(static_cast<std::size_t>(test.rows()), std::numeric_limits<double>::quiet_NaN());

        FitConfig fit_cfg = cfg.base_fit;
        fit_cfg.estimator = Estimator::RidgeNewton;
        fit_cfg.lambda_l2 = row.lambda_l2;
        std::shared_ptr<const Surrogate> surrogate;
        try {
            const FittedModel model = fit(train, fit_cfg);
            if (!model.converged)
                throw NumericalError("fit did not converge");
            surrogate = std::make_shared<const Surrogate>(Surrogate{model, covariance_ridge(train, model)});
        } catch (const Error& err) {
            row.error = err.what();
            row.n_failed = static_cast<int>(test.rows());
            row.acc_out = row.q10 = row.median = row.q90 = row.variance_trace =
                std::numeric_limits<double>::quiet_NaN();
            return;
        }
        row.acc_out = accuracy(surrogate->model, test);
        row.variance_trace = surrogate->covariance.matrix.trace();
        for (Eigen::Index i = 0; i < test.rows(); ++i) {
            const Eigen::VectorXd x0 = test.X.row(i).transpose();
            AttackRequest req{x0, static_cast<int>(test.y[i]), cfg.alpha, surrogate};
            AttackOutcome out;
            try {
                out = try_solve_intensity(req, orthogonal_perturbation(surrogate->model, x0));
            } catch (const AttackError& err) {
                out.status = err.status();
            }
            if (!out.ok()) {
                ++row.n_failed;
                continue;
            }
            row.intensities[static_cast<std::size_t>(i)] = out.result->lambda_star;
            if (!out.result->saturated)
                ++row.n_zero_lambda;
        }
        row.q10 = quantile(row.intensities, 0.1);
        row.median = quantile(row.intensities, 0.5);
        row.q90 = quantile(row.intensities, 0.9);
    });
    return rows;
}

} // namespace alphaadv
