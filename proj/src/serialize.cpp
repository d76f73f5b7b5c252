#include "alphaadv/serialize.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include "alphaadv/error.hpp"

namespace alphaadv {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j, const char* field)
{
    if (!j.is_array())
        throw ParseError(std::string("model json: '") + field + "' must be an array", 0, 0);
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

const json& require(const json& doc, const char* field)
{
    if (!doc.contains(field))
        throw ParseError(std::string("model json: missing field '") + field + "'", 0, 0);
    return doc.at(field);
}

} // namespace

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc())
        throw Error("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

std::string to_string(Estimator estimator)
{
    return estimator == Estimator::MleIrls ? "mle_irls" : "ridge_newton";
}

Estimator parse_estimator(const std::string& name)
{
    if (name == "mle_irls" || name == "mle" || name == "irls")
        return Estimator::MleIrls;
    if (name == "ridge_newton" || name == "ridge")
        return Estimator::RidgeNewton;
    throw InvalidArgument("unknown estimator '" + name + "' (expected mle or ridge)");
}

json to_json(const ModelBundle& bundle)
{
    const auto& m = bundle.model;
    json doc;
    doc["beta_hat"] = vector_to_json(m.beta_hat);
    doc["estimator"] = to_string(m.config.estimator);
    doc["lambda_l2"] = m.config.lambda_l2;
    doc["penalize_intercept"] = m.config.penalize_intercept;
    doc["converged"] = m.converged;
    doc["n_iter"] = m.n_iter;
    doc["final_step_norm"] = m.final_step_norm;
    doc["final_score_norm"] = m.final_score_norm;
    doc["max_iter"] = m.config.max_iter;
    doc["tol"] = m.config.tol;

    const Eigen::MatrixXd& cov = bundle.covariance.matrix;
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(cov.size()));
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        for (Eigen::Index j = 0; j < cov.cols(); ++j)
            row_major.push_back(cov(i, j));
    doc["covariance"] = row_major;
    doc["covariance_condition"] = bundle.covariance.condition_estimate;

    if (bundle.standardizer) {
        doc["standardizer"] = {{"means", vector_to_json(bundle.standardizer->means)},
                               {"scales", vector_to_json(bundle.standardizer->scales)}};
    } else {
        doc["standardizer"] = nullptr;
    }
    return doc;
}

ModelBundle model_bundle_from_json(const json& doc)
{
    ModelBundle bundle;
    auto& m = bundle.model;
    try {
        m.beta_hat = vector_from_json(require(doc, "beta_hat"), "beta_hat");
        m.config.estimator = parse_estimator(require(doc, "estimator").get<std::string>());
        m.config.lambda_l2 = require(doc, "lambda_l2").get<double>();
        m.converged = require(doc, "converged").get<bool>();
        m.n_iter = require(doc, "n_iter").get<int>();
        m.config.penalize_intercept = doc.value("penalize_intercept", false);
        m.final_step_norm = doc.value("final_step_norm", 0.0);
        m.final_score_norm = doc.value("final_score_norm", 0.0);
        m.config.max_iter = doc.value("max_iter", m.config.max_iter);
        m.config.tol = doc.value("tol", m.config.tol);

        const auto flat = require(doc, "covariance").get<std::vector<double>>();
        const Eigen::Index dim = m.beta_hat.size();
        if (static_cast<Eigen::Index>(flat.size()) != dim * dim)
            throw ParseError("model json: covariance must have (p+1)^2 entries", 0, 0);
        bundle.covariance.matrix.resize(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j)
                bundle.covariance.matrix(i, j) = flat[static_cast<std::size_t>(i * dim + j)];
        bundle.covariance.estimator = m.config.estimator;
        bundle.covariance.lambda_l2 = m.config.lambda_l2;
        bundle.covariance.penalize_intercept = m.config.penalize_intercept;
        bundle.covariance.condition_estimate = doc.value("covariance_condition", 0.0);

        const json& stand = require(doc, "standardizer");
        if (!stand.is_null()) {
            Standardizer s;
            s.means = vector_from_json(require(stand, "means"), "means");
            s.scales = vector_from_json(require(stand, "scales"), "scales");
            if (s.means.size() != dim - 1 || s.scales.size() != dim - 1)
                throw ParseError("model json: standardizer dimension does not match beta_hat", 0, 0);
            bundle.standardizer = std::move(s);
        }
    } catch (const json::exception& err) {
        throw ParseError(std::string("model json: ") + err.what(), 0, 0);
    }
    return bundle;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw InvalidArgument("cannot write " + path.string());
    out << to_json(bundle).dump(2) << '\n';
}

ModelBundle load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path.string(), 0, 0);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& err) {
        throw ParseError("model json: " + std::string(err.what()), 0, 0);
    }
    return model_bundle_from_json(doc);
}

json to_json(const AttackResult& r)
{
    json roots = json::array();
    for (const auto& rc : r.roots)
        roots.push_back({{"lambda", rc.lambda}, {"residual", rc.residual}, {"valid", rc.valid}});
    return {{"delta0", vector_to_json(r.delta0)},
            {"lambda_star", r.lambda_star},
            {"x_adv", vector_to_json(r.x_adv)},
            {"saturated", r.saturated},
            {"achieved_prob_estimate", r.achieved_prob_estimate},
            {"quadratic", {{"a", r.quadratic.a}, {"b", r.quadratic.b}, {"c", r.quadratic.c}, {"linear", r.quadratic.linear}}},
            {"roots", roots}};
}

json to_json(const McReport& r)
{
    return {{"n_trials", r.n_trials},
            {"success_count", r.success_count},
            {"empirical_rate", r.empirical_rate},
            {"target_alpha", r.target_alpha},
            {"binomial_3sigma", r.binomial_3sigma},
            {"rule", r.rule == PassRule::Equality ? "equality" : "at_least"},
            {"pass", r.pass}};
}

json to_json(const DgpSpec& spec)
{
    return {{"beta_true", vector_to_json(spec.beta_true)}, {"feature_law", "standard_normal"}};
}

json to_json(const TransferReport& r)
{
    json rates = json::array();
    for (const auto& a : r.per_alpha) {
        json entry = {{"alpha", a.alpha}, {"n_evaluations", a.n_evaluations}, {"n_unresolved", a.n_unresolved}};
        entry["empirical_rate"] = std::isfinite(a.empirical_rate) ? json(a.empirical_rate) : json(nullptr);
        rates.push_back(entry);
    }
    return {{"n_defenders", r.n_defenders},
            {"n_failed_fits", r.n_failed_fits},
            {"n_test_points", r.n_test_points},
            {"attacker_n", r.attacker_n},
            {"defender_n", r.defender_n},
            {"attacker_estimator", to_string(r.attacker_estimator)},
            {"defender_estimator", to_string(r.defender_estimator)},
            {"dgp", to_json(r.dgp)},
            {"per_alpha", rates}};
}

std::string attack_csv_header()
{
    return "row_id,y0,alpha,lambda_star,saturated,achieved_prob,norm_delta0,norm_scaled,status";
}

std::string attack_csv_line(const AttackRow& row)
{
    std::string line = std::to_string(row.row_id) + ',' + std::to_string(row.y0) + ',' + format_double(row.alpha) + ',';
    if (const auto& r = row.outcome.result) {
        line += format_double(r->lambda_star) + ',' + (r->saturated ? "1" : "0") + ',' +
                format_double(r->achieved_prob_estimate) + ',' + format_double(r->delta0.norm()) + ',' +
                format_double((r->lambda_star * r->delta0).norm()) + ',';
    } else {
        line += "nan,0,nan,nan,nan,";
    }
    line += to_string(row.outcome.status);
    return line;
}

std::string sweep_l2_csv_header()
{
    return "lambda_l2,acc_out,q10,median,q90,n_zero_lambda";
}

std::string sweep_l2_csv_line(const RegularizationRow& row)
{
    return format_double(row.lambda_l2) + ',' + format_double(row.acc_out) + ',' + format_double(row.q10) + ',' +
           format_double(row.median) + ',' + format_double(row.q90) + ',' + std::to_string(row.n_zero_lambda);
}

} // namespace alphaadv
