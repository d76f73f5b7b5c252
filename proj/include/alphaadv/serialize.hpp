#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "alphaadv/asymptotics.hpp"
#include "alphaadv/attack.hpp"
#include "alphaadv/dataset.hpp"
#include "alphaadv/glm.hpp"
#include "alphaadv/verification.hpp"

namespace alphaadv {

/// Shortest decimal that parses back to the same double ("nan", "inf", "-inf" otherwise).
std::string format_double(double value);

std::string to_string(Estimator estimator);
Estimator parse_estimator(const std::string& name);

/// Everything the CLI persists about a fit: coefficients, diagnostics,
/// covariance and the feature standardizer used before fitting.
struct ModelBundle {
    FittedModel model;
    CovarianceEstimate covariance;
    std::optional<Standardizer> standardizer;
};

nlohmann::json to_json(const ModelBundle& bundle);
ModelBundle model_bundle_from_json(const nlohmann::json& doc);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

nlohmann::json to_json(const AttackResult& result);
nlohmann::json to_json(const McReport& report);
nlohmann::json to_json(const TransferReport& report);
nlohmann::json to_json(const DgpSpec& spec);

/// Attack CSV. Header is fixed:
/// row_id,y0,alpha,lambda_star,saturated,achieved_prob,norm_delta0,norm_scaled,status
struct AttackRow {
    long long row_id = 0;
    int y0 = 0;
    double alpha = 0.0;
    AttackOutcome outcome;
};

std::string attack_csv_header();
std::string attack_csv_line(const AttackRow& row);

/// Regularization sweep CSV. Header: lambda_l2,acc_out,q10,median,q90,n_zero_lambda
std::string sweep_l2_csv_header();
std::string sweep_l2_csv_line(const RegularizationRow& row);

} // namespace alphaadv
