#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace alphaadv {

/// Binary-response design: features X (n x p, no intercept column), labels
/// y in {0,1} and binomial denominators m_i >= 1 (all ones for Bernoulli data).
///
/// With m_i > 1 the label is read as the observed success proportion of the
/// m_i trials, so the likelihood contribution is m_i [y_i log pi_i + (1 - y_i) log(1 - pi_i)].
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd trials;
    std::vector<std::string> feature_names;

    Eigen::Index rows() const noexcept { return X.rows(); }
    Eigen::Index features() const noexcept { return X.cols(); }

    /// Bernoulli dataset (all m_i = 1). Validates every invariant.
    static Dataset bernoulli(Eigen::MatrixXd X, Eigen::VectorXd y);

    /// Throws InvalidArgument when a label, denominator or feature breaks the invariants.
    void validate() const;

    /// Rows in the given order, as a new dataset.
    Dataset subset(std::span<const Eigen::Index> rows) const;
};

/// Covariate distribution of a synthetic data-generating process.
enum class FeatureLaw { StandardNormal };

struct DgpSpec {
    Eigen::VectorXd beta_true; ///< intercept first, length p + 1
    FeatureLaw feature_law = FeatureLaw::StandardNormal;
    Eigen::Index n = 0;
    std::uint64_t seed = 0;

    Eigen::Index features() const noexcept { return beta_true.size() - 1; }
    void validate() const;
};

/// Parses the flat `key = value` config format (keys: beta_true, feature_law, n, seed).
DgpSpec parse_dgp_config(const std::string& text);
DgpSpec load_dgp_config(const std::filesystem::path& path);
std::string format_dgp_config(const DgpSpec& spec);

struct CsvOptions {
    /// Column holding the label; std::nullopt means the last column.
    std::optional<std::size_t> label_column;
    char delimiter = ',';
    bool header = false;
};

/// Reads a delimited numeric file into a Bernoulli dataset, preserving row order.
/// Throws ParseError with the offending row/column.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes features then the label as the last column, shortest round-trip decimals.
void write_csv(const Dataset& ds, const std::filesystem::path& path, char delimiter = ',');

/// Draws X from the feature law and y_i ~ Bernoulli(sigmoid(x~_i' beta_true)).
/// Bit-identical output for a fixed spec.
Dataset generate_dgp(const DgpSpec& spec);

/// Per-column affine map to mean 0 and population standard deviation 1.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;

    Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd inverse(const Eigen::Ref<const Eigen::VectorXd>& z) const;
};

/// Throws InvalidArgument naming the first constant column.
Standardizer fit_standardizer(const Dataset& ds);
Dataset apply_standardizer(const Standardizer& s, const Dataset& ds);
Dataset invert_standardizer(const Standardizer& s, const Dataset& ds);

/// Uniformly random disjoint row partition with sizes proportional to
/// `fractions` (which must be positive and sum to 1 within 1e-9).
std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed);

/// Row indices of the partition produced by split() for the same arguments.
std::vector<std::vector<Eigen::Index>> split_indices(Eigen::Index n, std::span<const double> fractions,
                                                     std::uint64_t seed);

} // namespace alphaadv
