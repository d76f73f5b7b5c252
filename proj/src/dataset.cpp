#include "alphaadv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "alphaadv/error.hpp"
#include "alphaadv/random.hpp"
#include "alphaadv/serialize.hpp"

namespace alphaadv {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(std::string_view text)
{
    const std::string s = trim(text);
    if (s.empty())
        return std::nullopt;
    double value = 0.0;
    const char* begin = s.data();
    if (*begin == '+')
        ++begin;
    const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return value;
}

// Splits one record; quoted fields may contain the delimiter and doubled quotes.
std::vector<std::string> split_record(const std::string& line, char delimiter, std::size_t row)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted)
        throw ParseError("unterminated quoted field on row " + std::to_string(row), row, fields.size() + 1);
    fields.push_back(std::move(field));
    return fields;
}

} // namespace

Dataset Dataset::bernoulli(Eigen::MatrixXd X, Eigen::VectorXd y)
{
    Dataset ds;
    ds.trials = Eigen::VectorXd::Ones(X.rows());
    ds.X = std::move(X);
    ds.y = std::move(y);
    ds.validate();
    return ds;
}

void Dataset::validate() const
{
    if (y.size() != X.rows() || trials.size() != X.rows())
        throw InvalidArgument("dataset: X, y and trials must have the same number of rows");
    if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != X.cols())
        throw InvalidArgument("dataset: feature_names length does not match the number of columns");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0)
            throw InvalidArgument("dataset: label on row " + std::to_string(i + 1) + " is not 0 or 1");
        if (!(trials[i] >= 1.0) || trials[i] != std::floor(trials[i]))
            throw InvalidArgument("dataset: binomial denominator on row " + std::to_string(i + 1) +
                                  " must be a positive integer");
    }
    if (!X.allFinite())
        throw InvalidArgument("dataset: X contains non-finite values");
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const
{
    Dataset out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.X.resize(n, X.cols());
    out.y.resize(n);
    out.trials.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.X.row(i) = X.row(rows[i]);
        out.y[i] = y[rows[i]];
        out.trials[i] = trials[rows[i]];
    }
    out.feature_names = feature_names;
    return out;
}

void DgpSpec::validate() const
{
    if (beta_true.size() < 1)
        throw InvalidArgument("dgp: beta_true needs at least the intercept");
    if (!beta_true.allFinite())
        throw InvalidArgument("dgp: beta_true must be finite");
    if (n < 1)
        throw InvalidArgument("dgp: n must be at least 1");
}

DgpSpec parse_dgp_config(const std::string& text)
{
    DgpSpec spec;
    bool have_beta = false;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        if (trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("dgp config: expected key = value on line " + std::to_string(lineno), lineno, 0);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key == "beta_true") {
            std::vector<double> values;
            for (const auto& item : split_record(value, ',', lineno)) {
                auto v = parse_number(item);
                if (!v)
                    throw ParseError("dgp config: bad beta_true entry '" + item + "'", lineno, values.size() + 1);
                values.push_back(*v);
            }
            spec.beta_true = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
            have_beta = true;
        } else if (key == "n") {
            auto v = parse_number(value);
            if (!v || *v != std::floor(*v))
                throw ParseError("dgp config: n must be an integer", lineno, 0);
            spec.n = static_cast<Eigen::Index>(*v);
        } else if (key == "seed") {
            std::uint64_t seed = 0;
            const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
            if (ec != std::errc() || ptr != value.data() + value.size())
                throw ParseError("dgp config: seed must be an unsigned integer", lineno, 0);
            spec.seed = seed;
        } else if (key == "feature_law") {
            if (value != "standard_normal")
                throw ParseError("dgp config: unsupported feature_law '" + value + "'", lineno, 0);
            spec.feature_law = FeatureLaw::StandardNormal;
        } else {
            throw ParseError("dgp config: unknown key '" + key + "'", lineno, 0);
        }
    }
    if (!have_beta)
        throw ParseError("dgp config: beta_true is required", 0, 0);
    spec.validate();
    return spec;
}

DgpSpec load_dgp_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dgp_config(buf.str());
}

std::string format_dgp_config(const DgpSpec& spec)
{
    std::string out = "beta_true = ";
    for (Eigen::Index j = 0; j < spec.beta_true.size(); ++j) {
        if (j > 0)
            out += ',';
        out += format_double(spec.beta_true[j]);
    }
    out += "\nfeature_law = standard_normal\nn = " + std::to_string(spec.n) +
           "\nseed = " + std::to_string(spec.seed) + "\n";
    return out;
}

Dataset parse_csv(const std::string& text, const CsvOptions& options)
{
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::optional<std::size_t> arity;
    std::size_t row = 0;
    std::size_t label_col = 0;

    if (options.header)
        std::getline(in, line), ++row;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        auto fields = split_record(line, options.delimiter, row);
        if (!arity) {
            arity = fields.size();
            if (*arity < 2)
                throw ParseError("csv: need at least one feature and a label (row " + std::to_string(row) + ")",
                                 row, 1);
            label_col = options.label_column.value_or(*arity - 1);
            if (label_col >= *arity)
                throw ParseError("csv: label column " + std::to_string(label_col) + " out of range", row,
                                 label_col + 1);
        } else if (fields.size() != *arity) {
            throw ParseError("csv: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                 " fields, expected " + std::to_string(*arity),
                             row, 0);
        }
        std::vector<double> features;
        features.reserve(*arity - 1);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            auto v = parse_number(fields[c]);
            if (!v)
                throw ParseError("csv: cannot parse '" + fields[c] + "' at row " + std::to_string(row) +
                                     ", column " + std::to_string(c + 1),
                                 row, c + 1);
            if (c == label_col) {
                if (*v != 0.0 && *v != 1.0)
                    throw ParseError("csv: label '" + fields[c] + "' at row " + std::to_string(row) +
                                         " is not 0 or 1",
                                     row, c + 1);
                labels.push_back(*v);
            } else {
                if (!std::isfinite(*v))
                    throw ParseError("csv: non-finite feature at row " + std::to_string(row) + ", column " +
                                         std::to_string(c + 1),
                                     row, c + 1);
                features.push_back(*v);
            }
        }
        rows.push_back(std::move(features));
    }
    if (rows.empty())
        throw ParseError("csv: no data rows", 0, 0);

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        X.row(i) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), p);
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels.data(), n);
    return Dataset::bernoulli(std::move(X), std::move(y));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path.string(), 0, 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), options);
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, char delimiter)
{
    std::ofstream out(path);
    if (!out)
        throw InvalidArgument("cannot write " + path.string());
    std::string line;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        line.clear();
        for (Eigen::Index j = 0; j < ds.features(); ++j) {
            line += format_double(ds.X(i, j));
            line += delimiter;
        }
        line += format_double(ds.y[i]);
        line += '\n';
        out << line;
    }
}

Dataset generate_dgp(const DgpSpec& spec)
{
    spec.validate();
    const Eigen::Index p = spec.features();
    Rng rng = make_rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Eigen::MatrixXd X(spec.n, p);
    Eigen::VectorXd y(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j)
            X(i, j) = normal(rng);
        const double eta = spec.beta_true[0] + X.row(i).dot(spec.beta_true.tail(p));
        const double prob = 1.0 / (1.0 + std::exp(-eta));
        y[i] = uniform(rng) < prob ? 1.0 : 0.0;
    }
    return Dataset::bernoulli(std::move(X), std::move(y));
}

Eigen::VectorXd Standardizer::transform(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (x.size() != means.size())
        throw InvalidArgument("standardizer: dimension mismatch");
    return ((x - means).array() / scales.array()).matrix();
}

Eigen::VectorXd Standardizer::inverse(const Eigen::Ref<const Eigen::VectorXd>& z) const
{
    if (z.size() != means.size())
        throw InvalidArgument("standardizer: dimension mismatch");
    return (z.array() * scales.array()).matrix() + means;
}

Standardizer fit_standardizer(const Dataset& ds)
{
    if (ds.rows() < 1)
        throw InvalidArgument("standardizer: empty dataset");
    Standardizer s;
    s.means = ds.X.colwise().mean().transpose();
    s.scales.resize(ds.features());
    for (Eigen::Index j = 0; j < ds.features(); ++j) {
        const double var = (ds.X.col(j).array() - s.means[j]).square().mean();
        const double sd = std::sqrt(var);
        if (!(sd > 1e-12 * (1.0 + std::fabs(s.means[j])))) {
            const std::string name = ds.feature_names.empty() ? "column " + std::to_string(j)
                                                              : "column '" + ds.feature_names[j] + "'";
            throw InvalidArgument("standardizer: " + name + " is constant");
        }
        s.scales[j] = sd;
    }
    return s;
}

Dataset apply_standardizer(const Standardizer& s, const Dataset& ds)
{
    if (s.means.size() != ds.features())
        throw InvalidArgument("standardizer: dimension mismatch");
    Dataset out = ds;
    out.X = ((ds.X.rowwise() - s.means.transpose()).array().rowwise() / s.scales.transpose().array()).matrix();
    return out;
}

Dataset invert_standardizer(const Standardizer& s, const Dataset& ds)
{
    if (s.means.size() != ds.features())
        throw InvalidArgument("standardizer: dimension mismatch");
    Dataset out = ds;
    out.X = (ds.X.array().rowwise() * s.scales.transpose().array()).matrix().rowwise() + s.means.transpose();
    return out;
}

std::vector<std::vector<Eigen::Index>> split_indices(Eigen::Index n, std::span<const double> fractions,
                                                     std::uint64_t seed)
{
    if (fractions.empty())
        throw InvalidArgument("split: need at least one fraction");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0))
            throw InvalidArgument("split: fractions must be positive");
        total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw InvalidArgument("split: fractions sum to " + format_double(total) + ", expected 1");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng = make_rng(seed);
    // Fisher-Yates with our own index draw: std::shuffle is not specified
    // identically across standard libraries.
    for (std::size_t i = perm.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }

    std::vector<std::vector<Eigen::Index>> parts;
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < fractions.size(); ++k) {
        cumulative += fractions[k];
        const std::size_t end = (k + 1 == fractions.size())
                                    ? perm.size()
                                    : std::min(perm.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
        parts.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                           perm.begin() + static_cast<std::ptrdiff_t>(std::max(begin, end)));
        begin = std::max(begin, end);
    }
    return parts;
}

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed)
{
    std::vector<Dataset> out;
    for (const auto& rows : split_indices(ds.rows(), fractions, seed))
        out.push_back(ds.subset(rows));
    return out;
}

} // namespace alphaadv
