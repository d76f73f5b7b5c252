#include "alphaadv/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "alphaadv/asymptotics.hpp"
#include "alphaadv/attack.hpp"
#include "alphaadv/dataset.hpp"
#include "alphaadv/error.hpp"
#include "alphaadv/glm.hpp"
#include "alphaadv/random.hpp"
#include "alphaadv/serialize.hpp"
#include "alphaadv/verification.hpp"

namespace alphaadv::cli {

namespace {

double parse_real(const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw InvalidArgument("cannot parse number '" + text + "'");
    }
    if (used != text.size())
        throw InvalidArgument("cannot parse number '" + text + "'");
    return v;
}

std::vector<std::string> split_on(const std::string& text, char sep)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        parts.push_back(item);
    return parts;
}

// Shared dataset flags.
struct DataOptions {
    std::string path;
    bool header = false;
    std::string delimiter = ",";
    int label_column = -1;

    void attach(CLI::App& app, bool required = true)
    {
        auto* opt = app.add_option("--data", path, "Delimited numeric file, one row per example");
        if (required)
            opt->required();
        app.add_flag("--header", header, "Skip the first line");
        app.add_option("--delimiter", delimiter, "Field delimiter (single character)");
        app.add_option("--label-column", label_column, "0-based label column (default: last)");
    }

    Dataset load() const
    {
        if (delimiter.size() != 1)
            throw InvalidArgument("--delimiter must be a single character");
        CsvOptions opts;
        opts.header = header;
        opts.delimiter = delimiter[0];
        if (label_column >= 0)
            opts.label_column = static_cast<std::size_t>(label_column);
        return load_csv(path, opts);
    }
};

// Shared estimator flags.
struct FitOptions {
    std::string estimator = "mle";
    double lambda_l2 = 0.0;
    bool penalize_intercept = false;
    int max_iter = 100;
    double tol = 1e-8;
    CLI::Option* lambda_opt = nullptr;

    void attach(CLI::App& app, const std::string& prefix = "")
    {
        app.add_option("--" + prefix + "estimator", estimator, "mle (IRLS) or ridge (penalized Newton)")
            ->check(CLI::IsMember({"mle", "irls", "mle_irls", "ridge", "ridge_newton"}));
        lambda_opt = app.add_option("--" + prefix + "lambda-l2", lambda_l2, "Ridge strength");
        app.add_flag("--" + prefix + "penalize-intercept", penalize_intercept, "Also penalize the intercept");
        app.add_option("--" + prefix + "max-iter", max_iter, "Newton iteration cap");
        app.add_option("--" + prefix + "tol", tol, "Convergence tolerance");
    }

    FitConfig config() const
    {
        FitConfig cfg;
        cfg.estimator = parse_estimator(estimator);
        if (cfg.estimator == Estimator::MleIrls && lambda_opt != nullptr && lambda_opt->count() > 0)
            throw InvalidArgument("--lambda-l2 cannot be combined with the mle estimator");
        if (cfg.estimator == Estimator::MleIrls && penalize_intercept)
            throw InvalidArgument("--penalize-intercept requires the ridge estimator");
        cfg.lambda_l2 = cfg.estimator == Estimator::RidgeNewton ? lambda_l2 : 0.0;
        cfg.penalize_intercept = penalize_intercept;
        cfg.max_iter = max_iter;
        cfg.tol = tol;
        cfg.validate();
        return cfg;
    }
};

// Writes to the named file, or to `fallback` when the path is empty.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw InvalidArgument("cannot write " + path);
            stream_ = file_.get();
        }
    }
    std::ostream& stream() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

DgpSpec default_dgp(int p, std::uint64_t seed)
{
    if (p < 1)
        throw InvalidArgument("--p must be at least 1");
    DgpSpec spec;
    spec.beta_true.resize(p + 1);
    Rng rng = make_rng(seed, 0xB37A);
    std::normal_distribution<double> normal(0.0, 1.0);
    spec.beta_true[0] = 0.0;
    for (int j = 1; j <= p; ++j)
        spec.beta_true[j] = normal(rng);
    return spec;
}

DgpSpec resolve_dgp(const std::string& config, const std::string& beta, int p, std::uint64_t seed)
{
    if (!config.empty())
        return load_dgp_config(config);
    if (!beta.empty()) {
        DgpSpec spec;
        const auto parts = split_on(beta, ',');
        spec.beta_true.resize(static_cast<Eigen::Index>(parts.size()));
        for (std::size_t j = 0; j < parts.size(); ++j)
            spec.beta_true[static_cast<Eigen::Index>(j)] = parse_real(parts[j]);
        return spec;
    }
    return default_dgp(p, seed);
}

std::vector<Eigen::Index> parse_rows(const std::string& spec, Eigen::Index n)
{
    std::vector<Eigen::Index> rows;
    if (spec.empty() || spec == "all") {
        for (Eigen::Index i = 0; i < n; ++i)
            rows.push_back(i);
        return rows;
    }
    for (const auto& part : split_on(spec, ',')) {
        const double v = parse_real(part);
        if (v < 0 || v >= static_cast<double>(n) || v != std::floor(v))
            throw InvalidArgument("row id '" + part + "' out of range");
        rows.push_back(static_cast<Eigen::Index>(v));
    }
    return rows;
}

Dataset standardized_for(const ModelBundle& bundle, const Dataset& raw)
{
    if (raw.features() != bundle.model.features())
        throw InvalidArgument("data has " + std::to_string(raw.features()) + " features, model expects " +
                              std::to_string(bundle.model.features()));
    return bundle.standardizer ? apply_standardizer(*bundle.standardizer, raw) : raw;
}

// ---- subcommands ----------------------------------------------------------

struct GenData {
    int p = 5;
    long long n = 1000;
    std::uint64_t seed = 0;
    std::string beta, config, out, dgp_out;

    void attach(CLI::App& app)
    {
        app.add_option("--p", p, "Number of features (ignored with --beta/--config)");
        app.add_option("--n", n, "Number of rows");
        app.add_option("--seed", seed, "Random seed");
        app.add_option("--beta", beta, "Comma-separated beta_true, intercept first");
        app.add_option("--config", config, "DGP config file (key = value)");
        app.add_option("--out,-o", out, "Output CSV (default: stdout)");
        app.add_option("--dgp-out", dgp_out, "Also write the resolved DGP config here");
    }

    int run(std::ostream& out_stream)
    {
        DgpSpec spec = resolve_dgp(config, beta, p, seed);
        if (config.empty()) {
            spec.n = n;
            spec.seed = seed;
        }
        const Dataset ds = generate_dgp(spec);
        if (!dgp_out.empty()) {
            Sink sink(dgp_out, out_stream);
            sink.stream() << format_dgp_config(spec);
        }
        if (out.empty()) {
            for (Eigen::Index i = 0; i < ds.rows(); ++i) {
                for (Eigen::Index j = 0; j < ds.features(); ++j)
                    out_stream << format_double(ds.X(i, j)) << ',';
                out_stream << format_double(ds.y[i]) << '\n';
            }
        } else {
            write_csv(ds, out);
        }
        return kOk;
    }
};

struct Fit {
    DataOptions data;
    FitOptions fit_opts;
    bool no_standardize = false;
    double train_fraction = 1.0;
    std::uint64_t seed = 0;
    std::string out, test_out;

    void attach(CLI::App& app)
    {
        data.attach(app);
        fit_opts.attach(app);
        app.add_flag("--no-standardize", no_standardize, "Fit on raw features");
        app.add_option("--train-fraction", train_fraction, "Fraction of rows used for fitting")
            ->check(CLI::Range(0.0, 1.0));
        app.add_option("--seed", seed, "Split seed");
        app.add_option("--out,-o", out, "Model JSON")->required();
        app.add_option("--test-out", test_out, "Write held-out rows (raw) to this CSV");
    }

    int run(std::ostream& out_stream)
    {
        const FitConfig cfg = fit_opts.config();
        const Dataset raw = data.load();
        Dataset train_raw = raw;
        std::optional<Dataset> test_raw;
        if (train_fraction < 1.0) {
            const std::vector<double> fractions{train_fraction, 1.0 - train_fraction};
            auto parts = split(raw, fractions, seed);
            train_raw = std::move(parts[0]);
            test_raw = std::move(parts[1]);
        }

        ModelBundle bundle;
        Dataset train = train_raw;
        if (!no_standardize) {
            bundle.standardizer = fit_standardizer(train_raw);
            train = apply_standardizer(*bundle.standardizer, train_raw);
        }
        bundle.model = fit(train, cfg);
        if (!bundle.model.converged)
            throw NumericalError("fit did not converge in " + std::to_string(cfg.max_iter) + " iterations");
        bundle.covariance = estimate_covariance(train, bundle.model);
        save_model(bundle, out);

        out_stream << "estimator=" << to_string(cfg.estimator) << " n_iter=" << bundle.model.n_iter
                   << " in_sample_accuracy=" << format_double(accuracy(bundle.model, train));
        if (test_raw) {
            out_stream << " out_of_sample_accuracy="
                       << format_double(accuracy(bundle.model, standardized_for(bundle, *test_raw)));
            if (!test_out.empty())
                write_csv(*test_raw, test_out);
        }
        out_stream << '\n';
        return kOk;
    }
};

// attack and sweep-alpha share everything but the alpha list.
struct Attack {
    std::string model_path;
    DataOptions data;
    std::string rows = "all";
    std::string out, json_out;
    double alpha = 0.5;
    std::string alphas;
    bool sweep = false;

    void attach(CLI::App& app, bool is_sweep)
    {
        sweep = is_sweep;
        app.add_option("--model", model_path, "Model JSON written by fit")->required();
        data.attach(app);
        app.add_option("--rows", rows, "Comma-separated 0-based row ids, or 'all'");
        if (is_sweep)
            app.add_option("--alphas", alphas, "lo:hi:step or comma list")->required();
        else
            app.add_option("--alpha", alpha, "Target misclassification rate")->required();
        app.add_option("--out,-o", out, "Attack CSV (default: stdout)");
        app.add_option("--json-out", json_out, "Full attack results with root diagnostics");
    }

    int run(std::ostream& out_stream)
    {
        const ModelBundle bundle = load_model(model_path);
        const Dataset ds = standardized_for(bundle, data.load());
        const std::vector<double> grid = sweep ? parse_grid(alphas) : std::vector<double>{alpha};
        for (double a : grid)
            if (!(a > 0.0 && a < 1.0))
                throw InvalidArgument("alpha values must lie in (0, 1)");
        auto surrogate = std::make_shared<const Surrogate>(Surrogate{bundle.model, bundle.covariance});

        Sink sink(out, out_stream);
        sink.stream() << attack_csv_header() << '\n';
        nlohmann::json results = nlohmann::json::array();
        for (Eigen::Index row : parse_rows(rows, ds.rows())) {
            const Eigen::VectorXd x0 = ds.X.row(row).transpose();
            const int y0 = static_cast<int>(ds.y[row]);
            const AttackRequest tmpl{x0, y0, grid.front(), surrogate};
            std::vector<SweepEntry> entries;
            try {
                entries = sweep_alpha(tmpl, grid, orthogonal_perturbation(bundle.model, x0));
            } catch (const AttackError& err) {
                for (double a : grid)
                    entries.push_back({a, AttackOutcome{err.status(), std::nullopt, err.what()}});
            }
            for (const auto& e : entries) {
                sink.stream() << attack_csv_line({row, y0, e.alpha, e.outcome}) << '\n';
                if (!json_out.empty()) {
                    nlohmann::json item = {{"row_id", row}, {"y0", y0}, {"alpha", e.alpha},
                                           {"status", to_string(e.outcome.status)}};
                    if (e.outcome.result)
                        item["result"] = to_json(*e.outcome.result);
                    else
                        item["message"] = e.outcome.message;
                    results.push_back(std::move(item));
                }
            }
        }
        if (!json_out.empty()) {
            Sink js(json_out, out_stream);
            js.stream() << results.dump(2) << '\n';
        }
        return kOk;
    }
};

struct SweepL2 {
    DataOptions data;
    std::string lambdas = "log:1e-2:1e3:12";
    double alpha = 0.9;
    double train_fraction = 2.0 / 3.0;
    std::uint64_t seed = 0;
    bool penalize_intercept = false;
    bool no_standardize = false;
    std::string out;

    void attach(CLI::App& app)
    {
        data.attach(app);
        app.add_option("--lambdas", lambdas, "lo:hi:step, log:lo:hi:count, or comma list");
        app.add_option("--alpha", alpha, "Target misclassification rate");
        app.add_option("--train-fraction", train_fraction, "Fraction of rows used for fitting")
            ->check(CLI::Range(0.0, 1.0));
        app.add_option("--seed", seed, "Split seed");
        app.add_flag("--penalize-intercept", penalize_intercept, "Also penalize the intercept");
        app.add_flag("--no-standardize", no_standardize, "Fit on raw features");
        app.add_option("--out,-o", out, "Sweep CSV (default: stdout)");
    }

    int run(std::ostream& out_stream)
    {
        const Dataset raw = data.load();
        if (!(train_fraction < 1.0))
            throw InvalidArgument("--train-fraction must leave rows for testing");
        const std::vector<double> fractions{train_fraction, 1.0 - train_fraction};
        auto parts = split(raw, fractions, seed);
        Dataset train = std::move(parts[0]);
        Dataset test = std::move(parts[1]);
        if (!no_standardize) {
            const Standardizer s = fit_standardizer(train);
            train = apply_standardizer(s, train);
            test = apply_standardizer(s, test);
        }
        RegularizationConfig cfg;
        cfg.lambda_grid = parse_grid(lambdas);
        cfg.alpha = alpha;
        cfg.base_fit.penalize_intercept = penalize_intercept;
        const auto table = regularization_sweep(train, test, cfg);

        Sink sink(out, out_stream);
        sink.stream() << sweep_l2_csv_header() << '\n';
        for (const auto& row : table)
            sink.stream() << sweep_l2_csv_line(row) << '\n';
        return kOk;
    }
};

struct McCheck {
    std::string model_path;
    DataOptions data;
    long long row = 0;
    double alpha = 0.9;
    long long trials = 1000000;
    std::uint64_t seed = 0;
    std::string out;

    void attach(CLI::App& app)
    {
        app.add_option("--model", model_path, "Model JSON written by fit")->required();
        data.attach(app);
        app.add_option("--row", row, "0-based row id to attack");
        app.add_option("--alpha", alpha, "Target misclassification rate");
        app.add_option("--trials", trials, "Monte Carlo draws (>= 10000)");
        app.add_option("--seed", seed, "Random seed");
        app.add_option("--out,-o", out, "Report JSON (default: stdout)");
    }

    int run(std::ostream& out_stream)
    {
        const ModelBundle bundle = load_model(model_path);
        const Dataset ds = standardized_for(bundle, data.load());
        if (row < 0 || row >= ds.rows())
            throw InvalidArgument("--row out of range");
        auto surrogate = std::make_shared<const Surrogate>(Surrogate{bundle.model, bundle.covariance});
        const Eigen::VectorXd x0 = ds.X.row(row).transpose();
        const AttackRequest req{x0, static_cast<int>(ds.y[row]), alpha, surrogate};
        const AttackResult result = attack(req);
        const McReport report = mc_belief_check(req, result, trials, seed);

        Sink sink(out, out_stream);
        sink.stream() << nlohmann::json{{"row_id", row}, {"attack", to_json(result)}, {"report", to_json(report)}}.dump(2)
                      << '\n';
        return kOk;
    }
};

struct Transfer {
    int p = 5;
    std::string beta, config;
    long long attacker_n = 50000, defender_n = 50000;
    int defenders = 200, test_points = 50;
    std::string alphas = "0.5,0.75,0.9";
    FitOptions attacker_fit, defender_fit;
    std::uint64_t seed = 0;
    std::string out;
    CLI::Option* defender_estimator_opt = nullptr;

    void attach(CLI::App& app)
    {
        app.add_option("--p", p, "Number of features (ignored with --beta/--config)");
        app.add_option("--beta", beta, "Comma-separated beta_true, intercept first");
        app.add_option("--config", config, "DGP config file (key = value)");
        app.add_option("--attacker-n", attacker_n, "Attacker sample size");
        app.add_option("--defender-n", defender_n, "Defender sample size");
        app.add_option("--defenders", defenders, "Number of defender refits");
        app.add_option("--test-points", test_points, "Number of attacked points");
        app.add_option("--alphas", alphas, "lo:hi:step or comma list");
        attacker_fit.attach(app);
        defender_fit.attach(app, "defender-");
        app.add_option("--seed", seed, "Random seed");
        app.add_option("--out,-o", out, "Report JSON (default: stdout)");
    }

    int run(std::ostream& out_stream, const CLI::App& app)
    {
        TransferConfig cfg;
        cfg.dgp = resolve_dgp(config, beta, p, seed);
        cfg.attacker_n = attacker_n;
        cfg.defender_n = defender_n;
        cfg.n_defenders = defenders;
        cfg.n_test_points = test_points;
        cfg.alphas = parse_grid(alphas);
        cfg.attacker_fit = attacker_fit.config();
        if (app.count("--defender-estimator") > 0)
            cfg.defender_fit = defender_fit.config();
        cfg.seed = seed;
        const TransferReport report = transfer_experiment(cfg);

        Sink sink(out, out_stream);
        sink.stream() << to_json(report).dump(2) << '\n';
        return kOk;
    }
};

} // namespace

std::vector<double> parse_grid(const std::string& spec)
{
    std::vector<double> grid;
    if (spec.rfind("log:", 0) == 0) {
        const auto parts = split_on(spec.substr(4), ':');
        if (parts.size() != 3)
            throw InvalidArgument("log grid must be log:lo:hi:count");
        const double lo = parse_real(parts[0]);
        const double hi = parse_real(parts[1]);
        const double count = parse_real(parts[2]);
        if (!(lo > 0.0 && hi >= lo) || count < 1 || count != std::floor(count))
            throw InvalidArgument("log grid needs 0 < lo <= hi and a positive integer count");
        const int k = static_cast<int>(count);
        for (int i = 0; i < k; ++i) {
            const double t = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
            // Base 10 keeps decade points such as 1e-2 and 1e3 exact.
            grid.push_back(std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo))));
        }
        grid.front() = lo;
        grid.back() = hi;
        return grid;
    }
    if (spec.find(':') != std::string::npos) {
        const auto parts = split_on(spec, ':');
        if (parts.size() != 3)
            throw InvalidArgument("range must be lo:hi:step");
        const double lo = parse_real(parts[0]);
        const double hi = parse_real(parts[1]);
        const double step = parse_real(parts[2]);
        if (!(step > 0.0) || hi < lo)
            throw InvalidArgument("range needs lo <= hi and a positive step");
        const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
        for (long long i = 0; i <= count; ++i)
            grid.push_back(lo + static_cast<double>(i) * step);
        return grid;
    }
    for (const auto& part : split_on(spec, ','))
        grid.push_back(parse_real(part));
    if (grid.empty())
        throw InvalidArgument("empty grid");
    return grid;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"alphaadv: logistic regression fitting and alpha-calibrated adversarial intensities"};
    app.require_subcommand(1);

    GenData gen_data;
    Fit fit_cmd;
    Attack attack_cmd, sweep_cmd;
    SweepL2 sweep_l2;
    McCheck mc_check;
    Transfer transfer;

    gen_data.attach(*app.add_subcommand("gen-data", "Sample a synthetic logistic dataset"));
    fit_cmd.attach(*app.add_subcommand("fit", "Fit a logistic regression and its covariance"));
    attack_cmd.attach(*app.add_subcommand("attack", "Compute alpha-calibrated intensities for rows"), false);
    sweep_cmd.attach(*app.add_subcommand("sweep-alpha", "Intensities over a grid of alphas"), true);
    sweep_l2.attach(*app.add_subcommand("sweep-l2", "Intensity quantiles across ridge strengths"));
    mc_check.attach(*app.add_subcommand("mc-check", "Monte Carlo check of one attack under the belief"));
    auto* transfer_app = app.add_subcommand("transfer", "End-to-end defender-retraining experiment");
    transfer.attach(*transfer_app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (app.got_subcommand("gen-data"))
            return gen_data.run(out);
        if (app.got_subcommand("fit"))
            return fit_cmd.run(out);
        if (app.got_subcommand("attack"))
            return attack_cmd.run(out);
        if (app.got_subcommand("sweep-alpha"))
            return sweep_cmd.run(out);
        if (app.got_subcommand("sweep-l2"))
            return sweep_l2.run(out);
        if (app.got_subcommand("mc-check"))
            return mc_check.run(out);
        if (app.got_subcommand("transfer"))
            return transfer.run(out, *transfer_app);
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

} // namespace alphaadv::cli
