#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "alphaadv/dataset.hpp"
#include "alphaadv/error.hpp"
#include "test_support.hpp"

using namespace alphaadv;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents)
{
    const auto path = std::filesystem::temp_directory_path() / ("alphaadv_test_" + name);
    std::ofstream(path) << contents;
    return path;
}

double sigmoid_of(double b)
{
    return 1.0 / (1.0 + std::exp(-b));
}

} // namespace

TEST_CASE("load_csv transcribes a two-row file")
{
    CsvOptions opts;
    opts.label_column = 1;
    const Dataset ds = parse_csv("0,1\n1,0\n", opts);
    REQUIRE(ds.rows() == 2);
    REQUIRE(ds.features() == 1);
    CHECK(ds.X(0, 0) == 0.0);
    CHECK(ds.X(1, 0) == 1.0);
    CHECK(ds.y[0] == 1.0);
    CHECK(ds.y[1] == 0.0);
    CHECK(ds.trials.isOnes());
}

TEST_CASE("load_csv defaults to the last column as label and honours header and delimiter")
{
    CsvOptions opts;
    opts.header = true;
    opts.delimiter = ';';
    const Dataset ds = parse_csv("a;b;label\n1.5;\"2\";1\n-3;4e-1;0\n", opts);
    REQUIRE(ds.rows() == 2);
    CHECK(ds.X(0, 1) == 2.0);
    CHECK(ds.X(1, 1) == 0.4);
    CHECK(ds.y[0] == 1.0);
}

TEST_CASE("load_csv reads from disk and preserves row order")
{
    const auto path = temp_file("order.csv", "3,1\n1,0\n2,1\n");
    const Dataset ds = load_csv(path);
    CHECK(ds.X.col(0) == Eigen::Vector3d(3, 1, 2));
    std::filesystem::remove(path);
}

TEST_CASE("load_csv errors carry row and column")
{
    SUBCASE("label outside {0,1}")
    {
        try {
            parse_csv("1,0\n2,2\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.row() == 2);
            CHECK(e.column() == 2);
        }
    }
    SUBCASE("unparseable feature")
    {
        try {
            parse_csv("1,0\nabc,1\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.row() == 2);
            CHECK(e.column() == 1);
        }
    }
    SUBCASE("non-finite feature")
    {
        CHECK_THROWS_AS(parse_csv("inf,0\n"), ParseError);
        CHECK_THROWS_AS(parse_csv("nan,1\n"), ParseError);
    }
    SUBCASE("ragged rows")
    {
        CHECK_THROWS_AS(parse_csv("1,2,0\n1,1\n"), ParseError);
    }
    SUBCASE("missing file")
    {
        CHECK_THROWS_AS(load_csv("/nonexistent/alphaadv.csv"), ParseError);
    }
}

TEST_CASE("write_csv then load_csv is lossless")
{
    const Dataset ds = testing::random_dataset(3, 40, 3);
    const auto path = std::filesystem::temp_directory_path() / "alphaadv_test_roundtrip.csv";
    write_csv(ds, path);
    const Dataset back = load_csv(path);
    CHECK(back.X == ds.X);
    CHECK(back.y == ds.y);
    std::filesystem::remove(path);
}

TEST_CASE("generate_dgp is deterministic per seed")
{
    DgpSpec spec;
    spec.beta_true = Eigen::Vector4d(0.3, 1.0, -0.5, 2.0);
    spec.n = 500;
    spec.seed = 42;
    const Dataset a = generate_dgp(spec);
    const Dataset b = generate_dgp(spec);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    spec.seed = 43;
    CHECK(generate_dgp(spec).X != a.X);
}

TEST_CASE("generate_dgp label frequencies")
{
    SUBCASE("symmetric DGP")
    {
        DgpSpec spec;
        spec.beta_true = Eigen::VectorXd::Zero(4);
        spec.n = 20000;
        spec.seed = 5;
        const double mean = generate_dgp(spec).y.mean();
        CHECK(std::fabs(mean - 0.5) <= 4.0 * std::sqrt(0.25 / spec.n));
    }
    SUBCASE("intercept 10")
    {
        DgpSpec spec;
        spec.beta_true = Eigen::VectorXd::Constant(1, 10.0);
        spec.n = 10000;
        spec.seed = 6;
        CHECK(generate_dgp(spec).y.mean() >= 0.99);
    }
    SUBCASE("converges to sigmoid(b) over 50 seeds")
    {
        for (double b : {-1.5, 0.4, 2.0}) {
            const double s = sigmoid_of(b);
            const Eigen::Index n = 4000;
            const double band = 4.0 * std::sqrt(s * (1.0 - s) / n);
            int within = 0;
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                DgpSpec spec;
                spec.beta_true = Eigen::VectorXd::Constant(1, b);
                spec.n = n;
                spec.seed = seed;
                within += std::fabs(generate_dgp(spec).y.mean() - s) <= band ? 1 : 0;
            }
            CHECK(within == 50);
        }
    }
}

TEST_CASE("DGP config round-trips through the key-value format")
{
    DgpSpec spec;
    spec.beta_true = Eigen::Vector3d(0.1, -2.5, 1.0 / 3.0);
    spec.n = 1234;
    spec.seed = 18446744073709551615ULL;
    const DgpSpec back = parse_dgp_config(format_dgp_config(spec));
    CHECK(back.beta_true == spec.beta_true);
    CHECK(back.n == spec.n);
    CHECK(back.seed == spec.seed);
    CHECK_THROWS_AS(parse_dgp_config("n = 3\n"), ParseError);
    CHECK_THROWS_AS(parse_dgp_config("beta_true = 1\nfoo = 2\n"), ParseError);
}

TEST_CASE("standardizer")
{
    SUBCASE("constant column is rejected by name")
    {
        Dataset ds = Dataset::bernoulli((Eigen::MatrixXd(3, 2) << 1, 0, 1, 1, 1, 2).finished(),
                                        Eigen::Vector3d(0, 1, 0));
        ds.feature_names = {"flat", "ok"};
        CHECK_THROWS_WITH_AS(fit_standardizer(ds), doctest::Contains("flat"), InvalidArgument);
    }
    SUBCASE("[0,2] maps to [-1,1]")
    {
        const Dataset ds = Dataset::bernoulli((Eigen::MatrixXd(2, 1) << 0, 2).finished(), Eigen::Vector2d(0, 1));
        const Standardizer s = fit_standardizer(ds);
        CHECK(s.means[0] == 1.0);
        CHECK(s.scales[0] == 1.0);
        const Dataset z = apply_standardizer(s, ds);
        CHECK(z.X(0, 0) == -1.0);
        CHECK(z.X(1, 0) == 1.0);
    }
    SUBCASE("zero mean, unit population sd, exact inverse on fresh data")
    {
        Dataset ds = testing::random_dataset(11, 300, 4);
        ds.X = (ds.X * 7.0).array() + 3.0;
        const Standardizer s = fit_standardizer(ds);
        const Dataset z = apply_standardizer(s, ds);
        for (Eigen::Index j = 0; j < z.features(); ++j) {
            CHECK(std::fabs(z.X.col(j).mean()) <= 1e-12);
            CHECK(std::sqrt(z.X.col(j).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-12));
        }
        Dataset fresh = testing::random_dataset(12, 50, 4);
        fresh.X = (fresh.X * 5.0).array() - 1.0;
        const Dataset back = invert_standardizer(s, apply_standardizer(s, fresh));
        CHECK((back.X - fresh.X).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::VectorXd x = fresh.X.row(0).transpose();
        CHECK((s.inverse(s.transform(x)) - x).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("idempotent on standardized data")
    {
        const Dataset ds = testing::random_dataset(13, 200, 3);
        const Dataset once = apply_standardizer(fit_standardizer(ds), ds);
        const Dataset twice = apply_standardizer(fit_standardizer(once), once);
        CHECK((once.X - twice.X).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("split")
{
    const Dataset ds = testing::random_dataset(21, 10, 2);
    SUBCASE("identity partition")
    {
        const std::vector<double> f{1.0};
        const auto parts = split(ds, f, 1);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].rows() == 10);
    }
    SUBCASE("exact halves")
    {
        const std::vector<double> f{0.5, 0.5};
        const auto parts = split(ds, f, 1);
        CHECK(parts[0].rows() == 5);
        CHECK(parts[1].rows() == 5);
    }
    SUBCASE("deterministic per seed")
    {
        const std::vector<double> f{0.3, 0.7};
        CHECK(split_indices(10, f, 9) == split_indices(10, f, 9));
    }
    SUBCASE("fractions must sum to one")
    {
        const std::vector<double> bad{0.5, 0.6};
        CHECK_THROWS_AS(split(ds, bad, 1), InvalidArgument);
        const std::vector<double> negative{1.5, -0.5};
        CHECK_THROWS_AS(split(ds, negative, 1), InvalidArgument);
    }
    SUBCASE("partition property over random sizes")
    {
        Rng rng = make_rng(77);
        for (int trial = 0; trial < 30; ++trial) {
            const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 200);
            std::vector<double> f{0.2, 0.3, 0.5};
            const auto parts = split_indices(n, f, rng());
            std::vector<Eigen::Index> all;
            for (const auto& p : parts)
                all.insert(all.end(), p.begin(), p.end());
            std::sort(all.begin(), all.end());
            REQUIRE(static_cast<Eigen::Index>(all.size()) == n);
            for (Eigen::Index i = 0; i < n; ++i)
                CHECK(all[static_cast<std::size_t>(i)] == i);
        }
    }
}

TEST_CASE("dataset invariants")
{
    CHECK_THROWS_AS(Dataset::bernoulli(Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(0, 0.5)), InvalidArgument);
    Dataset ds = Dataset::bernoulli(Eigen::MatrixXd::Zero(2, 1), Eigen::Vector2d(0, 1));
    ds.trials[1] = 0.0;
    CHECK_THROWS_AS(ds.validate(), InvalidArgument);
}
