#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "clwe/stats.hpp"
#include "support.hpp"

using namespace clwe;
using testsupport::TempDir;

using testsupport::oracle_ols_standardized;
using testsupport::oracle_pearson;
using testsupport::oracle_spearman;

namespace {

FeatureTable make_table(const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& cols,
                        const std::vector<double>& target) {
    FeatureTable t;
    t.names = names;
    t.columns = cols;
    t.target_name = "score";
    t.target = target;
    return t;
}

}  // namespace

TEST_CASE("spearman of monotone sequences") {
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) == 1.0);
    CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{30, 20, 10}) == -1.0);
}

TEST_CASE("spearman worked four-point value") {
    CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3}) ==
          doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("pearson of affine and anti-affine data") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson closed-form check") {
    CHECK(pearson(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 4}) ==
          doctest::Approx(0.9607689228305228).epsilon(1e-12));
}

TEST_CASE("correlation error taxonomy") {
    std::vector<double> x{1, 2, 3};
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), InputError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InputError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{5, 5, 5}), DegenerateError);
    CHECK_THROWS_AS(spearman(x, std::vector<double>{5, 5, 5}), DegenerateError);
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    std::vector<double> x, y;
    for (int i = 0; i < 25; ++i) {
        x.push_back(u(rng));
        y.push_back(u(rng));
    }
    double base = spearman(x, y);
    std::vector<double> ex, cx;
    for (double v : x) {
        ex.push_back(std::exp(v));
        cx.push_back(v * v * v + 2);
    }
    CHECK(spearman(ex, y) == base);
    CHECK(spearman(cx, y) == base);
}

TEST_CASE("pearson is invariant under positive affine transforms") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(u(rng));
        y.push_back(u(rng));
    }
    double base = pearson(x, y);
    std::vector<double> ax;
    for (double v : x) ax.push_back(2.5 * v + 7.0);
    CHECK(pearson(ax, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ties share average ranks") {
    auto r = average_ranks(std::vector<double>{1, 2, 2, 3});
    CHECK(r == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("correlations match the independent oracle on 100 random inputs") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int iter = 0; iter < 100; ++iter) {
        std::size_t n = 5 + rng() % 56;
        std::vector<double> x, y;
        for (std::size_t i = 0; i < n; ++i) {
            x.push_back(u(rng));
            y.push_back(u(rng));
        }
        if (iter % 3 == 0) {
            // force ties
            x[1] = x[0];
            y[2] = y[0];
        }
        CHECK(std::abs(pearson(x, y) - oracle_pearson(x, y)) < 1e-10);
        CHECK(std::abs(spearman(x, y) - oracle_spearman(x, y)) < 1e-10);
    }
}

TEST_CASE("regression with one feature equal to the target is perfect") {
    std::vector<double> target{1, 2, 3, 4, 5};
    auto table = make_table({"m"}, {target}, target);
    auto res = ablation_regression(table);
    CHECK(res.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("regression on independent noise explains almost nothing") {
    std::mt19937 rng(4);
    std::normal_distribution<double> g(0, 1);
    std::vector<std::vector<double>> cols(3);
    std::vector<double> target;
    for (int i = 0; i < 200; ++i) {
        for (auto& c : cols) c.push_back(g(rng));
        target.push_back(g(rng));
    }
    auto res = ablation_regression(make_table({"a", "b", "c"}, cols, target));
    CHECK(res.r_squared < 0.2);
    CHECK(res.r_squared >= 0.0);
}

TEST_CASE("ablating a perfectly collinear duplicate leaves R^2 unchanged") {
    std::mt19937 rng(5);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> f1, f2, target;
    for (int i = 0; i < 40; ++i) {
        f1.push_back(g(rng));
        f2.push_back(g(rng));
        target.push_back(2 * f1.back() - f2.back() + 0.3 * g(rng));
    }
    auto dup = f1;
    auto with_dup = ablation_regression(make_table({"a", "a_copy", "b"}, {f1, dup, f2}, target));
    auto without = ablation_regression(make_table({"a", "a_copy", "b"}, {f1, dup, f2}, target),
                                       std::optional<std::string>("a_copy"));
    CHECK(std::abs(with_dup.r_squared - without.r_squared) < 1e-9);
}

TEST_CASE("nested-model monotonicity of R^2") {
    std::mt19937 rng(6);
    std::normal_distribution<double> g(0, 1);
    for (int iter = 0; iter < 10; ++iter) {
        std::vector<std::vector<double>> cols(4);
        std::vector<double> target;
        for (int i = 0; i < 30; ++i) {
            for (auto& c : cols) c.push_back(g(rng));
            target.push_back(cols[0].back() + 0.5 * cols[1].back() + g(rng));
        }
        auto table = make_table({"a", "b", "c", "d"}, cols, target);
        double full = ablation_regression(table).r_squared;
        for (const auto& name : table.names) {
            double ablated =
                ablation_regression(table, std::optional<std::string>(name)).r_squared;
            CHECK(full >= ablated - 1e-12);
        }
    }
}

TEST_CASE("regression matches the long-double normal-equation oracle") {
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0, 1);
    for (int iter = 0; iter < 30; ++iter) {
        std::size_t p = 1 + rng() % 4;
        std::size_t n = 3 * p + 5 + rng() % 30;
        std::vector<std::vector<double>> cols(p);
        std::vector<double> target;
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& c : cols) c.push_back(g(rng));
            target.push_back(g(rng));
        }
        std::vector<std::string> names;
        for (std::size_t f = 0; f < p; ++f) names.push_back("f" + std::to_string(f));
        auto res = ablation_regression(make_table(names, cols, target));
        auto oracle = oracle_ols_standardized(cols, target);
        CHECK(std::abs(res.r_squared - oracle.r_squared) < 1e-10);
        CHECK(std::abs(res.intercept - oracle.beta[0]) < 1e-10);
        for (std::size_t f = 0; f < p; ++f)
            CHECK(std::abs(res.coefficients[f] - oracle.beta[f + 1]) < 1e-10);
    }
}

TEST_CASE("regression preconditions and degeneracies") {
    auto table = make_table({"a", "b", "c"}, {{1, 2, 3}, {4, 5, 6}, {2, 8, 5}}, {1, 2, 3});
    CHECK_THROWS_AS(ablation_regression(table), InputError);  // rows < features + 1

    auto flat = make_table({"a"}, {{2, 2, 2, 2}}, {1, 2, 3, 4});
    CHECK_THROWS_AS(ablation_regression(flat), DegenerateError);  // zero variance

    auto const_target = make_table({"a"}, {{1, 2, 3, 4}}, {5, 5, 5, 5});
    CHECK_THROWS_AS(ablation_regression(const_target), DegenerateError);

    auto ok = make_table({"a"}, {{1, 2, 3, 4}}, {1, 2, 2, 4});
    CHECK_THROWS_AS(ablation_regression(ok, std::optional<std::string>("zz")), InputError);
    CHECK_THROWS_AS(ablation_regression(ok, std::optional<std::string>("a")), InputError);
}

TEST_CASE("load_feature_table parses TSV with a named target") {
    TempDir dir("table");
    auto path = dir.file("t.tsv");
    testsupport::write_file(path,
                            "modularity\tcsls\taccuracy\n"
                            "0.5\t0.2\t0.7\n"
                            "0.4\t0.3\t0.8\n"
                            "0.3\t0.4\t0.9\n");
    auto table = load_feature_table(path, "accuracy");
    CHECK(table.names == std::vector<std::string>{"modularity", "csls"});
    CHECK(table.rows() == 3);
    CHECK(table.target == std::vector<double>{0.7, 0.8, 0.9});
    CHECK(table.columns[1] == std::vector<double>{0.2, 0.3, 0.4});

    CHECK_THROWS_AS(load_feature_table(path, "missing"), InputError);
    testsupport::write_file(path, "a\tb\n1\t2\n1\n");
    CHECK_THROWS_AS(load_feature_table(path, "b"), InputError);
}

TEST_CASE("sweep emits one row per grid cell") {
    auto family = testsupport::separation_family(4);
    std::vector<double> scores{4, 3, 2, 1};
    SweepOptions opts;
    opts.backend = KnnBackend::exact;
    auto grid = sweep(family, {3}, {450}, scores, opts);
    REQUIRE(grid.size() == 1);
    CHECK(grid[0].k == 3);
    CHECK(grid[0].t == 450);
    CHECK(grid[0].ok);

    auto grid4 = sweep(family, {1, 3}, {50, 450}, scores, opts);
    CHECK(grid4.size() == 4);
}

TEST_CASE("sweep on the separation family is perfectly anti-correlated") {
    auto family = testsupport::separation_family(8);
    std::vector<double> scores{8, 7, 6, 5, 4, 3, 2, 1};
    SweepOptions opts;
    opts.backend = KnnBackend::exact;
    auto grid = sweep(family, {1, 3, 5}, {100}, scores, opts);
    for (const auto& cell : grid) {
        REQUIRE(cell.ok);
        CHECK(cell.spearman_rho == -1.0);
        CHECK(cell.pearson_r < -0.8);
    }
}

TEST_CASE("constant modularity across embeddings leaves a missing cell") {
    // three identical spaces: modularity identical, correlation undefined
    auto family = testsupport::separation_family(1);
    std::vector<EmbeddingSpace> same{family[0], family[0], family[0]};
    std::vector<double> scores{1, 2, 3};
    SweepOptions opts;
    opts.backend = KnnBackend::exact;
    auto grid = sweep(same, {3}, {100}, scores, opts);
    REQUIRE(grid.size() == 1);
    CHECK(!grid[0].ok);
    CHECK(!grid[0].note.empty());
}

TEST_CASE("sweep propagates component errors with cell context") {
    auto family = testsupport::separation_family(3, 4);  // only 8 nodes per space
    std::vector<double> scores{1, 2, 3};
    SweepOptions opts;
    opts.backend = KnnBackend::exact;
    CHECK_THROWS_WITH_AS(sweep(family, {20}, {100}, scores, opts), doctest::Contains("k=20"),
                         InputError);
}

TEST_CASE("sweep TSV format including missing cells") {
    std::vector<SweepCell> cells;
    cells.push_back({3, 100, true, -0.5, -1.0, ""});
    cells.push_back({5, 100, false, 0, 0, "constant"});
    std::ostringstream out;
    write_sweep_tsv(cells, out);
    CHECK(out.str() ==
          "k\tt\tpearson\tspearman\n"
          "3\t100\t-0.500000\t-1.000000\n"
          "5\t100\tnan\tnan\n");
}

TEST_CASE("regression TSV format") {
    RegressionResult res;
    res.names = {"modularity"};
    res.coefficients = {-0.25};
    res.intercept = 0.5;
    res.r_squared = 0.8;
    std::ostringstream out;
    write_regression_tsv(res, out);
    CHECK(out.str() ==
          "term\tvalue\n"
          "intercept\t0.500000\n"
          "modularity\t-0.250000\n"
          "r_squared\t0.800000\n");
}
