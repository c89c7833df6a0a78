#include <doctest.h>

#include <cmath>
#include <numeric>

#include "chitree/eval.hpp"
#include "helpers.hpp"

using namespace chitree;
using namespace helpers;

TEST_CASE("chessboard draws sit on cells whose color matches the class") {
    const Dataset d = gen_chessboard(600, 12);
    REQUIRE(d.n_rows() == 600);
    REQUIRE(d.predictors().size() == 10);
    REQUIRE(d.n_classes() == 2);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const double x1 = d.column(1).values[r], x2 = d.column(2).values[r];
        REQUIRE(x1 >= -1.0);
        REQUIRE(x1 < 1.0);
        const int ci = static_cast<int>(std::floor(2.0 * (x1 + 1.0)));
        const int cj = static_cast<int>(std::floor(2.0 * (x2 + 1.0)));
        const int label = d.class_codes()[r]; // "1" = even cells
        CHECK((ci + cj) % 2 == label);
        for (int v = 3; v <= 10; ++v) {
            CHECK(d.column(v).values[r] >= 0.0);
            CHECK(d.column(v).values[r] < 1.0);
        }
    }
}

TEST_CASE("circle and line classes lie exactly on their curves") {
    const Dataset d = gen_circle_lines(300, 5);
    REQUIRE(d.n_rows() == 300);
    REQUIRE(d.predictors().size() == 8);
    REQUIRE(d.n_classes() == 3);
    std::vector<int> count(3, 0);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        const double x1 = d.column(1).values[r], x2 = d.column(2).values[r];
        const int label = d.class_codes()[r];
        ++count[label];
        if (label == 0) CHECK(x1 * x1 + x2 * x2 == doctest::Approx(1.0).epsilon(1e-12));
        if (label == 1) CHECK(x2 == doctest::Approx(x1).epsilon(1e-12));
        if (label == 2) CHECK(x2 == doctest::Approx(-x1).epsilon(1e-12));
    }
    CHECK(count == std::vector<int>{100, 100, 100});
    for (int v = 6; v <= 8; ++v) {
        CHECK(d.column(v).role == Role::Categorical);
        CHECK(d.column(v).levels.size() == 21);
    }
    CHECK_THROWS_AS(gen_circle_lines(100, 1), std::invalid_argument);
}

TEST_CASE("the null-association scenarios keep their marginal shapes") {
    const Dataset ind = gen_bias_scenario(BiasKind::Independence, 20000, 31);
    REQUIRE(ind.predictors().size() == 6);
    CHECK(ind.column(1).levels.size() == 2);
    CHECK(ind.column(2).levels.size() == 3);
    CHECK(ind.column(3).levels.size() == 6);
    double mean4 = 0.0;
    for (std::size_t r = 0; r < ind.n_rows(); ++r) mean4 += ind.column(4).values[r];
    mean4 /= static_cast<double>(ind.n_rows());
    CHECK(mean4 == doctest::Approx(1.0).epsilon(0.05)); // chi-squared(1) mean

    const Dataset dep = gen_bias_scenario(BiasKind::Dependence, 20000, 31);
    double m4 = 0, m5 = 0;
    const std::size_t n = dep.n_rows();
    for (std::size_t r = 0; r < n; ++r) {
        m4 += dep.column(4).values[r];
        m5 += dep.column(5).values[r];
    }
    m4 /= n;
    m5 /= n;
    double s44 = 0, s55 = 0, s45 = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double a = dep.column(4).values[r] - m4;
        const double b = dep.column(5).values[r] - m5;
        s44 += a * a;
        s55 += b * b;
        s45 += a * b;
    }
    CHECK(s45 / std::sqrt(s44 * s55) == doctest::Approx(0.7).epsilon(0.05));
}

TEST_CASE("selection frequencies are deterministic and sum to one") {
    const BiasReport a = run_bias_simulation(BiasKind::Independence, 150, 9, 1, 300);
    const BiasReport b = run_bias_simulation(BiasKind::Independence, 150, 9, 3, 300);
    CHECK(a.univariate == b.univariate);
    CHECK(a.linear == b.linear);
    REQUIRE(a.variables.size() == 6);
    CHECK(a.variables[0] == "X1");

    double total = 0.0;
    for (double p : a.probability) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // categorical variables can never enter a two-variable linear split
    CHECK(a.linear[0] == 0);
    CHECK(a.linear[1] == 0);
    CHECK(a.linear[2] == 0);
    for (std::size_t v = 0; v < 6; ++v)
        CHECK(a.se[v] ==
              doctest::Approx(std::sqrt(a.probability[v] * (1 - a.probability[v]) / 150.0)));
    CHECK_THROWS_AS(run_bias_simulation(BiasKind::Independence, 0, 1), std::invalid_argument);
}

TEST_CASE("fit_model dispatches on the method name") {
    const Dataset d = gen_chessboard(240, 21);
    const TrainContext ctx(d, Priors::estimate(d), CostMatrix::unit(d.n_classes()));

    FitSpec s;
    const FittedModel ms = fit_model(ctx, s);
    REQUIRE(ms.tree.has_value());
    CHECK_FALSE(ms.ensemble.has_value());
    CHECK(ms.tree->method == 'S');
    CHECK(ms.n_leaves() == ms.tree->n_leaves());

    FitSpec k;
    k.method = "K";
    const FittedModel mk = fit_model(ctx, k);
    REQUIRE(mk.tree.has_value());
    CHECK(mk.tree->method == 'K');

    FitSpec bg;
    bg.method = "BG";
    bg.trees = 3;
    const FittedModel mb = fit_model(ctx, bg);
    REQUIRE(mb.ensemble.has_value());
    CHECK(mb.ensemble->members.size() == 3);
    CHECK(mb.ensemble->kind == 'B');
    CHECK(mb.n_leaves() == 0);

    FitSpec gf;
    gf.method = "GF";
    gf.trees = 2;
    const FittedModel mg = fit_model(ctx, gf);
    REQUIRE(mg.ensemble.has_value());
    CHECK(mg.ensemble->kind == 'F');
    CHECK(mg.ensemble->mtry == 4); // ceil(sqrt(10))

    FitSpec bad;
    bad.method = "Q";
    CHECK_THROWS_AS(fit_model(ctx, bad), std::invalid_argument);

    // model predictions agree with the underlying tree or vote
    for (std::int32_t r = 0; r < 20; ++r) {
        CHECK(ms.predict(d, r) == ms.tree->predict(d, r));
        CHECK(mb.predict(d, r) == predict_ensemble(*mb.ensemble, d, r));
    }
}

TEST_CASE("cross-validation of a forced stump reproduces the prior mass") {
    // a constant predictor leaves every fold with the majority-class stump,
    // so each fold estimate is exactly pi(minority)
    std::vector<std::string> y;
    std::vector<double> x;
    for (int i = 0; i < 100; ++i) {
        y.push_back(i < 70 ? "a" : "b");
        x.push_back(1.0);
    }
    const Dataset d = numeric_dataset(y, x);
    const Priors priors = Priors::estimate(d);
    const CostMatrix costs = CostMatrix::unit(2);
    FitSpec spec;
    const double cv = crossval_error(d, priors, costs, spec, 10, 77);
    CHECK(cv == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_THROWS_AS(crossval_error(d, priors, costs, spec, 1, 77), std::invalid_argument);
}

TEST_CASE("fold counts clamp to the number of rows") {
    std::vector<std::string> y;
    std::vector<double> x;
    Rng rng(15);
    for (int i = 0; i < 30; ++i) {
        y.push_back(i % 2 ? "a" : "b");
        x.push_back(rng.uniform() + (i % 2 ? 0.0 : 2.0));
    }
    const Dataset d = numeric_dataset(y, x);
    const double cv = crossval_error(d, Priors::estimate(d), CostMatrix::unit(2), FitSpec{},
                                     50, 5);
    CHECK(std::isfinite(cv));
    CHECK(cv >= 0.0);
}

TEST_CASE("relative metrics scale each dataset by its best method") {
    RelativeInput in;
    in.methods = {"M1", "M2"};
    in.datasets = {"d1", "d2"};
    in.error = {{0.1, 0.2}, {0.3, 0.3}};
    in.leaves = {{4, 8}, {10, 5}};
    const RelativeReport rep = relative_metrics(in);
    REQUIRE(rep.mean_error_ratio.size() == 2);
    CHECK(rep.mean_error_ratio[0] == doctest::Approx(1.0));
    CHECK(rep.mean_error_ratio[1] == doctest::Approx(1.5));
    CHECK(rep.mean_leaf_ratio[0] == doctest::Approx(1.5));
    CHECK(rep.mean_leaf_ratio[1] == doctest::Approx(1.5));
    CHECK(rep.flagged_rows.empty());
}

TEST_CASE("zero-minimum rows scale by the smallest positive error") {
    RelativeInput in;
    in.methods = {"M1", "M2", "M3"};
    in.datasets = {"d1", "d2"};
    in.error = {{0.0, 0.2, 0.4}, {0.1, 0.1, 0.2}};
    const RelativeReport rep = relative_metrics(in);
    REQUIRE(rep.flagged_rows == std::vector<int>{0});
    // row 0: tied-at-zero method gets 1; others divide by 0.2
    CHECK(rep.mean_error_ratio[0] == doctest::Approx((1.0 + 1.0) / 2));
    CHECK(rep.mean_error_ratio[1] == doctest::Approx((1.0 + 1.0) / 2));
    CHECK(rep.mean_error_ratio[2] == doctest::Approx((2.0 + 2.0) / 2));

    RelativeInput bad = in;
    bad.error = {{0.1, 0.2}};
    CHECK_THROWS_AS(relative_metrics(bad), std::invalid_argument);
    RelativeInput lone;
    lone.methods = {"M1"};
    lone.datasets = {"d1"};
    lone.error = {{0.5}};
    CHECK_THROWS_AS(relative_metrics(lone), std::invalid_argument);
}
