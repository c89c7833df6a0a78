#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "chitree/rng.hpp"
#include "chitree/stats.hpp"
#include "helpers.hpp"

using namespace chitree;
using namespace helpers;

TEST_CASE("pearson chi-squared on hand-computed tables") {
    ContingencyTable t = ContingencyTable::zeros(2, 2);
    t.at(0, 0) = 10;
    t.at(0, 1) = 20;
    t.at(1, 0) = 20;
    t.at(1, 1) = 10;
    Chi2Result r = pearson_chi2(t);
    CHECK(r.df == 1);
    CHECK(r.chi2 == doctest::Approx(20.0 / 3.0).epsilon(1e-12));

    // A 2x3 table with expected counts 15/20/25 per row.
    ContingencyTable t2 = ContingencyTable::zeros(2, 3);
    t2.at(0, 0) = 10;
    t2.at(0, 1) = 20;
    t2.at(0, 2) = 30;
    t2.at(1, 0) = 20;
    t2.at(1, 1) = 20;
    t2.at(1, 2) = 20;
    r = pearson_chi2(t2);
    CHECK(r.df == 2);
    CHECK(r.chi2 == doctest::Approx(16.0 / 3.0).epsilon(1e-12));

    // Perfect independence.
    ContingencyTable ind = ContingencyTable::zeros(2, 2);
    ind.at(0, 0) = ind.at(0, 1) = ind.at(1, 0) = ind.at(1, 1) = 10;
    r = pearson_chi2(ind);
    CHECK(r.chi2 == doctest::Approx(0.0));
    CHECK(r.df == 1);
}

TEST_CASE("pearson chi-squared deletes empty rows and columns first") {
    ContingencyTable t = ContingencyTable::zeros(3, 3);
    t.at(0, 0) = 10;
    t.at(0, 1) = 20;
    t.at(1, 0) = 20;
    t.at(1, 1) = 10;
    const Chi2Result r = pearson_chi2(t);
    CHECK(r.df == 1);
    CHECK(r.chi2 == doctest::Approx(20.0 / 3.0).epsilon(1e-12));

    // One surviving column carries no information.
    ContingencyTable col = ContingencyTable::zeros(2, 3);
    col.at(0, 1) = 5;
    col.at(1, 1) = 7;
    const Chi2Result rc = pearson_chi2(col);
    CHECK(rc.df == 0);
    CHECK(rc.chi2 == 0.0);
}

TEST_CASE("degree-of-freedom reduction matches an independent high-precision oracle") {
    // Frozen values: W = max(0, (7/9 + sqrt(v)((x/v)^(1/3) - 1 + 2/(9v)))^3)
    // evaluated with 50-digit arithmetic.
    const struct {
        double chi2;
        int df;
        double w;
    } cases[] = {
        {10.0, 4, 4.1214464765623715213},
        {5.0, 2, 2.9864951259514299189},
        {20.0, 10, 4.6574056394829412794},
        {1.0, 5, 0.0},
        {3.5, 3, 0.9922291770081149841},
        {100.0, 50, 18.549103028902497983},
        {0.1, 2, 7.2510599909435184016e-05},
        {2.706, 2, 1.2767882979143198492},
        {15.0, 7, 4.3069249274807237795},
    };
    for (const auto& c : cases) {
        if (c.w == 0.0) CHECK(wilson_hilferty(c.chi2, c.df) == 0.0);
        else CHECK(wilson_hilferty(c.chi2, c.df) == doctest::Approx(c.w).epsilon(1e-12));
    }
    // One degree of freedom (or fewer) passes through untouched.
    CHECK(wilson_hilferty(3.21, 1) == 3.21);
    CHECK(wilson_hilferty(7.5, 0) == 7.5);
}

TEST_CASE("chi-squared(1) upper quantiles match frozen high-precision values") {
    const struct {
        double alpha;
        double q;
    } cases[] = {
        {0.5, 0.45493642311957275194},
        {0.2, 1.6423744151498163868},
        {0.1, 2.7055434540954145671},
        {0.05, 3.8414588206941259584},
        {0.025, 5.0238861873148889562},
        {0.02, 5.4118944310543410924},
        {0.01, 6.6348966010212151384},
        {0.005, 7.8794385766224173574},
        {0.0025, 9.1405934612439804336},
        {0.001, 10.827566170662732293},
        {0.0005, 12.115665146397175901},
        {0.0001, 15.136705226623397069},
        {0.00001, 19.511420964657572529},
    };
    for (const auto& c : cases) {
        const double q = chi2_1_upper_quantile(c.alpha);
        CHECK(q == doctest::Approx(c.q).epsilon(1e-10));
        // Self-consistency through the survival function.
        CHECK(1.0 - regularized_gamma_p(0.5, q / 2.0) == doctest::Approx(c.alpha).epsilon(1e-9));
    }
    CHECK(std::isinf(chi2_1_upper_quantile(0.0)));
    CHECK(std::isinf(chi2_1_upper_quantile(-1.0)));
}

TEST_CASE("regularized gamma is a CDF in x") {
    CHECK(regularized_gamma_p(0.5, 0.0) == doctest::Approx(0.0));
    CHECK(regularized_gamma_p(0.5, 100.0) == doctest::Approx(1.0).epsilon(1e-12));
    double prev = 0.0;
    for (double x = 0.1; x < 10.0; x += 0.1) {
        const double p = regularized_gamma_p(0.5, x);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("main-effect discretization boundaries use mean and scaled deviation") {
    const std::vector<double> v = {1, 2, 3, 4, 5}; // mean 3, sd sqrt(2.5)
    // Large node relative to class count: four bins from three boundaries.
    auto b4 = discretize_main(v, 100, 2);
    REQUIRE(b4.size() == 3);
    CHECK(b4[0] == doctest::Approx(1.6306936062370847).epsilon(1e-14));
    CHECK(b4[1] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(b4[2] == doctest::Approx(4.3693063937629153).epsilon(1e-14));
    // Small node: three bins from two boundaries.
    auto b3 = discretize_main(v, 30, 2);
    REQUIRE(b3.size() == 2);
    CHECK(b3[0] == doctest::Approx(2.0871290708247231).epsilon(1e-14));
    CHECK(b3[1] == doctest::Approx(3.9128709291752769).epsilon(1e-14));
    // Boundary membership: a value equal to a boundary stays in the lower bin.
    CHECK(bin_of(1.0, b4) == 0);
    CHECK(bin_of(3.0, b4) == 1);
    CHECK(bin_of(3.0000001, b4) == 2);
    CHECK(bin_of(99.0, b4) == 3);
}

TEST_CASE("constant_in_node counts a missing cell as a state") {
    DatasetBuilder b(4);
    b.set_class({"a", "a", "b", "b"});
    b.add_numeric("same", {2, 2, 2, 2});
    b.add_numeric("gap", {2, 2, std::nan(""), 2});
    b.add_categorical("one", {1, 1, 1, 1}, {"u", "v"});
    b.add_categorical("two", {1, kMissingLevel, 1, 1}, {"u", "v"});
    const Dataset d = b.build();
    const auto rows = all_rows(d);
    CHECK(constant_in_node(d, 1, rows));
    CHECK_FALSE(constant_in_node(d, 2, rows));
    CHECK(constant_in_node(d, 3, rows));
    CHECK_FALSE(constant_in_node(d, 4, rows));
    const std::vector<std::int32_t> sub = {0, 1};
    CHECK(constant_in_node(d, 2, sub));
}

TEST_CASE("main-effect statistic reduces the class-by-level table") {
    // Perfect association on a two-level factor: chi2 = 6 on 1 df.
    const Dataset d = categorical_dataset({"a", "a", "b", "b", "a", "b"}, {0, 0, 1, 1, 0, 1}, 2);
    const TrainContext ctx = make_ctx(d);
    CHECK(main_effect_stat(ctx, all_rows(d), 1) == doctest::Approx(6.0).epsilon(1e-12));

    // Missing cells land in a third column: the table is {{1,0,1},{0,1,1}},
    // chi2 = 2 on 2 df, then reduced to one degree of freedom.
    DatasetBuilder b(4);
    b.set_class({"a", "a", "b", "b"});
    b.add_categorical("g", {0, kMissingLevel, 1, kMissingLevel}, {"u", "v"});
    const Dataset dm = b.build();
    const TrainContext mctx = make_ctx(dm);
    CHECK(main_effect_stat(mctx, all_rows(dm), 1) ==
          doctest::Approx(wilson_hilferty(2.0, 2)).epsilon(1e-12));
}

TEST_CASE("main-effect statistic is roughly chi-squared(1) under the null") {
    Rng rng(20240817);
    std::vector<double> stats;
    for (int rep = 0; rep < 400; ++rep) {
        Rng r = rng.derive(rep);
        const std::size_t n = 100;
        std::vector<double> x(n);
        std::vector<std::string> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = r.uniform();
            y[i] = r.below(2) ? "a" : "b";
        }
        DatasetBuilder b(n);
        b.set_class(y);
        b.add_numeric("x", x);
        const Dataset d = b.build();
        const TrainContext ctx = make_ctx(d);
        stats.push_back(main_effect_stat(ctx, all_rows(d), 1));
    }
    std::sort(stats.begin(), stats.end());
    const double median = 0.5 * (stats[199] + stats[200]);
    double mean = 0.0;
    for (double s : stats) mean += s;
    mean /= static_cast<double>(stats.size());
    CHECK(median > 0.355); // chi2(1) median is 0.4549
    CHECK(median < 0.555);
    CHECK(mean > 0.8);
    CHECK(mean < 1.3);
}

TEST_CASE("interaction statistic crosses the pair cells against the class") {
    // XOR over two binary factors: each margin is null, the pair is perfect.
    DatasetBuilder b(40);
    std::vector<std::string> y;
    std::vector<std::int32_t> g1, g2;
    for (int i = 0; i < 40; ++i) {
        const int a = i % 2, c = (i / 2) % 2;
        g1.push_back(a);
        g2.push_back(c);
        y.push_back((a ^ c) ? "p" : "q");
    }
    b.set_class(y);
    b.add_categorical("g1", g1, {"u", "v"});
    b.add_categorical("g2", g2, {"u", "v"});
    const Dataset d = b.build();
    const TrainContext ctx = make_ctx(d);
    const auto rows = all_rows(d);
    CHECK(main_effect_stat(ctx, rows, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(main_effect_stat(ctx, rows, 2) == doctest::Approx(0.0).epsilon(1e-9));
    // Four cells, perfect determination: chi2 = n = 40 on 3 df.
    CHECK(interaction_stat(ctx, rows, 1, 2) ==
          doctest::Approx(wilson_hilferty(40.0, 3)).epsilon(1e-12));
}

TEST_CASE("interaction statistic drops rows missing either variable") {
    DatasetBuilder b(6);
    b.set_class({"a", "a", "b", "b", "a", "b"});
    b.add_categorical("g1", {0, 0, 1, 1, kMissingLevel, 1}, {"u", "v"});
    b.add_categorical("g2", {0, 1, 0, 1, 0, kMissingLevel}, {"u", "v"});
    const Dataset d = b.build();
    const TrainContext ctx = make_ctx(d);
    // Rows 4 and 5 are excluded; the surviving table is class x four cells
    // with one observation each: {{1,1,0,0},{0,0,1,1}}, chi2 = 4 on 3 df.
    CHECK(interaction_stat(ctx, all_rows(d), 1, 2) ==
          doctest::Approx(wilson_hilferty(4.0, 3)).epsilon(1e-12));
}

TEST_CASE("discriminant statistic separates a diagonal boundary") {
    // x2 tracks x1; the class is the sign of the gap, so neither margin helps
    // but the (1,-1) direction separates the classes perfectly.
    Rng rng(7);
    const std::size_t n = 200;
    std::vector<double> x1(n), x2(n);
    std::vector<std::string> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = rng.normal();
        const double eps = 0.1 * rng.normal();
        x2[i] = x1[i] + eps;
        y[i] = eps < 0 ? "lo" : "hi";
    }
    DatasetBuilder b(n);
    b.set_class(y);
    b.add_numeric("x1", x1);
    b.add_numeric("x2", x2);
    const Dataset d = b.build();
    const TrainContext ctx = make_ctx(d);
    const auto rows = all_rows(d);
    const NodeClassStats st = node_stats(ctx, rows);
    const LinearStat ls = linear_stat(ctx, rows, st, 1, 2);
    REQUIRE(ls.direction.valid);
    CHECK(ls.direction.a1 * ls.direction.a1 + ls.direction.a2 * ls.direction.a2 ==
          doctest::Approx(1.0).epsilon(1e-9));
    // The direction is essentially (1,-1)/sqrt(2) up to sign.
    CHECK(std::abs(ls.direction.a1 + ls.direction.a2) < 0.2);
    CHECK(ls.w > chi2_1_upper_quantile(0.001));
    CHECK(ls.w > main_effect_stat(ctx, rows, 1));
    CHECK(ls.w > main_effect_stat(ctx, rows, 2));
}

TEST_CASE("leading discriminant direction recovers the separating axis") {
    Eigen::MatrixXd x(6, 2);
    x << -1.0, 0.1, -1.1, -0.2, -0.9, 0.0, 1.0, 0.1, 1.1, -0.1, 0.9, 0.2;
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    const Eigen::VectorXd dir = lda_leading_direction(x, labels);
    REQUIRE(dir.norm() > 0.0);
    CHECK(std::abs(dir.normalized()[0]) > 0.99);

    // Identical clouds for both classes leave nothing to separate.
    Eigen::MatrixXd same(4, 2);
    same << 1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0;
    const std::vector<int> l2 = {0, 0, 1, 1};
    CHECK(lda_leading_direction(same, l2).norm() == doctest::Approx(0.0));

    // Singular within-class scatter falls back to the spectral pseudo-inverse.
    Eigen::MatrixXd sing(4, 2);
    sing << 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0;
    const Eigen::VectorXd ds = lda_leading_direction(sing, l2);
    REQUIRE(ds.norm() > 0.0);
    const Eigen::VectorXd unit = ds.normalized();
    CHECK(std::abs(unit[0] + unit[1]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("mean and standard deviation") {
    const std::vector<double> v = {1, 2, 3, 4, 5};
    const auto [m, s] = mean_sd(v);
    CHECK(m == doctest::Approx(3.0));
    CHECK(s == doctest::Approx(std::sqrt(2.5)).epsilon(1e-14));
    const std::vector<double> one = {42.0};
    CHECK(mean_sd(one).second == 0.0);
}
