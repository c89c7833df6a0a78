#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "chitree/ensemble.hpp"
#include "chitree/rng.hpp"
#include "helpers.hpp"

using namespace chitree;
using namespace helpers;

namespace {

Dataset banded_data(int n, int n_predictors, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> y;
    std::vector<std::vector<double>> cols(n_predictors);
    for (int i = 0; i < n; ++i) {
        const double u = rng.normal(), eps = 0.15 * rng.normal();
        cols[0].push_back(u);
        cols[1].push_back(u + eps);
        for (int c = 2; c < n_predictors; ++c) cols[c].push_back(rng.uniform());
        y.push_back(eps < 0 ? "lo" : "hi");
    }
    DatasetBuilder b(n);
    b.set_class(y);
    for (int c = 0; c < n_predictors; ++c) b.add_numeric("x" + std::to_string(c + 1), cols[c]);
    return b.build();
}

Tree constant_stump(int cls) {
    Tree t;
    TreeNode node;
    node.model.kind = NodeModelKind::Constant;
    node.model.cls = cls;
    t.nodes.push_back(node);
    t.class_labels = {"a", "b", "c"};
    return t;
}

} // namespace

TEST_CASE("a one-member ensemble is its member") {
    const Dataset d = banded_data(120, 3, 17);
    const TrainContext ctx = make_ctx(d);
    GrowConfig cfg;
    const Ensemble ens = fit_bagged(ctx, cfg, 1);
    REQUIRE(ens.members.size() == 1);
    for (std::int32_t r = 0; r < static_cast<std::int32_t>(d.n_rows()); ++r)
        CHECK(predict_ensemble(ens, d, r) == ens.members[0].predict(d, r));
}

TEST_CASE("vote ties resolve to the smallest class code") {
    Ensemble ens;
    ens.members = {constant_stump(2), constant_stump(1)};
    DatasetBuilder b(1);
    b.set_class({"a"});
    b.add_numeric("x", {0.0});
    const Dataset q = b.build();
    CHECK(predict_ensemble(ens, q, 0) == 1); // 1 and 2 tie; 1 wins
    ens.members.push_back(constant_stump(2));
    CHECK(predict_ensemble(ens, q, 0) == 2); // majority now rules
}

TEST_CASE("forests restrict candidates and omit the two-variable phases") {
    const Dataset d = banded_data(220, 4, 3);
    const TrainContext ctx = make_ctx(d);
    GrowConfig cfg;
    const Ensemble ens = fit_forest(ctx, cfg, 12);
    CHECK(ens.kind == 'F');
    CHECK(ens.mtry == 2); // ceil(sqrt(4))
    REQUIRE(ens.members.size() == 12);
    for (const Tree& t : ens.members) {
        CHECK(t.chosen_alpha == 0.0); // members stay unpruned
        for (const TreeNode& n : t.nodes) {
            CHECK(n.sel.path != SelectionPath::Interaction);
            CHECK(n.sel.path != SelectionPath::Linear);
            if (n.split) CHECK(n.split->kind != SplitKind::Linear);
        }
    }
}

TEST_CASE("the forest subset size scales with the square root of the predictors") {
    for (const auto& [k, want] : {std::pair{9, 3}, {6, 3}, {2, 2}}) {
        const Dataset d = banded_data(80, k, 7);
        const TrainContext ctx = make_ctx(d);
        const Ensemble ens = fit_forest(ctx, GrowConfig{}, 2);
        CHECK(ens.mtry == want);
    }
}

TEST_CASE("ensembles serialize to stable bytes") {
    const Dataset d = banded_data(120, 3, 29);
    const TrainContext ctx = make_ctx(d);
    const Ensemble ens = fit_bagged(ctx, GrowConfig{}, 5);
    const std::string js = ensemble_to_json(ens);
    const Ensemble back = ensemble_from_json(js);
    CHECK(ensemble_to_json(back) == js);
    for (std::int32_t r = 0; r < 40; ++r)
        CHECK(predict_ensemble(back, d, r) == predict_ensemble(ens, d, r));

    const std::string path = temp_path("ensemble.json");
    save_ensemble(ens, path);
    const Ensemble loaded = load_ensemble(path);
    CHECK(ensemble_to_json(loaded) == js);
    std::remove(path.c_str());
}

TEST_CASE("bootstrap samples keep every class present") {
    // one singleton class: naive resampling would drop it from most samples
    Rng rng(4);
    std::vector<std::string> y;
    std::vector<double> x;
    for (int i = 0; i < 60; ++i) {
        y.push_back(i == 0 ? "rare" : (i % 2 ? "a" : "b"));
        x.push_back(rng.uniform());
    }
    const Dataset d = numeric_dataset(y, x);
    const TrainContext ctx = make_ctx(d);
    const Ensemble ens = fit_bagged(ctx, GrowConfig{}, 10);
    REQUIRE(ens.members.size() == 10);
    for (const Tree& t : ens.members) CHECK(t.nodes[0].stats.classes_present == 3);
}

TEST_CASE("ensemble training is deterministic across thread counts") {
    const Dataset d = banded_data(150, 3, 41);
    const TrainContext ctx = make_ctx(d);
    GrowConfig cfg;
    cfg.threads = 1;
    const Ensemble a = fit_bagged(ctx, cfg, 8);
    cfg.threads = 4;
    const Ensemble b = fit_bagged(ctx, cfg, 8);
    CHECK(ensemble_to_json(a) == ensemble_to_json(b));

    cfg.threads = 3;
    const Ensemble fa = fit_forest(ctx, cfg, 6);
    cfg.threads = 1;
    const Ensemble fb = fit_forest(ctx, cfg, 6);
    CHECK(ensemble_to_json(fa) == ensemble_to_json(fb));
}

TEST_CASE("plurality votes match a hand count over the members") {
    const Dataset d = banded_data(100, 3, 53);
    const TrainContext ctx = make_ctx(d);
    const Ensemble ens = fit_bagged(ctx, GrowConfig{}, 7);
    for (std::int32_t r = 0; r < 30; ++r) {
        std::vector<int> votes(2, 0);
        for (const Tree& t : ens.members) ++votes[t.predict(d, r)];
        const int expect = votes[1] > votes[0] ? 1 : 0;
        CHECK(predict_ensemble(ens, d, r) == expect);
    }
}
