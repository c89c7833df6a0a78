#include "chitree/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "chitree/parallel.hpp"
#include "chitree/rng.hpp"

namespace chitree {

BiasReport run_bias_simulation(BiasKind kind, int trials, std::uint64_t seed, int threads,
                               std::size_t n_per_trial) {
    if (trials < 1) throw std::invalid_argument("bias simulation needs at least one trial");
    BiasReport report;
    report.kind = kind;
    report.trials = trials;
    report.variables = {"X1", "X2", "X3", "X4", "X5", "X6"};
    const int nv = static_cast<int>(report.variables.size());

    std::vector<std::vector<std::int64_t>> univ(trials, std::vector<std::int64_t>(nv, 0));
    auto lin = univ;
    parallel_for(trials, threads, [&](int t) {
        Rng trial_rng = Rng(seed).derive(static_cast<std::uint64_t>(t) + 1);
        const Dataset data = gen_bias_scenario(kind, n_per_trial, trial_rng.next_u64());
        const TrainContext ctx(data, Priors::estimate(data), CostMatrix::unit(data.n_classes()));
        std::vector<std::int32_t> rows(data.n_rows());
        for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = static_cast<std::int32_t>(r);
        const SplitOutcome out = choose_split(ctx, rows, SplitConfig{});
        if (!out.split) return; // no admissible root split; the trial records nothing
        if (out.split->kind == SplitKind::Linear) {
            ++lin[t][out.split->col - 1];  // predictors occupy columns 1..6
            ++lin[t][out.split->col2 - 1];
        } else {
            ++univ[t][out.split->col - 1];
        }
    });

    report.univariate.assign(nv, 0);
    report.linear.assign(nv, 0);
    for (int t = 0; t < trials; ++t) {
        for (int v = 0; v < nv; ++v) {
            report.univariate[v] += univ[t][v];
            report.linear[v] += lin[t][v];
        }
    }
    report.probability.resize(nv);
    report.se.resize(nv);
    for (int v = 0; v < nv; ++v) {
        const double p = (static_cast<double>(report.univariate[v]) +
                          0.5 * static_cast<double>(report.linear[v])) /
                         static_cast<double>(trials);
        report.probability[v] = p;
        report.se[v] = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    }
    return report;
}

int FittedModel::predict(const Dataset& data, std::int32_t row) const {
    if (tree) return tree->predict(data, row);
    return predict_ensemble(*ensemble, data, row);
}

int FittedModel::n_leaves() const {
    return tree ? tree->n_leaves() : 0;
}

FittedModel fit_model(const TrainContext& ctx, const FitSpec& spec) {
    FittedModel out;
    if (spec.method == "S" || spec.method == "K" || spec.method == "N") {
        GrowConfig cfg = spec.grow;
        cfg.method = spec.method[0];
        out.tree = train_tree(ctx, cfg);
        return out;
    }
    if (spec.method == "BG") {
        out.ensemble = fit_bagged(ctx, spec.grow,
                                  spec.trees > 0 ? spec.trees : kDefaultBaggedTrees);
        return out;
    }
    if (spec.method == "GF") {
        out.ensemble = fit_forest(ctx, spec.grow,
                                  spec.trees > 0 ? spec.trees : kDefaultForestTrees);
        return out;
    }
    throw std::invalid_argument("unknown method '" + spec.method + "'");
}

double crossval_error(const Dataset& data, const Priors& priors, const CostMatrix& costs,
                      const FitSpec& spec, int folds, std::uint64_t seed, int threads) {
    if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
    const int used = std::min<int>(folds, static_cast<int>(data.n_rows()));
    const std::vector<int> fold_of = stratified_folds(data, used, Rng(seed).derive(0xCF));
    const int nc = data.n_classes();

    std::vector<double> fold_estimate(used, 0.0);
    parallel_for(used, threads, [&](int f) {
        std::vector<std::int32_t> train_rows, test_rows;
        for (std::size_t r = 0; r < data.n_rows(); ++r) {
            if (fold_of[r] == f) test_rows.push_back(static_cast<std::int32_t>(r));
            else train_rows.push_back(static_cast<std::int32_t>(r));
        }
        if (train_rows.empty() || test_rows.empty()) return;
        const Dataset fold_data = data.subset(train_rows);
        Priors fold_priors = priors;
        if (fold_priors.estimated) fold_priors = Priors::estimate(fold_data);
        const TrainContext fold_ctx(fold_data, fold_priors, costs);
        FitSpec fold_spec = spec;
        Rng fold_rng = Rng(seed).derive(static_cast<std::uint64_t>(f) + 0x100);
        fold_spec.grow.seed = fold_rng.next_u64();
        fold_spec.grow.threads = 1;
        const FittedModel model = fit_model(fold_ctx, fold_spec);

        std::vector<double> cost_sum(nc, 0.0);
        std::vector<std::int64_t> count(nc, 0);
        for (auto r : test_rows) {
            const int truth = data.class_codes()[r];
            cost_sum[truth] += costs(model.predict(data, r), truth);
            ++count[truth];
        }
        double est = 0.0;
        for (int j = 0; j < nc; ++j)
            if (count[j] > 0) est += priors.pi[j] * cost_sum[j] / static_cast<double>(count[j]);
        fold_estimate[f] = est;
    });

    double total = 0.0;
    for (int f = 0; f < used; ++f) total += fold_estimate[f];
    return total / static_cast<double>(used);
}

RelativeReport relative_metrics(const RelativeInput& in) {
    const std::size_t nm = in.methods.size();
    const std::size_t nd = in.datasets.size();
    if (nm < 2) throw std::invalid_argument("relative metrics need at least two methods");
    if (nd < 1) throw std::invalid_argument("relative metrics need at least one dataset");
    if (in.error.size() != nd) throw std::invalid_argument("error table shape mismatch");
    for (const auto& row : in.error)
        if (row.size() != nm) throw std::invalid_argument("error table shape mismatch");
    const bool have_leaves = !in.leaves.empty();
    if (have_leaves) {
        if (in.leaves.size() != nd) throw std::invalid_argument("leaf table shape mismatch");
        for (const auto& row : in.leaves)
            if (row.size() != nm) throw std::invalid_argument("leaf table shape mismatch");
    }

    RelativeReport out;
    out.mean_error_ratio.assign(nm, 0.0);
    if (have_leaves) out.mean_leaf_ratio.assign(nm, 0.0);

    auto row_ratios = [&](const std::vector<double>& row, bool flag_zero,
                          std::size_t dataset) -> std::vector<double> {
        double mn = row[0];
        for (double v : row) mn = std::min(mn, v);
        std::vector<double> ratios(nm, 1.0);
        if (mn > 0.0) {
            for (std::size_t m = 0; m < nm; ++m) ratios[m] = row[m] / mn;
            return ratios;
        }
        if (flag_zero) out.flagged_rows.push_back(static_cast<int>(dataset));
        double mn_pos = 0.0;
        for (double v : row)
            if (v > 0.0 && (mn_pos == 0.0 || v < mn_pos)) mn_pos = v;
        for (std::size_t m = 0; m < nm; ++m)
            ratios[m] = row[m] <= 0.0 ? 1.0 : (mn_pos > 0.0 ? row[m] / mn_pos : 1.0);
        return ratios;
    };

    for (std::size_t d = 0; d < nd; ++d) {
        const auto er = row_ratios(in.error[d], true, d);
        for (std::size_t m = 0; m < nm; ++m) out.mean_error_ratio[m] += er[m];
        if (have_leaves) {
            const auto lr = row_ratios(in.leaves[d], false, d);
            for (std::size_t m = 0; m < nm; ++m) out.mean_leaf_ratio[m] += lr[m];
        }
    }
    for (std::size_t m = 0; m < nm; ++m) {
        out.mean_error_ratio[m] /= static_cast<double>(nd);
        if (have_leaves) out.mean_leaf_ratio[m] /= static_cast<double>(nd);
    }
    return out;
}

} // namespace chitree
