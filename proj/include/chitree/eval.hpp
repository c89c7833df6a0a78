#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chitree/dataset.hpp"
#include "chitree/ensemble.hpp"
#include "chitree/synthetic.hpp"
#include "chitree/tree.hpp"

namespace chitree {

// Root-node selection frequencies over repeated synthetic draws; linear-split
// counts are halved when folded into the selection probabilities, so the
// probabilities sum to exactly 1.
struct BiasReport {
    BiasKind kind = BiasKind::Independence;
    int trials = 0;
    std::vector<std::string> variables;
    std::vector<std::int64_t> univariate; // per variable
    std::vector<std::int64_t> linear;     // per variable (numeric only by construction)
    std::vector<double> probability;      // (univariate + linear/2) / trials
    std::vector<double> se;               // sqrt(p(1-p)/trials)
};

BiasReport run_bias_simulation(BiasKind kind, int trials, std::uint64_t seed, int threads = 1,
                               std::size_t n_per_trial = 500);

// One fitted model of any supported method.
struct FitSpec {
    std::string method = "S"; // S | K | N | BG | GF
    GrowConfig grow;
    int trees = 0; // ensembles; 0 picks the method default
};

struct FittedModel {
    std::optional<Tree> tree;
    std::optional<Ensemble> ensemble;

    int predict(const Dataset& data, std::int32_t row) const;
    int n_leaves() const; // 0 for ensembles
};

FittedModel fit_model(const TrainContext& ctx, const FitSpec& spec);

// Stratified v-fold estimate: each fold trains the full procedure on the
// complement; the fold estimate is sum_j pi(j) * (mean held-out cost of class
// j) and the result is the average over folds.
double crossval_error(const Dataset& data, const Priors& priors, const CostMatrix& costs,
                      const FitSpec& spec, int folds, std::uint64_t seed, int threads = 1);

struct RelativeInput {
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    std::vector<std::vector<double>> error;  // [dataset][method]
    std::vector<std::vector<double>> leaves; // optional; same shape when present
};

struct RelativeReport {
    std::vector<double> mean_error_ratio; // per method
    std::vector<double> mean_leaf_ratio;  // empty when leaves absent
    std::vector<int> flagged_rows;        // rows whose minimum error was 0
};

// Divide each row by its minimum and average per method.  Rows with a zero
// minimum give ratio 1 to every method tied at zero and are flagged; other
// methods in such rows are scaled by the smallest positive entry.
RelativeReport relative_metrics(const RelativeInput& in);

} // namespace chitree
