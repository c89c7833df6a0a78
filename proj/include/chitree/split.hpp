#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chitree/dataset.hpp"
#include "chitree/stats.hpp"

namespace chitree {

enum class SplitKind { NumericThreshold, CategoricalSet, Linear, Missingness };

enum class SelectionPath { None, Main, Interaction, Linear, Fallback };

struct SplitDecision {
    SplitKind kind = SplitKind::NumericThreshold;
    int col = -1;
    int col2 = -1;                        // linear splits only
    double threshold = 0.0;               // numeric threshold or linear constant
    double a1 = 0.0, a2 = 0.0;            // linear coefficients
    std::vector<std::int32_t> level_set;  // categorical codes routed left, sorted
    double objective = 0.0;               // achieved weighted-impurity sum
};

// Bonferroni-adjusted significance levels for a node with k non-constant
// predictors, k1 of them numeric.
struct SelectionThresholds {
    int k = 0;
    int k1 = 0;
    double alpha = 0.0; // main effects
    double beta = 0.0;  // interactions; 0 when k < 2
    double gamma = 0.0; // linear; 0 when k1 < 2
};

SelectionThresholds selection_thresholds(int k, int k1);

struct SelectionResult {
    SelectionPath path = SelectionPath::None;
    int var1 = -1;
    int var2 = -1;       // interaction and linear paths
    double stat = 0.0;   // winning test statistic (infinity for a lone predictor)
};

struct SplitConfig {
    bool linear_enabled = true;
    bool interaction_enabled = true;
    int m0 = 5;
    // Candidate predictor columns for this node; empty means all predictors.
    std::vector<int> allowed;
};

struct SplitOutcome {
    SelectionResult selection;
    std::optional<SplitDecision> split;
};

// Weighted two-node impurity: children weighted by their share of the parent
// sample count.  Not bounded by the parent impurity under non-estimated priors.
double two_node_impurity(const NodeClassStats& left, const NodeClassStats& right);

double four_node_impurity(const NodeClassStats& ll, const NodeClassStats& lr,
                          const NodeClassStats& rl, const NodeClassStats& rr);

// Levels sorted by non-decreasing share, ties by level code with the missing
// pseudo-level last.  `share` is aligned with `levels`.
std::vector<std::int32_t> share_order(std::span<const std::int32_t> levels,
                                         std::span<const double> share);

// Order-statistic threshold grid for the two-level search.  `sorted_values`
// are the node's non-missing values in ascending order; n_train is the size
// of the full training sample.  Empty when fewer than 2*m0 values.
std::vector<double> restricted_points(std::span<const double> sorted_values,
                                      std::int64_t n_train, int m0);

// Best single split on one numeric predictor: every midpoint of consecutive
// distinct values, with missing values routed left, plus a split on
// missingness itself when both sides hold at least m0 rows.
std::optional<SplitDecision> split_numeric(const TrainContext& ctx,
                                           std::span<const std::int32_t> rows,
                                           int col, int m0);

// Best single split on one categorical predictor.  Two present classes use
// the ordered-share shortcut; small level counts are searched exhaustively;
// moderate class counts go through cost-minimizing class mapping; the rest
// use a discriminant ordering of level indicator vectors.
std::optional<SplitDecision> split_categorical(const TrainContext& ctx,
                                               std::span<const std::int32_t> rows,
                                               int col);

// Two-level searches over a selected pair; only the top-level split of the
// winning arrangement is committed.
std::optional<SplitDecision> split_pair_numeric(const TrainContext& ctx,
                                                std::span<const std::int32_t> rows,
                                                int col_a, int col_b, int m0);

std::optional<SplitDecision> split_pair_mixed(const TrainContext& ctx,
                                              std::span<const std::int32_t> rows,
                                              int col_num, int col_cat, int m0);

std::optional<SplitDecision> split_pair_categorical(const TrainContext& ctx,
                                                    std::span<const std::int32_t> rows,
                                                    int col_a, int col_b);

// Variable selection without the linear phase: main-effect tests, then
// interaction tests, then the largest-main-effect fallback.
SelectionResult select_variables(const TrainContext& ctx, std::span<const std::int32_t> rows,
                                 const SplitConfig& config);

// Full selection plus split construction, including the linear phase when
// enabled.  The returned selection is set whenever any variable was chosen,
// even if no admissible split could be built from it.
SplitOutcome choose_split(const TrainContext& ctx, std::span<const std::int32_t> rows,
                          const SplitConfig& config);

} // namespace chitree
