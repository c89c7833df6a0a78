#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chitree/dataset.hpp"
#include "chitree/node_model.hpp"
#include "chitree/rng.hpp"
#include "chitree/split.hpp"

namespace chitree {

struct GrowConfig {
    char method = 'S';  // S: constant models; K: kernel models; N: nearest-neighbor
    int m0 = 5;
    int max_depth = 30;
    int cv_folds = 10;
    std::uint64_t seed = 1;
    bool one_se = false;              // pick the smallest tree within one SE of the CV minimum
    bool prior_weighted_kernel = false;
    bool interaction = true;          // forests grow with the interaction phase off
    bool linear = true;               // linear phase (method S only); forests turn it off
    int mtry = 0;                     // >0: per-node random predictor subset size
    int threads = 1;                  // cross-validation fold concurrency
};

struct TreeNode {
    NodeClassStats stats;
    SelectionResult sel;
    std::optional<SplitDecision> split;
    NodeModel model;
    int left = -1;
    int right = -1;
    int depth = 0;
    double r_leaf = 0.0; // resubstitution cost of this node as a leaf

    bool is_leaf() const { return left < 0; }
};

class Tree {
public:
    std::vector<TreeNode> nodes; // index 0 is the root; empty only before fitting
    Schema schema;
    std::vector<std::vector<std::string>> level_dicts; // per schema column
    std::vector<std::string> class_labels;
    Priors priors;
    CostMatrix costs;
    char method = 'S';
    int m0 = 5;
    std::uint64_t seed = 1;
    std::vector<double> alphas;  // weakest-link sequence of the grown tree
    double chosen_alpha = 0.0;   // CV-selected complexity (pruned trees)

    int leaf_of(const Dataset& data, std::int32_t row) const;
    int predict(const Dataset& data, std::int32_t row) const; // class code
    int n_leaves() const;
    int max_node_depth() const;

    // Empty dataset carrying this model's schema and dictionaries, for
    // parsing scoring files against a loaded model.
    Dataset make_template() const;
};

// true when the row goes to the left child
bool route_left(const SplitDecision& split, const Dataset& data, std::int32_t row);

Tree grow_tree(const TrainContext& ctx, const GrowConfig& cfg);
Tree prune_tree(const Tree& grown, const TrainContext& ctx, const GrowConfig& cfg);
Tree train_tree(const TrainContext& ctx, const GrowConfig& cfg); // grow + prune

// Strictly increasing weakest-link complexity sequence of a grown tree,
// starting at 0.  Exposed for the pruning invariants.
std::vector<double> pruning_alphas(const Tree& tree);

// Subtree of `tree` obtained by collapsing every internal node whose
// weakest-link complexity is <= beta.
Tree subtree_at(const Tree& tree, double beta);

// Deterministic class-stratified fold assignment; returns fold index per row.
std::vector<int> stratified_folds(const Dataset& data, int folds, Rng rng);

std::string export_text(const Tree& tree);
std::string export_dot(const Tree& tree);

std::string tree_to_json(const Tree& tree);
Tree tree_from_json(const std::string& text);
void save_tree(const Tree& tree, const std::string& path);
Tree load_tree(const std::string& path);

} // namespace chitree
