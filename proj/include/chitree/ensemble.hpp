#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chitree/tree.hpp"

namespace chitree {

struct Ensemble {
    char kind = 'B'; // 'B': bagged pruned trees; 'F': forest of unpruned trees
    std::uint64_t seed = 1;
    int mtry = 0; // per-node predictor subset size ('F' only)
    std::vector<Tree> members;

    Dataset make_template() const;
};

inline constexpr int kDefaultBaggedTrees = 100;
inline constexpr int kDefaultForestTrees = 500;

// Bootstrap-resampled pruned trees (method S with all split phases).
Ensemble fit_bagged(const TrainContext& ctx, const GrowConfig& cfg,
                    int trees = kDefaultBaggedTrees);

// Unpruned trees on bootstrap samples with main-effect-only selection and a
// fresh random predictor subset of ceil(sqrt(K)) at every node.
Ensemble fit_forest(const TrainContext& ctx, const GrowConfig& cfg,
                    int trees = kDefaultForestTrees);

// Plurality vote over member predictions; ties go to the smallest class code.
int predict_ensemble(const Ensemble& ens, const Dataset& data, std::int32_t row);

std::string ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const std::string& text);
void save_ensemble(const Ensemble& ens, const std::string& path);
Ensemble load_ensemble(const std::string& path);

} // namespace chitree
