#include "chitree/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chitree/parallel.hpp"
#include "chitree/rng.hpp"

namespace chitree {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kBootstrapRetries = 100;

std::vector<std::int32_t> bootstrap_rows(const Dataset& data, Rng& rng) {
    const std::size_t n = data.n_rows();
    const int nc = data.n_classes();
    for (int attempt = 0; attempt < kBootstrapRetries; ++attempt) {
        std::vector<std::int32_t> rows(n);
        std::vector<char> seen(nc, 0);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i] = static_cast<std::int32_t>(rng.below(n));
            seen[data.class_codes()[rows[i]]] = 1;
        }
        bool all = true;
        for (int j = 0; j < nc; ++j) all = all && seen[j];
        if (all) return rows;
    }
    throw DataError("bootstrap resampling kept missing a class");
}

Ensemble fit_members(const TrainContext& ctx, const GrowConfig& cfg, int trees, char kind) {
    if (trees < 1) throw std::invalid_argument("ensemble needs at least one tree");
    Ensemble ens;
    ens.kind = kind;
    ens.seed = cfg.seed;
    const int n_predictors = static_cast<int>(ctx.data->predictors().size());
    if (kind == 'F')
        ens.mtry = std::clamp(
            static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_predictors)))), 1,
            std::max(n_predictors, 1));
    ens.members.resize(trees);

    parallel_for(trees, cfg.threads, [&](int b) {
        Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(b) + 1);
        const std::vector<std::int32_t> rows = bootstrap_rows(*ctx.data, rng);
        const Dataset sample = ctx.data->subset(rows);
        Priors priors = ctx.priors;
        if (priors.estimated) priors = Priors::estimate(sample);
        const TrainContext member_ctx(sample, priors, ctx.costs);

        GrowConfig member_cfg = cfg;
        member_cfg.method = 'S';
        member_cfg.seed = rng.next_u64();
        member_cfg.threads = 1; // parallelism lives at the member level
        if (kind == 'F') {
            member_cfg.interaction = false;
            member_cfg.linear = false;
            member_cfg.mtry = ens.mtry;
            ens.members[b] = grow_tree(member_ctx, member_cfg);
        } else {
            member_cfg.interaction = true;
            member_cfg.linear = true;
            member_cfg.mtry = 0;
            ens.members[b] = train_tree(member_ctx, member_cfg);
        }
    });
    return ens;
}

} // namespace

Dataset Ensemble::make_template() const {
    if (members.empty()) throw DataError("ensemble holds no members");
    return members.front().make_template();
}

Ensemble fit_bagged(const TrainContext& ctx, const GrowConfig& cfg, int trees) {
    return fit_members(ctx, cfg, trees, 'B');
}

Ensemble fit_forest(const TrainContext& ctx, const GrowConfig& cfg, int trees) {
    return fit_members(ctx, cfg, trees, 'F');
}

int predict_ensemble(const Ensemble& ens, const Dataset& data, std::int32_t row) {
    if (ens.members.empty()) throw DataError("ensemble holds no members");
    const int nc = static_cast<int>(ens.members.front().class_labels.size());
    std::vector<int> votes(nc, 0);
    for (const auto& tree : ens.members) ++votes[tree.predict(data, row)];
    int best = 0;
    for (int j = 1; j < nc; ++j)
        if (votes[j] > votes[best]) best = j;
    return best;
}

std::string ensemble_to_json(const Ensemble& ens) {
    ordered_json j;
    j["format_version"] = 1;
    j["model"] = "tree-ensemble";
    j["kind"] = std::string(1, ens.kind);
    j["seed"] = ens.seed;
    j["mtry"] = ens.mtry;
    ordered_json members = ordered_json::array();
    for (const auto& tree : ens.members)
        members.push_back(ordered_json::parse(tree_to_json(tree)));
    j["members"] = std::move(members);
    return j.dump(2) + "\n";
}

Ensemble ensemble_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("cannot parse model file: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw DataError("unsupported model format version");
        if (j.at("model").get<std::string>() != "tree-ensemble")
            throw DataError("model file does not hold a tree ensemble");
        Ensemble ens;
        ens.kind = j.at("kind").get<std::string>().at(0);
        ens.seed = j.at("seed").get<std::uint64_t>();
        ens.mtry = j.at("mtry").get<int>();
        for (const auto& jm : j.at("members"))
            ens.members.push_back(tree_from_json(jm.dump()));
        if (ens.members.empty()) throw DataError("ensemble file holds no members");
        return ens;
    } catch (const ordered_json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

void save_ensemble(const Ensemble& ens, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << ensemble_to_json(ens);
    if (!out) throw DataError("failed writing '" + path + "'");
}

Ensemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return ensemble_from_json(buf.str());
}

} // namespace chitree
