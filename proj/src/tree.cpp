#include "chitree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "chitree/parallel.hpp"

namespace chitree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using ordered_json = nlohmann::ordered_json;

double leaf_cost(const NodeClassStats& stats, const CostMatrix& costs) {
    double best = kInf;
    for (int i = 0; i < costs.n; ++i) {
        double c = 0.0;
        for (int j = 0; j < costs.n; ++j) c += costs(i, j) * stats.p_cond[j];
        best = std::min(best, c);
    }
    if (!(best < kInf)) best = 0.0;
    return stats.p_t * best;
}

struct Grower {
    const TrainContext& ctx;
    const GrowConfig& cfg;
    Tree& tree;
    Rng rng;

    int build(std::vector<std::int32_t>& rows, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        {
            TreeNode& node = tree.nodes[id];
            node.depth = depth;
            node.stats = node_stats(ctx, rows);
            node.r_leaf = leaf_cost(node.stats, ctx.costs);
        }

        SplitConfig sc;
        sc.m0 = cfg.m0;
        sc.linear_enabled = cfg.method == 'S' && cfg.linear;
        sc.interaction_enabled = cfg.interaction;
        if (cfg.mtry > 0) {
            std::vector<int> pool;
            for (int col : ctx.data->predictors())
                if (!constant_in_node(*ctx.data, col, rows)) pool.push_back(col);
            if (static_cast<int>(pool.size()) > cfg.mtry) {
                Rng node_rng = rng.derive(static_cast<std::uint64_t>(id));
                for (int i = 0; i < cfg.mtry; ++i) {
                    const std::size_t j =
                        i + static_cast<std::size_t>(
                                node_rng.below(static_cast<std::uint64_t>(pool.size() - i)));
                    std::swap(pool[i], pool[j]);
                }
                pool.resize(cfg.mtry);
                std::sort(pool.begin(), pool.end());
            }
            sc.allowed = std::move(pool);
        }

        const NodeClassStats& stats = tree.nodes[id].stats;
        const bool stoppable = stats.classes_present <= 1 ||
                               stats.n < 2 * static_cast<std::int64_t>(cfg.m0) ||
                               depth >= cfg.max_depth;
        SelectionResult sel;
        std::optional<SplitDecision> split;
        if (stoppable) {
            // node models still use the selected variables at stopped nodes
            if (cfg.method != 'S') sel = select_variables(ctx, rows, sc);
        } else {
            SplitOutcome outcome = choose_split(ctx, rows, sc);
            sel = outcome.selection;
            split = outcome.split;
        }

        tree.nodes[id].sel = sel;
        switch (cfg.method) {
            case 'K':
                tree.nodes[id].model = fit_kernel_model(ctx, rows, sel,
                                                        {cfg.prior_weighted_kernel});
                break;
            case 'N':
                tree.nodes[id].model = fit_nn_model(ctx, rows, sel);
                break;
            default:
                tree.nodes[id].model = fit_constant_model(ctx, rows);
                break;
        }

        if (split) {
            std::vector<std::int32_t> left_rows, right_rows;
            for (auto r : rows) {
                if (route_left(*split, *ctx.data, r)) left_rows.push_back(r);
                else right_rows.push_back(r);
            }
            if (!left_rows.empty() && !right_rows.empty()) {
                tree.nodes[id].split = split;
                rows.clear();
                rows.shrink_to_fit();
                const int l = build(left_rows, depth + 1);
                tree.nodes[id].left = l;
                const int r = build(right_rows, depth + 1);
                tree.nodes[id].right = r;
            }
        }
        return id;
    }
};

// Weakest-link collapse schedule: collapse_at[t] is the complexity at which
// internal node t turns into a leaf; alphas is the increasing stage sequence
// starting at 0.
struct CollapseSchedule {
    std::vector<double> collapse_at;
    std::vector<double> alphas;
};

CollapseSchedule collapse_schedule(const Tree& tree) {
    const int n = static_cast<int>(tree.nodes.size());
    CollapseSchedule out;
    out.collapse_at.assign(n, kInf);
    out.alphas = {0.0};
    if (n == 0) return out;

    std::vector<char> active(n, 0); // node still internal in the current tree
    for (int t = 0; t < n; ++t)
        if (!tree.nodes[t].is_leaf()) active[t] = 1;

    std::vector<double> r_sub(n, 0.0);
    std::vector<int> leaves(n, 0);
    auto recompute = [&]() {
        // children carry larger pre-order ids, so a reverse sweep is bottom-up
        for (int t = n - 1; t >= 0; --t) {
            if (!active[t]) {
                r_sub[t] = tree.nodes[t].r_leaf;
                leaves[t] = 1;
            } else {
                r_sub[t] = r_sub[tree.nodes[t].left] + r_sub[tree.nodes[t].right];
                leaves[t] = leaves[tree.nodes[t].left] + leaves[tree.nodes[t].right];
            }
        }
    };
    auto deactivate_subtree = [&](int t, auto&& self) -> void {
        if (tree.nodes[t].is_leaf()) return;
        active[t] = 0;
        self(tree.nodes[t].left, self);
        self(tree.nodes[t].right, self);
    };

    for (;;) {
        bool any = false;
        for (int t = 0; t < n; ++t) any = any || active[t];
        if (!any) break;
        recompute();
        double gmin = kInf;
        for (int t = 0; t < n; ++t) {
            if (!active[t]) continue;
            const double g =
                std::max(0.0, (tree.nodes[t].r_leaf - r_sub[t]) / (leaves[t] - 1));
            if (g < gmin) gmin = g;
        }
        const double stage = gmin <= 1e-12 ? 0.0 : gmin;
        const double tol = gmin * (1.0 + 1e-9) + 1e-15;
        for (int t = 0; t < n; ++t) {
            if (!active[t]) continue;
            const double g =
                std::max(0.0, (tree.nodes[t].r_leaf - r_sub[t]) / (leaves[t] - 1));
            if (g <= tol && active[t]) {
                out.collapse_at[t] = stage;
                deactivate_subtree(t, deactivate_subtree);
            }
        }
        if (stage > out.alphas.back()) out.alphas.push_back(stage);
    }
    return out;
}

int copy_subtree(const Tree& src, const std::vector<double>& collapse_at, double beta,
                 int from, Tree& dst) {
    const int id = static_cast<int>(dst.nodes.size());
    dst.nodes.push_back(src.nodes[from]);
    TreeNode& node = dst.nodes[id];
    node.left = node.right = -1;
    const bool keep_internal = !src.nodes[from].is_leaf() && collapse_at[from] > beta;
    if (!keep_internal) {
        node.split.reset();
        return id;
    }
    const int l = copy_subtree(src, collapse_at, beta, src.nodes[from].left, dst);
    dst.nodes[id].left = l;
    const int r = copy_subtree(src, collapse_at, beta, src.nodes[from].right, dst);
    dst.nodes[id].right = r;
    return id;
}

Tree shell_of(const Tree& src) {
    Tree out;
    out.schema = src.schema;
    out.level_dicts = src.level_dicts;
    out.class_labels = src.class_labels;
    out.priors = src.priors;
    out.costs = src.costs;
    out.method = src.method;
    out.m0 = src.m0;
    out.seed = src.seed;
    out.alphas = src.alphas;
    out.chosen_alpha = src.chosen_alpha;
    return out;
}

} // namespace

bool route_left(const SplitDecision& split, const Dataset& data, std::int32_t row) {
    switch (split.kind) {
        case SplitKind::NumericThreshold: {
            const double v = data.column(split.col).values[row];
            return std::isnan(v) || v <= split.threshold;
        }
        case SplitKind::CategoricalSet: {
            const std::int32_t code = data.column(split.col).codes[row];
            return std::binary_search(split.level_set.begin(), split.level_set.end(), code);
        }
        case SplitKind::Linear: {
            const double x1 = data.column(split.col).values[row];
            const double x2 = data.column(split.col2).values[row];
            if (std::isnan(x1) || std::isnan(x2)) return true;
            return split.a1 * x1 + split.a2 * x2 <= split.threshold;
        }
        case SplitKind::Missingness:
            return data.column(split.col).missing(static_cast<std::size_t>(row));
    }
    return true;
}

int Tree::leaf_of(const Dataset& data, std::int32_t row) const {
    int t = 0;
    while (!nodes[t].is_leaf())
        t = route_left(*nodes[t].split, data, row) ? nodes[t].left : nodes[t].right;
    return t;
}

int Tree::predict(const Dataset& data, std::int32_t row) const {
    return predict_node_model(nodes[leaf_of(data, row)].model, data, row);
}

int Tree::n_leaves() const {
    int c = 0;
    for (const auto& n : nodes) c += n.is_leaf() ? 1 : 0;
    return c;
}

int Tree::max_node_depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

Dataset Tree::make_template() const {
    return Dataset::make_template(schema, level_dicts, class_labels);
}

Tree grow_tree(const TrainContext& ctx, const GrowConfig& cfg) {
    Tree tree;
    tree.schema = ctx.data->schema();
    tree.level_dicts.reserve(ctx.data->columns().size());
    for (const auto& c : ctx.data->columns()) tree.level_dicts.push_back(c.levels);
    tree.class_labels = ctx.data->class_labels();
    tree.priors = ctx.priors;
    tree.costs = ctx.costs;
    tree.method = cfg.method;
    tree.m0 = cfg.m0;
    tree.seed = cfg.seed;

    std::vector<std::int32_t> rows(ctx.data->n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::int32_t>(i);
    Grower grower{ctx, cfg, tree, Rng(cfg.seed)};
    grower.build(rows, 0);
    tree.alphas = collapse_schedule(tree).alphas;
    return tree;
}

std::vector<double> pruning_alphas(const Tree& tree) {
    return collapse_schedule(tree).alphas;
}

Tree subtree_at(const Tree& tree, double beta) {
    const CollapseSchedule sched = collapse_schedule(tree);
    Tree out = shell_of(tree);
    copy_subtree(tree, sched.collapse_at, beta, 0, out);
    return out;
}

Tree prune_tree(const Tree& grown, const TrainContext& ctx, const GrowConfig& cfg) {
    const CollapseSchedule sched = collapse_schedule(grown);
    const std::vector<double>& alphas = sched.alphas;
    const std::size_t n_cand = alphas.size();

    // candidate complexities: geometric means of adjacent stages, last stage
    // evaluated at itself
    std::vector<double> betas(n_cand);
    for (std::size_t m = 0; m < n_cand; ++m)
        betas[m] = m + 1 < n_cand ? std::sqrt(alphas[m] * alphas[m + 1]) : alphas[m];

    const Dataset& data = *ctx.data;
    const int nc = data.n_classes();
    double chosen = betas.back();
    if (n_cand > 1 && data.n_rows() >= 2) {
        const int folds = std::min<int>(cfg.cv_folds, static_cast<int>(data.n_rows()));
        const std::vector<int> fold_of =
            stratified_folds(data, folds, Rng(cfg.seed).derive(0xF01D));

        // per fold, per candidate, per class: summed and squared-summed costs
        std::vector<std::vector<std::vector<double>>> cost_sum(
            folds, std::vector<std::vector<double>>(n_cand, std::vector<double>(nc, 0.0)));
        auto cost_sq = cost_sum;

        parallel_for(folds, cfg.threads, [&](int f) {
            std::vector<std::int32_t> train_rows, test_rows;
            for (std::size_t r = 0; r < data.n_rows(); ++r) {
                if (fold_of[r] == f) test_rows.push_back(static_cast<std::int32_t>(r));
                else train_rows.push_back(static_cast<std::int32_t>(r));
            }
            if (train_rows.empty() || test_rows.empty()) return;
            const Dataset fold_data = data.subset(train_rows);
            Priors fold_priors = ctx.priors;
            if (fold_priors.estimated) fold_priors = Priors::estimate(fold_data);
            const TrainContext fold_ctx(fold_data, fold_priors, ctx.costs);
            GrowConfig fold_cfg = cfg;
            Rng fold_rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(f) + 1);
            fold_cfg.seed = fold_rng.next_u64();
            const Tree fold_tree = grow_tree(fold_ctx, fold_cfg);
            const CollapseSchedule fold_sched = collapse_schedule(fold_tree);
            for (std::size_t m = 0; m < n_cand; ++m) {
                const Tree sub = [&]() {
                    Tree out = shell_of(fold_tree);
                    copy_subtree(fold_tree, fold_sched.collapse_at, betas[m], 0, out);
                    return out;
                }();
                for (auto r : test_rows) {
                    const int pred = sub.predict(data, r);
                    const int truth = data.class_codes()[r];
                    const double c = ctx.costs(pred, truth);
                    cost_sum[f][m][truth] += c;
                    cost_sq[f][m][truth] += c * c;
                }
            }
        });

        const double n_total = static_cast<double>(data.n_rows());
        std::vector<double> r_cv(n_cand, 0.0), se(n_cand, 0.0);
        for (std::size_t m = 0; m < n_cand; ++m) {
            double sum_x = 0.0, sum_x2 = 0.0;
            for (int j = 0; j < nc; ++j) {
                const double nj = static_cast<double>(data.class_counts()[j]);
                if (nj <= 0.0) continue;
                const double wj = ctx.priors.pi[j] / nj;
                double cs = 0.0, cq = 0.0;
                for (int f = 0; f < folds; ++f) {
                    cs += cost_sum[f][m][j];
                    cq += cost_sq[f][m][j];
                }
                r_cv[m] += wj * cs;
                sum_x += n_total * wj * cs;
                sum_x2 += n_total * n_total * wj * wj * cq;
            }
            const double mean = sum_x / n_total;
            const double var = std::max(0.0, sum_x2 / n_total - mean * mean);
            se[m] = std::sqrt(var / n_total);
        }

        std::size_t best = 0;
        for (std::size_t m = 1; m < n_cand; ++m)
            if (r_cv[m] <= r_cv[best]) best = m; // ties prefer the smaller tree
        if (cfg.one_se) {
            const double cutoff = r_cv[best] + se[best];
            for (std::size_t m = n_cand; m-- > 0;) {
                if (r_cv[m] <= cutoff) {
                    best = std::max(best, m);
                    break;
                }
            }
        }
        chosen = betas[best];
    } else if (n_cand == 1) {
        chosen = betas[0];
    }

    Tree out = shell_of(grown);
    out.alphas = alphas;
    out.chosen_alpha = chosen;
    copy_subtree(grown, sched.collapse_at, chosen, 0, out);
    return out;
}

Tree train_tree(const TrainContext& ctx, const GrowConfig& cfg) {
    const Tree grown = grow_tree(ctx, cfg);
    return prune_tree(grown, ctx, cfg);
}

std::vector<int> stratified_folds(const Dataset& data, int folds, Rng rng) {
    std::vector<int> fold_of(data.n_rows(), 0);
    if (folds <= 1) return fold_of;
    const int nc = data.n_classes();
    std::vector<std::vector<std::int32_t>> by_class(nc);
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        by_class[data.class_codes()[r]].push_back(static_cast<std::int32_t>(r));
    int next = 0;
    for (int j = 0; j < nc; ++j) {
        auto& rows = by_class[j];
        for (std::size_t i = rows.size(); i > 1; --i) {
            const std::size_t k = static_cast<std::size_t>(rng.below(i));
            std::swap(rows[i - 1], rows[k]);
        }
        for (auto r : rows) {
            fold_of[r] = next;
            next = (next + 1) % folds;
        }
    }
    return fold_of;
}

namespace {

std::string fmt_g(double v, int sig) {
    std::ostringstream os;
    os.precision(sig);
    os << v;
    return os.str();
}

std::string level_name(const Tree& tree, int col, std::int32_t code) {
    if (code == kMissingLevel) return "<missing>";
    if (code == kUnseenLevel) return "<unseen>";
    return tree.level_dicts[col][static_cast<std::size_t>(code)];
}

std::string split_condition(const Tree& tree, const SplitDecision& s) {
    const std::string& name = tree.schema.columns[s.col].name;
    switch (s.kind) {
        case SplitKind::NumericThreshold:
            return name + " <= " + fmt_g(s.threshold, 6);
        case SplitKind::CategoricalSet: {
            std::string out = name + " in {";
            for (std::size_t i = 0; i < s.level_set.size(); ++i) {
                if (i) out += ",";
                out += level_name(tree, s.col, s.level_set[i]);
            }
            return out + "}";
        }
        case SplitKind::Linear:
            return fmt_g(s.a1, 4) + "*" + name + " + " + fmt_g(s.a2, 4) + "*" +
                   tree.schema.columns[s.col2].name + " <= " + fmt_g(s.threshold, 4);
        case SplitKind::Missingness:
            return name + " missing";
    }
    return "";
}

const char* model_kind_name(NodeModelKind k) {
    switch (k) {
        case NodeModelKind::Constant: return "constant";
        case NodeModelKind::Kernel1d: return "kernel-1d";
        case NodeModelKind::Kernel2d: return "kernel-2d";
        case NodeModelKind::KernelMixed: return "kernel-mixed";
        case NodeModelKind::Table: return "table";
        case NodeModelKind::Nn1d: return "nn-1d";
        case NodeModelKind::Nn2d: return "nn-2d";
        case NodeModelKind::NnMixed: return "nn-mixed";
    }
    return "constant";
}

void export_text_rec(const Tree& tree, int t, int indent, std::ostringstream& os) {
    const TreeNode& node = tree.nodes[t];
    for (int i = 0; i < indent; ++i) os << "  ";
    os << t << ": ";
    if (node.is_leaf()) {
        const int cls = assign_class(node.stats, tree.costs);
        os << "leaf class=" << tree.class_labels[cls];
        if (node.model.kind != NodeModelKind::Constant)
            os << " model=" << model_kind_name(node.model.kind);
        os << " (n=" << node.stats.n << ")\n";
        return;
    }
    os << split_condition(tree, *node.split) << " ? (n=" << node.stats.n << ")\n";
    export_text_rec(tree, node.left, indent + 1, os);
    export_text_rec(tree, node.right, indent + 1, os);
}

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

} // namespace

std::string export_text(const Tree& tree) {
    std::ostringstream os;
    export_text_rec(tree, 0, 0, os);
    return os.str();
}

std::string export_dot(const Tree& tree) {
    std::ostringstream os;
    os << "digraph tree {\n  node [shape=box];\n";
    for (std::size_t t = 0; t < tree.nodes.size(); ++t) {
        const TreeNode& node = tree.nodes[t];
        if (node.is_leaf()) {
            const int cls = assign_class(node.stats, tree.costs);
            os << "  n" << t << " [label=\"" << dot_escape(tree.class_labels[cls]) << "\\nn="
               << node.stats.n << "\"];\n";
        } else {
            os << "  n" << t << " [label=\"" << dot_escape(split_condition(tree, *node.split))
               << "\\nn=" << node.stats.n << "\"];\n";
        }
    }
    for (std::size_t t = 0; t < tree.nodes.size(); ++t) {
        const TreeNode& node = tree.nodes[t];
        if (node.is_leaf()) continue;
        os << "  n" << t << " -> n" << node.left << " [label=\"yes\"];\n";
        os << "  n" << t << " -> n" << node.right << " [label=\"no\"];\n";
    }
    os << "}\n";
    return os.str();
}

namespace {

const char* role_letter(Role r) {
    switch (r) {
        case Role::Class: return "d";
        case Role::Numeric: return "n";
        case Role::Categorical: return "c";
        case Role::Excluded: return "x";
    }
    return "x";
}

Role role_from_letter(const std::string& s) {
    if (s == "d") return Role::Class;
    if (s == "n") return Role::Numeric;
    if (s == "c") return Role::Categorical;
    if (s == "x") return Role::Excluded;
    throw DataError("unknown column role '" + s + "' in model file");
}

const char* path_name(SelectionPath p) {
    switch (p) {
        case SelectionPath::None: return "none";
        case SelectionPath::Main: return "main";
        case SelectionPath::Interaction: return "interaction";
        case SelectionPath::Linear: return "linear";
        case SelectionPath::Fallback: return "fallback";
    }
    return "none";
}

SelectionPath path_from_name(const std::string& s) {
    if (s == "none") return SelectionPath::None;
    if (s == "main") return SelectionPath::Main;
    if (s == "interaction") return SelectionPath::Interaction;
    if (s == "linear") return SelectionPath::Linear;
    if (s == "fallback") return SelectionPath::Fallback;
    throw DataError("unknown selection path '" + s + "' in model file");
}

const char* split_kind_name(SplitKind k) {
    switch (k) {
        case SplitKind::NumericThreshold: return "threshold";
        case SplitKind::CategoricalSet: return "set";
        case SplitKind::Linear: return "linear";
        case SplitKind::Missingness: return "missingness";
    }
    return "threshold";
}

SplitKind split_kind_from_name(const std::string& s) {
    if (s == "threshold") return SplitKind::NumericThreshold;
    if (s == "set") return SplitKind::CategoricalSet;
    if (s == "linear") return SplitKind::Linear;
    if (s == "missingness") return SplitKind::Missingness;
    throw DataError("unknown split kind '" + s + "' in model file");
}

NodeModelKind model_kind_from_name(const std::string& s) {
    if (s == "constant") return NodeModelKind::Constant;
    if (s == "kernel-1d") return NodeModelKind::Kernel1d;
    if (s == "kernel-2d") return NodeModelKind::Kernel2d;
    if (s == "kernel-mixed") return NodeModelKind::KernelMixed;
    if (s == "table") return NodeModelKind::Table;
    if (s == "nn-1d") return NodeModelKind::Nn1d;
    if (s == "nn-2d") return NodeModelKind::Nn2d;
    if (s == "nn-mixed") return NodeModelKind::NnMixed;
    throw DataError("unknown node model kind '" + s + "' in model file");
}

ordered_json stat_to_json(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

double stat_from_json(const ordered_json& j) {
    if (j.is_null()) return kInf;
    return j.get<double>();
}

ordered_json model_to_json(const NodeModel& m) {
    ordered_json j;
    j["kind"] = model_kind_name(m.kind);
    j["cls"] = m.cls;
    j["col"] = m.col;
    j["col2"] = m.col2;
    j["modal"] = m.modal_table;
    j["prior_weighted"] = m.prior_weighted;
    j["n_classes"] = m.n_classes;
    j["class_share"] = m.class_share;
    switch (m.kind) {
        case NodeModelKind::Constant:
            break;
        case NodeModelKind::Kernel1d:
            j["offsets"] = m.class_offset;
            j["xs"] = m.xs;
            j["h"] = m.h;
            break;
        case NodeModelKind::Kernel2d:
            j["offsets"] = m.class_offset;
            j["xs"] = m.xs;
            j["ys"] = m.ys;
            j["h1"] = m.h1c;
            j["h2"] = m.h2c;
            j["rho"] = m.rhoc;
            j["lh"] = m.line_h;
            break;
        case NodeModelKind::KernelMixed: {
            ordered_json cells = ordered_json::array();
            for (const auto& c : m.mixed_cells) {
                ordered_json jc;
                jc["level"] = c.level;
                jc["cls"] = c.cls;
                jc["n"] = c.n_cell;
                jc["xs"] = c.xs;
                cells.push_back(std::move(jc));
            }
            j["cells"] = std::move(cells);
            j["hbar"] = m.hbar;
            j["class_n"] = m.class_n;
            break;
        }
        case NodeModelKind::Table: {
            ordered_json cells = ordered_json::array();
            for (const auto& c : m.table_cells) {
                ordered_json jc;
                jc["level"] = c.level;
                jc["level2"] = c.level2;
                jc["counts"] = c.counts;
                cells.push_back(std::move(jc));
            }
            j["cells"] = std::move(cells);
            j["class_n"] = m.class_n;
            break;
        }
        case NodeModelKind::Nn1d:
            j["xs"] = m.xs;
            j["labels"] = m.labels;
            j["k"] = m.k;
            break;
        case NodeModelKind::Nn2d:
            j["xs"] = m.xs;
            j["ys"] = m.ys;
            j["labels"] = m.labels;
            j["k"] = m.k;
            j["inv"] = std::vector<double>{m.inv_a, m.inv_b, m.inv_c};
            break;
        case NodeModelKind::NnMixed: {
            ordered_json cells = ordered_json::array();
            for (const auto& c : m.nn_cells) {
                ordered_json jc;
                jc["level"] = c.level;
                jc["xs"] = c.xs;
                jc["labels"] = c.labels;
                jc["k"] = c.k;
                cells.push_back(std::move(jc));
            }
            j["cells"] = std::move(cells);
            break;
        }
    }
    return j;
}

NodeModel model_from_json(const ordered_json& j) {
    NodeModel m;
    m.kind = model_kind_from_name(j.at("kind").get<std::string>());
    m.cls = j.at("cls").get<int>();
    m.col = j.at("col").get<int>();
    m.col2 = j.at("col2").get<int>();
    m.modal_table = j.at("modal").get<bool>();
    m.prior_weighted = j.at("prior_weighted").get<bool>();
    m.n_classes = j.at("n_classes").get<int>();
    m.class_share = j.at("class_share").get<std::vector<double>>();
    switch (m.kind) {
        case NodeModelKind::Constant:
            break;
        case NodeModelKind::Kernel1d:
            m.class_offset = j.at("offsets").get<std::vector<std::size_t>>();
            m.xs = j.at("xs").get<std::vector<double>>();
            m.h = j.at("h").get<double>();
            break;
        case NodeModelKind::Kernel2d:
            m.class_offset = j.at("offsets").get<std::vector<std::size_t>>();
            m.xs = j.at("xs").get<std::vector<double>>();
            m.ys = j.at("ys").get<std::vector<double>>();
            m.h1c = j.at("h1").get<std::vector<double>>();
            m.h2c = j.at("h2").get<std::vector<double>>();
            m.rhoc = j.at("rho").get<std::vector<double>>();
            m.line_h = j.at("lh").get<std::vector<double>>();
            break;
        case NodeModelKind::KernelMixed:
            for (const auto& jc : j.at("cells")) {
                MixedKernelCell c;
                c.level = jc.at("level").get<std::int32_t>();
                c.cls = jc.at("cls").get<int>();
                c.n_cell = jc.at("n").get<std::int64_t>();
                c.xs = jc.at("xs").get<std::vector<double>>();
                m.mixed_cells.push_back(std::move(c));
            }
            m.hbar = j.at("hbar").get<std::vector<double>>();
            m.class_n = j.at("class_n").get<std::vector<std::int64_t>>();
            break;
        case NodeModelKind::Table:
            for (const auto& jc : j.at("cells")) {
                TableCell c;
                c.level = jc.at("level").get<std::int32_t>();
                c.level2 = jc.at("level2").get<std::int32_t>();
                c.counts = jc.at("counts").get<std::vector<std::int64_t>>();
                m.table_cells.push_back(std::move(c));
            }
            m.class_n = j.at("class_n").get<std::vector<std::int64_t>>();
            break;
        case NodeModelKind::Nn1d:
            m.xs = j.at("xs").get<std::vector<double>>();
            m.labels = j.at("labels").get<std::vector<int>>();
            m.k = j.at("k").get<int>();
            break;
        case NodeModelKind::Nn2d: {
            m.xs = j.at("xs").get<std::vector<double>>();
            m.ys = j.at("ys").get<std::vector<double>>();
            m.labels = j.at("labels").get<std::vector<int>>();
            m.k = j.at("k").get<int>();
            const auto inv = j.at("inv").get<std::vector<double>>();
            if (inv.size() != 3) throw DataError("bad metric block in model file");
            m.inv_a = inv[0];
            m.inv_b = inv[1];
            m.inv_c = inv[2];
            break;
        }
        case NodeModelKind::NnMixed:
            for (const auto& jc : j.at("cells")) {
                NnCell c;
                c.level = jc.at("level").get<std::int32_t>();
                c.xs = jc.at("xs").get<std::vector<double>>();
                c.labels = jc.at("labels").get<std::vector<int>>();
                c.k = jc.at("k").get<int>();
                m.nn_cells.push_back(std::move(c));
            }
            break;
    }
    return m;
}

} // namespace

std::string tree_to_json(const Tree& tree) {
    ordered_json j;
    j["format_version"] = 1;
    j["model"] = "classification-tree";
    j["method"] = std::string(1, tree.method);
    j["m0"] = tree.m0;
    j["seed"] = tree.seed;
    j["class_labels"] = tree.class_labels;
    {
        ordered_json schema = ordered_json::array();
        for (const auto& c : tree.schema.columns) {
            ordered_json jc;
            jc["name"] = c.name;
            jc["role"] = role_letter(c.role);
            schema.push_back(std::move(jc));
        }
        j["schema"] = std::move(schema);
    }
    j["levels"] = tree.level_dicts;
    {
        ordered_json p;
        p["estimated"] = tree.priors.estimated;
        p["pi"] = tree.priors.pi;
        j["priors"] = std::move(p);
    }
    {
        ordered_json c;
        c["n"] = tree.costs.n;
        c["c"] = tree.costs.c;
        j["costs"] = std::move(c);
    }
    j["alphas"] = tree.alphas;
    j["chosen_alpha"] = tree.chosen_alpha;

    ordered_json nodes = ordered_json::array();
    for (const auto& node : tree.nodes) {
        ordered_json jn;
        jn["depth"] = node.depth;
        jn["left"] = node.left;
        jn["right"] = node.right;
        jn["r_leaf"] = node.r_leaf;
        {
            ordered_json js;
            js["counts"] = node.stats.counts;
            js["n"] = node.stats.n;
            js["p_jt"] = node.stats.p_jt;
            js["p_t"] = node.stats.p_t;
            js["p_cond"] = node.stats.p_cond;
            js["present"] = node.stats.classes_present;
            jn["stats"] = std::move(js);
        }
        {
            ordered_json js;
            js["path"] = path_name(node.sel.path);
            js["var1"] = node.sel.var1;
            js["var2"] = node.sel.var2;
            js["stat"] = stat_to_json(node.sel.stat);
            jn["sel"] = std::move(js);
        }
        if (node.split) {
            ordered_json js;
            js["kind"] = split_kind_name(node.split->kind);
            js["col"] = node.split->col;
            js["col2"] = node.split->col2;
            js["threshold"] = node.split->threshold;
            js["a1"] = node.split->a1;
            js["a2"] = node.split->a2;
            js["level_set"] = node.split->level_set;
            js["objective"] = node.split->objective;
            jn["split"] = std::move(js);
        } else {
            jn["split"] = nullptr;
        }
        jn["model"] = model_to_json(node.model);
        nodes.push_back(std::move(jn));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(2) + "\n";
}

Tree tree_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("cannot parse model file: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw DataError("unsupported model format version");
        if (j.at("model").get<std::string>() != "classification-tree")
            throw DataError("model file does not hold a classification tree");
        Tree tree;
        tree.method = j.at("method").get<std::string>().at(0);
        tree.m0 = j.at("m0").get<int>();
        tree.seed = j.at("seed").get<std::uint64_t>();
        tree.class_labels = j.at("class_labels").get<std::vector<std::string>>();
        for (const auto& jc : j.at("schema")) {
            SchemaColumn c;
            c.name = jc.at("name").get<std::string>();
            c.role = role_from_letter(jc.at("role").get<std::string>());
            tree.schema.columns.push_back(std::move(c));
        }
        tree.level_dicts = j.at("levels").get<std::vector<std::vector<std::string>>>();
        tree.priors.estimated = j.at("priors").at("estimated").get<bool>();
        tree.priors.pi = j.at("priors").at("pi").get<std::vector<double>>();
        tree.costs.n = j.at("costs").at("n").get<int>();
        tree.costs.c = j.at("costs").at("c").get<std::vector<double>>();
        tree.alphas = j.at("alphas").get<std::vector<double>>();
        tree.chosen_alpha = j.at("chosen_alpha").get<double>();
        for (const auto& jn : j.at("nodes")) {
            TreeNode node;
            node.depth = jn.at("depth").get<int>();
            node.left = jn.at("left").get<int>();
            node.right = jn.at("right").get<int>();
            node.r_leaf = jn.at("r_leaf").get<double>();
            const auto& js = jn.at("stats");
            node.stats.counts = js.at("counts").get<std::vector<std::int64_t>>();
            node.stats.n = js.at("n").get<std::int64_t>();
            node.stats.p_jt = js.at("p_jt").get<std::vector<double>>();
            node.stats.p_t = js.at("p_t").get<double>();
            node.stats.p_cond = js.at("p_cond").get<std::vector<double>>();
            node.stats.classes_present = js.at("present").get<int>();
            const auto& jsel = jn.at("sel");
            node.sel.path = path_from_name(jsel.at("path").get<std::string>());
            node.sel.var1 = jsel.at("var1").get<int>();
            node.sel.var2 = jsel.at("var2").get<int>();
            node.sel.stat = stat_from_json(jsel.at("stat"));
            if (!jn.at("split").is_null()) {
                const auto& jsp = jn.at("split");
                SplitDecision s;
                s.kind = split_kind_from_name(jsp.at("kind").get<std::string>());
                s.col = jsp.at("col").get<int>();
                s.col2 = jsp.at("col2").get<int>();
                s.threshold = jsp.at("threshold").get<double>();
                s.a1 = jsp.at("a1").get<double>();
                s.a2 = jsp.at("a2").get<double>();
                s.level_set = jsp.at("level_set").get<std::vector<std::int32_t>>();
                s.objective = jsp.at("objective").get<double>();
                node.split = std::move(s);
            }
            node.model = model_from_json(jn.at("model"));
            tree.nodes.push_back(std::move(node));
        }
        if (tree.nodes.empty()) throw DataError("model file holds no nodes");
        for (const auto& node : tree.nodes) {
            if (node.is_leaf() != (node.right < 0) || (!node.is_leaf() && !node.split))
                throw DataError("inconsistent node links in model file");
            if (node.left >= static_cast<int>(tree.nodes.size()) ||
                node.right >= static_cast<int>(tree.nodes.size()))
                throw DataError("node link out of range in model file");
        }
        return tree;
    } catch (const ordered_json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

void save_tree(const Tree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << tree_to_json(tree);
    if (!out) throw DataError("failed writing '" + path + "'");
}

Tree load_tree(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return tree_from_json(buf.str());
}

} // namespace chitree
