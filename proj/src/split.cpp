#include "chitree/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace chitree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exhaustive subset enumeration bound for the all-categorical two-level
// search; beyond this many levels the ordered-prefix restriction is used.
constexpr int kMaxExhaustiveLevels = 17;

// Weighted impurity contribution of one child: (n_child / n_node) * gini.
class ImpurityCalc {
public:
    ImpurityCalc(const std::vector<double>& w, std::int64_t n_node)
        : w_(&w), n_node_(static_cast<double>(n_node)) {}

    double term(std::span<const std::int64_t> counts, std::int64_t n_child) const {
        if (n_child <= 0) return 0.0;
        double s = 0.0, ss = 0.0;
        for (std::size_t j = 0; j < w_->size(); ++j) {
            const double m = (*w_)[j] * static_cast<double>(counts[j]);
            s += m;
            ss += m * m;
        }
        if (s <= 0.0) return 0.0;
        return (static_cast<double>(n_child) / n_node_) * (1.0 - ss / (s * s));
    }

private:
    const std::vector<double>* w_;
    double n_node_;
};

bool lex_less(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Present levels of a categorical column over the node, with the missing
// pseudo-level (code kMissingLevel) treated as a level of its own.
struct CatView {
    std::vector<std::int32_t> codes;               // present level codes, ascending
    std::vector<int> level_of_slot;                // per node row slot
    std::vector<std::vector<std::int64_t>> counts; // [level][class]
    std::vector<std::int64_t> level_n;
    int n_levels() const { return static_cast<int>(codes.size()); }
};

CatView make_cat_view(const TrainContext& ctx, std::span<const std::int32_t> rows, int col) {
    const Column& c = ctx.data->column(col);
    const auto& ycodes = ctx.data->class_codes();
    const int n_classes = ctx.data->n_classes();
    CatView v;
    std::vector<int> map(c.levels.size() + 1, -1); // slot n.levels() is the missing level
    auto slot_of_code = [&](std::int32_t code) {
        return code == kMissingLevel ? static_cast<int>(c.levels.size()) : code;
    };
    for (auto r : rows) {
        const int s = slot_of_code(c.codes[r]);
        if (map[s] < 0) map[s] = 0;
    }
    for (std::int32_t code = 0; code < static_cast<std::int32_t>(c.levels.size()); ++code) {
        if (map[code] == 0) {
            map[code] = v.n_levels();
            v.codes.push_back(code);
        }
    }
    if (map[c.levels.size()] == 0) {
        map[c.levels.size()] = v.n_levels();
        v.codes.push_back(kMissingLevel);
    }
    v.counts.assign(v.codes.size(), std::vector<std::int64_t>(n_classes, 0));
    v.level_n.assign(v.codes.size(), 0);
    v.level_of_slot.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int l = map[slot_of_code(c.codes[rows[i]])];
        v.level_of_slot[i] = l;
        ++v.counts[l][ycodes[rows[i]]];
        ++v.level_n[l];
    }
    return v;
}

// Tie rank placing the missing pseudo-level after every real level.
int level_rank(std::int32_t code) {
    return code == kMissingLevel ? std::numeric_limits<int>::max() : code;
}

// argmin_i sum_j C(i|j) w_j counts_j with ties to the smallest class.
int pivot_class(std::span<const std::int64_t> counts, const std::vector<double>& w,
                const CostMatrix& costs) {
    int best = 0;
    double best_cost = kInf;
    for (int i = 0; i < costs.n; ++i) {
        double cst = 0.0;
        for (int j = 0; j < costs.n; ++j)
            cst += costs(i, j) * w[j] * static_cast<double>(counts[j]);
        if (cst < best_cost) {
            best_cost = cst;
            best = i;
        }
    }
    return best;
}

// Smallest class code with a positive count.
int first_present_class(std::span<const std::int64_t> counts) {
    for (std::size_t j = 0; j < counts.size(); ++j)
        if (counts[j] > 0) return static_cast<int>(j);
    return 0;
}

std::vector<std::int64_t> column_totals(const std::vector<std::vector<std::int64_t>>& counts,
                                        int n_classes) {
    std::vector<std::int64_t> tot(n_classes, 0);
    for (const auto& row : counts)
        for (int j = 0; j < n_classes; ++j) tot[j] += row[j];
    return tot;
}

// Order the child-present levels by non-decreasing weighted share of the
// pivot class; the share rule reduces to the plain class-1 proportion under
// estimated priors.  `counts` may be child-restricted.
std::vector<int> share_ordered_levels(const CatView& view,
                                      const std::vector<std::vector<std::int64_t>>& counts,
                                      const std::vector<double>& w, int pivot) {
    struct Entry {
        int level;
        double share;
    };
    std::vector<Entry> entries;
    for (int l = 0; l < view.n_levels(); ++l) {
        double total = 0.0, mass = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double m = w[j] * static_cast<double>(counts[l][j]);
            total += m;
            if (static_cast<int>(j) == pivot) mass = m;
        }
        std::int64_t n = 0;
        for (auto c : counts[l]) n += c;
        if (n > 0) entries.push_back({l, total > 0.0 ? mass / total : 0.0});
    }
    std::stable_sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
        if (a.share != b.share) return a.share < b.share;
        return level_rank(view.codes[a.level]) < level_rank(view.codes[b.level]);
    });
    std::vector<int> order;
    order.reserve(entries.size());
    for (const auto& e : entries) order.push_back(e.level);
    return order;
}

std::vector<std::int32_t> sorted_codes_of(const CatView& view, std::span<const int> levels) {
    std::vector<std::int32_t> out;
    out.reserve(levels.size());
    for (int l : levels) out.push_back(view.codes[l]);
    std::sort(out.begin(), out.end());
    return out;
}

struct PrefixBest {
    double value = kInf;
    int count = 0; // levels in the best prefix; 0 when no candidate was scanned
};

// Minimum two-grandchild impurity over prefixes of `order`, evaluated on
// child-restricted counts.  The full prefix (child left unsplit) is included;
// proper_only restricts to prefixes that leave both sides non-empty.
PrefixBest best_prefix(const std::vector<int>& order,
                       const std::vector<std::vector<std::int64_t>>& counts,
                       const ImpurityCalc& calc, int n_classes, bool proper_only) {
    std::vector<std::int64_t> total(n_classes, 0);
    std::int64_t total_n = 0;
    for (int l : order) {
        for (int j = 0; j < n_classes; ++j) total[j] += counts[l][j];
        std::int64_t n = 0;
        for (int j = 0; j < n_classes; ++j) n += counts[l][j];
        total_n += n;
    }
    PrefixBest best;
    if (order.empty()) {
        best.value = 0.0;
        return best;
    }
    std::vector<std::int64_t> cum(n_classes, 0), rest(n_classes, 0);
    std::int64_t cum_n = 0;
    const int limit = proper_only ? static_cast<int>(order.size()) - 1
                                  : static_cast<int>(order.size());
    for (int i = 0; i < limit; ++i) {
        const int l = order[i];
        std::int64_t ln = 0;
        for (int j = 0; j < n_classes; ++j) {
            cum[j] += counts[l][j];
            ln += counts[l][j];
        }
        cum_n += ln;
        for (int j = 0; j < n_classes; ++j) rest[j] = total[j] - cum[j];
        const double v = calc.term(cum, cum_n) + calc.term(rest, total_n - cum_n);
        if (v < best.value) {
            best.value = v;
            best.count = i + 1;
        }
    }
    if (best.count == 0 && proper_only) best.value = kInf;
    return best;
}

} // namespace

double two_node_impurity(const NodeClassStats& left, const NodeClassStats& right) {
    const double n = static_cast<double>(left.n + right.n);
    if (n <= 0.0) return 0.0;
    double v = 0.0;
    if (left.n > 0) v += (static_cast<double>(left.n) / n) * gini(left);
    if (right.n > 0) v += (static_cast<double>(right.n) / n) * gini(right);
    return v;
}

double four_node_impurity(const NodeClassStats& ll, const NodeClassStats& lr,
                          const NodeClassStats& rl, const NodeClassStats& rr) {
    const double n = static_cast<double>(ll.n + lr.n + rl.n + rr.n);
    if (n <= 0.0) return 0.0;
    double v = 0.0;
    for (const NodeClassStats* s : {&ll, &lr, &rl, &rr})
        if (s->n > 0) v += (static_cast<double>(s->n) / n) * gini(*s);
    return v;
}

std::vector<std::int32_t> share_order(std::span<const std::int32_t> levels,
                                         std::span<const double> share) {
    std::vector<std::size_t> idx(levels.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (share[a] != share[b]) return share[a] < share[b];
        return level_rank(levels[a]) < level_rank(levels[b]);
    });
    std::vector<std::int32_t> out;
    out.reserve(levels.size());
    for (auto i : idx) out.push_back(levels[i]);
    return out;
}

std::vector<double> restricted_points(std::span<const double> sorted_values,
                                      std::int64_t n_train, int m0) {
    const std::int64_t n = static_cast<std::int64_t>(sorted_values.size());
    const std::int64_t m2 = static_cast<std::int64_t>(2) * m0;
    if (n < m2) return {};
    const double f = std::min(100.0 / static_cast<double>(n_train), 1.0);
    const std::int64_t d =
        std::min(std::max(static_cast<std::int64_t>(std::floor(f * static_cast<double>(n))),
                          static_cast<std::int64_t>(9)),
                 n - m2 + 1);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(d));
    for (std::int64_t j = 1; j <= d; ++j) {
        const std::int64_t i = m0 + (j * (n - m2)) / (d + 1); // 1-based order statistic
        const double v = sorted_values[i - 1];
        if (out.empty() || v != out.back()) out.push_back(v);
    }
    return out;
}

std::optional<SplitDecision> split_numeric(const TrainContext& ctx,
                                           std::span<const std::int32_t> rows, int col, int m0) {
    const Column& c = ctx.data->column(col);
    const auto& ycodes = ctx.data->class_codes();
    const int n_classes = ctx.data->n_classes();
    const ImpurityCalc calc(ctx.class_weight, static_cast<std::int64_t>(rows.size()));

    std::vector<std::pair<double, int>> vals; // (value, class)
    std::vector<std::int64_t> missing_counts(n_classes, 0), totals(n_classes, 0);
    std::int64_t n_missing = 0;
    for (auto r : rows) {
        const double v = c.values[r];
        ++totals[ycodes[r]];
        if (std::isnan(v)) {
            ++missing_counts[ycodes[r]];
            ++n_missing;
        } else {
            vals.emplace_back(v, ycodes[r]);
        }
    }
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    std::sort(vals.begin(), vals.end());

    std::optional<SplitDecision> best;
    double best_value = kInf;

    // threshold candidates: midpoints of consecutive distinct values, with
    // missing rows pinned to the left child
    std::vector<std::int64_t> left = missing_counts;
    std::int64_t n_left = n_missing;
    std::vector<std::int64_t> right(n_classes);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        ++left[vals[i].second];
        ++n_left;
        if (i + 1 >= vals.size() || vals[i + 1].first == vals[i].first) continue;
        for (int j = 0; j < n_classes; ++j) right[j] = totals[j] - left[j];
        const double v = calc.term(left, n_left) + calc.term(right, n - n_left);
        if (v < best_value) {
            best_value = v;
            SplitDecision d;
            d.kind = SplitKind::NumericThreshold;
            d.col = col;
            d.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
            d.objective = v;
            best = d;
        }
    }

    // split on missingness itself
    if (n_missing >= m0 && n - n_missing >= m0) {
        std::vector<std::int64_t> nonmissing(n_classes);
        for (int j = 0; j < n_classes; ++j) nonmissing[j] = totals[j] - missing_counts[j];
        const double v = calc.term(missing_counts, n_missing) + calc.term(nonmissing, n - n_missing);
        if (v < best_value) {
            best_value = v;
            SplitDecision d;
            d.kind = SplitKind::Missingness;
            d.col = col;
            d.objective = v;
            best = d;
        }
    }
    return best;
}

namespace {

// Evaluate one categorical left-set candidate given per-level class counts.
struct CatScanState {
    const CatView* view;
    const ImpurityCalc* calc;
    std::vector<std::int64_t> totals;
    std::int64_t n = 0;
    int n_classes = 0;

    double value_of(const std::vector<char>& in_left) const {
        std::vector<std::int64_t> left(n_classes, 0);
        std::int64_t n_left = 0;
        for (int l = 0; l < view->n_levels(); ++l) {
            if (!in_left[l]) continue;
            for (int j = 0; j < n_classes; ++j) left[j] += view->counts[l][j];
            n_left += view->level_n[l];
        }
        std::vector<std::int64_t> right(n_classes);
        for (int j = 0; j < n_classes; ++j) right[j] = totals[j] - left[j];
        return calc->term(left, n_left) + calc->term(right, n - n_left);
    }
};

std::optional<SplitDecision> commit_cat(int col, std::vector<std::int32_t> set, double value) {
    SplitDecision d;
    d.kind = SplitKind::CategoricalSet;
    d.col = col;
    std::sort(set.begin(), set.end());
    d.level_set = std::move(set);
    d.objective = value;
    return d;
}

} // namespace

std::optional<SplitDecision> split_categorical(const TrainContext& ctx,
                                               std::span<const std::int32_t> rows, int col) {
    const int n_classes = ctx.data->n_classes();
    const CatView view = make_cat_view(ctx, rows, col);
    const int nl = view.n_levels();
    if (nl < 2) return std::nullopt;
    const ImpurityCalc calc(ctx.class_weight, static_cast<std::int64_t>(rows.size()));
    CatScanState scan{&view, &calc, column_totals(view.counts, n_classes),
                      static_cast<std::int64_t>(rows.size()), n_classes};

    int present = 0;
    for (int j = 0; j < n_classes; ++j)
        if (scan.totals[j] > 0) ++present;

    double best_value = kInf;
    std::vector<std::int32_t> best_set;

    auto consider = [&](const std::vector<int>& levels_left) {
        std::vector<char> mask(nl, 0);
        for (int l : levels_left) mask[l] = 1;
        const double v = scan.value_of(mask);
        if (v < best_value ||
            (v == best_value && lex_less(sorted_codes_of(view, levels_left), best_set))) {
            best_value = v;
            best_set = sorted_codes_of(view, levels_left);
        }
    };

    if (present == 2) {
        // ordered-share prefix scan; optimal for two classes
        const int pivot = first_present_class(scan.totals);
        const auto order = share_ordered_levels(view, view.counts, ctx.class_weight, pivot);
        std::vector<int> prefix;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            prefix.push_back(order[i]);
            consider(prefix);
        }
    } else if (nl <= 11) {
        // exhaustive over subsets containing the first level
        const std::uint32_t m = 1u << (nl - 1);
        std::vector<int> levels;
        for (std::uint32_t mask = 0; mask + 1 < m; ++mask) {
            levels.clear();
            levels.push_back(0);
            for (int b = 0; b < nl - 1; ++b)
                if (mask & (1u << b)) levels.push_back(b + 1);
            consider(levels);
        }
    } else if (present <= 11 && nl > 20) {
        // map each level to its cost-minimizing class, search the mapping
        std::vector<int> level_class(nl);
        std::vector<int> classes;
        for (int l = 0; l < nl; ++l) {
            level_class[l] = pivot_class(view.counts[l], ctx.class_weight, ctx.costs);
            if (std::find(classes.begin(), classes.end(), level_class[l]) == classes.end())
                classes.push_back(level_class[l]);
        }
        std::sort(classes.begin(), classes.end());
        if (classes.size() >= 2) {
            const int k = static_cast<int>(classes.size());
            const std::uint32_t m = 1u << (k - 1);
            std::vector<int> levels;
            for (std::uint32_t mask = 0; mask + 1 < m; ++mask) {
                std::vector<char> cls_left(n_classes, 0);
                cls_left[classes[0]] = 1;
                for (int b = 0; b < k - 1; ++b)
                    if (mask & (1u << b)) cls_left[classes[b + 1]] = 1;
                levels.clear();
                for (int l = 0; l < nl; ++l)
                    if (cls_left[level_class[l]]) levels.push_back(l);
                if (levels.empty() || static_cast<int>(levels.size()) == nl) continue;
                consider(levels);
            }
        }
        if (best_set.empty()) {
            // all levels map to one class; fall through to the ordered scan below
            const int pivot = pivot_class(scan.totals, ctx.class_weight, ctx.costs);
            const auto order = share_ordered_levels(view, view.counts, ctx.class_weight, pivot);
            std::vector<int> prefix;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                prefix.push_back(order[i]);
                consider(prefix);
            }
        }
    } else {
        // discriminant scores of the level indicator vectors
        Eigen::VectorXd p(nl);
        for (int l = 0; l < nl; ++l)
            p(l) = static_cast<double>(view.level_n[l]) / static_cast<double>(rows.size());
        Eigen::MatrixXd cov = -p * p.transpose();
        for (int l = 0; l < nl; ++l) cov(l, l) += p(l);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dec(cov);
        const double lmax = dec.eigenvalues().maxCoeff();
        std::vector<int> keep;
        for (int i = 0; i < nl; ++i)
            if (dec.eigenvalues()(i) > 1e-10 * std::max(lmax, 1e-300)) keep.push_back(i);

        std::vector<double> score;
        bool have_scores = false;
        if (!keep.empty()) {
            Eigen::MatrixXd proj(nl, static_cast<Eigen::Index>(keep.size()));
            for (std::size_t i = 0; i < keep.size(); ++i)
                proj.col(static_cast<Eigen::Index>(i)) = dec.eigenvectors().col(keep[i]);
            Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), proj.cols());
            std::vector<int> labels(rows.size());
            const auto& ycodes = ctx.data->class_codes();
            for (std::size_t i = 0; i < rows.size(); ++i) {
                pts.row(static_cast<Eigen::Index>(i)) = proj.row(view.level_of_slot[i]);
                labels[i] = ycodes[rows[i]];
            }
            const Eigen::VectorXd dir = lda_leading_direction(pts, labels);
            if (!dir.isZero(0.0)) {
                const Eigen::VectorXd level_score = proj * dir;
                score.assign(level_score.data(), level_score.data() + nl);
                have_scores = true;
            }
        }
        std::vector<int> order(nl);
        for (int l = 0; l < nl; ++l) order[l] = l;
        if (have_scores) {
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                if (score[a] != score[b]) return score[a] < score[b];
                return level_rank(view.codes[a]) < level_rank(view.codes[b]);
            });
        } else {
            // indicator geometry carries no signal; order by pivot-class share
            const int pivot = pivot_class(scan.totals, ctx.class_weight, ctx.costs);
            order = share_ordered_levels(view, view.counts, ctx.class_weight, pivot);
        }
        std::vector<int> prefix;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            prefix.push_back(order[i]);
            // levels with identical scores move together
            if (have_scores && score[order[i + 1]] == score[order[i]]) continue;
            consider(prefix);
        }
    }

    if (best_set.empty()) return std::nullopt;
    return commit_cat(col, best_set, best_value);
}

namespace {

struct NumPairView {
    std::vector<double> value;          // per slot, NaN when missing
    std::vector<double> sorted_present; // ascending non-missing values
    std::vector<double> grid;           // restricted thresholds
    std::vector<int> tbin;              // per slot: first grid index admitting the row left
};

NumPairView make_num_view(const TrainContext& ctx, std::span<const std::int32_t> rows, int col,
                          int m0) {
    const Column& c = ctx.data->column(col);
    NumPairView v;
    v.value.reserve(rows.size());
    for (auto r : rows) v.value.push_back(c.values[r]);
    for (double x : v.value)
        if (!std::isnan(x)) v.sorted_present.push_back(x);
    std::sort(v.sorted_present.begin(), v.sorted_present.end());
    v.grid = restricted_points(v.sorted_present, static_cast<std::int64_t>(ctx.data->n_rows()), m0);
    v.tbin.resize(v.value.size());
    for (std::size_t i = 0; i < v.value.size(); ++i) {
        const double x = v.value[i];
        if (std::isnan(x)) {
            v.tbin[i] = 0; // missing rows go left of every threshold
        } else {
            v.tbin[i] = static_cast<int>(
                std::lower_bound(v.grid.begin(), v.grid.end(), x) - v.grid.begin());
        }
    }
    return v;
}

// Midpoint between c and the next distinct node value above it.
double midpoint_above(const std::vector<double>& sorted_present, double c) {
    auto it = std::upper_bound(sorted_present.begin(), sorted_present.end(), c);
    if (it == sorted_present.end()) return c;
    return 0.5 * (c + *it);
}

// Best threshold pair value for one orientation of the numeric two-level
// search: top variable split at each grid value, each child refined by the
// best bottom-variable grid cut.
struct DirectionBest {
    double value = kInf;
    double top_c = 0.0;
    bool valid = false;
};

DirectionBest numeric_direction(const TrainContext& ctx, std::span<const std::int32_t> rows,
                                const NumPairView& top, const NumPairView& bot, int m0) {
    DirectionBest best;
    const int n_classes = ctx.data->n_classes();
    const auto& ycodes = ctx.data->class_codes();
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    const ImpurityCalc calc(ctx.class_weight, n);
    const int nbins = static_cast<int>(bot.grid.size()) + 1;

    // histograms over (class, bottom bin)
    std::vector<std::int64_t> h_total(static_cast<std::size_t>(n_classes) * nbins, 0);
    std::vector<std::int64_t> h_left(static_cast<std::size_t>(n_classes) * nbins, 0);
    std::vector<std::size_t> order; // slots sorted by top value, non-missing only
    std::int64_t n_left = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int cls = ycodes[rows[i]];
        ++h_total[static_cast<std::size_t>(cls) * nbins + bot.tbin[i]];
        if (std::isnan(top.value[i])) {
            ++h_left[static_cast<std::size_t>(cls) * nbins + bot.tbin[i]];
            ++n_left;
        } else {
            order.push_back(i);
        }
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return top.value[a] < top.value[b]; });

    // best bottom refinement of one child given its histogram
    std::vector<std::int64_t> cum(n_classes), rest(n_classes), child(n_classes);
    auto best_bottom = [&](const std::vector<std::int64_t>& h, bool left_side) {
        std::int64_t n_child = 0;
        for (int j = 0; j < n_classes; ++j) {
            std::int64_t s = 0;
            for (int b = 0; b < nbins; ++b) {
                s += left_side ? h[static_cast<std::size_t>(j) * nbins + b]
                               : h_total[static_cast<std::size_t>(j) * nbins + b] -
                                     h[static_cast<std::size_t>(j) * nbins + b];
            }
            child[j] = s;
            n_child += s;
        }
        if (n_child == 0) return 0.0;
        double best_v = calc.term(child, n_child); // unsplit child when no cut helps land outside
        std::fill(cum.begin(), cum.end(), 0);
        std::int64_t cum_n = 0;
        for (int b = 0; b + 1 < nbins; ++b) {
            for (int j = 0; j < n_classes; ++j) {
                const std::int64_t v = left_side
                                           ? h[static_cast<std::size_t>(j) * nbins + b]
                                           : h_total[static_cast<std::size_t>(j) * nbins + b] -
                                                 h[static_cast<std::size_t>(j) * nbins + b];
                cum[j] += v;
                cum_n += v;
            }
            for (int j = 0; j < n_classes; ++j) rest[j] = child[j] - cum[j];
            const double v = calc.term(cum, cum_n) + calc.term(rest, n_child - cum_n);
            if (v < best_v) best_v = v;
        }
        return best_v;
    };

    std::size_t ptr = 0;
    for (double c : top.grid) {
        while (ptr < order.size() && top.value[order[ptr]] <= c) {
            const std::size_t i = order[ptr];
            const int cls = ycodes[rows[i]];
            ++h_left[static_cast<std::size_t>(cls) * nbins + bot.tbin[i]];
            ++n_left;
            ++ptr;
        }
        if (n_left < m0 || n - n_left < m0) continue;
        const double v = best_bottom(h_left, true) + best_bottom(h_left, false);
        if (v < best.value) {
            best.value = v;
            best.top_c = c;
            best.valid = true;
        }
    }
    return best;
}

} // namespace

std::optional<SplitDecision> split_pair_numeric(const TrainContext& ctx,
                                                std::span<const std::int32_t> rows,
                                                int col_a, int col_b, int m0) {
    const NumPairView va = make_num_view(ctx, rows, col_a, m0);
    const NumPairView vb = make_num_view(ctx, rows, col_b, m0);
    if (va.grid.empty() || vb.grid.empty()) return std::nullopt;

    const DirectionBest da = numeric_direction(ctx, rows, va, vb, m0);
    const DirectionBest db = numeric_direction(ctx, rows, vb, va, m0);
    if (!da.valid && !db.valid) return std::nullopt;

    SplitDecision d;
    d.kind = SplitKind::NumericThreshold;
    if (da.valid && (!db.valid || da.value <= db.value)) {
        d.col = col_a;
        d.threshold = midpoint_above(va.sorted_present, da.top_c);
        d.objective = da.value;
    } else {
        d.col = col_b;
        d.threshold = midpoint_above(vb.sorted_present, db.top_c);
        d.objective = db.value;
    }
    return d;
}

std::optional<SplitDecision> split_pair_mixed(const TrainContext& ctx,
                                              std::span<const std::int32_t> rows,
                                              int col_num, int col_cat, int m0) {
    const int n_classes = ctx.data->n_classes();
    const auto& ycodes = ctx.data->class_codes();
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    const ImpurityCalc calc(ctx.class_weight, n);

    const NumPairView num = make_num_view(ctx, rows, col_num, m0);
    if (num.grid.empty()) return std::nullopt;
    const CatView cat = make_cat_view(ctx, rows, col_cat);
    const int nl = cat.n_levels();
    const std::vector<std::int64_t> totals = column_totals(cat.counts, n_classes);
    int present = 0;
    for (int j = 0; j < n_classes; ++j)
        if (totals[j] > 0) ++present;
    const bool two_class = present == 2;
    const int two_class_pivot = first_present_class(totals);

    auto child_order = [&](const std::vector<std::vector<std::int64_t>>& child_counts) {
        std::vector<std::int64_t> child_tot = column_totals(child_counts, n_classes);
        const int pivot = two_class ? two_class_pivot
                                    : pivot_class(child_tot, ctx.class_weight, ctx.costs);
        return share_ordered_levels(cat, child_counts, ctx.class_weight, pivot);
    };

    // step 1: numeric on top, categorical refinement in both children
    double delta1 = kInf;
    double c_star = 0.0;
    bool have_c = false;
    {
        std::vector<std::vector<std::int64_t>> left_counts(nl,
                                                           std::vector<std::int64_t>(n_classes, 0));
        std::vector<std::vector<std::int64_t>> right_counts = cat.counts;
        std::int64_t n_left = 0;
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (std::isnan(num.value[i])) {
                const int l = cat.level_of_slot[i];
                const int cls = ycodes[rows[i]];
                ++left_counts[l][cls];
                --right_counts[l][cls];
                ++n_left;
            } else {
                order.push_back(i);
            }
        }
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return num.value[a] < num.value[b]; });
        std::size_t ptr = 0;
        for (double c : num.grid) {
            while (ptr < order.size() && num.value[order[ptr]] <= c) {
                const std::size_t i = order[ptr];
                const int l = cat.level_of_slot[i];
                const int cls = ycodes[rows[i]];
                ++left_counts[l][cls];
                --right_counts[l][cls];
                ++n_left;
                ++ptr;
            }
            if (n_left < m0 || n - n_left < m0) continue;
            const auto lorder = child_order(left_counts);
            const auto rorder = child_order(right_counts);
            const double v = best_prefix(lorder, left_counts, calc, n_classes, false).value +
                             best_prefix(rorder, right_counts, calc, n_classes, false).value;
            if (v < delta1) {
                delta1 = v;
                c_star = c;
                have_c = true;
            }
        }
    }
    if (!have_c) return std::nullopt;

    // per-level histograms over (class, numeric bin) for step 2
    const int nbins = static_cast<int>(num.grid.size()) + 1;
    std::vector<std::int64_t> level_hist(static_cast<std::size_t>(nl) * n_classes * nbins, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t at = (static_cast<std::size_t>(cat.level_of_slot[i]) * n_classes +
                                ycodes[rows[i]]) *
                                   nbins +
                               num.tbin[i];
        ++level_hist[at];
    }
    std::vector<std::int64_t> child_hist(static_cast<std::size_t>(n_classes) * nbins);
    std::vector<std::int64_t> cum(n_classes), rest(n_classes), child(n_classes);
    auto best_num_cut = [&](const std::vector<char>& level_in) {
        std::fill(child_hist.begin(), child_hist.end(), 0);
        std::int64_t n_child = 0;
        for (int l = 0; l < nl; ++l) {
            if (!level_in[l]) continue;
            for (int j = 0; j < n_classes; ++j)
                for (int b = 0; b < nbins; ++b)
                    child_hist[static_cast<std::size_t>(j) * nbins + b] +=
                        level_hist[(static_cast<std::size_t>(l) * n_classes + j) * nbins + b];
            n_child += cat.level_n[l];
        }
        if (n_child == 0) return 0.0;
        for (int j = 0; j < n_classes; ++j) {
            std::int64_t s = 0;
            for (int b = 0; b < nbins; ++b) s += child_hist[static_cast<std::size_t>(j) * nbins + b];
            child[j] = s;
        }
        double best_v = calc.term(child, n_child);
        std::fill(cum.begin(), cum.end(), 0);
        std::int64_t cum_n = 0;
        for (int b = 0; b + 1 < nbins; ++b) {
            for (int j = 0; j < n_classes; ++j) {
                const std::int64_t v = child_hist[static_cast<std::size_t>(j) * nbins + b];
                cum[j] += v;
                cum_n += v;
            }
            for (int j = 0; j < n_classes; ++j) rest[j] = child[j] - cum[j];
            const double v = calc.term(cum, cum_n) + calc.term(rest, n_child - cum_n);
            if (v < best_v) best_v = v;
        }
        return best_v;
    };

    // orderings taken from the two children of the best numeric cut
    std::vector<std::vector<std::int64_t>> low_counts(nl, std::vector<std::int64_t>(n_classes, 0));
    std::vector<std::vector<std::int64_t>> high_counts(nl, std::vector<std::int64_t>(n_classes, 0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool left = std::isnan(num.value[i]) || num.value[i] <= c_star;
        auto& counts = left ? low_counts : high_counts;
        ++counts[cat.level_of_slot[i]][ycodes[rows[i]]];
    }

    auto scan_cat_top = [&](const std::vector<int>& order, double& delta,
                            std::vector<std::int32_t>& u_set) {
        std::vector<char> level_in(nl, 0);
        std::int64_t covered = 0;
        std::vector<int> prefix;
        for (std::size_t i = 0; i < order.size(); ++i) {
            level_in[order[i]] = 1;
            covered += cat.level_n[order[i]];
            prefix.push_back(order[i]);
            if (covered >= n) continue; // the right child would be empty
            std::vector<char> level_out(nl, 0);
            for (int l = 0; l < nl; ++l) level_out[l] = level_in[l] ? 0 : 1;
            const double v = best_num_cut(level_in) + best_num_cut(level_out);
            if (v < delta) {
                delta = v;
                u_set = sorted_codes_of(cat, prefix);
            }
        }
    };

    double delta2 = kInf, delta3 = kInf;
    std::vector<std::int32_t> u_set, v_set;
    scan_cat_top(child_order(low_counts), delta2, u_set);
    scan_cat_top(child_order(high_counts), delta3, v_set);

    if (delta1 <= std::min(delta2, delta3)) {
        SplitDecision d;
        d.kind = SplitKind::NumericThreshold;
        d.col = col_num;
        d.threshold = midpoint_above(num.sorted_present, c_star);
        d.objective = delta1;
        return d;
    }
    SplitDecision d;
    d.kind = SplitKind::CategoricalSet;
    d.col = col_cat;
    if (delta2 <= delta3) {
        d.level_set = u_set;
        d.objective = delta2;
    } else {
        d.level_set = v_set;
        d.objective = delta3;
    }
    return d;
}

std::optional<SplitDecision> split_pair_categorical(const TrainContext& ctx,
                                                    std::span<const std::int32_t> rows,
                                                    int col_a, int col_b) {
    const int n_classes = ctx.data->n_classes();
    const auto& ycodes = ctx.data->class_codes();
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    const ImpurityCalc calc(ctx.class_weight, n);

    struct PassResult {
        double delta = kInf;
        std::vector<std::int32_t> set;
        bool valid = false;
    };

    auto run_pass = [&](int top_col, int bot_col) {
        PassResult res;
        const CatView top = make_cat_view(ctx, rows, top_col);
        const CatView bot = make_cat_view(ctx, rows, bot_col);
        const int ka = top.n_levels();
        const int kb = bot.n_levels();
        if (ka < 2) return res;

        // joint (top level, bottom level, class) counts
        std::vector<std::int64_t> joint(static_cast<std::size_t>(ka) * kb * n_classes, 0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t at = (static_cast<std::size_t>(top.level_of_slot[i]) * kb +
                                    bot.level_of_slot[i]) *
                                       n_classes +
                                   ycodes[rows[i]];
            ++joint[at];
        }
        const std::vector<std::int64_t> top_totals = column_totals(top.counts, n_classes);
        int present = 0;
        for (int j = 0; j < n_classes; ++j)
            if (top_totals[j] > 0) ++present;
        const bool two_class = present == 2;
        const int node_pivot = two_class ? first_present_class(top_totals)
                                         : pivot_class(top_totals, ctx.class_weight, ctx.costs);
        // node-level ordering of bottom levels for the multi-class scans
        const std::vector<int> bot_node_order =
            share_ordered_levels(bot, bot.counts, ctx.class_weight, node_pivot);

        std::vector<std::vector<std::int64_t>> childL(kb, std::vector<std::int64_t>(n_classes));
        std::vector<std::vector<std::int64_t>> childR(kb, std::vector<std::int64_t>(n_classes));
        auto eval_u = [&](const std::vector<int>& u_levels) {
            std::vector<char> in_u(ka, 0);
            for (int l : u_levels) in_u[l] = 1;
            std::int64_t n_left = 0;
            for (int lb = 0; lb < kb; ++lb) {
                for (int j = 0; j < n_classes; ++j) {
                    std::int64_t s = 0;
                    for (int la = 0; la < ka; ++la) {
                        if (!in_u[la]) continue;
                        s += joint[(static_cast<std::size_t>(la) * kb + lb) * n_classes + j];
                    }
                    childL[lb][j] = s;
                    childR[lb][j] = bot.counts[lb][j] - s;
                    n_left += s;
                }
            }
            if (n_left == 0 || n_left == n) return kInf;
            std::vector<int> lorder, rorder;
            if (two_class) {
                lorder = share_ordered_levels(bot, childL, ctx.class_weight, node_pivot);
                rorder = share_ordered_levels(bot, childR, ctx.class_weight, node_pivot);
            } else {
                for (int l : bot_node_order) {
                    std::int64_t ln = 0, rn = 0;
                    for (int j = 0; j < n_classes; ++j) {
                        ln += childL[l][j];
                        rn += childR[l][j];
                    }
                    if (ln > 0) lorder.push_back(l);
                    if (rn > 0) rorder.push_back(l);
                }
            }
            return best_prefix(lorder, childL, calc, n_classes, false).value +
                   best_prefix(rorder, childR, calc, n_classes, false).value;
        };

        auto consider = [&](const std::vector<int>& u_levels) {
            const double v = eval_u(u_levels);
            if (v < res.delta ||
                (v == res.delta && res.valid && lex_less(sorted_codes_of(top, u_levels), res.set))) {
                res.delta = v;
                res.set = sorted_codes_of(top, u_levels);
                res.valid = true;
            }
        };

        const bool exhaustive = (two_class || ka <= 5) && ka <= kMaxExhaustiveLevels;
        if (exhaustive) {
            const std::uint32_t m = 1u << (ka - 1);
            std::vector<int> levels;
            for (std::uint32_t mask = 0; mask + 1 < m; ++mask) {
                levels.clear();
                levels.push_back(0);
                for (int b = 0; b < ka - 1; ++b)
                    if (mask & (1u << b)) levels.push_back(b + 1);
                consider(levels);
            }
        } else {
            const auto order = share_ordered_levels(top, top.counts, ctx.class_weight, node_pivot);
            std::vector<int> prefix;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                prefix.push_back(order[i]);
                consider(prefix);
            }
        }
        return res;
    };

    const PassResult pa = run_pass(col_a, col_b);
    const PassResult pb = run_pass(col_b, col_a);
    if (!pa.valid && !pb.valid) return std::nullopt;

    SplitDecision d;
    d.kind = SplitKind::CategoricalSet;
    if (pa.valid && (!pb.valid || pa.delta <= pb.delta)) {
        d.col = col_a;
        d.level_set = pa.set;
        d.objective = pa.delta;
    } else {
        d.col = col_b;
        d.level_set = pb.set;
        d.objective = pb.delta;
    }
    return d;
}

SelectionThresholds selection_thresholds(int k, int k1) {
    SelectionThresholds t;
    t.k = k;
    t.k1 = k1;
    if (k >= 1) t.alpha = 0.05 / static_cast<double>(k);
    if (k >= 2) t.beta = 0.05 / (static_cast<double>(k) * (k - 1));
    if (k1 >= 2) t.gamma = 0.05 / (static_cast<double>(k1) * (k1 - 1));
    return t;
}

namespace {

struct SelectionDetail {
    SelectionThresholds th;
    std::vector<int> cand;  // non-constant candidate columns, ascending
    std::vector<double> wm; // aligned main-effect statistics
    SelectionResult sel;
};

SelectionDetail select_detail(const TrainContext& ctx, std::span<const std::int32_t> rows,
                              const SplitConfig& config) {
    SelectionDetail d;
    const auto& preds = ctx.data->predictors();
    for (int col : preds) {
        if (!config.allowed.empty() &&
            std::find(config.allowed.begin(), config.allowed.end(), col) == config.allowed.end())
            continue;
        if (!constant_in_node(*ctx.data, col, rows)) d.cand.push_back(col);
    }
    int k1 = 0;
    for (int col : d.cand)
        if (ctx.data->column(col).role == Role::Numeric) ++k1;
    d.th = selection_thresholds(static_cast<int>(d.cand.size()), k1);
    if (d.cand.empty()) return d;

    if (d.cand.size() == 1) {
        d.wm = {kInf};
        d.sel.path = SelectionPath::Main;
        d.sel.var1 = d.cand[0];
        d.sel.stat = kInf;
        return d;
    }
    d.wm.reserve(d.cand.size());
    for (int col : d.cand) d.wm.push_back(main_effect_stat(ctx, rows, col));
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.wm.size(); ++i)
        if (d.wm[i] > d.wm[best]) best = i;
    if (d.wm[best] > chi2_1_upper_quantile(d.th.alpha)) {
        d.sel.path = SelectionPath::Main;
        d.sel.var1 = d.cand[best];
        d.sel.stat = d.wm[best];
        return d;
    }
    if (config.interaction_enabled) {
        double best_wi = -kInf;
        int bi = -1, bj = -1;
        for (std::size_t i = 0; i < d.cand.size(); ++i) {
            for (std::size_t j = i + 1; j < d.cand.size(); ++j) {
                const double wi = interaction_stat(ctx, rows, d.cand[i], d.cand[j]);
                if (wi > best_wi) {
                    best_wi = wi;
                    bi = d.cand[i];
                    bj = d.cand[j];
                }
            }
        }
        if (bi >= 0 && best_wi > chi2_1_upper_quantile(d.th.beta)) {
            d.sel.path = SelectionPath::Interaction;
            d.sel.var1 = bi;
            d.sel.var2 = bj;
            d.sel.stat = best_wi;
            return d;
        }
    }
    d.sel.path = SelectionPath::Fallback;
    d.sel.var1 = d.cand[best];
    d.sel.stat = d.wm[best];
    return d;
}

std::optional<SplitDecision> build_univariate(const TrainContext& ctx,
                                              std::span<const std::int32_t> rows, int col,
                                              int m0) {
    if (ctx.data->column(col).role == Role::Numeric) return split_numeric(ctx, rows, col, m0);
    return split_categorical(ctx, rows, col);
}

// Univariate rescue when a selected pair admits no two-level search: split on
// the member with the larger main-effect statistic, then the other.
std::optional<SplitDecision> pair_fallback(const TrainContext& ctx,
                                           std::span<const std::int32_t> rows,
                                           const SelectionDetail& detail, int v1, int v2,
                                           int m0) {
    double w1 = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i < detail.cand.size(); ++i) {
        if (detail.cand[i] == v1) w1 = detail.wm[i];
        if (detail.cand[i] == v2) w2 = detail.wm[i];
    }
    const int first = w1 >= w2 ? v1 : v2;
    const int second = first == v1 ? v2 : v1;
    if (auto s = build_univariate(ctx, rows, first, m0)) return s;
    return build_univariate(ctx, rows, second, m0);
}

} // namespace

SelectionResult select_variables(const TrainContext& ctx, std::span<const std::int32_t> rows,
                                 const SplitConfig& config) {
    return select_detail(ctx, rows, config).sel;
}

SplitOutcome choose_split(const TrainContext& ctx, std::span<const std::int32_t> rows,
                          const SplitConfig& config) {
    SplitOutcome out;
    const int m0 = std::max(config.m0, 1);
    SelectionDetail detail = select_detail(ctx, rows, config);
    out.selection = detail.sel;
    if (detail.sel.path == SelectionPath::None) return out;

    if (detail.sel.path == SelectionPath::Main) {
        out.split = build_univariate(ctx, rows, detail.sel.var1, m0);
        return out;
    }

    if (detail.sel.path == SelectionPath::Interaction) {
        const int v1 = detail.sel.var1;
        const int v2 = detail.sel.var2;
        const bool num1 = ctx.data->column(v1).role == Role::Numeric;
        const bool num2 = ctx.data->column(v2).role == Role::Numeric;
        if (num1 && num2) out.split = split_pair_numeric(ctx, rows, v1, v2, m0);
        else if (!num1 && !num2) out.split = split_pair_categorical(ctx, rows, v1, v2);
        else if (num1) out.split = split_pair_mixed(ctx, rows, v1, v2, m0);
        else out.split = split_pair_mixed(ctx, rows, v2, v1, m0);
        if (!out.split) out.split = pair_fallback(ctx, rows, detail, v1, v2, m0);
        return out;
    }

    // fallback reached: try the linear phase first when enabled
    if (config.linear_enabled && detail.th.k1 >= 2) {
        const NodeClassStats stats = node_stats(ctx, rows);
        double best_wl = -kInf;
        int b1 = -1, b2 = -1;
        DiscriminantDirection best_dir;
        for (std::size_t i = 0; i < detail.cand.size(); ++i) {
            if (ctx.data->column(detail.cand[i]).role != Role::Numeric) continue;
            for (std::size_t j = i + 1; j < detail.cand.size(); ++j) {
                if (ctx.data->column(detail.cand[j]).role != Role::Numeric) continue;
                const LinearStat ls = linear_stat(ctx, rows, stats, detail.cand[i], detail.cand[j]);
                if (ls.w > best_wl) {
                    best_wl = ls.w;
                    b1 = detail.cand[i];
                    b2 = detail.cand[j];
                    best_dir = ls.direction;
                }
            }
        }
        if (b1 >= 0 && best_dir.valid && best_wl > chi2_1_upper_quantile(detail.th.gamma)) {
            // threshold on the projected coordinate by the two-node impurity scan
            const Column& ca = ctx.data->column(b1);
            const Column& cb = ctx.data->column(b2);
            const auto& ycodes = ctx.data->class_codes();
            const int n_classes = ctx.data->n_classes();
            const ImpurityCalc calc(ctx.class_weight, static_cast<std::int64_t>(rows.size()));
            std::vector<std::pair<double, int>> zs;
            std::vector<std::int64_t> missing(n_classes, 0), totals(n_classes, 0);
            std::int64_t n_missing = 0;
            for (auto r : rows) {
                ++totals[ycodes[r]];
                const double x1 = ca.values[r], x2 = cb.values[r];
                if (std::isnan(x1) || std::isnan(x2)) {
                    ++missing[ycodes[r]];
                    ++n_missing;
                } else {
                    zs.emplace_back(best_dir.a1 * x1 + best_dir.a2 * x2, ycodes[r]);
                }
            }
            std::sort(zs.begin(), zs.end());
            std::vector<std::int64_t> left = missing, right(n_classes);
            std::int64_t n_left = n_missing;
            const std::int64_t n = static_cast<std::int64_t>(rows.size());
            double best_v = kInf, best_c = 0.0;
            bool found = false;
            for (std::size_t i = 0; i < zs.size(); ++i) {
                ++left[zs[i].second];
                ++n_left;
                if (i + 1 >= zs.size() || zs[i + 1].first == zs[i].first) continue;
                for (int j = 0; j < n_classes; ++j) right[j] = totals[j] - left[j];
                const double v = calc.term(left, n_left) + calc.term(right, n - n_left);
                if (v < best_v) {
                    best_v = v;
                    best_c = 0.5 * (zs[i].first + zs[i + 1].first);
                    found = true;
                }
            }
            if (found) {
                out.selection.path = SelectionPath::Linear;
                out.selection.var1 = b1;
                out.selection.var2 = b2;
                out.selection.stat = best_wl;
                SplitDecision d;
                d.kind = SplitKind::Linear;
                d.col = b1;
                d.col2 = b2;
                d.a1 = best_dir.a1;
                d.a2 = best_dir.a2;
                d.threshold = best_c;
                d.objective = best_v;
                out.split = d;
                return out;
            }
        }
    }

    out.split = build_univariate(ctx, rows, detail.sel.var1, m0);
    return out;
}

} // namespace chitree
