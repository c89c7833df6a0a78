#include "chitree/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chitree {

Chi2Result pearson_chi2(const ContingencyTable& table) {
    std::vector<std::int64_t> row_sum(table.n_rows, 0), col_sum(table.n_cols, 0);
    std::int64_t total = 0;
    for (int r = 0; r < table.n_rows; ++r)
        for (int c = 0; c < table.n_cols; ++c) {
            const auto v = table.at(r, c);
            row_sum[r] += v;
            col_sum[c] += v;
            total += v;
        }
    std::vector<int> rows, cols;
    for (int r = 0; r < table.n_rows; ++r)
        if (row_sum[r] > 0) rows.push_back(r);
    for (int c = 0; c < table.n_cols; ++c)
        if (col_sum[c] > 0) cols.push_back(c);
    if (rows.size() <= 1 || cols.size() <= 1) return {0.0, 0};
    const double t = static_cast<double>(total);
    double chi2 = 0.0;
    for (int r : rows)
        for (int c : cols) {
            const double expected = static_cast<double>(row_sum[r]) * col_sum[c] / t;
            const double diff = static_cast<double>(table.at(r, c)) - expected;
            chi2 += diff * diff / expected;
        }
    const int df = (static_cast<int>(rows.size()) - 1) * (static_cast<int>(cols.size()) - 1);
    return {chi2, df};
}

double wilson_hilferty(double chi2, int df) {
    if (df <= 1) return chi2;
    const double nu = static_cast<double>(df);
    const double b = 7.0 / 9.0 + std::sqrt(nu) * (std::cbrt(chi2 / nu) - 1.0 + 2.0 / (9.0 * nu));
    if (b <= 0.0) return 0.0;
    return b * b * b;
}

namespace {

// series expansion, valid for x < a + 1
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// modified Lentz continued fraction for Q(a, x), valid for x >= a + 1
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double chi2_1_upper_quantile(double alpha) {
    if (alpha <= 0.0) return std::numeric_limits<double>::infinity();
    if (alpha >= 1.0) return 0.0;
    auto upper_tail = [](double x) { return 1.0 - regularized_gamma_p(0.5, x / 2.0); };
    double lo = 0.0, hi = 1.0;
    while (upper_tail(hi) > alpha) hi *= 2.0;
    // bisection to 1e-10
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (upper_tail(mid) > alpha) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::pair<double, double> mean_sd(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) {
        const double d = v - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

std::vector<double> discretize_main(std::span<const double> values, std::int64_t n_t, int j_t) {
    const auto [mean, sd] = mean_sd(values);
    const double root3 = 1.7320508075688772935274463415059;
    if (n_t >= 20ll * j_t) {
        const double w = sd * root3 / 2.0;
        return {mean - w, mean, mean + w};
    }
    const double w = sd * root3 / 3.0;
    return {mean - w, mean + w};
}

bool constant_in_node(const Dataset& data, int col, std::span<const std::int32_t> rows) {
    const Column& c = data.column(col);
    if (c.role == Role::Numeric) {
        bool has_missing = false, has_value = false;
        double first = 0.0;
        for (auto r : rows) {
            const double v = c.values[r];
            if (std::isnan(v)) {
                has_missing = true;
            } else if (!has_value) {
                has_value = true;
                first = v;
            } else if (v != first) {
                return false;
            }
            if (has_missing && has_value) return false;
        }
        return true;
    }
    if (c.role == Role::Categorical) {
        std::int32_t first = 0;
        bool seen = false;
        for (auto r : rows) {
            const std::int32_t v = c.codes[r];
            if (!seen) {
                seen = true;
                first = v;
            } else if (v != first) {
                return false;
            }
        }
        return true;
    }
    return true;
}

namespace {

// Classes present in the node define the table rows; `class_row` maps class
// code -> row or -1.
std::vector<int> class_row_map(const TrainContext& ctx, std::span<const std::int32_t> rows,
                               int& n_present) {
    std::vector<int> map(ctx.data->n_classes(), -1);
    const auto& codes = ctx.data->class_codes();
    n_present = 0;
    for (auto r : rows) {
        if (map[codes[r]] < 0) map[codes[r]] = 0;
    }
    for (auto& m : map)
        if (m == 0) m = n_present++;
    return map;
}

} // namespace

double main_effect_stat(const TrainContext& ctx, std::span<const std::int32_t> rows, int col) {
    if (constant_in_node(*ctx.data, col, rows)) return 0.0;
    const Column& c = ctx.data->column(col);
    int n_classes_present = 0;
    const std::vector<int> crow = class_row_map(ctx, rows, n_classes_present);
    const auto& ycodes = ctx.data->class_codes();

    ContingencyTable table;
    if (c.role == Role::Categorical) {
        // level code -> column; the missing level gets its own column
        std::vector<std::int32_t> present;
        bool any_missing = false;
        {
            std::vector<char> seen(c.levels.size() + 1, 0);
            for (auto r : rows) {
                const auto code = c.codes[r];
                if (code == kMissingLevel) any_missing = true;
                else if (!seen[code]) seen[code] = 1;
            }
            for (std::int32_t l = 0; l < static_cast<std::int32_t>(c.levels.size()); ++l)
                if (seen[l]) present.push_back(l);
        }
        std::vector<int> col_of(c.levels.size(), -1);
        for (std::size_t i = 0; i < present.size(); ++i) col_of[present[i]] = static_cast<int>(i);
        const int missing_col = any_missing ? static_cast<int>(present.size()) : -1;
        table = ContingencyTable::zeros(n_classes_present,
                                        static_cast<int>(present.size()) + (any_missing ? 1 : 0));
        for (auto r : rows) {
            const auto code = c.codes[r];
            const int cc = code == kMissingLevel ? missing_col : col_of[code];
            ++table.at(crow[ycodes[r]], cc);
        }
    } else {
        std::vector<double> vals;
        vals.reserve(rows.size());
        bool any_missing = false;
        for (auto r : rows) {
            const double v = c.values[r];
            if (std::isnan(v)) any_missing = true;
            else vals.push_back(v);
        }
        const auto boundaries = discretize_main(vals, static_cast<std::int64_t>(rows.size()),
                                                n_classes_present);
        const int n_bins = static_cast<int>(boundaries.size()) + 1;
        const int missing_col = any_missing ? n_bins : -1;
        table = ContingencyTable::zeros(n_classes_present, n_bins + (any_missing ? 1 : 0));
        for (auto r : rows) {
            const double v = c.values[r];
            const int cc = std::isnan(v) ? missing_col : bin_of(v, boundaries);
            ++table.at(crow[ycodes[r]], cc);
        }
    }
    const auto [chi2, df] = pearson_chi2(table);
    return wilson_hilferty(chi2, df);
}

namespace {

// Cell index per row for one side of the interaction table, -1 for excluded
// rows. Numeric variables use 2 intervals at the mean when the node is small,
// otherwise 3; categorical variables contribute singleton level cells.
std::vector<int> interaction_cells(const Dataset& data, int col,
                                   std::span<const std::int32_t> rows,
                                   std::span<const char> included,
                                   std::int64_t n_t, int j_t, int& n_cells) {
    const Column& c = data.column(col);
    std::vector<int> cell(rows.size(), -1);
    if (c.role == Role::Categorical) {
        std::vector<int> col_of(c.levels.size(), -1);
        n_cells = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!included[i]) continue;
            const auto code = c.codes[rows[i]];
            if (col_of[code] < 0) col_of[code] = n_cells++;
            cell[i] = col_of[code];
        }
        return cell;
    }
    std::vector<double> vals;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (included[i]) vals.push_back(c.values[rows[i]]);
    const auto [mean, sd] = mean_sd(vals);
    std::vector<double> boundaries;
    if (n_t < 45ll * j_t) {
        boundaries = {mean};
    } else {
        const double w = sd * 1.7320508075688772935274463415059 / 3.0;
        boundaries = {mean - w, mean + w};
    }
    n_cells = static_cast<int>(boundaries.size()) + 1;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (included[i]) cell[i] = bin_of(c.values[rows[i]], boundaries);
    return cell;
}

} // namespace

double interaction_stat(const TrainContext& ctx, std::span<const std::int32_t> rows,
                        int col_a, int col_b) {
    const Dataset& data = *ctx.data;
    const Column& ca = data.column(col_a);
    const Column& cb = data.column(col_b);
    std::vector<char> included(rows.size(), 0);
    std::int64_t n_included = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!ca.missing(rows[i]) && !cb.missing(rows[i])) {
            included[i] = 1;
            ++n_included;
        }
    }
    if (n_included < 2) return 0.0;

    int n_classes_present = 0;
    const std::vector<int> crow = class_row_map(ctx, rows, n_classes_present);
    int cells_a = 0, cells_b = 0;
    const std::int64_t n_t = static_cast<std::int64_t>(rows.size());
    const auto cell_a = interaction_cells(data, col_a, rows, included, n_t, n_classes_present, cells_a);
    const auto cell_b = interaction_cells(data, col_b, rows, included, n_t, n_classes_present, cells_b);
    if (cells_a < 1 || cells_b < 1) return 0.0;

    auto table = ContingencyTable::zeros(n_classes_present, cells_a * cells_b);
    const auto& ycodes = data.class_codes();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!included[i]) continue;
        ++table.at(crow[ycodes[rows[i]]], cell_a[i] * cells_b + cell_b[i]);
    }
    const auto [chi2, df] = pearson_chi2(table);
    return wilson_hilferty(chi2, df);
}

Eigen::VectorXd lda_leading_direction(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
    const auto n = X.rows();
    const auto m = X.cols();
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    if (n < 2) return zero;
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    const int k = max_label + 1;
    std::vector<Eigen::VectorXd> means(k, Eigen::VectorXd::Zero(m));
    std::vector<std::int64_t> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        means[labels[i]] += X.row(i).transpose();
        ++counts[labels[i]];
    }
    Eigen::VectorXd grand = Eigen::VectorXd::Zero(m);
    int present = 0;
    for (int j = 0; j < k; ++j) {
        grand += means[j];
        if (counts[j] > 0) {
            means[j] /= static_cast<double>(counts[j]);
            ++present;
        }
    }
    grand /= static_cast<double>(n);
    if (present < 2) return zero;

    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd d = X.row(i).transpose() - means[labels[i]];
        within += d * d.transpose();
    }
    Eigen::MatrixXd between = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < k; ++j) {
        if (counts[j] == 0) continue;
        const Eigen::VectorXd d = means[j] - grand;
        between += static_cast<double>(counts[j]) * d * d.transpose();
    }
    if (between.cwiseAbs().maxCoeff() <= 0.0) return zero;

    auto finish = [&](Eigen::VectorXd dir) {
        const double norm = dir.norm();
        if (norm <= 0.0) return zero;
        dir /= norm;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::fabs(dir(i)) > 1e-12) {
                if (dir(i) < 0.0) dir = -dir;
                break;
            }
        }
        return dir;
    };

    // whiten by the spectral pseudo square root of the within scatter
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> wdec(within);
    const Eigen::VectorXd evals = wdec.eigenvalues();
    const double lmax = evals.cwiseMax(0.0).maxCoeff();
    Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(m);
    bool any_positive = false;
    std::vector<Eigen::Index> null_idx;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (evals(i) > 1e-10 * std::max(lmax, 1e-300)) {
            inv_sqrt(i) = 1.0 / std::sqrt(evals(i));
            any_positive = true;
        } else {
            null_idx.push_back(i);
        }
    }

    // a direction with no within-class variation but real between-class
    // spread separates the classes outright; it beats any whitened ratio
    if (any_positive && !null_idx.empty()) {
        Eigen::MatrixXd nbasis(m, static_cast<Eigen::Index>(null_idx.size()));
        for (std::size_t i = 0; i < null_idx.size(); ++i)
            nbasis.col(static_cast<Eigen::Index>(i)) = wdec.eigenvectors().col(null_idx[i]);
        const Eigen::MatrixXd bn = nbasis.transpose() * between * nbasis;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ndec(bn);
        Eigen::Index nb = 0;
        const double nval = ndec.eigenvalues().maxCoeff(&nb);
        if (nval > 1e-8 * between.trace())
            return finish(nbasis * ndec.eigenvectors().col(nb));
    }

    Eigen::MatrixXd whitener;
    if (any_positive) {
        whitener = wdec.eigenvectors() * inv_sqrt.asDiagonal() * wdec.eigenvectors().transpose();
    } else {
        // no within-class variation at all: rank the between scatter directly
        whitener = Eigen::MatrixXd::Identity(m, m);
    }
    const Eigen::MatrixXd core = whitener * between * whitener;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> cdec(core);
    Eigen::Index best = 0;
    cdec.eigenvalues().maxCoeff(&best);
    if (cdec.eigenvalues()(best) <= 0.0) return zero;
    return finish(whitener * cdec.eigenvectors().col(best));
}

LinearStat linear_stat(const TrainContext& ctx, std::span<const std::int32_t> rows,
                       const NodeClassStats& stats, int col_a, int col_b) {
    LinearStat out;
    const Dataset& data = *ctx.data;
    const Column& ca = data.column(col_a);
    const Column& cb = data.column(col_b);
    if (ca.role != Role::Numeric || cb.role != Role::Numeric) return out;

    std::vector<std::int32_t> both;
    both.reserve(rows.size());
    for (auto r : rows)
        if (!std::isnan(ca.values[r]) && !std::isnan(cb.values[r])) both.push_back(r);
    if (both.size() < 3) return out;

    const auto& ycodes = data.class_codes();
    const int n_classes = data.n_classes();
    std::vector<std::vector<double>> v1(n_classes), v2(n_classes);
    for (auto r : both) {
        v1[ycodes[r]].push_back(ca.values[r]);
        v2[ycodes[r]].push_back(cb.values[r]);
    }

    // 2-SD rectangle trimming per class
    std::vector<double> px, py;
    std::vector<int> plab;
    int participating = 0;
    for (int j = 0; j < n_classes; ++j) {
        if (v1[j].empty()) continue;
        const auto [m1, s1] = mean_sd(v1[j]);
        const auto [m2, s2] = mean_sd(v2[j]);
        std::int64_t kept = 0;
        std::vector<double> tx, ty;
        for (std::size_t i = 0; i < v1[j].size(); ++i) {
            if (std::fabs(v1[j][i] - m1) <= 2.0 * s1 && std::fabs(v2[j][i] - m2) <= 2.0 * s2) {
                tx.push_back(v1[j][i]);
                ty.push_back(v2[j][i]);
                ++kept;
            }
        }
        out.direction.trims.push_back({j, m1, s1, m2, s2, kept});
        if (kept >= 2) {
            ++participating;
            for (std::size_t i = 0; i < tx.size(); ++i) {
                px.push_back(tx[i]);
                py.push_back(ty[i]);
                plab.push_back(j);
            }
        }
    }
    if (participating < 2) return out;

    // relabel participants densely for the solver
    std::vector<int> dense(n_classes, -1);
    int next = 0;
    std::vector<int> lab2(plab.size());
    for (std::size_t i = 0; i < plab.size(); ++i) {
        if (dense[plab[i]] < 0) dense[plab[i]] = next++;
        lab2[i] = dense[plab[i]];
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(px.size()), 2);
    for (std::size_t i = 0; i < px.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = px[i];
        X(static_cast<Eigen::Index>(i), 1) = py[i];
    }
    const Eigen::VectorXd dir = lda_leading_direction(X, lab2);
    if (dir.isZero(0.0)) return out;
    out.direction.a1 = dir(0);
    out.direction.a2 = dir(1);
    out.direction.valid = true;

    // project every row with both coordinates, then run the main-effect
    // machinery on the projection
    std::vector<double> z;
    z.reserve(both.size());
    for (auto r : both) z.push_back(dir(0) * ca.values[r] + dir(1) * cb.values[r]);

    const auto boundaries = discretize_main(z, stats.n, stats.classes_present);
    int n_present = 0;
    std::vector<int> crow(n_classes, -1);
    for (auto r : both)
        if (crow[ycodes[r]] < 0) crow[ycodes[r]] = 0;
    for (auto& m : crow)
        if (m == 0) m = n_present++;
    auto table = ContingencyTable::zeros(n_present, static_cast<int>(boundaries.size()) + 1);
    for (std::size_t i = 0; i < both.size(); ++i)
        ++table.at(crow[ycodes[both[i]]], bin_of(z[i], boundaries));
    const auto [chi2, df] = pearson_chi2(table);
    out.w = wilson_hilferty(chi2, df);
    return out;
}

} // namespace chitree
