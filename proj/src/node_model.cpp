#include "chitree/node_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chitree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double norm_pdf(double z) {
    static const double inv_sqrt_2pi = 0.39894228040143267794;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double quantile_sorted(std::span<const double> v, double p) {
    const std::size_t m = v.size();
    if (m == 0) return 0.0;
    if (m == 1) return v[0];
    const double pos = p * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= m) return v[m - 1];
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double sample_sd(std::span<const double> v) {
    const std::size_t m = v.size();
    if (m < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(m - 1));
}

int argmax_class(std::span<const double> score) {
    int best = 0;
    for (std::size_t j = 1; j < score.size(); ++j)
        if (score[j] > score[best]) best = static_cast<int>(j);
    return best;
}

// majority vote with ties to the smallest class
int vote(std::span<const std::int64_t> counts) {
    int best = 0;
    for (std::size_t j = 1; j < counts.size(); ++j)
        if (counts[j] > counts[best]) best = static_cast<int>(j);
    return best;
}

void init_common(NodeModel& m, const TrainContext& ctx, std::span<const std::int32_t> rows,
                 bool prior_weighted) {
    const NodeClassStats stats = node_stats(ctx, rows);
    m.cls = assign_class(stats, ctx.costs);
    m.n_classes = ctx.data->n_classes();
    m.class_share = stats.p_cond;
    m.class_n = stats.counts;
    m.prior_weighted = prior_weighted;
}

// points of one numeric column grouped by class, missing dropped
void group_by_class(const TrainContext& ctx, std::span<const std::int32_t> rows, int col,
                    int col2, NodeModel& m) {
    const Column& ca = ctx.data->column(col);
    const Column* cb = col2 >= 0 ? &ctx.data->column(col2) : nullptr;
    const auto& ycodes = ctx.data->class_codes();
    const int nc = ctx.data->n_classes();
    std::vector<std::vector<double>> gx(nc), gy(nc);
    for (auto r : rows) {
        const double x = ca.values[r];
        if (std::isnan(x)) continue;
        if (cb) {
            const double y = cb->values[r];
            if (std::isnan(y)) continue;
            gx[ycodes[r]].push_back(x);
            gy[ycodes[r]].push_back(y);
        } else {
            gx[ycodes[r]].push_back(x);
        }
    }
    m.class_offset.assign(nc + 1, 0);
    for (int j = 0; j < nc; ++j) m.class_offset[j + 1] = m.class_offset[j] + gx[j].size();
    m.xs.clear();
    m.ys.clear();
    for (int j = 0; j < nc; ++j) {
        m.xs.insert(m.xs.end(), gx[j].begin(), gx[j].end());
        if (cb) m.ys.insert(m.ys.end(), gy[j].begin(), gy[j].end());
    }
}

NodeModel fit_table(const TrainContext& ctx, std::span<const std::int32_t> rows, int col,
                    int col2, bool modal, bool prior_weighted) {
    NodeModel m;
    m.kind = NodeModelKind::Table;
    init_common(m, ctx, rows, prior_weighted);
    m.col = col;
    m.col2 = col2;
    m.modal_table = modal;
    const Column& ca = ctx.data->column(col);
    const Column* cb = col2 >= 0 ? &ctx.data->column(col2) : nullptr;
    const auto& ycodes = ctx.data->class_codes();
    for (auto r : rows) {
        const std::int32_t l1 = ca.codes[r];
        const std::int32_t l2 = cb ? cb->codes[r] : 0;
        auto it = std::find_if(m.table_cells.begin(), m.table_cells.end(), [&](const TableCell& c) {
            return c.level == l1 && c.level2 == l2;
        });
        if (it == m.table_cells.end()) {
            TableCell c;
            c.level = l1;
            c.level2 = l2;
            c.counts.assign(m.n_classes, 0);
            m.table_cells.push_back(std::move(c));
            it = std::prev(m.table_cells.end());
        }
        ++it->counts[ycodes[r]];
    }
    std::sort(m.table_cells.begin(), m.table_cells.end(), [](const TableCell& a, const TableCell& b) {
        if (a.level != b.level) return a.level < b.level;
        return a.level2 < b.level2;
    });
    return m;
}

NodeModel constant_of(const TrainContext& ctx, std::span<const std::int32_t> rows) {
    NodeModel m;
    init_common(m, ctx, rows, false);
    return m;
}

} // namespace

BandwidthResult bandwidth(double s, double r, std::int64_t n) {
    BandwidthResult out;
    if (s <= 0.0 && r <= 0.0) {
        out.degenerate = true;
        return out;
    }
    const double width = r > 0.0 ? std::min(s, 0.7413 * r) : s;
    out.h = 2.5 * width * std::pow(static_cast<double>(n), -0.2);
    if (!(out.h > 0.0)) out.degenerate = true;
    return out;
}

int k_neighbors(std::int64_t n) {
    const int k = std::max(3, static_cast<int>(std::ceil(std::log(static_cast<double>(n)))));
    return static_cast<int>(std::min<std::int64_t>(k, n));
}

double interquartile_range(std::span<const double> sorted_values) {
    return quantile_sorted(sorted_values, 0.75) - quantile_sorted(sorted_values, 0.25);
}

NodeModel fit_constant_model(const TrainContext& ctx, std::span<const std::int32_t> rows) {
    return constant_of(ctx, rows);
}

NodeModel fit_kernel_model(const TrainContext& ctx, std::span<const std::int32_t> rows,
                           const SelectionResult& sel, const NodeModelConfig& cfg) {
    if (sel.path == SelectionPath::None || sel.var1 < 0) return constant_of(ctx, rows);
    const bool pair = sel.path == SelectionPath::Interaction && sel.var2 >= 0;
    auto role_of = [&](int c) { return ctx.data->column(c).role; };

    if (!pair) {
        const int col = sel.var1;
        if (role_of(col) == Role::Categorical) return fit_table(ctx, rows, col, -1, false, cfg.prior_weighted);

        NodeModel m;
        m.kind = NodeModelKind::Kernel1d;
        init_common(m, ctx, rows, cfg.prior_weighted);
        m.col = col;
        group_by_class(ctx, rows, col, -1, m);
        if (m.xs.empty()) return constant_of(ctx, rows);
        std::vector<double> pooled = m.xs;
        std::sort(pooled.begin(), pooled.end());
        const BandwidthResult bw =
            bandwidth(sample_sd(pooled), interquartile_range(pooled),
                      static_cast<std::int64_t>(rows.size()));
        if (bw.degenerate) return constant_of(ctx, rows);
        m.h = bw.h;
        return m;
    }

    const int v1 = sel.var1, v2 = sel.var2;
    const bool cat1 = role_of(v1) == Role::Categorical;
    const bool cat2 = role_of(v2) == Role::Categorical;

    if (cat1 && cat2) return fit_table(ctx, rows, v1, v2, false, cfg.prior_weighted);

    if (cat1 != cat2) {
        const int cat_col = cat1 ? v1 : v2;
        const int num_col = cat1 ? v2 : v1;
        NodeModel m;
        m.kind = NodeModelKind::KernelMixed;
        init_common(m, ctx, rows, cfg.prior_weighted);
        m.col = cat_col;
        m.col2 = num_col;
        const Column& cc = ctx.data->column(cat_col);
        const Column& cn = ctx.data->column(num_col);
        const auto& ycodes = ctx.data->class_codes();
        for (auto r : rows) {
            const std::int32_t l = cc.codes[r];
            const int cls = ycodes[r];
            auto it = std::find_if(m.mixed_cells.begin(), m.mixed_cells.end(),
                                   [&](const MixedKernelCell& c) {
                                       return c.level == l && c.cls == cls;
                                   });
            if (it == m.mixed_cells.end()) {
                MixedKernelCell c;
                c.level = l;
                c.cls = cls;
                m.mixed_cells.push_back(std::move(c));
                it = std::prev(m.mixed_cells.end());
            }
            ++it->n_cell;
            if (!std::isnan(cn.values[r])) it->xs.push_back(cn.values[r]);
        }
        std::sort(m.mixed_cells.begin(), m.mixed_cells.end(),
                  [](const MixedKernelCell& a, const MixedKernelCell& b) {
                      if (a.level != b.level) return a.level < b.level;
                      return a.cls < b.cls;
                  });
        // per-class average of cell bandwidths; degenerate cells enter as 0
        m.hbar.assign(m.n_classes, 0.0);
        std::vector<int> cell_count(m.n_classes, 0);
        for (auto& c : m.mixed_cells) {
            std::vector<double> sorted = c.xs;
            std::sort(sorted.begin(), sorted.end());
            std::sort(c.xs.begin(), c.xs.end());
            double hcell = 0.0;
            if (!sorted.empty()) {
                const BandwidthResult bw =
                    bandwidth(sample_sd(sorted), interquartile_range(sorted),
                              static_cast<std::int64_t>(sorted.size()));
                if (!bw.degenerate) hcell = bw.h;
            }
            m.hbar[c.cls] += hcell;
            ++cell_count[c.cls];
        }
        bool any = false;
        for (int j = 0; j < m.n_classes; ++j) {
            if (cell_count[j] > 0) m.hbar[j] /= static_cast<double>(cell_count[j]);
            if (m.hbar[j] > 0.0) any = true;
        }
        if (!any) return constant_of(ctx, rows);
        return m;
    }

    NodeModel m;
    m.kind = NodeModelKind::Kernel2d;
    init_common(m, ctx, rows, cfg.prior_weighted);
    m.col = v1;
    m.col2 = v2;
    group_by_class(ctx, rows, v1, v2, m);
    m.h1c.assign(m.n_classes, 0.0);
    m.h2c.assign(m.n_classes, 0.0);
    m.rhoc.assign(m.n_classes, 0.0);
    m.line_h.assign(m.n_classes, 0.0);
    bool any = false;
    for (int j = 0; j < m.n_classes; ++j) {
        const std::size_t b = m.class_offset[j], e = m.class_offset[j + 1];
        const std::size_t nj = e - b;
        if (nj == 0) continue;
        std::vector<double> x(m.xs.begin() + b, m.xs.begin() + e);
        std::vector<double> y(m.ys.begin() + b, m.ys.begin() + e);
        std::vector<double> sx = x, sy = y;
        std::sort(sx.begin(), sx.end());
        std::sort(sy.begin(), sy.end());
        const BandwidthResult b1 = bandwidth(sample_sd(sx), interquartile_range(sx),
                                             static_cast<std::int64_t>(nj));
        const BandwidthResult b2 = bandwidth(sample_sd(sy), interquartile_range(sy),
                                             static_cast<std::int64_t>(nj));
        if (b1.degenerate || b2.degenerate) continue;
        m.h1c[j] = b1.h;
        m.h2c[j] = b2.h;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < nj; ++i) {
            mx += x[i];
            my += y[i];
        }
        mx /= static_cast<double>(nj);
        my /= static_cast<double>(nj);
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < nj; ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        const double den = std::sqrt(sxx * syy);
        double rho = den > 0.0 ? sxy / den : 0.0;
        m.rhoc[j] = std::clamp(rho, -0.99, 0.99);
        if (den > 0.0 && std::fabs(rho) >= 1.0 - 1e-12) {
            // exactly collinear class: the bivariate kernel collapses onto the
            // line in the rho -> +-1 limit, so keep only its 1-d density along it
            const double dn = std::hypot(sxx, sxy);
            const double dx = sxx / dn, dy = sxy / dn;
            std::vector<double> u(nj);
            for (std::size_t i = 0; i < nj; ++i)
                u[i] = (x[i] - mx) * dx + (y[i] - my) * dy;
            std::sort(u.begin(), u.end());
            const BandwidthResult bl = bandwidth(sample_sd(u), interquartile_range(u),
                                                 static_cast<std::int64_t>(nj));
            if (!bl.degenerate) m.line_h[j] = bl.h;
        }
        any = true;
    }
    if (!any) return constant_of(ctx, rows);
    return m;
}

NodeModel fit_nn_model(const TrainContext& ctx, std::span<const std::int32_t> rows,
                       const SelectionResult& sel) {
    if (sel.path == SelectionPath::None || sel.var1 < 0) return constant_of(ctx, rows);
    const bool pair = sel.path == SelectionPath::Interaction && sel.var2 >= 0;
    auto role_of = [&](int c) { return ctx.data->column(c).role; };
    const auto& ycodes = ctx.data->class_codes();

    if (!pair) {
        const int col = sel.var1;
        if (role_of(col) == Role::Categorical) return fit_table(ctx, rows, col, -1, true, false);

        NodeModel m;
        m.kind = NodeModelKind::Nn1d;
        init_common(m, ctx, rows, false);
        m.col = col;
        const Column& c = ctx.data->column(col);
        for (auto r : rows) {
            if (std::isnan(c.values[r])) continue;
            m.xs.push_back(c.values[r]);
            m.labels.push_back(ycodes[r]);
        }
        if (m.xs.empty()) return constant_of(ctx, rows);
        m.k = std::min<int>(k_neighbors(static_cast<std::int64_t>(rows.size())),
                            static_cast<int>(m.xs.size()));
        return m;
    }

    const int v1 = sel.var1, v2 = sel.var2;
    const bool cat1 = role_of(v1) == Role::Categorical;
    const bool cat2 = role_of(v2) == Role::Categorical;

    if (cat1 && cat2) return fit_table(ctx, rows, v1, v2, true, false);

    if (cat1 != cat2) {
        const int cat_col = cat1 ? v1 : v2;
        const int num_col = cat1 ? v2 : v1;
        NodeModel m;
        m.kind = NodeModelKind::NnMixed;
        init_common(m, ctx, rows, false);
        m.col = cat_col;
        m.col2 = num_col;
        const Column& cc = ctx.data->column(cat_col);
        const Column& cn = ctx.data->column(num_col);
        std::vector<std::int64_t> level_size; // |S| per cell, missing numeric included
        for (auto r : rows) {
            const std::int32_t l = cc.codes[r];
            auto it = std::find_if(m.nn_cells.begin(), m.nn_cells.end(),
                                   [&](const NnCell& c) { return c.level == l; });
            if (it == m.nn_cells.end()) {
                NnCell c;
                c.level = l;
                m.nn_cells.push_back(std::move(c));
                level_size.push_back(0);
                it = std::prev(m.nn_cells.end());
            }
            const std::size_t idx = static_cast<std::size_t>(it - m.nn_cells.begin());
            ++level_size[idx];
            if (!std::isnan(cn.values[r])) {
                it->xs.push_back(cn.values[r]);
                it->labels.push_back(ycodes[r]);
            }
        }
        for (std::size_t i = 0; i < m.nn_cells.size(); ++i)
            m.nn_cells[i].k = std::min<int>(k_neighbors(level_size[i]),
                                            static_cast<int>(m.nn_cells[i].xs.size()));
        std::sort(m.nn_cells.begin(), m.nn_cells.end(),
                  [](const NnCell& a, const NnCell& b) { return a.level < b.level; });
        return m;
    }

    NodeModel m;
    m.kind = NodeModelKind::Nn2d;
    init_common(m, ctx, rows, false);
    m.col = v1;
    m.col2 = v2;
    const Column& ca = ctx.data->column(v1);
    const Column& cb = ctx.data->column(v2);
    for (auto r : rows) {
        const double x = ca.values[r], y = cb.values[r];
        if (std::isnan(x) || std::isnan(y)) continue;
        m.xs.push_back(x);
        m.ys.push_back(y);
        m.labels.push_back(ycodes[r]);
    }
    if (m.xs.empty()) return constant_of(ctx, rows);
    m.k = std::min<int>(k_neighbors(static_cast<std::int64_t>(rows.size())),
                        static_cast<int>(m.xs.size()));

    // Mahalanobis metric from the node's covariance of the pair
    const std::size_t n = m.xs.size();
    double a = 1.0, b = 0.0, c = 1.0;
    if (n >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += m.xs[i];
            my += m.ys[i];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        double sxx = 0, sxy = 0, syy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (m.xs[i] - mx) * (m.xs[i] - mx);
            sxy += (m.xs[i] - mx) * (m.ys[i] - my);
            syy += (m.ys[i] - my) * (m.ys[i] - my);
        }
        const double d = static_cast<double>(n - 1);
        a = sxx / d;
        b = sxy / d;
        c = syy / d;
    }
    const double trace = a + c;
    double det = a * c - b * b;
    if (!(det > 1e-12 * std::max(trace * trace, 1e-300))) {
        const double ridge = 1e-8 * std::max(trace, 1e-300);
        a += ridge;
        c += ridge;
        det = a * c - b * b;
    }
    if (det > 0.0) {
        m.inv_a = c / det;
        m.inv_b = -b / det;
        m.inv_c = a / det;
    } else {
        m.inv_a = 1.0;
        m.inv_b = 0.0;
        m.inv_c = 1.0;
    }
    return m;
}

double class_density1(const NodeModel& m, int cls, double x) {
    const std::size_t b = m.class_offset[cls], e = m.class_offset[cls + 1];
    if (e == b) return 0.0;
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += norm_pdf((x - m.xs[i]) / m.h);
    return s / (static_cast<double>(e - b) * m.h);
}

double class_density2(const NodeModel& m, int cls, double x1, double x2) {
    const std::size_t b = m.class_offset[cls], e = m.class_offset[cls + 1];
    if (e == b) return 0.0;
    const double lh = m.line_h.empty() ? 0.0 : m.line_h[cls];
    if (lh > 0.0) {
        // singular limit of an exactly collinear class: zero off the line,
        // the along-line kernel density lifted by a fixed scale on it
        constexpr double kCollinearScale = 1e290;
        const std::size_t nj = e - b;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            mx += m.xs[i];
            my += m.ys[i];
        }
        mx /= static_cast<double>(nj);
        my /= static_cast<double>(nj);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            sxx += (m.xs[i] - mx) * (m.xs[i] - mx);
            sxy += (m.xs[i] - mx) * (m.ys[i] - my);
        }
        const double dn = std::hypot(sxx, sxy);
        if (!(dn > 0.0)) return 0.0;
        const double dx = sxx / dn, dy = sxy / dn;
        double tol = 0.0, span = 1.0;
        for (std::size_t i = b; i < e; ++i) {
            const double off = (m.ys[i] - my) * dx - (m.xs[i] - mx) * dy;
            const double along = (m.xs[i] - mx) * dx + (m.ys[i] - my) * dy;
            tol = std::max(tol, std::fabs(off));
            span = std::max(span, std::fabs(along));
        }
        tol = std::max(tol, 1e-12 * span);
        if (std::fabs((x2 - my) * dx - (x1 - mx) * dy) > tol) return 0.0;
        const double u = (x1 - mx) * dx + (x2 - my) * dy;
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            const double ui = (m.xs[i] - mx) * dx + (m.ys[i] - my) * dy;
            s += norm_pdf((u - ui) / lh);
        }
        return kCollinearScale * s / (static_cast<double>(nj) * lh);
    }
    const double h1 = m.h1c[cls], h2 = m.h2c[cls];
    if (!(h1 > 0.0) || !(h2 > 0.0)) {
        for (std::size_t i = b; i < e; ++i)
            if (m.xs[i] == x1 && m.ys[i] == x2) return kInf;
        return 0.0;
    }
    const double rho = m.rhoc[cls];
    const double q = 1.0 - rho * rho;
    const double norm = 1.0 / (2.0 * 3.14159265358979323846 * h1 * h2 * std::sqrt(q));
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) {
        const double u = (x1 - m.xs[i]) / h1;
        const double v = (x2 - m.ys[i]) / h2;
        s += std::exp(-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * q));
    }
    return norm * s / static_cast<double>(e - b);
}

double cell_density(const NodeModel& m, int cls, std::int32_t level, double x) {
    const double h = m.hbar[cls];
    for (const auto& c : m.mixed_cells) {
        if (c.level != level || c.cls != cls) continue;
        if (c.xs.empty()) return 0.0;
        if (!(h > 0.0)) {
            for (double xi : c.xs)
                if (xi == x) return kInf;
            return 0.0;
        }
        double s = 0.0;
        for (double xi : c.xs) s += norm_pdf((x - xi) / h);
        return s / (static_cast<double>(c.xs.size()) * h);
    }
    return 0.0;
}

namespace {

int knn_vote(std::span<const double> dist, std::span<const int> labels, int k, int n_classes,
             int fallback) {
    const std::size_t n = dist.size();
    if (n == 0 || k <= 0) return fallback;
    std::vector<double> sorted(dist.begin(), dist.end());
    const std::size_t kk = std::min<std::size_t>(k, n);
    std::nth_element(sorted.begin(), sorted.begin() + (kk - 1), sorted.end());
    const double dk = sorted[kk - 1];
    std::vector<std::int64_t> counts(n_classes, 0);
    for (std::size_t i = 0; i < n; ++i)
        if (dist[i] <= dk) ++counts[labels[i]]; // distance ties at rank k all vote
    return vote(counts);
}

} // namespace

int predict_node_model(const NodeModel& m, const Dataset& data, std::int32_t row) {
    switch (m.kind) {
        case NodeModelKind::Constant:
            return m.cls;
        case NodeModelKind::Kernel1d: {
            const double x = data.column(m.col).values[row];
            if (std::isnan(x)) return m.cls;
            std::vector<double> score(m.n_classes, 0.0);
            for (int j = 0; j < m.n_classes; ++j) {
                score[j] = class_density1(m, j, x);
                if (m.prior_weighted) score[j] *= m.class_share[j];
            }
            return argmax_class(score);
        }
        case NodeModelKind::Kernel2d: {
            const double x = data.column(m.col).values[row];
            const double y = data.column(m.col2).values[row];
            if (std::isnan(x) || std::isnan(y)) return m.cls;
            std::vector<double> score(m.n_classes, 0.0);
            bool positive = false;
            for (int j = 0; j < m.n_classes; ++j) {
                score[j] = class_density2(m, j, x, y);
                if (m.prior_weighted && std::isfinite(score[j])) score[j] *= m.class_share[j];
                if (score[j] > 0.0) positive = true;
            }
            if (!positive) return m.cls;
            return argmax_class(score);
        }
        case NodeModelKind::KernelMixed: {
            const std::int32_t level = data.column(m.col).codes[row];
            const double x = data.column(m.col2).values[row];
            if (std::isnan(x)) return m.cls;
            std::vector<double> score(m.n_classes, 0.0);
            bool positive = false;
            for (int j = 0; j < m.n_classes; ++j) {
                if (m.class_n[j] <= 0) continue;
                // P(level | class) times the conditional kernel density
                std::int64_t n_cell = 0;
                for (const auto& c : m.mixed_cells)
                    if (c.level == level && c.cls == j) n_cell = c.n_cell;
                if (n_cell == 0) continue;
                const double p_level =
                    static_cast<double>(n_cell) / static_cast<double>(m.class_n[j]);
                const double d = cell_density(m, j, level, x);
                score[j] = std::isinf(d) ? d : p_level * d;
                if (m.prior_weighted && std::isfinite(score[j])) score[j] *= m.class_share[j];
                if (score[j] > 0.0) positive = true;
            }
            if (!positive) return m.cls;
            return argmax_class(score);
        }
        case NodeModelKind::Table: {
            const std::int32_t l1 = data.column(m.col).codes[row];
            const std::int32_t l2 = m.col2 >= 0 ? data.column(m.col2).codes[row] : 0;
            const TableCell* cell = nullptr;
            for (const auto& c : m.table_cells) {
                if (c.level == l1 && c.level2 == l2) {
                    cell = &c;
                    break;
                }
            }
            if (!cell) return m.cls;
            if (m.modal_table) {
                int best = 0;
                for (int j = 1; j < m.n_classes; ++j)
                    if (cell->counts[j] > cell->counts[best]) best = j;
                return best;
            }
            std::vector<double> score(m.n_classes, 0.0);
            for (int j = 0; j < m.n_classes; ++j) {
                if (m.class_n[j] <= 0) continue;
                score[j] = static_cast<double>(cell->counts[j]) /
                           static_cast<double>(m.class_n[j]);
                if (m.prior_weighted) score[j] *= m.class_share[j];
            }
            return argmax_class(score);
        }
        case NodeModelKind::Nn1d: {
            const double x = data.column(m.col).values[row];
            if (std::isnan(x)) return m.cls;
            std::vector<double> dist(m.xs.size());
            for (std::size_t i = 0; i < m.xs.size(); ++i) dist[i] = std::abs(x - m.xs[i]);
            return knn_vote(dist, m.labels, m.k, m.n_classes, m.cls);
        }
        case NodeModelKind::Nn2d: {
            const double x = data.column(m.col).values[row];
            const double y = data.column(m.col2).values[row];
            if (std::isnan(x) || std::isnan(y)) return m.cls;
            std::vector<double> dist(m.xs.size());
            for (std::size_t i = 0; i < m.xs.size(); ++i) {
                const double dx = x - m.xs[i];
                const double dy = y - m.ys[i];
                dist[i] = m.inv_a * dx * dx + 2.0 * m.inv_b * dx * dy + m.inv_c * dy * dy;
            }
            return knn_vote(dist, m.labels, m.k, m.n_classes, m.cls);
        }
        case NodeModelKind::NnMixed: {
            const std::int32_t level = data.column(m.col).codes[row];
            const double x = data.column(m.col2).values[row];
            if (std::isnan(x)) return m.cls;
            const NnCell* cell = nullptr;
            for (const auto& c : m.nn_cells) {
                if (c.level == level) {
                    cell = &c;
                    break;
                }
            }
            if (!cell || cell->xs.empty()) return m.cls;
            std::vector<double> dist(cell->xs.size());
            for (std::size_t i = 0; i < cell->xs.size(); ++i) dist[i] = std::abs(x - cell->xs[i]);
            return knn_vote(dist, cell->labels, cell->k, m.n_classes, m.cls);
        }
    }
    return m.cls;
}

} // namespace chitree
