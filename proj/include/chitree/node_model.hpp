#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chitree/dataset.hpp"
#include "chitree/split.hpp"

namespace chitree {

enum class NodeModelKind {
    Constant,
    Kernel1d,
    Kernel2d,
    KernelMixed,
    Table,
    Nn1d,
    Nn2d,
    NnMixed,
};

struct BandwidthResult {
    double h = 0.0;
    bool degenerate = false; // s = 0 and r = 0; caller substitutes a constant model
};

// h = 2.5 min(s, 0.7413 r) n^{-1/5} when r > 0, else 2.5 s n^{-1/5}.
BandwidthResult bandwidth(double s, double r, std::int64_t n);

// k = max(3, ceil(ln n)), capped at n.
int k_neighbors(std::int64_t n);

// Interquartile range of a sorted sample (linear-interpolation quantiles).
double interquartile_range(std::span<const double> sorted_values);

struct NodeModelConfig {
    // weight kernel and table densities by p(j|t) instead of comparing raw
    // class densities
    bool prior_weighted = false;
};

struct MixedKernelCell {
    std::int32_t level = 0;
    int cls = 0;
    std::int64_t n_cell = 0; // rows of (level, cls), missing numeric included
    std::vector<double> xs;  // numeric values present in the cell
};

struct TableCell {
    std::int32_t level = 0;
    std::int32_t level2 = 0; // unused when the model has one variable
    std::vector<std::int64_t> counts;
};

struct NnCell {
    std::int32_t level = 0;
    std::vector<double> xs;
    std::vector<int> labels;
    int k = 0;
};

struct NodeModel {
    NodeModelKind kind = NodeModelKind::Constant;
    int cls = 0;      // constant prediction; fallback for rows the model cannot score
    int col = -1;     // first model variable
    int col2 = -1;    // second model variable (pair models)
    bool modal_table = false; // table votes by cell majority instead of class density
    bool prior_weighted = false;
    int n_classes = 0;
    std::vector<double> class_share; // p(j|t)

    // kernel-1d / kernel-2d: points grouped by class
    std::vector<std::size_t> class_offset; // size n_classes + 1
    std::vector<double> xs, ys;
    double h = 0.0;                      // kernel-1d shared bandwidth
    std::vector<double> h1c, h2c, rhoc;  // kernel-2d per class; h1c = 0 marks degenerate
    std::vector<double> line_h;          // > 0: class is exactly collinear; the value is
                                         // the along-line bandwidth of its limit density

    // kernel-mixed
    std::vector<MixedKernelCell> mixed_cells; // sorted by (level, cls)
    std::vector<double> hbar;                 // per-class average bandwidth
    std::vector<std::int64_t> class_n;        // per-class node totals

    // table
    std::vector<TableCell> table_cells; // sorted by (level, level2)

    // nearest-neighbor
    std::vector<int> labels; // class per point in xs/ys
    int k = 0;
    double inv_a = 1.0, inv_b = 0.0, inv_c = 1.0; // inverse covariance [[a,b],[b,c]]
    std::vector<NnCell> nn_cells;                 // sorted by level
};

NodeModel fit_constant_model(const TrainContext& ctx, std::span<const std::int32_t> rows);
NodeModel fit_kernel_model(const TrainContext& ctx, std::span<const std::int32_t> rows,
                           const SelectionResult& sel, const NodeModelConfig& cfg = {});
NodeModel fit_nn_model(const TrainContext& ctx, std::span<const std::int32_t> rows,
                       const SelectionResult& sel);

int predict_node_model(const NodeModel& model, const Dataset& data, std::int32_t row);

// Per-class densities, exposed for quadrature checks; +inf marks an exact
// match against a degenerate (zero-bandwidth) class.  An exactly collinear
// class is singular in two dimensions: class_density2 returns 0 off its line
// and a fixed large multiple of the along-line kernel density on it, so
// on-line membership outranks every finite bivariate density.
double class_density1(const NodeModel& model, int cls, double x);
double class_density2(const NodeModel& model, int cls, double x1, double x2);
// Conditional cell density of a mixed kernel model (the level-probability
// factor excluded); integrates to 1 over x when the class is non-degenerate.
double cell_density(const NodeModel& model, int cls, std::int32_t level, double x);

} // namespace chitree
