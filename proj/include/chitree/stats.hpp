#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chitree/dataset.hpp"

namespace chitree {

// Class-by-bin count table; rows index classes, columns index predictor bins.
struct ContingencyTable {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<std::int64_t> counts; // row-major

    std::int64_t& at(int r, int c) { return counts[static_cast<std::size_t>(r) * n_cols + c]; }
    std::int64_t at(int r, int c) const { return counts[static_cast<std::size_t>(r) * n_cols + c]; }
    static ContingencyTable zeros(int r, int c) {
        ContingencyTable t;
        t.n_rows = r;
        t.n_cols = c;
        t.counts.assign(static_cast<std::size_t>(r) * c, 0);
        return t;
    }
};

struct Chi2Result {
    double chi2 = 0.0;
    int df = 0;
};

// Pearson statistic after deleting all-zero rows and columns; df is
// (r-1)(c-1) over the surviving table, (0,0) when fewer than two of either.
Chi2Result pearson_chi2(const ContingencyTable& table);

// Reduce a chi-squared value on df degrees of freedom to the 1-df scale.
// Passes the value through unchanged when df <= 1.
double wilson_hilferty(double chi2, int df);

// Lower regularized incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

// Upper-alpha quantile of the chi-squared distribution with 1 df, found by
// bisection on the regularized incomplete gamma.  alpha <= 0 gives +infinity.
double chi2_1_upper_quantile(double alpha);

// Interval boundaries for the main-effect discretization: three boundaries
// (four bins) when n_t >= 20 * j_t, otherwise two (three bins).  A value goes
// to the lowest bin whose boundary it does not exceed.
std::vector<double> discretize_main(std::span<const double> values, std::int64_t n_t, int j_t);

inline int bin_of(double v, std::span<const double> boundaries) {
    int b = 0;
    while (b < static_cast<int>(boundaries.size()) && v > boundaries[b]) ++b;
    return b;
}

// True when the column takes fewer than two distinct states over `rows`,
// where a missing cell counts as a state of its own.
bool constant_in_node(const Dataset& data, int col, std::span<const std::int32_t> rows);

// Curvature test statistic for one predictor at a node.  Numeric predictors
// are discretized; missing values form an extra column when present.
double main_effect_stat(const TrainContext& ctx, std::span<const std::int32_t> rows, int col);

// Interaction test statistic for a predictor pair: class versus the product
// of per-variable cells.  Rows missing either variable are excluded.
double interaction_stat(const TrainContext& ctx, std::span<const std::int32_t> rows,
                        int col_a, int col_b);

struct DiscriminantDirection {
    double a1 = 0.0;
    double a2 = 0.0;
    double offset = 0.0; // filled in when a split a1*x1 + a2*x2 <= offset is built
    struct ClassTrim {
        int cls = 0;
        double mean1 = 0.0, sd1 = 0.0, mean2 = 0.0, sd2 = 0.0;
        std::int64_t kept = 0;
    };
    std::vector<ClassTrim> trims;
    bool valid = false;
};

struct LinearStat {
    double w = 0.0;
    DiscriminantDirection direction;
};

// Discriminant test statistic for a numeric pair: per-class 2-SD rectangle
// trimming, two-variable LDA, projection of the whole node onto the leading
// discriminant coordinate, then the main-effect machinery on the projection.
LinearStat linear_stat(const TrainContext& ctx, std::span<const std::int32_t> rows,
                       const NodeClassStats& stats, int col_a, int col_b);

// Leading discriminant direction of labelled points (rows of X).  Uses a
// spectral pseudo-inverse of the within-class scatter when it is singular.
// Returns a zero vector when no direction separates the classes.
Eigen::VectorXd lda_leading_direction(const Eigen::MatrixXd& X, const std::vector<int>& labels);

// Sample mean and n-1 standard deviation; sd is 0 for fewer than two values.
std::pair<double, double> mean_sd(std::span<const double> values);

} // namespace chitree
