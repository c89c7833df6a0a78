#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chitree {

// Raised for malformed input files, schema mismatches and inconsistent
// training data.  The CLI maps it to its data-error exit code.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Role { Class, Numeric, Categorical, Excluded };

struct SchemaColumn {
    std::string name;
    Role role = Role::Excluded;
};

struct Schema {
    std::vector<SchemaColumn> columns;

    int class_index() const; // -1 when absent
    static Schema parse(const std::string& text);
    static Schema load_file(const std::string& path);
    std::string to_text() const;
};

// Missing categorical cells; kept distinct from real level codes.
inline constexpr std::int32_t kMissingLevel = -1;
// Level codes seen at prediction time but absent from the training dictionary.
inline constexpr std::int32_t kUnseenLevel = -2;

struct Column {
    std::string name;
    Role role = Role::Excluded;
    // Numeric storage: value per row, NaN for missing.
    std::vector<double> values;
    // Categorical storage: level code per row (kMissingLevel / kUnseenLevel
    // for missing and unseen), with the interning dictionary alongside.
    std::vector<std::int32_t> codes;
    std::vector<std::string> levels;

    bool missing(std::size_t row) const;
};

struct LoadOptions {
    std::vector<std::string> missing_tokens = {"", "NA", "?"}; // case-insensitive
    bool require_class = true;
};

class Dataset {
public:
    static Dataset load_csv(const std::string& path, const Schema& schema,
                            const LoadOptions& opts = {});
    static Dataset parse_csv(const std::string& text, const Schema& schema,
                             const LoadOptions& opts = {});

    // Reinterpret a CSV against the dictionaries of a fitted model: levels are
    // mapped through `like`, unseen levels get kUnseenLevel, and the class
    // column may be absent.
    static Dataset parse_csv_like(const std::string& text, const Dataset& like,
                                  const LoadOptions& opts = {});
    static Dataset load_csv_like(const std::string& path, const Dataset& like,
                                 const LoadOptions& opts = {});

    // Empty dataset carrying only schema, level dictionaries and class labels;
    // serves as the `like` argument when a fitted model is loaded without its
    // training data.
    static Dataset make_template(Schema schema,
                                 std::vector<std::vector<std::string>> level_dicts,
                                 std::vector<std::string> class_labels);

    std::string to_csv() const;
    void save_csv(const std::string& path) const;

    std::size_t n_rows() const { return n_rows_; }
    int n_classes() const { return static_cast<int>(class_labels_.size()); }
    bool has_class() const { return !class_labels_.empty(); }

    // Class code per row, 0-based, in numeric-aware sorted label order.
    const std::vector<std::int32_t>& class_codes() const { return class_codes_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }
    const std::vector<std::int64_t>& class_counts() const { return class_counts_; }

    const Schema& schema() const { return schema_; }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(int idx) const { return columns_.at(idx); }
    // Indices into columns() holding predictors (Numeric or Categorical roles).
    const std::vector<int>& predictors() const { return predictor_cols_; }

    // Row subset with identical schema, dictionaries and class label mapping.
    // Class counts are recomputed; classes absent from `rows` keep a zero count.
    Dataset subset(std::span<const std::int32_t> rows) const;

    friend class DatasetBuilder;

private:
    Schema schema_;
    std::vector<Column> columns_;
    std::vector<std::int32_t> class_codes_;
    std::vector<std::string> class_labels_;
    std::vector<std::int64_t> class_counts_;
    std::vector<int> predictor_cols_;
    std::size_t n_rows_ = 0;
};

// Programmatic construction used by the synthetic data generators.
class DatasetBuilder {
public:
    explicit DatasetBuilder(std::size_t n_rows) : n_rows_(n_rows) {}
    void add_numeric(const std::string& name, std::vector<double> values);
    void add_categorical(const std::string& name, std::vector<std::int32_t> codes,
                         std::vector<std::string> levels);
    void set_class(std::vector<std::string> labels_per_row);
    Dataset build() const;

private:
    std::size_t n_rows_;
    std::vector<Column> cols_;
    std::vector<std::string> row_labels_;
};

// Prior class probabilities pi(j), 0-based by class code.
struct Priors {
    std::vector<double> pi;
    bool estimated = true; // recomputed inside CV folds when true

    static Priors estimate(const Dataset& data);
    static Priors from_json_file(const std::string& path, const Dataset& data);
};

// C(i|j): cost of predicting class i when the truth is class j.
struct CostMatrix {
    int n = 0;
    std::vector<double> c; // row-major, c[i*n + j]

    static CostMatrix unit(int n_classes);
    static CostMatrix from_json_file(const std::string& path, const Dataset& data);
    double operator()(int predicted, int truth) const { return c[predicted * n + truth]; }
};

// Per-node class composition under the active priors.
struct NodeClassStats {
    std::vector<std::int64_t> counts; // N_j(t), indexed by class code
    std::int64_t n = 0;               // N(t)
    std::vector<double> p_jt;         // p(j,t) = pi(j) N_j(t) / N_j
    double p_t = 0.0;                 // sum_j p(j,t)
    std::vector<double> p_cond;       // p(j|t)
    int classes_present = 0;          // J_t
};

// Training-run context: the dataset plus the fixed prior/cost structure and
// the root-level class weights pi(j)/N_j used throughout split search.
struct TrainContext {
    const Dataset* data = nullptr;
    Priors priors;
    CostMatrix costs;
    std::vector<double> class_weight; // pi(j)/N_j

    TrainContext() = default;
    TrainContext(const Dataset& d, Priors p, CostMatrix cm);
};

NodeClassStats node_stats(const TrainContext& ctx, std::span<const std::int32_t> rows);

// argmin_i sum_j C(i|j) p(j|t); ties go to the smallest class code.
int assign_class(const NodeClassStats& stats, const CostMatrix& costs);

// Gini impurity 1 - sum_j p(j|t)^2 of a node.
double gini(const NodeClassStats& stats);

// Natural comparison used for class label ordering: numeric when both sides
// parse as numbers, lexicographic otherwise, numbers before non-numbers.
bool numeric_aware_less(const std::string& a, const std::string& b);

} // namespace chitree
