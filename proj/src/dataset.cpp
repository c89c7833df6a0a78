#include "chitree/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace chitree {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

std::string lower(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

// RFC-4180 subset: quoted fields, doubled quotes, CRLF or LF records.
std::vector<std::vector<std::string>> parse_csv_text(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };
    while (i < n) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            ++i;
            continue;
        }
        switch (ch) {
        case '"':
            in_quotes = true;
            row_started = true;
            ++i;
            break;
        case ',':
            end_field();
            row_started = true;
            ++i;
            break;
        case '\r':
            if (i + 1 < n && text[i + 1] == '\n') ++i;
            [[fallthrough]];
        case '\n':
            end_row();
            ++i;
            break;
        default:
            field.push_back(ch);
            row_started = true;
            ++i;
        }
    }
    if (in_quotes) throw DataError("unterminated quoted CSV field");
    if (row_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
    if (b == e) return false;
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

bool is_missing_token(const std::string& tok, const std::vector<std::string>& missing) {
    const std::string lo = lower(tok);
    for (const auto& m : missing)
        if (lo == lower(m)) return true;
    return false;
}

} // namespace

bool numeric_aware_less(const std::string& a, const std::string& b) {
    double va, vb;
    const bool na = parse_double(a, va);
    const bool nb = parse_double(b, vb);
    if (na && nb) {
        if (va != vb) return va < vb;
        return a < b;
    }
    if (na != nb) return na; // numbers sort before non-numbers
    return a < b;
}

int Schema::class_index() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].role == Role::Class) return static_cast<int>(i);
    return -1;
}

Schema Schema::parse(const std::string& text) {
    Schema schema;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        const auto first = trimmed.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (trimmed[first] == '#') continue;
        std::istringstream ls(trimmed);
        std::string name, role, extra;
        if (!(ls >> name >> role) || (ls >> extra)) {
            throw DataError("schema line " + std::to_string(line_no) +
                            ": expected `name role`, got: " + line);
        }
        Role r;
        if (role == "d") r = Role::Class;
        else if (role == "n") r = Role::Numeric;
        else if (role == "c") r = Role::Categorical;
        else if (role == "x") r = Role::Excluded;
        else throw DataError("schema line " + std::to_string(line_no) + ": unknown role `" + role + "`");
        for (const auto& c : schema.columns)
            if (c.name == name) throw DataError("schema: duplicate column `" + name + "`");
        schema.columns.push_back({name, r});
    }
    int class_count = 0;
    for (const auto& c : schema.columns)
        if (c.role == Role::Class) ++class_count;
    if (class_count > 1) throw DataError("schema: more than one class column");
    return schema;
}

Schema Schema::load_file(const std::string& path) { return parse(read_file(path)); }

std::string Schema::to_text() const {
    std::string out;
    for (const auto& c : columns) {
        const char* r = c.role == Role::Class        ? "d"
                        : c.role == Role::Numeric    ? "n"
                        : c.role == Role::Categorical ? "c"
                                                      : "x";
        out += c.name + " " + r + "\n";
    }
    return out;
}

bool Column::missing(std::size_t row) const {
    if (role == Role::Numeric) return std::isnan(values[row]);
    return codes[row] == kMissingLevel;
}

namespace {

struct ParsedTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

ParsedTable split_header(const std::string& text) {
    auto all = parse_csv_text(text);
    if (all.empty()) throw DataError("CSV has no header row");
    ParsedTable t;
    t.header = std::move(all.front());
    t.rows.assign(std::make_move_iterator(all.begin() + 1), std::make_move_iterator(all.end()));
    return t;
}

} // namespace

Dataset Dataset::parse_csv(const std::string& text, const Schema& schema, const LoadOptions& opts) {
    const ParsedTable table = split_header(text);
    Dataset ds;
    ds.schema_ = schema;
    ds.n_rows_ = table.rows.size();

    // Map header position -> schema column; both directions must agree.
    std::vector<int> schema_of_header(table.header.size(), -1);
    for (std::size_t h = 0; h < table.header.size(); ++h) {
        int found = -1;
        for (std::size_t s = 0; s < schema.columns.size(); ++s)
            if (schema.columns[s].name == table.header[h]) { found = static_cast<int>(s); break; }
        if (found < 0) throw DataError("unknown column in CSV header: " + table.header[h]);
        schema_of_header[h] = found;
    }
    std::vector<int> header_of_schema(schema.columns.size(), -1);
    for (std::size_t h = 0; h < schema_of_header.size(); ++h) {
        if (header_of_schema[schema_of_header[h]] != -1)
            throw DataError("duplicate CSV column: " + table.header[h]);
        header_of_schema[schema_of_header[h]] = static_cast<int>(h);
    }
    const int class_idx = schema.class_index();
    if (opts.require_class && class_idx < 0) throw DataError("schema declares no class column");
    for (std::size_t s = 0; s < schema.columns.size(); ++s) {
        if (header_of_schema[s] < 0) {
            if (static_cast<int>(s) == class_idx && !opts.require_class) continue;
            throw DataError("schema column missing from CSV header: " + schema.columns[s].name);
        }
    }

    ds.columns_.resize(schema.columns.size());
    for (std::size_t s = 0; s < schema.columns.size(); ++s) {
        ds.columns_[s].name = schema.columns[s].name;
        ds.columns_[s].role = schema.columns[s].role;
    }

    std::vector<std::string> class_tokens(ds.n_rows_);
    std::vector<std::unordered_map<std::string, std::int32_t>> interner(schema.columns.size());

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw DataError("row " + std::to_string(r + 2) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(row.size()));
        for (std::size_t s = 0; s < schema.columns.size(); ++s) {
            const int h = header_of_schema[s];
            if (h < 0) continue;
            const std::string& tok = row[h];
            Column& col = ds.columns_[s];
            const bool missing = is_missing_token(tok, opts.missing_tokens);
            switch (col.role) {
            case Role::Class:
                if (missing)
                    throw DataError("row " + std::to_string(r + 2) + ": missing class label");
                class_tokens[r] = tok;
                break;
            case Role::Numeric: {
                double v = std::numeric_limits<double>::quiet_NaN();
                if (!missing && !parse_double(tok, v))
                    throw DataError("row " + std::to_string(r + 2) + ", column " + col.name +
                                    ": non-numeric value `" + tok + "`");
                col.values.push_back(v);
                break;
            }
            case Role::Categorical: {
                if (missing) {
                    col.codes.push_back(kMissingLevel);
                } else {
                    auto [it, inserted] = interner[s].try_emplace(
                        tok, static_cast<std::int32_t>(col.levels.size()));
                    if (inserted) col.levels.push_back(tok);
                    col.codes.push_back(it->second);
                }
                break;
            }
            case Role::Excluded:
                break;
            }
        }
    }

    for (std::size_t s = 0; s < ds.columns_.size(); ++s) {
        const Role role = ds.columns_[s].role;
        if (role == Role::Numeric || role == Role::Categorical)
            ds.predictor_cols_.push_back(static_cast<int>(s));
    }
    if (ds.predictor_cols_.empty()) throw DataError("no usable predictor columns");

    if (class_idx >= 0 && header_of_schema[class_idx] >= 0) {
        std::vector<std::string> labels = class_tokens;
        std::sort(labels.begin(), labels.end(), numeric_aware_less);
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        if (opts.require_class && labels.empty()) throw DataError("dataset has no rows");
        ds.class_labels_ = labels;
        std::unordered_map<std::string, std::int32_t> label_code;
        for (std::size_t j = 0; j < labels.size(); ++j)
            label_code[labels[j]] = static_cast<std::int32_t>(j);
        ds.class_codes_.resize(ds.n_rows_);
        ds.class_counts_.assign(labels.size(), 0);
        for (std::size_t r = 0; r < ds.n_rows_; ++r) {
            const std::int32_t c = label_code[class_tokens[r]];
            ds.class_codes_[r] = c;
            ++ds.class_counts_[c];
        }
        for (std::size_t j = 0; j < ds.class_counts_.size(); ++j)
            if (ds.class_counts_[j] == 0)
                throw DataError("class with zero training rows: " + labels[j]);
    }
    return ds;
}

Dataset Dataset::load_csv(const std::string& path, const Schema& schema, const LoadOptions& opts) {
    return parse_csv(read_file(path), schema, opts);
}

Dataset Dataset::parse_csv_like(const std::string& text, const Dataset& like, const LoadOptions& opts) {
    LoadOptions relaxed = opts;
    relaxed.require_class = false; // class column may be absent in scoring data
    Dataset out = Dataset::parse_csv(text, like.schema(), relaxed);
    // Remap class codes through the training label order; a scoring file that
    // lacks some training class must not shift the codes of the rest.
    if (out.has_class()) {
        std::unordered_map<std::string, std::int32_t> label_code;
        for (std::size_t l = 0; l < like.class_labels_.size(); ++l)
            label_code[like.class_labels_[l]] = static_cast<std::int32_t>(l);
        std::vector<std::int32_t> remapped(out.class_codes_.size());
        std::vector<std::int64_t> counts(like.class_labels_.size(), 0);
        for (std::size_t r = 0; r < out.class_codes_.size(); ++r) {
            const std::string& label = out.class_labels_[out.class_codes_[r]];
            auto it = label_code.find(label);
            if (it == label_code.end())
                throw DataError("class label '" + label + "' was not present in training data");
            remapped[r] = it->second;
            ++counts[it->second];
        }
        out.class_codes_ = std::move(remapped);
        out.class_labels_ = like.class_labels_;
        out.class_counts_ = std::move(counts);
    }
    for (std::size_t s = 0; s < out.columns_.size(); ++s) {
        Column& col = out.columns_[s];
        if (col.role != Role::Categorical) continue;
        const Column& ref = like.columns_[s];
        std::unordered_map<std::string, std::int32_t> ref_code;
        for (std::size_t l = 0; l < ref.levels.size(); ++l)
            ref_code[ref.levels[l]] = static_cast<std::int32_t>(l);
        std::vector<std::int32_t> remapped(col.codes.size());
        for (std::size_t r = 0; r < col.codes.size(); ++r) {
            const std::int32_t c = col.codes[r];
            if (c == kMissingLevel) {
                remapped[r] = kMissingLevel;
            } else {
                auto it = ref_code.find(col.levels[c]);
                remapped[r] = it == ref_code.end() ? kUnseenLevel : it->second;
            }
        }
        col.codes = std::move(remapped);
        col.levels = ref.levels;
    }
    return out;
}

Dataset Dataset::load_csv_like(const std::string& path, const Dataset& like, const LoadOptions& opts) {
    return parse_csv_like(read_file(path), like, opts);
}

Dataset Dataset::make_template(Schema schema, std::vector<std::vector<std::string>> level_dicts,
                               std::vector<std::string> class_labels) {
    if (schema.columns.size() != level_dicts.size())
        throw DataError("level dictionary count does not match the schema");
    Dataset out;
    out.schema_ = std::move(schema);
    out.class_labels_ = std::move(class_labels);
    out.class_counts_.assign(out.class_labels_.size(), 0);
    out.columns_.resize(out.schema_.columns.size());
    for (std::size_t i = 0; i < out.columns_.size(); ++i) {
        out.columns_[i].name = out.schema_.columns[i].name;
        out.columns_[i].role = out.schema_.columns[i].role;
        out.columns_[i].levels = std::move(level_dicts[i]);
        if (out.schema_.columns[i].role == Role::Numeric ||
            out.schema_.columns[i].role == Role::Categorical)
            out.predictor_cols_.push_back(static_cast<int>(i));
    }
    return out;
}

std::string Dataset::to_csv() const {
    std::string out;
    bool first = true;
    for (const auto& col : columns_) {
        if (!first) out += ",";
        out += csv_escape(col.name);
        first = false;
    }
    out += "\n";
    for (std::size_t r = 0; r < n_rows_; ++r) {
        first = true;
        for (const auto& col : columns_) {
            if (!first) out += ",";
            first = false;
            switch (col.role) {
            case Role::Class:
                out += csv_escape(class_labels_[class_codes_[r]]);
                break;
            case Role::Numeric:
                out += std::isnan(col.values[r]) ? "NA" : format_double(col.values[r]);
                break;
            case Role::Categorical:
                if (col.codes[r] == kMissingLevel) out += "NA";
                else out += csv_escape(col.levels[col.codes[r]]);
                break;
            case Role::Excluded:
                break;
            }
        }
        out += "\n";
    }
    return out;
}

void Dataset::save_csv(const std::string& path) const { write_file(path, to_csv()); }

Dataset Dataset::subset(std::span<const std::int32_t> rows) const {
    Dataset out;
    out.schema_ = schema_;
    out.class_labels_ = class_labels_;
    out.predictor_cols_ = predictor_cols_;
    out.n_rows_ = rows.size();
    out.columns_.resize(columns_.size());
    for (std::size_t s = 0; s < columns_.size(); ++s) {
        const Column& src = columns_[s];
        Column& dst = out.columns_[s];
        dst.name = src.name;
        dst.role = src.role;
        dst.levels = src.levels;
        if (src.role == Role::Numeric) {
            dst.values.reserve(rows.size());
            for (auto r : rows) dst.values.push_back(src.values[r]);
        } else if (src.role == Role::Categorical) {
            dst.codes.reserve(rows.size());
            for (auto r : rows) dst.codes.push_back(src.codes[r]);
        }
    }
    if (has_class()) {
        out.class_codes_.reserve(rows.size());
        out.class_counts_.assign(class_labels_.size(), 0);
        for (auto r : rows) {
            out.class_codes_.push_back(class_codes_[r]);
            ++out.class_counts_[class_codes_[r]];
        }
    }
    return out;
}

void DatasetBuilder::add_numeric(const std::string& name, std::vector<double> values) {
    if (values.size() != n_rows_) throw std::invalid_argument("column length mismatch");
    Column c;
    c.name = name;
    c.role = Role::Numeric;
    c.values = std::move(values);
    cols_.push_back(std::move(c));
}

void DatasetBuilder::add_categorical(const std::string& name, std::vector<std::int32_t> codes,
                                     std::vector<std::string> levels) {
    if (codes.size() != n_rows_) throw std::invalid_argument("column length mismatch");
    for (auto code : codes)
        if (code != kMissingLevel && (code < 0 || code >= static_cast<std::int32_t>(levels.size())))
            throw std::invalid_argument("level code out of range");
    Column c;
    c.name = name;
    c.role = Role::Categorical;
    c.codes = std::move(codes);
    c.levels = std::move(levels);
    cols_.push_back(std::move(c));
}

void DatasetBuilder::set_class(std::vector<std::string> labels_per_row) {
    if (labels_per_row.size() != n_rows_) throw std::invalid_argument("class length mismatch");
    row_labels_ = std::move(labels_per_row);
}

Dataset DatasetBuilder::build() const {
    if (row_labels_.empty()) throw std::invalid_argument("builder: class labels not set");
    Dataset ds;
    ds.n_rows_ = n_rows_;
    Column yc;
    yc.name = "class";
    yc.role = Role::Class;
    ds.columns_.push_back(std::move(yc));
    ds.schema_.columns.push_back({"class", Role::Class});
    for (const auto& c : cols_) {
        ds.schema_.columns.push_back({c.name, c.role});
        ds.columns_.push_back(c);
        ds.predictor_cols_.push_back(static_cast<int>(ds.columns_.size()) - 1);
    }
    std::vector<std::string> labels = row_labels_;
    std::sort(labels.begin(), labels.end(), numeric_aware_less);
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    ds.class_labels_ = labels;
    std::unordered_map<std::string, std::int32_t> code;
    for (std::size_t j = 0; j < labels.size(); ++j) code[labels[j]] = static_cast<std::int32_t>(j);
    ds.class_codes_.resize(n_rows_);
    ds.class_counts_.assign(labels.size(), 0);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        ds.class_codes_[r] = code[row_labels_[r]];
        ++ds.class_counts_[ds.class_codes_[r]];
    }
    return ds;
}

Priors Priors::estimate(const Dataset& data) {
    Priors p;
    p.estimated = true;
    const double n = static_cast<double>(data.n_rows());
    p.pi.reserve(data.class_counts().size());
    for (auto c : data.class_counts()) p.pi.push_back(static_cast<double>(c) / n);
    return p;
}

Priors Priors::from_json_file(const std::string& path, const Dataset& data) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("priors file: ") + e.what());
    }
    if (!j.is_object()) throw DataError("priors file: expected an object of label -> weight");
    Priors p;
    p.estimated = false;
    p.pi.assign(data.n_classes(), -1.0);
    for (const auto& [key, val] : j.items()) {
        int code = -1;
        for (int c = 0; c < data.n_classes(); ++c)
            if (data.class_labels()[c] == key) { code = c; break; }
        if (code < 0) throw DataError("priors file: unknown class label `" + key + "`");
        if (!val.is_number() || val.get<double>() <= 0.0)
            throw DataError("priors file: weight for `" + key + "` must be positive");
        p.pi[code] = val.get<double>();
    }
    double sum = 0.0;
    for (int c = 0; c < data.n_classes(); ++c) {
        if (p.pi[c] < 0.0)
            throw DataError("priors file: no weight for class `" + data.class_labels()[c] + "`");
        sum += p.pi[c];
    }
    for (double& v : p.pi) v /= sum;
    return p;
}

CostMatrix CostMatrix::unit(int n_classes) {
    CostMatrix cm;
    cm.n = n_classes;
    cm.c.assign(static_cast<std::size_t>(n_classes) * n_classes, 1.0);
    for (int i = 0; i < n_classes; ++i) cm.c[i * n_classes + i] = 0.0;
    return cm;
}

CostMatrix CostMatrix::from_json_file(const std::string& path, const Dataset& data) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("cost file: ") + e.what());
    }
    if (!j.is_object()) throw DataError("cost file: expected {predicted: {true: cost}}");
    CostMatrix cm = CostMatrix::unit(data.n_classes());
    auto code_of = [&](const std::string& label) {
        for (int c = 0; c < data.n_classes(); ++c)
            if (data.class_labels()[c] == label) return c;
        throw DataError("cost file: unknown class label `" + label + "`");
    };
    for (const auto& [pred, row] : j.items()) {
        const int i = code_of(pred);
        if (!row.is_object()) throw DataError("cost file: entries must be objects");
        for (const auto& [truth, val] : row.items()) {
            const int jj = code_of(truth);
            if (!val.is_number() || val.get<double>() < 0.0)
                throw DataError("cost file: costs must be non-negative numbers");
            cm.c[i * cm.n + jj] = val.get<double>();
        }
    }
    for (int i = 0; i < cm.n; ++i)
        if (cm.c[i * cm.n + i] != 0.0)
            throw DataError("cost file: diagonal C(i|i) must be zero");
    return cm;
}

TrainContext::TrainContext(const Dataset& d, Priors p, CostMatrix cm)
    : data(&d), priors(std::move(p)), costs(std::move(cm)) {
    if (static_cast<int>(priors.pi.size()) != d.n_classes())
        throw std::invalid_argument("priors size mismatch");
    if (costs.n != d.n_classes()) throw std::invalid_argument("cost matrix size mismatch");
    class_weight.resize(priors.pi.size());
    for (std::size_t jc = 0; jc < priors.pi.size(); ++jc) {
        const auto nj = d.class_counts()[jc];
        // A class absent from a training subset (CV folds, bootstraps) has
        // zero mass everywhere; its weight is immaterial.
        class_weight[jc] = nj > 0 ? priors.pi[jc] / static_cast<double>(nj) : 0.0;
    }
}

NodeClassStats node_stats(const TrainContext& ctx, std::span<const std::int32_t> rows) {
    const int nj = ctx.data->n_classes();
    NodeClassStats st;
    st.counts.assign(nj, 0);
    const auto& codes = ctx.data->class_codes();
    for (auto r : rows) ++st.counts[codes[r]];
    st.n = static_cast<std::int64_t>(rows.size());
    st.p_jt.resize(nj);
    st.p_cond.assign(nj, 0.0);
    for (int j = 0; j < nj; ++j) {
        st.p_jt[j] = ctx.class_weight[j] * static_cast<double>(st.counts[j]);
        st.p_t += st.p_jt[j];
        if (st.counts[j] > 0) ++st.classes_present;
    }
    if (st.p_t > 0.0)
        for (int j = 0; j < nj; ++j) st.p_cond[j] = st.p_jt[j] / st.p_t;
    return st;
}

int assign_class(const NodeClassStats& stats, const CostMatrix& costs) {
    const int nj = static_cast<int>(stats.p_cond.size());
    int best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nj; ++i) {
        double c = 0.0;
        for (int j = 0; j < nj; ++j) c += costs(i, j) * stats.p_cond[j];
        if (c < best_cost) {
            best_cost = c;
            best = i;
        }
    }
    return best;
}

double gini(const NodeClassStats& stats) {
    double s = 0.0;
    for (double p : stats.p_cond) s += p * p;
    return 1.0 - s;
}

} // namespace chitree
