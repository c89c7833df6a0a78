#include <CLI11.hpp>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "chitree/dataset.hpp"
#include "chitree/ensemble.hpp"
#include "chitree/eval.hpp"
#include "chitree/synthetic.hpp"
#include "chitree/tree.hpp"

namespace {

using namespace chitree;

// Flag combinations that only become detectable after parsing; exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt6(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

std::string fmt_full(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string fixed4(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << x;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path + "'");
}

// Empty path means standard output.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) std::cout << text;
    else write_file(path, text);
}

struct FitOpts {
    std::string data, schema, priors, cost;
    std::string method = "S";
    int m0 = 5;
    int folds = 10;
    int max_depth = 30;
    int trees = 0;
    int threads = 1;
    std::uint64_t seed = 1;
    bool one_se = false;
};

void add_fit_options(CLI::App* sub, FitOpts& o) {
    sub->add_option("--data", o.data, "training data CSV")->required();
    sub->add_option("--schema", o.schema, "column role file")->required();
    sub->add_option("--method", o.method, "S, K, N, BG or GF")
        ->check(CLI::IsMember({"S", "K", "N", "BG", "GF"}));
    sub->add_option("--m0", o.m0, "minimum class count per split arm")
        ->check(CLI::Range(1, 1000000));
    sub->add_option("--folds", o.folds, "cross-validation folds")->check(CLI::Range(2, 1000));
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--trees", o.trees, "ensemble size, 0 picks the method default")
        ->check(CLI::Range(0, 1000000));
    sub->add_option("--max-depth", o.max_depth, "depth cap")->check(CLI::Range(1, 64));
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_option("--priors", o.priors, "class priors JSON file");
    sub->add_option("--cost", o.cost, "misclassification cost JSON file");
    sub->add_flag("--one-se", o.one_se, "prune to the smallest tree within one SE");
}

FitSpec spec_of(const FitOpts& o) {
    FitSpec s;
    s.method = o.method;
    s.trees = o.trees;
    s.grow.m0 = o.m0;
    s.grow.cv_folds = o.folds;
    s.grow.seed = o.seed;
    s.grow.one_se = o.one_se;
    s.grow.max_depth = o.max_depth;
    s.grow.threads = o.threads;
    return s;
}

Priors priors_of(const FitOpts& o, const Dataset& data) {
    return o.priors.empty() ? Priors::estimate(data) : Priors::from_json_file(o.priors, data);
}

CostMatrix costs_of(const FitOpts& o, const Dataset& data) {
    return o.cost.empty() ? CostMatrix::unit(data.n_classes())
                          : CostMatrix::from_json_file(o.cost, data);
}

struct Resub {
    double cost = 0.0;
    std::int64_t errors = 0;
};

Resub resubstitution(const FittedModel& model, const TrainContext& ctx) {
    Resub r;
    const Dataset& d = *ctx.data;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        const int truth = d.class_codes()[i];
        const int pred = model.predict(d, static_cast<std::int32_t>(i));
        r.cost += ctx.class_weight[truth] * ctx.costs(pred, truth);
        if (pred != truth) ++r.errors;
    }
    return r;
}

struct LoadedModel {
    std::optional<Tree> tree;
    std::optional<Ensemble> ensemble;
};

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw DataError("model file '" + path + "' is not valid JSON");
    const std::string kind = j.value("model", "");
    LoadedModel m;
    if (kind == "classification-tree") m.tree = tree_from_json(ss.str());
    else if (kind == "tree-ensemble") m.ensemble = ensemble_from_json(ss.str());
    else throw DataError("'" + path + "' is not a recognized model file");
    return m;
}

int run_train(const FitOpts& o, const std::string& out) {
    const Schema schema = Schema::load_file(o.schema);
    const Dataset data = Dataset::load_csv(o.data, schema);
    const TrainContext ctx(data, priors_of(o, data), costs_of(o, data));
    const FittedModel model = fit_model(ctx, spec_of(o));
    if (model.tree) save_tree(*model.tree, out);
    else save_ensemble(*model.ensemble, out);
    const Resub r = resubstitution(model, ctx);
    if (model.tree)
        std::cout << "leaves=" << model.n_leaves();
    else
        std::cout << "members=" << model.ensemble->members.size();
    std::cout << " train_cost=" << fmt6(r.cost) << " train_errors=" << r.errors << "/"
              << data.n_rows() << " model=" << out << "\n";
    return 0;
}

struct PredictOpts {
    std::string model, data, out;
    bool leaf_ids = false;
};

int run_predict(const PredictOpts& o) {
    const LoadedModel m = load_model(o.model);
    if (o.leaf_ids && !m.tree) throw UsageError("--leaf-ids needs a single-tree model");
    const Dataset tmpl = m.tree ? m.tree->make_template() : m.ensemble->make_template();
    const Dataset data = Dataset::load_csv_like(o.data, tmpl);
    const std::vector<std::string>& labels =
        m.tree ? m.tree->class_labels : m.ensemble->members.front().class_labels;
    std::ostringstream out;
    out << "predicted";
    if (o.leaf_ids) out << ",leaf";
    out << "\n";
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        const auto row = static_cast<std::int32_t>(r);
        const int code = m.tree ? m.tree->predict(data, row) : predict_ensemble(*m.ensemble, data, row);
        out << csv_field(labels.at(code));
        if (o.leaf_ids) out << "," << m.tree->leaf_of(data, row);
        out << "\n";
    }
    emit(o.out, out.str());
    if (!o.out.empty())
        std::cout << "rows=" << data.n_rows() << " predictions=" << o.out << "\n";
    return 0;
}

int run_cv(const FitOpts& o, const std::string& out, const std::string& format) {
    const Schema schema = Schema::load_file(o.schema);
    const Dataset data = Dataset::load_csv(o.data, schema);
    const Priors pri = priors_of(o, data);
    const CostMatrix cm = costs_of(o, data);
    const double cost = crossval_error(data, pri, cm, spec_of(o), o.folds, o.seed, o.threads);
    std::cout << "cv_cost=" << fmt6(cost) << " method=" << o.method << " folds=" << o.folds
              << " seed=" << o.seed << "\n";
    if (!out.empty()) {
        if (format == "json") {
            nlohmann::ordered_json j;
            j["method"] = o.method;
            j["folds"] = o.folds;
            j["seed"] = o.seed;
            j["cost"] = cost;
            write_file(out, j.dump(2) + "\n");
        } else {
            write_file(out, "method,folds,seed,cost\n" + o.method + "," + std::to_string(o.folds) +
                                "," + std::to_string(o.seed) + "," + fmt_full(cost) + "\n");
        }
    }
    return 0;
}

struct SimOpts {
    std::string kind;
    int trials = 2000;
    std::uint64_t seed = 1;
    std::size_t n = 0;
    int threads = 1;
    std::string out;
    std::string format = "csv";
};

int run_simulate_bias(const SimOpts& o) {
    const BiasKind bk =
        o.kind == "bias-independence" ? BiasKind::Independence : BiasKind::Dependence;
    const BiasReport rep =
        run_bias_simulation(bk, o.trials, o.seed, o.threads, o.n ? o.n : 500);
    std::cout << "scenario=" << o.kind << " trials=" << rep.trials << " seed=" << o.seed << "\n";
    std::cout << std::left << std::setw(10) << "variable" << std::right << std::setw(11)
              << "univariate" << std::setw(8) << "linear" << std::setw(13) << "probability"
              << std::setw(9) << "se" << "\n";
    double total = 0.0;
    for (std::size_t v = 0; v < rep.variables.size(); ++v) {
        total += rep.probability[v];
        std::cout << std::left << std::setw(10) << rep.variables[v] << std::right << std::setw(11)
                  << rep.univariate[v] << std::setw(8) << rep.linear[v] << std::setw(13)
                  << fixed4(rep.probability[v]) << std::setw(9) << fixed4(rep.se[v]) << "\n";
    }
    std::cout << "total_probability=" << fmt6(total) << "\n";
    if (!o.out.empty()) {
        if (o.format == "json") {
            nlohmann::ordered_json j;
            j["scenario"] = o.kind;
            j["trials"] = rep.trials;
            j["seed"] = o.seed;
            j["variables"] = rep.variables;
            j["univariate"] = rep.univariate;
            j["linear"] = rep.linear;
            j["probability"] = rep.probability;
            j["se"] = rep.se;
            write_file(o.out, j.dump(2) + "\n");
        } else {
            std::string csv = "variable,univariate,linear,probability,se\n";
            for (std::size_t v = 0; v < rep.variables.size(); ++v) {
                csv += rep.variables[v] + "," + std::to_string(rep.univariate[v]) + "," +
                       std::to_string(rep.linear[v]) + "," + fmt_full(rep.probability[v]) + "," +
                       fmt_full(rep.se[v]) + "\n";
            }
            write_file(o.out, csv);
        }
    }
    return 0;
}

int run_simulate_experiment(const SimOpts& o) {
    const bool chess = o.kind == "chessboard";
    const std::size_t n = o.n ? o.n : (chess ? 1000 : 300);
    if (!chess && n % 3 != 0) throw UsageError("--n must be divisible by 3 for circle-lines");
    const Dataset data = chess ? gen_chessboard(n, o.seed) : gen_circle_lines(n, o.seed);
    const TrainContext ctx(data, Priors::estimate(data), CostMatrix::unit(data.n_classes()));
    const std::vector<std::string> methods =
        chess ? std::vector<std::string>{"S"} : std::vector<std::string>{"S", "K", "N"};
    std::string csv = "kind,n,seed,method,leaves,train_errors,train_cost\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& method : methods) {
        FitSpec spec;
        spec.method = method;
        spec.grow.seed = o.seed;
        spec.grow.threads = o.threads;
        const FittedModel model = fit_model(ctx, spec);
        const Resub r = resubstitution(model, ctx);
        std::cout << "method=" << method << " leaves=" << model.n_leaves() << " train_errors="
                  << r.errors << "/" << n << " train_cost=" << fmt6(r.cost) << "\n";
        csv += o.kind + "," + std::to_string(n) + "," + std::to_string(o.seed) + "," + method +
               "," + std::to_string(model.n_leaves()) + "," + std::to_string(r.errors) + "," +
               fmt_full(r.cost) + "\n";
        nlohmann::ordered_json row;
        row["kind"] = o.kind;
        row["n"] = n;
        row["seed"] = o.seed;
        row["method"] = method;
        row["leaves"] = model.n_leaves();
        row["train_errors"] = r.errors;
        row["train_cost"] = r.cost;
        rows.push_back(row);
    }
    if (!o.out.empty()) {
        if (o.format == "json") write_file(o.out, rows.dump(2) + "\n");
        else write_file(o.out, csv);
    }
    return 0;
}

int run_simulate(const SimOpts& o) {
    if (o.kind == "bias-independence" || o.kind == "bias-dependence") return run_simulate_bias(o);
    return run_simulate_experiment(o);
}

struct ExportOpts {
    std::string model, out;
    std::string format = "text";
};

int run_export(const ExportOpts& o) {
    const LoadedModel m = load_model(o.model);
    if (!m.tree) throw DataError("export needs a single-tree model file");
    emit(o.out, o.format == "dot" ? export_dot(*m.tree) : export_text(*m.tree));
    return 0;
}

struct GenOpts {
    std::string kind, out, schema_out;
    std::size_t n = 0;
    std::uint64_t seed = 1;
};

int run_generate(const GenOpts& o) {
    std::size_t n = o.n;
    if (n == 0) n = o.kind == "chessboard" ? 1000 : (o.kind == "circle-lines" ? 300 : 500);
    Dataset data = [&] {
        if (o.kind == "chessboard") return gen_chessboard(n, o.seed);
        if (o.kind == "circle-lines") {
            if (n % 3 != 0) throw UsageError("--n must be divisible by 3 for circle-lines");
            return gen_circle_lines(n, o.seed);
        }
        const BiasKind bk =
            o.kind == "bias-independence" ? BiasKind::Independence : BiasKind::Dependence;
        return gen_bias_scenario(bk, n, o.seed);
    }();
    data.save_csv(o.out);
    if (!o.schema_out.empty()) write_file(o.schema_out, data.schema().to_text());
    std::cout << "rows=" << data.n_rows() << " columns=" << data.columns().size() << " data="
              << o.out;
    if (!o.schema_out.empty()) std::cout << " schema=" << o.schema_out;
    std::cout << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classification trees with chi-squared split-variable selection"};
    app.require_subcommand(1);

    FitOpts train_o;
    std::string train_out;
    auto* train_cmd = app.add_subcommand("train", "Fit a tree or ensemble and save it");
    add_fit_options(train_cmd, train_o);
    train_cmd->add_option("--out", train_out, "model file to write")->required();

    PredictOpts pred_o;
    auto* predict_cmd = app.add_subcommand("predict", "Score a CSV with a saved model");
    predict_cmd->add_option("--model", pred_o.model, "model file")->required();
    predict_cmd->add_option("--data", pred_o.data, "CSV to score")->required();
    predict_cmd->add_option("--out", pred_o.out, "predictions CSV, default standard output");
    predict_cmd->add_flag("--leaf-ids", pred_o.leaf_ids, "append the routed leaf id");

    FitOpts cv_o;
    std::string cv_out, cv_format = "csv";
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validated misclassification cost");
    add_fit_options(cv_cmd, cv_o);
    cv_cmd->add_option("--out", cv_out, "report file");
    cv_cmd->add_option("--format", cv_format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));

    SimOpts sim_o;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a synthetic experiment");
    sim_cmd->add_option("kind", sim_o.kind, "experiment kind")
        ->required()
        ->check(CLI::IsMember(
            {"bias-independence", "bias-dependence", "chessboard", "circle-lines"}));
    sim_cmd->add_option("--trials", sim_o.trials, "simulation trials")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--n", sim_o.n, "rows per dataset, 0 picks the kind default");
    sim_cmd->add_option("--seed", sim_o.seed, "random seed");
    sim_cmd->add_option("--threads", sim_o.threads, "worker threads")->check(CLI::Range(1, 1024));
    sim_cmd->add_option("--out", sim_o.out, "report file");
    sim_cmd->add_option("--format", sim_o.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));

    ExportOpts ex_o;
    auto* export_cmd = app.add_subcommand("export", "Render a saved tree as text or dot");
    export_cmd->add_option("--model", ex_o.model, "model file")->required();
    export_cmd->add_option("--format", ex_o.format, "output format")
        ->check(CLI::IsMember({"text", "dot"}));
    export_cmd->add_option("--out", ex_o.out, "output file, default standard output");

    GenOpts gen_o;
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    gen_cmd->add_option("kind", gen_o.kind, "generator kind")
        ->required()
        ->check(CLI::IsMember(
            {"chessboard", "circle-lines", "bias-independence", "bias-dependence"}));
    gen_cmd->add_option("--n", gen_o.n, "rows, 0 picks the kind default");
    gen_cmd->add_option("--seed", gen_o.seed, "random seed");
    gen_cmd->add_option("--out", gen_o.out, "CSV file to write")->required();
    gen_cmd->add_option("--schema-out", gen_o.schema_out, "schema file to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (train_cmd->parsed()) return run_train(train_o, train_out);
        if (predict_cmd->parsed()) return run_predict(pred_o);
        if (cv_cmd->parsed()) return run_cv(cv_o, cv_out, cv_format);
        if (sim_cmd->parsed()) return run_simulate(sim_o);
        if (export_cmd->parsed()) return run_export(ex_o);
        if (gen_cmd->parsed()) return run_generate(gen_o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
