#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "helpers.hpp"

using namespace helpers;

namespace {

struct CliResult {
    int status = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const char* exe = std::getenv("CHITREE_CLI");
    REQUIRE(exe != nullptr);
    const std::string out_path = temp_path("cli_capture.txt");
    const std::string cmd = std::string(exe) + " " + args + " > " + out_path + " 2>&1";
    const int rc = std::system(cmd.c_str());
    CliResult res;
    res.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    res.output = slurp(out_path);
    std::remove(out_path.c_str());
    return res;
}

struct Workspace {
    std::string data = temp_path("cli_data.csv");
    std::string schema = temp_path("cli_data.schema");
    std::string model = temp_path("cli_model.json");

    void generate(const std::string& kind, int n, int seed) {
        const CliResult r = run_cli("generate " + kind + " --n " + std::to_string(n) +
                                    " --seed " + std::to_string(seed) + " --out " + data +
                                    " --schema-out " + schema);
        REQUIRE(r.status == 0);
    }

    ~Workspace() {
        std::remove(data.c_str());
        std::remove(schema.c_str());
        std::remove(model.c_str());
    }
};

} // namespace

TEST_CASE("cli: help and version exit cleanly") {
    CHECK(run_cli("--help").status == 0);
    const CliResult sub = run_cli("train --help");
    CHECK(sub.status == 0);
    CHECK(sub.output.find("--data") != std::string::npos);
}

TEST_CASE("cli: generate, train, predict round trip") {
    Workspace ws;
    ws.generate("chessboard", 240, 3);
    CHECK(slurp(ws.data).rfind("class,X1,", 0) == 0);

    const CliResult train = run_cli("train --data " + ws.data + " --schema " + ws.schema +
                                    " --out " + ws.model + " --seed 5");
    REQUIRE(train.status == 0);
    CHECK(train.output.find("leaves=") != std::string::npos);
    CHECK(train.output.find("model=") != std::string::npos);

    const std::string preds = temp_path("cli_preds.csv");
    const CliResult pr = run_cli("predict --model " + ws.model + " --data " + ws.data +
                                 " --out " + preds + " --leaf-ids");
    REQUIRE(pr.status == 0);
    const std::string body = slurp(preds);
    CHECK(body.rfind("predicted,leaf\n", 0) == 0);
    CHECK(std::count(body.begin(), body.end(), '\n') == 241);
    std::remove(preds.c_str());
}

TEST_CASE("cli: training twice gives byte-identical models") {
    Workspace ws;
    ws.generate("chessboard", 160, 9);
    const std::string second = temp_path("cli_model2.json");
    REQUIRE(run_cli("train --data " + ws.data + " --schema " + ws.schema + " --out " +
                    ws.model + " --seed 11")
                .status == 0);
    REQUIRE(run_cli("train --data " + ws.data + " --schema " + ws.schema + " --out " + second +
                    " --seed 11 --threads 4")
                .status == 0);
    CHECK(slurp(ws.model) == slurp(second));
    std::remove(second.c_str());
}

TEST_CASE("cli: flag misuse exits 1") {
    Workspace ws;
    ws.generate("chessboard", 120, 1);
    CHECK(run_cli("train --data " + ws.data + " --schema " + ws.schema +
                  " --out /tmp/x.json --method Z")
              .status == 1);
    CHECK(run_cli("train --schema " + ws.schema + " --out /tmp/x.json").status == 1);
    CHECK(run_cli("simulate bias-independence --trials 0").status == 1);
    CHECK(run_cli("generate circle-lines --n 100 --seed 1 --out /tmp/x.csv").status == 1);
    CHECK(run_cli("nosuchverb").status == 1);
}

TEST_CASE("cli: data problems exit 2") {
    Workspace ws;
    ws.generate("chessboard", 120, 2);
    CHECK(run_cli("train --data /nonexistent.csv --schema " + ws.schema + " --out /tmp/x.json")
              .status == 2);

    const std::string garbage = write_temp("cli_garbage.json", "not a model {]");
    CHECK(run_cli("predict --model " + garbage + " --data " + ws.data).status == 2);
    std::remove(garbage.c_str());

    // a scoring file whose columns do not match the trained model
    REQUIRE(run_cli("train --data " + ws.data + " --schema " + ws.schema + " --out " +
                    ws.model + " --seed 2")
                .status == 0);
    const std::string wrong = write_temp("cli_wrong.csv", "z1,z2\n1,2\n");
    CHECK(run_cli("predict --model " + ws.model + " --data " + wrong).status == 2);
    std::remove(wrong.c_str());
}

TEST_CASE("cli: ensembles train, predict, and refuse tree-only flags") {
    Workspace ws;
    ws.generate("chessboard", 150, 7);
    const CliResult train = run_cli("train --data " + ws.data + " --schema " + ws.schema +
                                    " --out " + ws.model + " --method BG --trees 3 --seed 3");
    REQUIRE(train.status == 0);
    CHECK(train.output.find("members=3") != std::string::npos);

    const CliResult pr = run_cli("predict --model " + ws.model + " --data " + ws.data);
    CHECK(pr.status == 0);
    CHECK(pr.output.rfind("predicted\n", 0) == 0); // stdout when --out is absent

    CHECK(run_cli("predict --model " + ws.model + " --data " + ws.data + " --leaf-ids")
              .status == 1);
    CHECK(run_cli("export --model " + ws.model + " --format text").status == 2);
}

TEST_CASE("cli: cross-validation reports a cost") {
    Workspace ws;
    ws.generate("chessboard", 150, 13);
    const CliResult cv = run_cli("cv --data " + ws.data + " --schema " + ws.schema +
                                 " --folds 5 --seed 2");
    REQUIRE(cv.status == 0);
    CHECK(cv.output.find("cv_cost=") != std::string::npos);
    CHECK(cv.output.find("folds=5") != std::string::npos);
}

TEST_CASE("cli: selection frequencies print a closed table") {
    const CliResult sim =
        run_cli("simulate bias-independence --trials 80 --n 200 --seed 4 --threads 2");
    REQUIRE(sim.status == 0);
    CHECK(sim.output.find("X1") != std::string::npos);
    CHECK(sim.output.find("total_probability=1") != std::string::npos);
}

TEST_CASE("cli: exports describe the tree in text and dot") {
    Workspace ws;
    ws.generate("chessboard", 200, 19);
    REQUIRE(run_cli("train --data " + ws.data + " --schema " + ws.schema + " --out " +
                    ws.model + " --seed 1")
                .status == 0);
    const CliResult text = run_cli("export --model " + ws.model + " --format text");
    REQUIRE(text.status == 0);
    CHECK(text.output.find("<=") != std::string::npos);
    const CliResult dot = run_cli("export --model " + ws.model + " --format dot");
    REQUIRE(dot.status == 0);
    CHECK(dot.output.rfind("digraph", 0) == 0);
}
