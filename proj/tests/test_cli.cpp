#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "plra/adapter_io.hpp"
#include "plra/cli.hpp"
#include "plra/rng.hpp"

namespace fs = std::filesystem;
using namespace plra;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("plra");
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

AdapterState small_adapter(uint64_t seed) {
    RngStream rng(seed);
    AdapterState a;
    a.rank = 2;
    a.scaling = 64.0f;
    FactorPair p;
    p.a = Tensor2D(2, 6);
    p.b = Tensor2D(5, 2);
    for (float& v : p.a.data) {
        v = static_cast<float>(rng.normal());
    }
    for (float& v : p.b.data) {
        v = static_cast<float>(rng.normal());
    }
    a.slots.emplace_back("grammar", std::move(p));
    return a;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("missing or malformed config exits with 1") {
    const fs::path dir = temp_dir("plra_cli_cfg");
    CHECK(run_cli({"train", "--config", "/nonexistent.json", "--out", (dir / "run").string()}) == 1);

    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << "{\"unknown_key\": true}";
    CHECK(run_cli({"train", "--config", bad.string(), "--out", (dir / "run").string()}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("unknown flags are rejected") {
    CHECK(run_cli({"train", "--nonsense", "1", "--out", "x"}) == 1);
    CHECK(run_cli({"not_a_subcommand"}) == 1);
}

TEST_CASE("train subcommand produces a populated run directory") {
    const fs::path dir = temp_dir("plra_cli_train");
    const fs::path cfg_path = dir / "cfg.json";
    std::ofstream(cfg_path) << R"({
        "n_teachers": 2, "n_students": 2, "steps": 6, "evolve_every": 3,
        "prompts_per_type": 2, "rollout_n": 4, "rank": 2,
        "gen_max_depth": 5, "archive_cells": 16, "workers": 1, "seed": 7
    })";
    const fs::path run = dir / "run";
    CHECK(run_cli({"train", "--config", cfg_path.string(), "--out", run.string()}) == 0);
    CHECK(fs::exists(run / "steps.jsonl"));
    CHECK(fs::exists(run / "problems.jsonl"));
    CHECK(fs::exists(run / "resolved_config.json"));
    CHECK(fs::exists(run / "checkpoint_final.json"));

    // resolved config records the seed actually used
    CHECK(slurp(run / "resolved_config.json").find("\"seed\": 7") != std::string::npos);

    SUBCASE("identical invocations produce byte-identical artifacts") {
        const fs::path run2 = dir / "run2";
        CHECK(run_cli({"train", "--config", cfg_path.string(), "--out", run2.string()}) == 0);
        CHECK(slurp(run / "steps.jsonl") == slurp(run2 / "steps.jsonl"));
        CHECK(slurp(run / "problems.jsonl") == slurp(run2 / "problems.jsonl"));
    }
    SUBCASE("the seed flag outranks the config") {
        const fs::path run3 = dir / "run3";
        CHECK(run_cli({"train", "--config", cfg_path.string(), "--seed", "99",
                       "--out", run3.string()}) == 0);
        CHECK(slurp(run3 / "resolved_config.json").find("\"seed\": 99") != std::string::npos);
        CHECK(slurp(run / "steps.jsonl") != slurp(run3 / "steps.jsonl"));
    }
    SUBCASE("report emits CSVs for the run") {
        CHECK(run_cli({"report", "--run", run.string()}) == 0);
        CHECK(fs::exists(run / "report" / "training_dynamics.csv"));
        CHECK(fs::exists(run / "report" / "complexity.csv"));
    }
    SUBCASE("eval summarizes the final checkpoint") {
        CHECK(run_cli({"eval", "--checkpoint", (run / "checkpoint_final.json").string()}) == 0);
        CHECK(run_cli({"eval", "--checkpoint", (dir / "missing.json").string()}) == 2);
    }
    fs::remove_all(dir);
}

TEST_CASE("baseline subcommand forces single-agent mode") {
    const fs::path dir = temp_dir("plra_cli_baseline");
    const fs::path cfg_path = dir / "cfg.json";
    std::ofstream(cfg_path) << R"({
        "steps": 4, "prompts_per_type": 2, "rollout_n": 4, "rank": 2,
        "gen_max_depth": 5, "archive_cells": 16, "workers": 1
    })";
    const fs::path run = dir / "run";
    CHECK(run_cli({"baseline", "--config", cfg_path.string(), "--out", run.string()}) == 0);
    CHECK(slurp(run / "resolved_config.json").find("\"mode\": \"single_agent\"") != std::string::npos);
    CHECK(slurp(run / "steps.jsonl").find("\"mode\":\"single_agent\"") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("ops apply on adapter files") {
    const fs::path dir = temp_dir("plra_cli_ops");
    const fs::path pa = dir / "a.plra";
    const fs::path pb = dir / "b.plra";
    save_adapter(small_adapter(1), pa);
    save_adapter(small_adapter(2), pb);

    SUBCASE("deterministic crossover produces identical children") {
        const fs::path out1 = dir / "c1.plra";
        const fs::path out2 = dir / "c2.plra";
        CHECK(run_cli({"ops", "apply", "--op", "x6_ties", "--parent", pa.string(),
                       "--parent2", pb.string(), "--out", out1.string()}) == 0);
        CHECK(run_cli({"ops", "apply", "--op", "x6_ties", "--parent", pa.string(),
                       "--parent2", pb.string(), "--out", out2.string()}) == 0);
        CHECK(slurp(out1) == slurp(out2));
        CHECK(!slurp(out1).empty());
    }
    SUBCASE("seeded mutation round-trips through files") {
        const fs::path out = dir / "m.plra";
        CHECK(run_cli({"ops", "apply", "--op", "m4_full_gauss", "--parent", pa.string(),
                       "--seed", "5", "--out", out.string()}) == 0);
        const AdapterState child = load_adapter(out);
        CHECK(child.rank == 2);
        CHECK(!bitwise_equal(child, load_adapter(pa)));
    }
    SUBCASE("arity errors are reported as usage errors") {
        CHECK(run_cli({"ops", "apply", "--op", "x6_ties", "--parent", pa.string(),
                       "--out", (dir / "x.plra").string()}) == 1);
        CHECK(run_cli({"ops", "apply", "--op", "m4_full_gauss", "--parent", pa.string(),
                       "--parent2", pb.string(), "--out", (dir / "y.plra").string()}) == 1);
    }
    SUBCASE("unknown operators fail cleanly") {
        CHECK(run_cli({"ops", "apply", "--op", "nope", "--parent", pa.string(),
                       "--out", (dir / "z.plra").string()}) == 1);
    }
    fs::remove_all(dir);
}

TEST_CASE("report on a missing run directory is a runtime error") {
    CHECK(run_cli({"report", "--run", "/nonexistent/run"}) == 2);
}
