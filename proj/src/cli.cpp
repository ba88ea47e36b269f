#include "plra/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "plra/adapter_io.hpp"
#include "plra/diagnostics.hpp"
#include "plra/engine.hpp"
#include "plra/evo_ops.hpp"

namespace plra::cli {

namespace {

constexpr uint64_t kDefaultSeed = 42;

engine::EngineConfig resolve_config(const std::string& config_path,
                                    std::optional<uint64_t> seed_override,
                                    std::optional<std::string> mode_override) {
    engine::EngineConfig cfg;
    if (!config_path.empty()) {
        cfg = engine::load_config(config_path);
    }
    // Seed precedence: flag > config > fixed default. A config without a
    // "seed" key keeps the struct default, which equals kDefaultSeed.
    if (seed_override) {
        cfg.seed = *seed_override;
    }
    if (mode_override) {
        cfg.mode = engine::mode_from_string(*mode_override);
    }
    cfg.validate();
    return cfg;
}

int run_train(const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& out_dir, std::optional<std::string> mode_override,
              std::optional<int> workers) {
    engine::EngineConfig cfg = resolve_config(config_path, seed, mode_override);
    if (workers) {
        cfg.workers = *workers;
    }
    engine::run_training(cfg, out_dir);
    std::cout << "run complete: " << out_dir << " (" << cfg.steps << " steps, mode "
              << engine::to_string(cfg.mode) << ", seed " << cfg.seed << ")\n";
    return 0;
}

int run_retention(const std::string& config_path, std::optional<uint64_t> seed,
                  const std::string& out_dir, const std::vector<std::string>& only_ops,
                  std::vector<int> snapshots) {
    engine::EngineConfig cfg = resolve_config(config_path, seed, std::nullopt);
    engine::RetentionOptions opt;
    for (const auto& name : only_ops) {
        opt.operators.push_back(ops::operator_from_string(name));
    }
    if (!snapshots.empty()) {
        opt.snapshots = std::move(snapshots);
    }
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(std::filesystem::path(out_dir) / "resolved_config.json");
        f << engine::config_to_json_text(cfg) << "\n";
    }
    const engine::RetentionReport report = engine::retention_benchmark(cfg, opt);
    engine::write_retention_report(report, out_dir);
    std::cout << "retention report: " << report.rows.size() << " rows -> " << out_dir << "\n";
    return 0;
}

int run_ops_apply(const std::string& op_name, const std::string& parent_path,
                  const std::string& parent2_path, uint64_t seed, const std::string& out_path,
                  const std::string& params_path) {
    const ops::OperatorId id = ops::operator_from_string(op_name);
    ops::OperatorParams params;
    if (!params_path.empty()) {
        const engine::EngineConfig cfg = engine::load_config(params_path);
        params = cfg.op_params;
    }
    const AdapterState p1 = load_adapter(parent_path);
    std::vector<const AdapterState*> parents = {&p1};
    std::vector<std::string> parent_ids = {parent_path};
    AdapterState p2;
    if (ops::operator_arity(id) == 2) {
        if (parent2_path.empty()) {
            std::cerr << "error: operator " << op_name << " needs --parent2\n";
            return 1;
        }
        p2 = load_adapter(parent2_path);
        parents.push_back(&p2);
        parent_ids.push_back(parent2_path);
    } else if (!parent2_path.empty()) {
        std::cerr << "error: operator " << op_name << " takes a single parent\n";
        return 1;
    }
    const ops::OpChild child = ops::apply_operator(id, parents, parent_ids, params, seed);
    save_adapter(child.state, out_path);
    std::cout << "wrote " << out_path << " (op " << child.provenance.op << ", seed "
              << child.provenance.seed << ")\n";
    return 0;
}

int run_eval(const std::string& checkpoint_path) {
    const engine::PopulationState state = engine::load_checkpoint(checkpoint_path);
    std::cout << engine::describe_checkpoint(state);
    return 0;
}

int run_report(const std::string& run_dir) {
    diag::write_report(run_dir);
    std::cout << "report written under " << run_dir << "/report\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"population self-play trainer for low-rank adapter policies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "runs/out";
    std::optional<uint64_t> seed;
    std::optional<int> workers;

    auto add_common = [&](CLI::App* cmd, bool need_out) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "seed override (flag > config > default 42)");
        if (need_out) {
            cmd->add_option("--out", out_dir, "output directory")->required();
        }
    };

    CLI::App* train = app.add_subcommand("train", "population training run");
    add_common(train, true);
    train->add_option("--workers", workers, "matchup worker pool size (default: cores)");

    CLI::App* baseline = app.add_subcommand("baseline", "single-agent self-calibrating run");
    add_common(baseline, true);

    CLI::App* retention = app.add_subcommand("retention", "operator retention benchmark");
    add_common(retention, true);
    std::vector<std::string> only_ops;
    std::vector<int> snapshots;
    retention->add_option("--op", only_ops, "restrict to these operators (may repeat)");
    retention->add_option("--snapshot", snapshots, "restrict to these snapshot steps (may repeat)");

    CLI::App* eval = app.add_subcommand("eval", "summarize a checkpoint");
    std::string checkpoint_path;
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

    CLI::App* ops_cmd = app.add_subcommand("ops", "adapter operator tools");
    CLI::App* ops_apply = ops_cmd->add_subcommand("apply", "apply one operator to adapter files");
    std::string op_name, parent_path, parent2_path, out_path, params_path;
    uint64_t ops_seed = kDefaultSeed;
    ops_apply->add_option("--op", op_name, "operator id")->required();
    ops_apply->add_option("--parent", parent_path, "parent adapter file")->required();
    ops_apply->add_option("--parent2", parent2_path, "second parent for crossovers");
    ops_apply->add_option("--seed", ops_seed, "operator seed");
    ops_apply->add_option("--out", out_path, "child adapter file")->required();
    ops_apply->add_option("--params", params_path, "config file supplying operator_params");

    CLI::App* report = app.add_subcommand("report", "emit plot-ready CSVs for a run directory");
    std::string run_dir;
    report->add_option("--run", run_dir, "run directory containing steps.jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) {
            return run_train(config_path, seed, out_dir, std::nullopt, workers);
        }
        if (baseline->parsed()) {
            return run_train(config_path, seed, out_dir, std::string("single_agent"), std::nullopt);
        }
        if (retention->parsed()) {
            return run_retention(config_path, seed, out_dir, only_ops, snapshots);
        }
        if (eval->parsed()) {
            return run_eval(checkpoint_path);
        }
        if (ops_cmd->parsed()) {
            if (!ops_apply->parsed()) {
                std::cerr << "error: expected 'ops apply'\n";
                return 1;
            }
            return run_ops_apply(op_name, parent_path, parent2_path, ops_seed, out_path, params_path);
        }
        if (report->parsed()) {
            return run_report(run_dir);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace plra::cli
