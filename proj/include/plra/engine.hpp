#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plra/adapter.hpp"
#include "plra/diagnostics.hpp"
#include "plra/evo_ops.hpp"
#include "plra/ratings.hpp"
#include "plra/rl.hpp"
#include "plra/selfplay.hpp"

namespace plra::engine {

enum class Mode { population, single_agent, pair_1t1s };
enum class Optimizer { sgd, adam };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct EngineConfig {
    int n_teachers = 4;
    int n_students = 4;
    int steps = 200;
    int evolve_every = 10;
    double cull_fraction = 0.25;
    int prompts_per_type = 4;
    int rollout_n = 8;
    double temperature = 1.0;
    double learning_rate = 0.45;
    int rank = 4;
    float lora_alpha = 64.0f;
    uint64_t seed = 42;
    Mode mode = Mode::population;
    Optimizer optimizer = Optimizer::sgd;
    int gen_max_depth = 6;
    int archive_cells = 256;
    float teacher_init_std = 1.4f;
    float student_init_std = 2.2f;
    int workers = 0;  // 0 = hardware concurrency
    bool pair_evolution = false;  // force self-mutation in 1-member populations
    ops::OperatorParams op_params;
    // Desk default lcb_mult 1.5: with sigma-reset children and a 10-step
    // evolution interval, a multiplier of 3 leaves every child below every
    // incumbent on LCB and replacement degenerates to churn.
    ratings::RatingConfig rating{.lcb_mult = 1.5};

    void validate() const;  // throws std::invalid_argument on bad values
};

// Strict JSON (de)serialization: unknown keys are rejected.
EngineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const EngineConfig& cfg);
EngineConfig load_config(const std::filesystem::path& path);

struct Member {
    std::string id;
    AdapterState adapter;
    ratings::RatingState rating;
    ops::Provenance origin;
    rl::AdamState opt;
};

struct PopulationState {
    Mode mode = Mode::population;
    long step = 0;
    uint64_t root_seed = 0;
    std::vector<Member> teachers;  // the solo agent lives here in single_agent mode
    std::vector<Member> students;  // empty in single_agent mode
    int next_teacher_id = 0;
    int next_student_id = 0;
    diag::CvtArchive archive;
};

struct EvolutionEvent {
    long step = 0;
    std::string role;
    std::vector<std::string> culled;
    std::vector<std::string> parents;
    std::string op;
    uint64_t child_seed = 0;
    std::string child_id;
};

struct ProblemLogEntry {
    long step = 0;
    std::string teacher_id;
    std::string task_type;
    std::string program_text;
    int payload = 0;
    bool valid = false;
    dsl::ComplexityDescriptor descriptor;
    double rho = 0.0;
};
std::string problem_log_json(const ProblemLogEntry& e);

struct StepResult {
    diag::StepRecord record;
    std::vector<ProblemLogEntry> problems;
    std::vector<EvolutionEvent> events;
};

PopulationState init_state(const EngineConfig& cfg);

// One five-phase step: matchmaking, generation, solving, cross-evaluation
// and updates, then evolution on schedule. Transactional: on error the
// passed state is left unchanged.
StepResult training_step(PopulationState& state, const EngineConfig& cfg);

std::vector<EvolutionEvent> evolve_populations(PopulationState& state, const EngineConfig& cfg);

// Full checkpoint: adapters in container format (base64), ratings, rng root,
// step counter, archive fill state, optimizer moments.
std::string checkpoint_json(const PopulationState& state);
PopulationState state_from_checkpoint_json(const std::string& text);
void save_checkpoint(const PopulationState& state, const std::filesystem::path& path);
PopulationState load_checkpoint(const std::filesystem::path& path);
uint64_t state_hash(const PopulationState& state);

// Runs cfg.steps steps, writing steps.jsonl, problems.jsonl,
// resolved_config.json and checkpoint_final.json under out_dir.
void run_training(const EngineConfig& cfg, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Retention benchmark
// ---------------------------------------------------------------------------

struct RetentionOptions {
    std::vector<ops::OperatorId> operators;        // empty = full catalog
    std::vector<int> snapshots = {5, 10, 25, 50, 100};
    int parent_steps = 100;
    int retrain_steps = 50;
    int eval_problems = 32;
};

struct RetentionRow {
    std::string op;
    int snapshot = 0;
    double parent_reward = 0.0;
    std::vector<double> child_curve;  // eval reward at retrain step 0..retrain_steps
    int steps_to_90pct = -1;          // first retrain step reaching 0.9 * parent_reward
};

struct RetentionReport {
    std::vector<RetentionRow> rows;
    std::vector<double> parent_out_curve;  // per-step eval of the infer_output parent
    std::vector<double> parent_in_curve;
};

// Trains two parents against a fixed uniform teacher (one per task type),
// snapshots them, applies every requested operator at every snapshot, and
// retrains each child while recording its eval-reward curve.
RetentionReport retention_benchmark(const EngineConfig& cfg, const RetentionOptions& opt);
void write_retention_report(const RetentionReport& report, const std::filesystem::path& out_dir);

// Human-readable summary of a checkpoint (step, members, ratings, norms).
std::string describe_checkpoint(const PopulationState& state);

}  // namespace plra::engine
