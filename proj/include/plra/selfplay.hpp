#pragma once

#include <string>
#include <vector>

#include "plra/adapter.hpp"
#include "plra/dsl.hpp"
#include "plra/rl.hpp"
#include "plra/rng.hpp"
#include "plra/tensor.hpp"

namespace plra::env {

inline constexpr const char* kGrammarSlot = "grammar";
inline constexpr const char* kHeadSlot = "head";

inline constexpr int kNumAnswers = dsl::kModulus;        // answer classes 0..63
inline constexpr int kMalformedAction = kNumAnswers;     // explicit format-failure action
inline constexpr int kNumActions = kNumAnswers + 1;      // 65

// token counts + 4 normalized complexity metrics + 16-dim payload one-hot + bias
inline constexpr int kFeatureDim = dsl::kVocabSize + 4 + dsl::kNumInputs + 1;

enum class TaskType { infer_input = 0, infer_output = 1 };
const char* to_string(TaskType t);

// Grammar-production policy: softmax over the valid productions of
// (nonterminal, depth-bucket) contexts, logits (base + delta) / T.
struct TeacherPolicy {
    Tensor2D base;         // kNumContexts x kMaxProductions, frozen
    AdapterState adapter;  // single slot "grammar"
    double temperature = 1.0;
};

// Answer-classification policy over fixed problem features; the extra
// malformed action exists so format failure is a choice the policy can make.
struct StudentPolicy {
    Tensor2D base;         // kNumActions x kFeatureDim, frozen
    AdapterState adapter;  // single slot "head"
    double temperature = 1.0;
};

TeacherPolicy make_teacher_policy(const AdapterState& adapter, double temperature);
StudentPolicy make_student_policy(const AdapterState& adapter, double temperature);

// Frozen student base table with weak literal-answer heuristics (digit
// echo, payload echo, malformed disfavoured).
Tensor2D student_base_weights();

// Slot layouts for adapter construction.
AdapterState init_teacher_adapter(int rank, float scaling, float init_std, RngStream& rng);
AdapterState init_student_adapter(int rank, float scaling, float init_std, RngStream& rng);
AdapterState init_solo_adapter(int rank, float scaling, float grammar_init_std,
                               float head_init_std, RngStream& rng);

struct Problem {
    dsl::NodeRef program;
    std::string text;             // canonical form
    TaskType type = TaskType::infer_output;
    int payload = 0;              // x for infer_output, y for infer_input
    bool valid = false;
    dsl::ComplexityDescriptor descriptor;
    dsl::IoTable io;              // meaningful when valid
    int token_count = 0;
    double teacher_logprob = 0.0;
    rl::SampleGrad teacher_grad;  // slot "grammar"
    double teacher_entropy = 0.0; // mean per-derivation-step entropy
};

std::vector<float> student_features(const Problem& p);

// Top-down derivation under the production policy; the problem is marked
// invalid when the canonical text fails to re-parse within bounds or any of
// the 16 evaluations blows the op budget.
Problem generate_problem(const TeacherPolicy& t, TaskType type, int gen_max_depth, RngStream& rng);

struct SolveOutcome {
    std::vector<bool> bits;
    std::vector<rl::StudentVerdict> verdicts;
    std::vector<rl::SampleGrad> grads;  // slot "head", one per rollout
    std::vector<int> answers;
    double entropy = 0.0;
};

// n rollouts on a valid problem. Throws on an invalid problem.
SolveOutcome solve_problem(const StudentPolicy& s, const Problem& p, int n, RngStream& rng);

struct ProblemRecord {
    Problem problem;
    SolveOutcome solve;  // empty for invalid problems
    double rho = 0.0;
};

struct MatchupResult {
    std::string teacher_id;
    std::string student_id;
    std::vector<ProblemRecord> records;
    double teacher_entropy = 0.0;  // mean over generated problems
    double student_entropy = 0.0;  // mean over solved problems

    std::vector<double> valid_rhos() const;
    int valid_count() const;
};

MatchupResult run_matchup(const TeacherPolicy& t, const StudentPolicy& s,
                          const std::string& teacher_id, const std::string& student_id,
                          int prompts_per_type, int rollout_n, int gen_max_depth,
                          RngStream& rng);

// Exact action distributions, exposed for entropy and masking checks.
// Masked teacher productions carry exactly zero probability.
std::vector<double> teacher_distribution(const TeacherPolicy& t, dsl::grammar::Nt nt,
                                         int depth, int budget);
std::vector<double> student_distribution(const StudentPolicy& s, const Problem& p);

struct TeacherContext {
    dsl::grammar::Nt nt;
    int depth = 0;
    int budget = 0;
};

// Mean exact categorical entropy over the given contexts / problems.
double policy_entropy(const TeacherPolicy& t, const std::vector<TeacherContext>& contexts);
double policy_entropy(const StudentPolicy& s, const std::vector<Problem>& problems);

}  // namespace plra::env
