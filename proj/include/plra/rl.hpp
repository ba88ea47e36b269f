#pragma once

#include <map>
#include <string>
#include <vector>

#include "plra/adapter.hpp"

namespace plra::rl {

enum class StudentVerdict { correct, wrong_wellformed, malformed };

// +1 / -0.5 / -1 for correct / incorrect-but-well-formed / format failure.
double reward_student(StudentVerdict v);

// Fraction of rollout samples that solved the problem.
double solve_rate(const std::vector<bool>& bits);

// -1 for invalid problems, 0 when no rollout solves it, 1 - rho otherwise.
// The zero branch keeps impossible problems unrewarded.
double reward_teacher(bool valid, double rho);

// Per-sample accumulated d log pi / d delta, keyed by slot name. Teachers
// accumulate one matrix over the whole derivation; students hold one outer
// product per rollout.
struct SampleGrad {
    std::vector<std::pair<std::string, Tensor2D>> slots;

    Tensor2D* find(const std::string& name);
    const Tensor2D* find(const std::string& name) const;
};

struct RolloutBatch {
    std::vector<std::vector<double>> rewards;     // [prompt][rollout]
    std::vector<std::vector<SampleGrad>> grads;   // aligned with rewards

    int prompts() const { return static_cast<int>(rewards.size()); }
    int rollouts() const { return rewards.empty() ? 0 : static_cast<int>(rewards[0].size()); }
};

struct AdvantageBatch {
    std::vector<std::vector<double>> values;
};

// Per-prompt centring followed by global whitening with epsilon 1e-8.
// Constant batches come out all zero.
AdvantageBatch compute_advantages(const RolloutBatch& batch);

// Optional Adam-style moments for parity experiments; the default update is
// plain SGD on the adapter factors.
struct AdamState {
    bool enabled = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::map<std::string, FactorPair> m;
    std::map<std::string, FactorPair> v;
};

// Ascent step theta += lr * mean_{i,j} adv[i][j] * dlogpi/dtheta, chained
// through delta = b * a per slot. Only slots present in the batch gradients
// move. Throws on non-finite gradients, leaving the adapter untouched.
void policy_gradient_step(AdapterState& adapter,
                          const RolloutBatch& batch,
                          const AdvantageBatch& adv,
                          double lr,
                          AdamState* adam = nullptr);

}  // namespace plra::rl
