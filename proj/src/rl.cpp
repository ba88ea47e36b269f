#include "plra/rl.hpp"

#include <cmath>
#include <stdexcept>

namespace plra::rl {

double reward_student(StudentVerdict v) {
    switch (v) {
        case StudentVerdict::correct: return 1.0;
        case StudentVerdict::wrong_wellformed: return -0.5;
        case StudentVerdict::malformed: return -1.0;
    }
    return -1.0;
}

double solve_rate(const std::vector<bool>& bits) {
    if (bits.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (bool b : bits) {
        sum += b ? 1.0 : 0.0;
    }
    return sum / static_cast<double>(bits.size());
}

double reward_teacher(bool valid, double rho) {
    if (!valid) {
        return -1.0;
    }
    if (rho == 0.0) {
        return 0.0;
    }
    return 1.0 - rho;
}

Tensor2D* SampleGrad::find(const std::string& name) {
    for (auto& [n, t] : slots) {
        if (n == name) {
            return &t;
        }
    }
    return nullptr;
}

const Tensor2D* SampleGrad::find(const std::string& name) const {
    for (const auto& [n, t] : slots) {
        if (n == name) {
            return &t;
        }
    }
    return nullptr;
}

AdvantageBatch compute_advantages(const RolloutBatch& batch) {
    AdvantageBatch out;
    out.values.resize(batch.rewards.size());
    size_t total = 0;
    for (size_t i = 0; i < batch.rewards.size(); ++i) {
        const auto& row = batch.rewards[i];
        double mean = 0.0;
        for (double r : row) {
            mean += r;
        }
        if (!row.empty()) {
            mean /= static_cast<double>(row.size());
        }
        out.values[i].resize(row.size());
        for (size_t j = 0; j < row.size(); ++j) {
            out.values[i][j] = row[j] - mean;
        }
        total += row.size();
    }
    if (total == 0) {
        return out;
    }

    double gmean = 0.0;
    for (const auto& row : out.values) {
        for (double a : row) {
            gmean += a;
        }
    }
    gmean /= static_cast<double>(total);
    double var = 0.0;
    for (const auto& row : out.values) {
        for (double a : row) {
            var += (a - gmean) * (a - gmean);
        }
    }
    var /= static_cast<double>(total);
    const double denom = std::sqrt(var) + 1e-8;
    for (auto& row : out.values) {
        for (double& a : row) {
            a = (a - gmean) / denom;
        }
    }
    return out;
}

namespace {

// Accumulated delta-space gradient per slot: mean over samples of
// adv * dlogpi/ddelta.
struct SlotAccum {
    std::string name;
    Tensor2D grad;
};

FactorPair& moment_entry(std::map<std::string, FactorPair>& m, const std::string& name,
                         const FactorPair& shape) {
    auto it = m.find(name);
    if (it == m.end()) {
        FactorPair zero;
        zero.a = Tensor2D(shape.a.rows, shape.a.cols);
        zero.b = Tensor2D(shape.b.rows, shape.b.cols);
        it = m.emplace(name, std::move(zero)).first;
    }
    return it->second;
}

void apply_update(Tensor2D& param, const Tensor2D& grad, double lr,
                  AdamState* adam, Tensor2D* m, Tensor2D* v) {
    if (adam == nullptr || !adam->enabled) {
        for (size_t i = 0; i < param.data.size(); ++i) {
            param.data[i] += static_cast<float>(lr * grad.data[i]);
        }
        return;
    }
    const double b1 = adam->beta1;
    const double b2 = adam->beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(adam->t));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(adam->t));
    for (size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        const double mi = b1 * m->data[i] + (1.0 - b1) * g;
        const double vi = b2 * v->data[i] + (1.0 - b2) * g * g;
        m->data[i] = static_cast<float>(mi);
        v->data[i] = static_cast<float>(vi);
        const double mhat = mi / bias1;
        const double vhat = vi / bias2;
        param.data[i] += static_cast<float>(lr * mhat / (std::sqrt(vhat) + adam->eps));
    }
}

}  // namespace

void policy_gradient_step(AdapterState& adapter,
                          const RolloutBatch& batch,
                          const AdvantageBatch& adv,
                          double lr,
                          AdamState* adam) {
    if (batch.rewards.size() != adv.values.size()) {
        throw std::invalid_argument("policy_gradient_step: batch/advantage shape mismatch");
    }
    size_t total = 0;
    for (const auto& row : batch.rewards) {
        total += row.size();
    }
    if (total == 0) {
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(total);

    std::vector<SlotAccum> accums;
    auto accum_for = [&](const std::string& name, const Tensor2D& like) -> Tensor2D& {
        for (auto& a : accums) {
            if (a.name == name) {
                return a.grad;
            }
        }
        accums.push_back({name, Tensor2D(like.rows, like.cols)});
        return accums.back().grad;
    };

    for (size_t i = 0; i < batch.grads.size(); ++i) {
        if (batch.grads[i].size() != batch.rewards[i].size()) {
            throw std::invalid_argument("policy_gradient_step: gradient row shape mismatch");
        }
        for (size_t j = 0; j < batch.grads[i].size(); ++j) {
            const double a = adv.values[i][j];
            if (a == 0.0) {
                continue;
            }
            for (const auto& [name, g] : batch.grads[i][j].slots) {
                Tensor2D& acc = accum_for(name, g);
                for (size_t k = 0; k < g.data.size(); ++k) {
                    acc.data[k] += static_cast<float>(a * inv_n * g.data[k]);
                }
            }
        }
    }

    // Stage factor gradients first so a non-finite value aborts the whole
    // step before any parameter moves.
    struct Staged {
        FactorPair* pair;
        std::string name;
        Tensor2D a_grad;
        Tensor2D b_grad;
    };
    std::vector<Staged> staged;
    for (const auto& acc : accums) {
        FactorPair* pair = adapter.find(acc.name);
        if (pair == nullptr) {
            throw std::invalid_argument("policy_gradient_step: batch references unknown slot " + acc.name);
        }
        if (acc.grad.rows != pair->d_out() || acc.grad.cols != pair->d_in()) {
            throw std::invalid_argument("policy_gradient_step: gradient shape disagrees with slot " + acc.name);
        }
        Staged s;
        s.pair = pair;
        s.name = acc.name;
        // d/d b = g * a^T, d/d a = b^T * g.
        s.b_grad = matmul(acc.grad, transpose(pair->a));
        s.a_grad = matmul(transpose(pair->b), acc.grad);
        if (!s.a_grad.all_finite() || !s.b_grad.all_finite()) {
            throw std::runtime_error("policy_gradient_step: non-finite gradient, step aborted");
        }
        staged.push_back(std::move(s));
    }

    if (adam != nullptr && adam->enabled && !staged.empty()) {
        ++adam->t;
    }
    for (auto& s : staged) {
        Tensor2D* ma = nullptr;
        Tensor2D* mb = nullptr;
        Tensor2D* va = nullptr;
        Tensor2D* vb = nullptr;
        if (adam != nullptr && adam->enabled) {
            FactorPair& m = moment_entry(adam->m, s.name, *s.pair);
            FactorPair& v = moment_entry(adam->v, s.name, *s.pair);
            ma = &m.a;
            mb = &m.b;
            va = &v.a;
            vb = &v.b;
        }
        apply_update(s.pair->a, s.a_grad, lr, adam, ma, va);
        apply_update(s.pair->b, s.b_grad, lr, adam, mb, vb);
    }
}

}  // namespace plra::rl
