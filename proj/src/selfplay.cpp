#include "plra/selfplay.hpp"

#include <cmath>
#include <stdexcept>

namespace plra::env {

using dsl::grammar::Nt;

const char* to_string(TaskType t) {
    return t == TaskType::infer_input ? "infer_input" : "infer_output";
}

namespace {

Tensor2D random_factor(int rows, int cols, float std, RngStream& rng) {
    Tensor2D t(rows, cols);
    for (float& v : t.data) {
        v = static_cast<float>(std * rng.normal());
    }
    return t;
}

FactorPair init_pair(int d_out, int d_in, int rank, float a_std, float b_std, RngStream& rng) {
    // The a-scale sets how fast gradients through b move the effective
    // logits. b zero keeps the initial delta at exactly the frozen base;
    // a nonzero b seeds behavioral diversity from the first step.
    FactorPair p;
    p.a = random_factor(rank, d_in, a_std, rng);
    p.b = b_std > 0.0f ? random_factor(d_out, rank, b_std, rng) : Tensor2D(d_out, rank);
    return p;
}

struct Softmax {
    std::vector<double> probs;
    double entropy = 0.0;
};

// Softmax over the subset of indices with mask true; masked entries get
// exactly zero probability.
Softmax masked_softmax(const std::vector<double>& logits, const std::vector<bool>& mask) {
    Softmax out;
    out.probs.assign(logits.size(), 0.0);
    double max_logit = -1e300;
    bool any = false;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (mask[i]) {
            max_logit = any ? std::max(max_logit, logits[i]) : logits[i];
            any = true;
        }
    }
    if (!any) {
        return out;
    }
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (mask[i]) {
            out.probs[i] = std::exp(logits[i] - max_logit);
            total += out.probs[i];
        }
    }
    for (size_t i = 0; i < logits.size(); ++i) {
        if (mask[i]) {
            out.probs[i] /= total;
            if (out.probs[i] > 0.0) {
                out.entropy -= out.probs[i] * std::log(out.probs[i]);
            }
        }
    }
    return out;
}

size_t sample_categorical(const std::vector<double>& probs, RngStream& rng) {
    const double draw = rng.uniform01();
    double acc = 0.0;
    size_t last = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) {
            continue;
        }
        acc += probs[i];
        last = i;
        if (draw < acc) {
            return i;
        }
    }
    return last;
}

std::vector<bool> production_mask(Nt nt, int budget) {
    std::vector<bool> mask(dsl::grammar::kMaxProductions, false);
    for (int p = 0; p < dsl::grammar::num_productions(nt); ++p) {
        mask[static_cast<size_t>(p)] = dsl::grammar::production_allowed(nt, p, budget);
    }
    return mask;
}

std::vector<double> teacher_context_logits(const Tensor2D& base, const Tensor2D& delta,
                                           double temperature, int ctx) {
    std::vector<double> logits(dsl::grammar::kMaxProductions, 0.0);
    for (int p = 0; p < dsl::grammar::kMaxProductions; ++p) {
        logits[static_cast<size_t>(p)] =
            (static_cast<double>(base.at(ctx, p)) + static_cast<double>(delta.at(ctx, p))) / temperature;
    }
    return logits;
}

// One top-down derivation; accumulates log-prob, gradient and entropy.
class Derivation {
public:
    Derivation(const TeacherPolicy& policy, const Tensor2D& delta, RngStream& rng)
        : policy_(policy), delta_(delta), rng_(rng),
          grad_(dsl::grammar::kNumContexts, dsl::grammar::kMaxProductions) {}

    int choose(Nt nt, int depth, int budget) {
        const int ctx = dsl::grammar::context_index(nt, depth);
        const std::vector<bool> mask = production_mask(nt, budget);
        const std::vector<double> logits =
            teacher_context_logits(policy_.base, delta_, policy_.temperature, ctx);
        const Softmax sm = masked_softmax(logits, mask);
        double total = 0.0;
        for (double p : sm.probs) {
            total += p;
        }
        if (total <= 0.0) {
            overflow_ = true;
            return -1;
        }
        const int pick = static_cast<int>(sample_categorical(sm.probs, rng_));
        logprob_ += std::log(sm.probs[static_cast<size_t>(pick)]);
        entropy_sum_ += sm.entropy;
        ++steps_;
        for (int p = 0; p < dsl::grammar::kMaxProductions; ++p) {
            if (mask[static_cast<size_t>(p)]) {
                const double indicator = p == pick ? 1.0 : 0.0;
                grad_.at(ctx, p) += static_cast<float>((indicator - sm.probs[static_cast<size_t>(p)]) /
                                                       policy_.temperature);
            }
        }
        return pick;
    }

    dsl::NodeRef gen_prog(int budget) {
        if (choose(Nt::prog, 0, budget) < 0) {
            return nullptr;
        }
        std::vector<dsl::NodeRef> stmts = gen_stmt_list(1, budget - 1);
        if (overflow_) {
            return nullptr;
        }
        dsl::NodeRef ret_expr = gen_expr(1, budget - 1);
        if (overflow_) {
            return nullptr;
        }
        stmts.push_back(dsl::make_node(dsl::NodeKind::ret, 0, {ret_expr}));
        return dsl::make_node(dsl::NodeKind::prog, 0, std::move(stmts));
    }

    bool overflow() const { return overflow_; }
    double logprob() const { return logprob_; }
    double mean_entropy() const { return steps_ > 0 ? entropy_sum_ / steps_ : 0.0; }
    Tensor2D take_grad() { return std::move(grad_); }

private:
    const TeacherPolicy& policy_;
    const Tensor2D& delta_;
    RngStream& rng_;
    Tensor2D grad_;
    double logprob_ = 0.0;
    double entropy_sum_ = 0.0;
    int steps_ = 0;
    bool overflow_ = false;

    std::vector<dsl::NodeRef> gen_stmt_list(int depth, int budget) {
        std::vector<dsl::NodeRef> stmts;
        int b = budget;
        int d = depth;
        while (!overflow_) {
            const int pick = choose(Nt::stmt_list, d, b);
            if (pick != 1) {
                break;  // stop production or overflow
            }
            stmts.push_back(gen_stmt(d + 1, b - 1));
            b -= 1;
            d += 1;
        }
        return stmts;
    }

    dsl::NodeRef gen_stmt(int depth, int budget) {
        const int pick = choose(Nt::stmt, depth, budget);
        if (pick < 0) {
            return nullptr;
        }
        if (pick <= 3) {
            dsl::NodeRef e = gen_expr(depth + 1, budget - 1);
            return overflow_ ? nullptr : dsl::make_node(dsl::NodeKind::assign, pick + 1, {e});
        }
        if (pick == 4 || pick == 5) {
            dsl::NodeRef cond = gen_cond(depth + 1, budget - 1);
            std::vector<dsl::NodeRef> then_stmts = gen_stmt_list(depth + 1, budget - 1);
            const int then_count = static_cast<int>(then_stmts.size());
            std::vector<dsl::NodeRef> kids;
            kids.push_back(cond);
            for (auto& s : then_stmts) {
                kids.push_back(std::move(s));
            }
            bool has_else = pick == 5;
            if (has_else) {
                for (auto& s : gen_stmt_list(depth + 1, budget - 1)) {
                    kids.push_back(std::move(s));
                }
            }
            return overflow_ ? nullptr
                             : dsl::make_node(dsl::NodeKind::if_stmt, then_count, std::move(kids), has_else);
        }
        const int count = pick - 5;  // productions 6..13 map to counts 1..8
        std::vector<dsl::NodeRef> body = gen_stmt_list(depth + 1, budget - 1);
        return overflow_ ? nullptr : dsl::make_node(dsl::NodeKind::repeat, count, std::move(body));
    }

    dsl::NodeRef gen_expr(int depth, int budget) {
        const int pick = choose(Nt::expr, depth, budget);
        if (pick < 0) {
            return nullptr;
        }
        if (pick == 0) {
            return gen_term(depth + 1, budget);  // unit production keeps the budget
        }
        dsl::NodeRef lhs = gen_term(depth + 1, budget - 1);
        if (overflow_) {
            return nullptr;
        }
        dsl::NodeRef rhs = gen_term(depth + 1, budget - 1);
        return overflow_ ? nullptr : dsl::make_node(dsl::NodeKind::binop, pick - 1, {lhs, rhs});
    }

    dsl::NodeRef gen_term(int depth, int budget) {
        const int pick = choose(Nt::term, depth, budget);
        if (pick < 0) {
            return nullptr;
        }
        if (pick <= 9) {
            return dsl::make_node(dsl::NodeKind::constant, pick);
        }
        if (pick <= 14) {
            return dsl::make_node(dsl::NodeKind::var, pick - 10);
        }
        return gen_expr(depth + 1, budget - 1);  // parenthesized expression
    }

    dsl::NodeRef gen_cond(int depth, int budget) {
        const int pick = choose(Nt::cond, depth, budget);
        if (pick < 0) {
            return nullptr;
        }
        dsl::NodeRef lhs = gen_expr(depth + 1, budget - 1);
        if (overflow_) {
            return nullptr;
        }
        dsl::NodeRef rhs = gen_expr(depth + 1, budget - 1);
        return overflow_ ? nullptr : dsl::make_node(dsl::NodeKind::cond, pick, {lhs, rhs});
    }
};

const FactorPair& require_slot(const AdapterState& a, const char* name) {
    const FactorPair* p = a.find(name);
    if (p == nullptr) {
        throw std::invalid_argument(std::string("adapter is missing slot '") + name + "'");
    }
    return *p;
}

}  // namespace

TeacherPolicy make_teacher_policy(const AdapterState& adapter, double temperature) {
    TeacherPolicy t;
    t.base = Tensor2D(dsl::grammar::kNumContexts, dsl::grammar::kMaxProductions);
    t.adapter = adapter;
    t.temperature = temperature;
    require_slot(adapter, kGrammarSlot);
    return t;
}

StudentPolicy make_student_policy(const AdapterState& adapter, double temperature) {
    StudentPolicy s;
    s.base = student_base_weights();
    s.adapter = adapter;
    s.temperature = temperature;
    require_slot(adapter, kHeadSlot);
    return s;
}

Tensor2D student_base_weights() {
    // The frozen base carries weak literal-answer heuristics, standing in
    // for the competence a pretrained base model would contribute: digit
    // tokens vote for their own answer class, the payload votes for the
    // echo answer, and the malformed action starts disfavoured. Adapters
    // specialize on top of this.
    Tensor2D base(kNumActions, kFeatureDim);
    for (int d = 0; d <= dsl::kMaxConst; ++d) {
        base.at(d, d) = 4.0f;  // digit-count feature slot d
    }
    for (int v = 11; v <= 14; ++v) {
        base.at(0, v) = 1.0f;  // v0..v3 token slots; unassigned vars read 0
    }
    for (int v = 0; v < dsl::kNumInputs; ++v) {
        base.at(v, dsl::kVocabSize + 4 + v) = 0.5f;
    }
    base.at(kMalformedAction, kFeatureDim - 1) = -1.0f;
    return base;
}

AdapterState init_teacher_adapter(int rank, float scaling, float init_std, RngStream& rng) {
    AdapterState a;
    a.rank = rank;
    a.scaling = scaling;
    a.slots.emplace_back(kGrammarSlot,
                         init_pair(dsl::grammar::kNumContexts, dsl::grammar::kMaxProductions, rank,
                                   init_std, 0.0f, rng));
    return a;
}

AdapterState init_student_adapter(int rank, float scaling, float init_std, RngStream& rng) {
    AdapterState a;
    a.rank = rank;
    a.scaling = scaling;
    a.slots.emplace_back(kHeadSlot, init_pair(kNumActions, kFeatureDim, rank, init_std, 0.0f, rng));
    return a;
}

AdapterState init_solo_adapter(int rank, float scaling, float grammar_init_std,
                               float head_init_std, RngStream& rng) {
    AdapterState a;
    a.rank = rank;
    a.scaling = scaling;
    a.slots.emplace_back(kGrammarSlot,
                         init_pair(dsl::grammar::kNumContexts, dsl::grammar::kMaxProductions, rank,
                                   grammar_init_std, 0.0f, rng));
    a.slots.emplace_back(kHeadSlot, init_pair(kNumActions, kFeatureDim, rank, head_init_std, 0.0f, rng));
    return a;
}

std::vector<float> student_features(const Problem& p) {
    std::vector<float> phi(kFeatureDim, 0.0f);
    std::optional<dsl::ParseError> lex_error;
    const std::vector<dsl::Token> tokens = dsl::lex(p.text, lex_error);
    for (const auto& t : tokens) {
        const int slot = dsl::vocab_index(t);
        if (slot >= 0) {
            phi[static_cast<size_t>(slot)] += 1.0f;
        }
    }
    const auto clamp01 = [](double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); };
    phi[dsl::kVocabSize + 0] = clamp01(p.descriptor.ast_depth / 8.0);
    phi[dsl::kVocabSize + 1] = clamp01(p.descriptor.cyclomatic / 8.0);
    phi[dsl::kVocabSize + 2] = clamp01(p.descriptor.loc / 16.0);
    phi[dsl::kVocabSize + 3] = clamp01(p.descriptor.var_count / 4.0);
    // Payload one-hot, signed by task type. The sign lets one linear head
    // hold two answer maps at once; with an unsigned encoding the two task
    // types alias and the policy cannot separate them.
    const int payload_slot = ((p.payload % dsl::kNumInputs) + dsl::kNumInputs) % dsl::kNumInputs;
    phi[static_cast<size_t>(dsl::kVocabSize + 4 + payload_slot)] =
        p.type == TaskType::infer_output ? 1.0f : -1.0f;
    phi[kFeatureDim - 1] = 1.0f;  // bias
    return phi;
}

Problem generate_problem(const TeacherPolicy& t, TaskType type, int gen_max_depth, RngStream& rng) {
    Problem out;
    out.type = type;

    const Tensor2D delta = effective_delta(require_slot(t.adapter, kGrammarSlot));
    Derivation deriv(t, delta, rng);
    out.program = deriv.gen_prog(gen_max_depth);
    out.teacher_logprob = deriv.logprob();
    out.teacher_entropy = deriv.mean_entropy();
    out.teacher_grad.slots.emplace_back(kGrammarSlot, deriv.take_grad());

    // Payload input is drawn unconditionally to keep the stream aligned
    // between valid and invalid generations.
    const int x = static_cast<int>(rng.uniform_int(dsl::kNumInputs));

    if (out.program == nullptr) {
        out.valid = false;
        return out;
    }
    out.text = dsl::pretty_print(out.program);
    out.descriptor = dsl::complexity(out.program);

    const dsl::ParseResult reparse = dsl::parse(out.text);
    out.token_count = reparse.token_count;
    if (!reparse.ok()) {
        out.valid = false;
        return out;
    }
    out.io = dsl::enumerate_io(out.program);
    if (!out.io.all_within_budget) {
        out.valid = false;
        return out;
    }
    out.valid = true;
    out.payload = type == TaskType::infer_output ? x : out.io.outputs[static_cast<size_t>(x)];
    return out;
}

std::vector<double> student_distribution(const StudentPolicy& s, const Problem& p) {
    const std::vector<float> phi = student_features(p);
    const FactorPair& head = require_slot(s.adapter, kHeadSlot);
    const Tensor2D delta = effective_delta(head);
    std::vector<double> logits(kNumActions, 0.0);
    for (int a = 0; a < kNumActions; ++a) {
        double acc = 0.0;
        for (int f = 0; f < kFeatureDim; ++f) {
            acc += (static_cast<double>(s.base.at(a, f)) + static_cast<double>(delta.at(a, f))) * phi[static_cast<size_t>(f)];
        }
        logits[static_cast<size_t>(a)] = acc / s.temperature;
    }
    const std::vector<bool> mask(kNumActions, true);
    return masked_softmax(logits, mask).probs;
}

SolveOutcome solve_problem(const StudentPolicy& s, const Problem& p, int n, RngStream& rng) {
    if (!p.valid) {
        throw std::invalid_argument("solve_problem: invalid problem");
    }
    const std::vector<float> phi = student_features(p);
    const FactorPair& head = require_slot(s.adapter, kHeadSlot);
    const Tensor2D delta = effective_delta(head);
    std::vector<double> logits(kNumActions, 0.0);
    for (int a = 0; a < kNumActions; ++a) {
        double acc = 0.0;
        for (int f = 0; f < kFeatureDim; ++f) {
            acc += (static_cast<double>(s.base.at(a, f)) + static_cast<double>(delta.at(a, f))) * phi[static_cast<size_t>(f)];
        }
        logits[static_cast<size_t>(a)] = acc / s.temperature;
    }
    const std::vector<bool> mask(kNumActions, true);
    const Softmax sm = masked_softmax(logits, mask);

    auto is_correct = [&](int answer) {
        if (p.type == TaskType::infer_output) {
            return answer == p.io.outputs[static_cast<size_t>(p.payload)];
        }
        return answer < dsl::kNumInputs && p.io.outputs[static_cast<size_t>(answer)] == p.payload;
    };

    SolveOutcome out;
    out.entropy = sm.entropy;
    out.bits.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int action = static_cast<int>(sample_categorical(sm.probs, rng));
        out.answers.push_back(action);
        rl::StudentVerdict verdict;
        if (action == kMalformedAction) {
            verdict = rl::StudentVerdict::malformed;
        } else if (is_correct(action)) {
            verdict = rl::StudentVerdict::correct;
        } else {
            verdict = rl::StudentVerdict::wrong_wellformed;
        }
        out.verdicts.push_back(verdict);
        out.bits.push_back(verdict == rl::StudentVerdict::correct);

        Tensor2D g(kNumActions, kFeatureDim);
        for (int a = 0; a < kNumActions; ++a) {
            const double coeff = ((a == action ? 1.0 : 0.0) - sm.probs[static_cast<size_t>(a)]) / s.temperature;
            if (coeff == 0.0) {
                continue;
            }
            for (int f = 0; f < kFeatureDim; ++f) {
                g.at(a, f) = static_cast<float>(coeff * phi[static_cast<size_t>(f)]);
            }
        }
        rl::SampleGrad sg;
        sg.slots.emplace_back(kHeadSlot, std::move(g));
        out.grads.push_back(std::move(sg));
    }
    return out;
}

std::vector<double> MatchupResult::valid_rhos() const {
    std::vector<double> out;
    for (const auto& r : records) {
        if (r.problem.valid) {
            out.push_back(r.rho);
        }
    }
    return out;
}

int MatchupResult::valid_count() const {
    int n = 0;
    for (const auto& r : records) {
        n += r.problem.valid ? 1 : 0;
    }
    return n;
}

MatchupResult run_matchup(const TeacherPolicy& t, const StudentPolicy& s,
                          const std::string& teacher_id, const std::string& student_id,
                          int prompts_per_type, int rollout_n, int gen_max_depth,
                          RngStream& rng) {
    MatchupResult out;
    out.teacher_id = teacher_id;
    out.student_id = student_id;

    for (TaskType type : {TaskType::infer_input, TaskType::infer_output}) {
        for (int k = 0; k < prompts_per_type; ++k) {
            ProblemRecord rec;
            rec.problem = generate_problem(t, type, gen_max_depth, rng);
            out.records.push_back(std::move(rec));
        }
    }
    double teacher_entropy = 0.0;
    for (const auto& r : out.records) {
        teacher_entropy += r.problem.teacher_entropy;
    }
    out.teacher_entropy = out.records.empty() ? 0.0 : teacher_entropy / static_cast<double>(out.records.size());

    double student_entropy = 0.0;
    int solved_problems = 0;
    for (auto& rec : out.records) {
        if (!rec.problem.valid) {
            continue;
        }
        rec.solve = solve_problem(s, rec.problem, rollout_n, rng);
        rec.rho = rl::solve_rate(rec.solve.bits);
        student_entropy += rec.solve.entropy;
        ++solved_problems;
    }
    out.student_entropy = solved_problems > 0 ? student_entropy / solved_problems : 0.0;
    return out;
}

std::vector<double> teacher_distribution(const TeacherPolicy& t, Nt nt, int depth, int budget) {
    const Tensor2D delta = effective_delta(require_slot(t.adapter, kGrammarSlot));
    const int ctx = dsl::grammar::context_index(nt, depth);
    const std::vector<bool> mask = production_mask(nt, budget);
    const std::vector<double> logits = teacher_context_logits(t.base, delta, t.temperature, ctx);
    return masked_softmax(logits, mask).probs;
}

double policy_entropy(const TeacherPolicy& t, const std::vector<TeacherContext>& contexts) {
    if (contexts.empty()) {
        return 0.0;
    }
    const Tensor2D delta = effective_delta(require_slot(t.adapter, kGrammarSlot));
    double total = 0.0;
    for (const auto& c : contexts) {
        const int ctx = dsl::grammar::context_index(c.nt, c.depth);
        const std::vector<bool> mask = production_mask(c.nt, c.budget);
        const std::vector<double> logits = teacher_context_logits(t.base, delta, t.temperature, ctx);
        total += masked_softmax(logits, mask).entropy;
    }
    return total / static_cast<double>(contexts.size());
}

double policy_entropy(const StudentPolicy& s, const std::vector<Problem>& problems) {
    if (problems.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& p : problems) {
        const std::vector<double> probs = student_distribution(s, p);
        double h = 0.0;
        for (double q : probs) {
            if (q > 0.0) {
                h -= q * std::log(q);
            }
        }
        total += h;
    }
    return total / static_cast<double>(problems.size());
}

}  // namespace plra::env
