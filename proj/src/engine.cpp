#include "plra/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "plra/adapter_io.hpp"

namespace plra::engine {

const char* to_string(Mode m) {
    switch (m) {
        case Mode::population: return "population";
        case Mode::single_agent: return "single_agent";
        case Mode::pair_1t1s: return "pair_1t1s";
    }
    return "population";
}

Mode mode_from_string(const std::string& s) {
    if (s == "population") {
        return Mode::population;
    }
    if (s == "single_agent") {
        return Mode::single_agent;
    }
    if (s == "pair_1t1s") {
        return Mode::pair_1t1s;
    }
    throw std::invalid_argument("unknown mode: " + s);
}

void EngineConfig::validate() const {
    if (n_teachers < 1 || n_students < 1) {
        throw std::invalid_argument("config: population sizes must be >= 1");
    }
    if (steps < 0) {
        throw std::invalid_argument("config: steps must be >= 0");
    }
    if (evolve_every < 1) {
        throw std::invalid_argument("config: evolve_every must be >= 1");
    }
    if (!(cull_fraction > 0.0 && cull_fraction < 1.0)) {
        throw std::invalid_argument("config: cull_fraction must lie in (0, 1)");
    }
    if (prompts_per_type < 1 || rollout_n < 1) {
        throw std::invalid_argument("config: prompts_per_type and rollout_n must be >= 1");
    }
    if (temperature <= 0.0) {
        throw std::invalid_argument("config: temperature must be positive");
    }
    if (rank < 1) {
        throw std::invalid_argument("config: rank must be >= 1");
    }
    if (gen_max_depth < 1 || gen_max_depth > dsl::kMaxNesting) {
        throw std::invalid_argument("config: gen_max_depth must lie in 1.." + std::to_string(dsl::kMaxNesting));
    }
    if (archive_cells < 1) {
        throw std::invalid_argument("config: archive_cells must be >= 1");
    }
}

namespace {

constexpr uint64_t kCvtSeed = 0x5EEDC0DEULL;

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

void check_known_keys(const nlohmann::json& j, const std::set<std::string>& known,
                      const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (known.find(it.key()) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

ops::OperatorParams op_params_from_json(const nlohmann::json& j) {
    ops::OperatorParams p;
    check_known_keys(j, {"m1_eps", "m2_eps", "m2_frac", "m3_rho", "m4_eps", "m5_alpha", "m6_k",
                         "m6_sigma", "dare_p", "ties_tau", "della_eps", "slerp_t", "eta_min",
                         "eta_max", "lin_alpha", "x3_k"},
                     "operator_params");
    maybe(j, "m1_eps", p.m1_eps);
    maybe(j, "m2_eps", p.m2_eps);
    maybe(j, "m2_frac", p.m2_frac);
    maybe(j, "m3_rho", p.m3_rho);
    maybe(j, "m4_eps", p.m4_eps);
    maybe(j, "m5_alpha", p.m5_alpha);
    maybe(j, "m6_k", p.m6_k);
    maybe(j, "m6_sigma", p.m6_sigma);
    maybe(j, "dare_p", p.dare_p);
    maybe(j, "ties_tau", p.ties_tau);
    maybe(j, "della_eps", p.della_eps);
    maybe(j, "slerp_t", p.slerp_t);
    maybe(j, "eta_min", p.eta_min);
    maybe(j, "eta_max", p.eta_max);
    maybe(j, "lin_alpha", p.lin_alpha);
    maybe(j, "x3_k", p.x3_k);
    return p;
}

nlohmann::json op_params_to_json(const ops::OperatorParams& p) {
    return {
        {"m1_eps", p.m1_eps},   {"m2_eps", p.m2_eps},     {"m2_frac", p.m2_frac},
        {"m3_rho", p.m3_rho},   {"m4_eps", p.m4_eps},     {"m5_alpha", p.m5_alpha},
        {"m6_k", p.m6_k},       {"m6_sigma", p.m6_sigma}, {"dare_p", p.dare_p},
        {"ties_tau", p.ties_tau}, {"della_eps", p.della_eps}, {"slerp_t", p.slerp_t},
        {"eta_min", p.eta_min}, {"eta_max", p.eta_max},   {"lin_alpha", p.lin_alpha},
        {"x3_k", p.x3_k},
    };
}

// ---------------------------------------------------------------------------
// Base64 (checkpoint adapter blobs)
// ---------------------------------------------------------------------------

const char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<unsigned char>& in) {
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < in.size()) {
        const uint32_t v = (static_cast<uint32_t>(in[i]) << 16) | (static_cast<uint32_t>(in[i + 1]) << 8) | in[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back(kB64Chars[v & 63]);
        i += 3;
    }
    const size_t rem = in.size() - i;
    if (rem == 1) {
        const uint32_t v = static_cast<uint32_t>(in[i]) << 16;
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        const uint32_t v = (static_cast<uint32_t>(in[i]) << 16) | (static_cast<uint32_t>(in[i + 1]) << 8);
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(kB64Chars[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<unsigned char> b64_decode(const std::string& in) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    uint32_t buf = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=') {
            break;
        }
        const int v = value_of(c);
        if (v < 0) {
            throw std::invalid_argument("checkpoint: invalid base64 payload");
        }
        buf = (buf << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((buf >> bits) & 0xFF));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Policies and batches
// ---------------------------------------------------------------------------

env::TeacherPolicy teacher_policy_for(const Member& m, const EngineConfig& cfg) {
    return env::make_teacher_policy(m.adapter, cfg.temperature);
}

env::StudentPolicy student_policy_for(const Member& m, const EngineConfig& cfg) {
    return env::make_student_policy(m.adapter, cfg.temperature);
}

// Teacher batch: one prompt row per task type, one rollout per generated
// problem, invalid problems included at reward -1.
rl::RolloutBatch teacher_batch(const env::MatchupResult& m, int prompts_per_type) {
    rl::RolloutBatch batch;
    batch.rewards.resize(2);
    batch.grads.resize(2);
    for (int type = 0; type < 2; ++type) {
        for (int k = 0; k < prompts_per_type; ++k) {
            const auto& rec = m.records[static_cast<size_t>(type * prompts_per_type + k)];
            batch.rewards[static_cast<size_t>(type)].push_back(
                rl::reward_teacher(rec.problem.valid, rec.rho));
            batch.grads[static_cast<size_t>(type)].push_back(rec.problem.teacher_grad);
        }
    }
    return batch;
}

void append_student_rows(rl::RolloutBatch& batch, const env::MatchupResult& m) {
    for (const auto& rec : m.records) {
        if (!rec.problem.valid) {
            continue;
        }
        std::vector<double> rewards;
        rewards.reserve(rec.solve.verdicts.size());
        for (const auto v : rec.solve.verdicts) {
            rewards.push_back(rl::reward_student(v));
        }
        batch.rewards.push_back(std::move(rewards));
        batch.grads.push_back(rec.solve.grads);
    }
}

void update_member(Member& m, const rl::RolloutBatch& batch, const EngineConfig& cfg) {
    if (batch.rewards.empty()) {
        return;
    }
    const rl::AdvantageBatch adv = rl::compute_advantages(batch);
    rl::AdamState* adam = cfg.optimizer == Optimizer::adam ? &m.opt : nullptr;
    if (adam != nullptr) {
        adam->enabled = true;
    }
    rl::policy_gradient_step(m.adapter, batch, adv, cfg.learning_rate, adam);
}

double mean_or_zero(double sum, long n) {
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Checkpoint member blocks
// ---------------------------------------------------------------------------

AdapterState moments_as_adapter(const std::map<std::string, FactorPair>& m, int rank) {
    AdapterState a;
    a.rank = rank;
    a.scaling = 1.0f;
    for (const auto& [name, pair] : m) {
        a.slots.emplace_back(name, pair);
    }
    return a;
}

nlohmann::json member_json(const Member& m) {
    nlohmann::json j;
    j["id"] = m.id;
    j["rating"] = {{"mu", m.rating.mu}, {"sigma", m.rating.sigma}, {"games", m.rating.games}};
    j["origin"] = {{"op", m.origin.op}, {"seed", m.origin.seed}, {"parents", m.origin.parents}};
    j["adapter_b64"] = b64_encode(serialize_adapter(m.adapter));
    if (m.opt.enabled) {
        j["adam"] = {{"t", m.opt.t},
                     {"m_b64", b64_encode(serialize_adapter(moments_as_adapter(m.opt.m, m.adapter.rank)))},
                     {"v_b64", b64_encode(serialize_adapter(moments_as_adapter(m.opt.v, m.adapter.rank)))}};
    }
    return j;
}

Member member_from_json(const nlohmann::json& j) {
    Member m;
    m.id = j.at("id").get<std::string>();
    m.rating.mu = j.at("rating").at("mu").get<double>();
    m.rating.sigma = j.at("rating").at("sigma").get<double>();
    m.rating.games = j.at("rating").at("games").get<long>();
    m.origin.op = j.at("origin").at("op").get<std::string>();
    m.origin.seed = j.at("origin").at("seed").get<uint64_t>();
    m.origin.parents = j.at("origin").at("parents").get<std::vector<std::string>>();
    m.adapter = deserialize_adapter(b64_decode(j.at("adapter_b64").get<std::string>()));
    if (j.contains("adam")) {
        m.opt.enabled = true;
        m.opt.t = j.at("adam").at("t").get<long>();
        for (const auto& [name, pair] :
             deserialize_adapter(b64_decode(j.at("adam").at("m_b64").get<std::string>())).slots) {
            m.opt.m.emplace(name, pair);
        }
        for (const auto& [name, pair] :
             deserialize_adapter(b64_decode(j.at("adam").at("v_b64").get<std::string>())).slots) {
            m.opt.v.emplace(name, pair);
        }
    }
    return m;
}

std::string filled_hex(const std::vector<uint8_t>& filled) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    uint8_t nibble = 0;
    int in_nibble = 0;
    for (size_t i = 0; i < filled.size(); ++i) {
        nibble = static_cast<uint8_t>((nibble << 1) | (filled[i] ? 1 : 0));
        if (++in_nibble == 4) {
            out.push_back(digits[nibble]);
            nibble = 0;
            in_nibble = 0;
        }
    }
    if (in_nibble > 0) {
        nibble = static_cast<uint8_t>(nibble << (4 - in_nibble));
        out.push_back(digits[nibble]);
    }
    return out;
}

std::vector<uint8_t> filled_from_hex(const std::string& hex, int k) {
    std::vector<uint8_t> out(static_cast<size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
        const size_t hex_idx = static_cast<size_t>(i / 4);
        if (hex_idx >= hex.size()) {
            break;
        }
        const char c = hex[hex_idx];
        const int v = c >= 'a' ? c - 'a' + 10 : c - '0';
        out[static_cast<size_t>(i)] = (v >> (3 - i % 4)) & 1 ? 1 : 0;
    }
    return out;
}

}  // namespace

EngineConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    check_known_keys(j, {"n_teachers", "n_students", "steps", "evolve_every", "cull_fraction",
                         "prompts_per_type", "rollout_n", "temperature", "learning_rate", "rank",
                         "lora_alpha", "seed", "mode", "optimizer", "gen_max_depth", "archive_cells",
                         "teacher_init_std", "student_init_std", "workers", "pair_evolution", "operator_params", "rating"},
                     "config");
    EngineConfig cfg;
    maybe(j, "n_teachers", cfg.n_teachers);
    maybe(j, "n_students", cfg.n_students);
    maybe(j, "steps", cfg.steps);
    maybe(j, "evolve_every", cfg.evolve_every);
    maybe(j, "cull_fraction", cfg.cull_fraction);
    maybe(j, "prompts_per_type", cfg.prompts_per_type);
    maybe(j, "rollout_n", cfg.rollout_n);
    maybe(j, "temperature", cfg.temperature);
    maybe(j, "learning_rate", cfg.learning_rate);
    maybe(j, "rank", cfg.rank);
    maybe(j, "lora_alpha", cfg.lora_alpha);
    maybe(j, "seed", cfg.seed);
    if (j.contains("mode")) {
        cfg.mode = mode_from_string(j.at("mode").get<std::string>());
    }
    if (j.contains("optimizer")) {
        const std::string o = j.at("optimizer").get<std::string>();
        if (o == "sgd") {
            cfg.optimizer = Optimizer::sgd;
        } else if (o == "adam") {
            cfg.optimizer = Optimizer::adam;
        } else {
            throw std::invalid_argument("config: unknown optimizer " + o);
        }
    }
    maybe(j, "gen_max_depth", cfg.gen_max_depth);
    maybe(j, "archive_cells", cfg.archive_cells);
    maybe(j, "teacher_init_std", cfg.teacher_init_std);
    maybe(j, "student_init_std", cfg.student_init_std);
    maybe(j, "workers", cfg.workers);
    maybe(j, "pair_evolution", cfg.pair_evolution);
    if (j.contains("operator_params")) {
        cfg.op_params = op_params_from_json(j.at("operator_params"));
    }
    if (j.contains("rating")) {
        const nlohmann::json& r = j.at("rating");
        check_known_keys(r, {"mu0", "sigma0", "beta", "tau_dyn", "lcb_mult"}, "rating");
        maybe(r, "mu0", cfg.rating.mu0);
        maybe(r, "sigma0", cfg.rating.sigma0);
        maybe(r, "beta", cfg.rating.beta);
        maybe(r, "tau_dyn", cfg.rating.tau_dyn);
        maybe(r, "lcb_mult", cfg.rating.lcb_mult);
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json_text(const EngineConfig& cfg) {
    nlohmann::json j;
    j["n_teachers"] = cfg.n_teachers;
    j["n_students"] = cfg.n_students;
    j["steps"] = cfg.steps;
    j["evolve_every"] = cfg.evolve_every;
    j["cull_fraction"] = cfg.cull_fraction;
    j["prompts_per_type"] = cfg.prompts_per_type;
    j["rollout_n"] = cfg.rollout_n;
    j["temperature"] = cfg.temperature;
    j["learning_rate"] = cfg.learning_rate;
    j["rank"] = cfg.rank;
    j["lora_alpha"] = cfg.lora_alpha;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    j["optimizer"] = cfg.optimizer == Optimizer::adam ? "adam" : "sgd";
    j["gen_max_depth"] = cfg.gen_max_depth;
    j["archive_cells"] = cfg.archive_cells;
    j["teacher_init_std"] = cfg.teacher_init_std;
    j["student_init_std"] = cfg.student_init_std;
    j["workers"] = cfg.workers;
    j["pair_evolution"] = cfg.pair_evolution;
    j["operator_params"] = op_params_to_json(cfg.op_params);
    j["rating"] = {{"mu0", cfg.rating.mu0},
                   {"sigma0", cfg.rating.sigma0},
                   {"beta", cfg.rating.beta},
                   {"tau_dyn", cfg.rating.tau_dyn},
                   {"lcb_mult", cfg.rating.lcb_mult}};
    return j.dump(2);
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::invalid_argument("config: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

std::string problem_log_json(const ProblemLogEntry& e) {
    nlohmann::json j;
    j["step"] = e.step;
    j["teacher_id"] = e.teacher_id;
    j["task_type"] = e.task_type;
    j["program_text"] = e.program_text;
    j["payload"] = e.payload;
    j["valid"] = e.valid;
    j["descriptor"] = {{"ast_depth", e.descriptor.ast_depth},
                       {"cyclomatic", e.descriptor.cyclomatic},
                       {"loc", e.descriptor.loc},
                       {"var_count", e.descriptor.var_count}};
    j["rho"] = e.rho;
    return j.dump();
}

PopulationState init_state(const EngineConfig& cfg) {
    cfg.validate();
    PopulationState state;
    state.mode = cfg.mode;
    state.root_seed = cfg.seed;
    state.archive = diag::build_cvt_cached(cfg.archive_cells, kCvtSeed);

    const int n_teachers = cfg.mode == Mode::pair_1t1s ? 1 : cfg.n_teachers;
    const int n_students = cfg.mode == Mode::pair_1t1s ? 1 : cfg.n_students;

    if (cfg.mode == Mode::single_agent) {
        Member solo;
        solo.id = "agent0";
        RngStream rng(derive_seed(cfg.seed, "init-solo", 0));
        solo.adapter = env::init_solo_adapter(cfg.rank, cfg.lora_alpha, cfg.teacher_init_std,
                                              cfg.student_init_std, rng);
        solo.rating.mu = cfg.rating.mu0;
        solo.rating.sigma = cfg.rating.sigma0;
        solo.origin.op = "init";
        state.teachers.push_back(std::move(solo));
        state.next_teacher_id = 1;
        return state;
    }

    for (int i = 0; i < n_teachers; ++i) {
        Member m;
        m.id = "t" + std::to_string(i);
        RngStream rng(derive_seed(cfg.seed, "init-teacher", static_cast<uint64_t>(i)));
        m.adapter = env::init_teacher_adapter(cfg.rank, cfg.lora_alpha, cfg.teacher_init_std, rng);
        m.rating.mu = cfg.rating.mu0;
        m.rating.sigma = cfg.rating.sigma0;
        m.origin.op = "init";
        state.teachers.push_back(std::move(m));
    }
    for (int i = 0; i < n_students; ++i) {
        Member m;
        m.id = "s" + std::to_string(i);
        RngStream rng(derive_seed(cfg.seed, "init-student", static_cast<uint64_t>(i)));
        m.adapter = env::init_student_adapter(cfg.rank, cfg.lora_alpha, cfg.student_init_std, rng);
        m.rating.mu = cfg.rating.mu0;
        m.rating.sigma = cfg.rating.sigma0;
        m.origin.op = "init";
        state.students.push_back(std::move(m));
    }
    state.next_teacher_id = n_teachers;
    state.next_student_id = n_students;
    return state;
}

namespace {

void run_matchups_parallel(std::vector<env::MatchupResult>& results,
                           const std::vector<std::pair<int, int>>& pairs,
                           const PopulationState& state, const EngineConfig& cfg, long step) {
    const bool solo = state.mode == Mode::single_agent;
    auto run_one = [&](size_t idx) {
        const auto [ti, si] = pairs[idx];
        const Member& teacher = state.teachers[static_cast<size_t>(ti)];
        const Member& student = solo ? state.teachers[static_cast<size_t>(ti)]
                                     : state.students[static_cast<size_t>(si)];
        const uint64_t seed = derive_seed(state.root_seed, "matchup", static_cast<uint64_t>(step),
                                          fnv1a(teacher.id + "|" + student.id));
        RngStream rng(seed);
        results[idx] = env::run_matchup(teacher_policy_for(teacher, cfg),
                                        student_policy_for(student, cfg), teacher.id, student.id,
                                        cfg.prompts_per_type, cfg.rollout_n, cfg.gen_max_depth, rng);
    };

    unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers)
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(pairs.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < pairs.size(); ++i) {
            run_one(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            try {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= pairs.size()) {
                        return;
                    }
                    run_one(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace

StepResult training_step(PopulationState& state, const EngineConfig& cfg) {
    PopulationState next = state;  // transactional
    const long step = next.step + 1;
    const bool solo = next.mode == Mode::single_agent;

    // Phase 1: matchmaking.
    std::vector<std::pair<int, int>> pairs;
    if (solo) {
        pairs.emplace_back(0, 0);
    } else {
        std::vector<ratings::RatingState> student_pool;
        for (const auto& s : next.students) {
            student_pool.push_back(s.rating);
        }
        for (int ti = 0; ti < static_cast<int>(next.teachers.size()); ++ti) {
            RngStream rng(derive_seed(next.root_seed, "match", static_cast<uint64_t>(step),
                                      static_cast<uint64_t>(ti)));
            const size_t si = ratings::pfsp_sample(next.teachers[static_cast<size_t>(ti)].rating,
                                                   student_pool, cfg.rating, rng);
            pairs.emplace_back(ti, static_cast<int>(si));
        }
    }

    // Phases 2-3: generation and solving, independent across matchups.
    std::vector<env::MatchupResult> matchups(pairs.size());
    run_matchups_parallel(matchups, pairs, next, cfg, step);

    // Phase 4a: outcomes and rating updates, serial in matchup order.
    StepResult out;
    for (const auto& m : matchups) {
        const ratings::MatchOutcome outcome = ratings::decide_outcome(m.valid_rhos());
        const char* label = outcome.winner == ratings::WinnerRole::teacher ? "teacher"
                            : outcome.winner == ratings::WinnerRole::student ? "student"
                                                                             : "none";
        out.record.outcomes.emplace_back(label);
        if (solo || outcome.winner == ratings::WinnerRole::none) {
            continue;
        }
        // Locate members by id; evolution has not run yet this step, so ids
        // are stable.
        Member* teacher = nullptr;
        Member* student = nullptr;
        for (auto& t : next.teachers) {
            if (t.id == m.teacher_id) {
                teacher = &t;
            }
        }
        for (auto& s : next.students) {
            if (s.id == m.student_id) {
                student = &s;
            }
        }
        if (teacher == nullptr || student == nullptr) {
            throw std::logic_error("training_step: matchup references unknown member");
        }
        if (outcome.winner == ratings::WinnerRole::teacher) {
            auto [w, l] = ratings::update_ratings(teacher->rating, student->rating, cfg.rating);
            teacher->rating = w;
            student->rating = l;
        } else {
            auto [w, l] = ratings::update_ratings(student->rating, teacher->rating, cfg.rating);
            student->rating = w;
            teacher->rating = l;
        }
    }

    // Phase 4b: policy-gradient updates, one pooled mixed-type batch per
    // adapter that participated.
    for (size_t mi = 0; mi < matchups.size(); ++mi) {
        const auto [ti, si] = pairs[mi];
        Member& teacher = next.teachers[static_cast<size_t>(ti)];
        update_member(teacher, teacher_batch(matchups[mi], cfg.prompts_per_type), cfg);
    }
    if (solo) {
        rl::RolloutBatch batch;
        append_student_rows(batch, matchups[0]);
        update_member(next.teachers[0], batch, cfg);
    } else {
        for (size_t si = 0; si < next.students.size(); ++si) {
            rl::RolloutBatch batch;
            for (size_t mi = 0; mi < matchups.size(); ++mi) {
                if (pairs[mi].second == static_cast<int>(si)) {
                    append_student_rows(batch, matchups[mi]);
                }
            }
            update_member(next.students[si], batch, cfg);
        }
    }

    // Diagnostics accumulation.
    diag::StepRecord& rec = out.record;
    rec.step = step;
    rec.mode = to_string(next.mode);
    long total_problems = 0, valid_problems = 0;
    long solve_bits = 0, solved_bits = 0, malformed_bits = 0;
    double teacher_reward_sum = 0.0, student_reward_sum = 0.0;
    long student_reward_n = 0;
    double token_sum = 0.0;
    double depth_sum = 0.0, cyclo_sum = 0.0, loc_sum = 0.0, vars_sum = 0.0;
    long ast_problems = 0;
    std::array<long, 2> type_bits{}, type_solved{}, type_valid{};
    double teacher_entropy_sum = 0.0, student_entropy_sum = 0.0;

    for (const auto& m : matchups) {
        teacher_entropy_sum += m.teacher_entropy;
        student_entropy_sum += m.student_entropy;
        for (const auto& r : m.records) {
            ++total_problems;
            teacher_reward_sum += rl::reward_teacher(r.problem.valid, r.rho);
            if (r.problem.program != nullptr) {
                ++ast_problems;
                depth_sum += r.problem.descriptor.ast_depth;
                cyclo_sum += r.problem.descriptor.cyclomatic;
                loc_sum += r.problem.descriptor.loc;
                vars_sum += r.problem.descriptor.var_count;
            }
            ProblemLogEntry entry;
            entry.step = step;
            entry.teacher_id = m.teacher_id;
            entry.task_type = env::to_string(r.problem.type);
            entry.program_text = r.problem.program != nullptr ? r.problem.text : "";
            entry.payload = r.problem.payload;
            entry.valid = r.problem.valid;
            entry.descriptor = r.problem.descriptor;
            entry.rho = r.rho;
            out.problems.push_back(std::move(entry));
            if (!r.problem.valid) {
                continue;
            }
            ++valid_problems;
            token_sum += r.problem.token_count;
            diag::archive_insert(next.archive, r.problem.descriptor);
            const int type_idx = static_cast<int>(r.problem.type);
            ++type_valid[static_cast<size_t>(type_idx)];
            for (size_t j = 0; j < r.solve.bits.size(); ++j) {
                ++solve_bits;
                ++type_bits[static_cast<size_t>(type_idx)];
                if (r.solve.bits[j]) {
                    ++solved_bits;
                    ++type_solved[static_cast<size_t>(type_idx)];
                }
                if (r.solve.verdicts[j] == rl::StudentVerdict::malformed) {
                    ++malformed_bits;
                }
                student_reward_sum += rl::reward_student(r.solve.verdicts[j]);
                ++student_reward_n;
            }
        }
    }

    rec.solve_rate = mean_or_zero(static_cast<double>(solved_bits), solve_bits);
    rec.validity_rate = mean_or_zero(static_cast<double>(valid_problems), total_problems);
    rec.difficulty = 1.0 - rec.solve_rate;
    rec.format_rate = solve_bits > 0 ? 1.0 - static_cast<double>(malformed_bits) / solve_bits : 0.0;
    rec.teacher_entropy = mean_or_zero(teacher_entropy_sum, static_cast<long>(matchups.size()));
    rec.student_entropy = mean_or_zero(student_entropy_sum, static_cast<long>(matchups.size()));
    rec.teacher_reward_mean = mean_or_zero(teacher_reward_sum, total_problems);
    rec.student_reward_mean = mean_or_zero(student_reward_sum, student_reward_n);
    rec.mean_program_tokens = mean_or_zero(token_sum, valid_problems);
    rec.coverage_pct = next.archive.coverage() * 100.0;
    rec.mean_ast_depth = mean_or_zero(depth_sum, ast_problems);
    rec.mean_cyclomatic = mean_or_zero(cyclo_sum, ast_problems);
    rec.mean_loc = mean_or_zero(loc_sum, ast_problems);
    rec.mean_var_count = mean_or_zero(vars_sum, ast_problems);
    for (int t = 0; t < 2; ++t) {
        rec.solve_rate_by_type[static_cast<size_t>(t)] =
            mean_or_zero(static_cast<double>(type_solved[static_cast<size_t>(t)]),
                         type_bits[static_cast<size_t>(t)]);
        rec.problems_by_type[static_cast<size_t>(t)] =
            static_cast<double>(type_valid[static_cast<size_t>(t)]);
    }

    next.step = step;

    // Phase 5: evolution on schedule.
    if (!solo && step % cfg.evolve_every == 0) {
        out.events = evolve_populations(next, cfg);
    }

    for (const auto& t : next.teachers) {
        rec.teachers.push_back({t.id, t.rating.mu, t.rating.sigma});
    }
    for (const auto& s : next.students) {
        rec.students.push_back({s.id, s.rating.mu, s.rating.sigma});
    }

    state = std::move(next);
    return out;
}

std::vector<EvolutionEvent> evolve_populations(PopulationState& state, const EngineConfig& cfg) {
    std::vector<EvolutionEvent> events;
    const std::vector<ops::OperatorId> live = ops::live_operators();
    const std::vector<ops::OperatorId> live_mutations = {
        ops::OperatorId::m1_svd, ops::OperatorId::m2_layer_gauss,
        ops::OperatorId::m3_component_mask, ops::OperatorId::m4_full_gauss};

    struct RoleRef {
        const char* name;
        std::vector<Member>* members;
        int* counter;
        char prefix;
    };
    std::vector<RoleRef> roles = {{"teacher", &state.teachers, &state.next_teacher_id, 't'},
                                  {"student", &state.students, &state.next_student_id, 's'}};

    for (size_t role_idx = 0; role_idx < roles.size(); ++role_idx) {
        RoleRef& role = roles[role_idx];
        std::vector<Member>& members = *role.members;
        const int n = static_cast<int>(members.size());
        if (n == 0) {
            continue;
        }
        if (n == 1 && !cfg.pair_evolution) {
            continue;  // culling a 1-member population is degenerate
        }

        std::vector<ratings::RatingState> pool;
        for (const auto& m : members) {
            pool.push_back(m.rating);
        }
        const std::vector<size_t> ranked = ratings::lcb_rank(pool, cfg.rating);

        int cull_count = static_cast<int>(std::ceil(cfg.cull_fraction * n));
        cull_count = std::min(cull_count, std::max(n - 1, 1));
        if (n == 1) {
            cull_count = 1;  // forced self-mutation in pair mode
        }

        const int top_half = (n + 1) / 2;
        std::vector<size_t> top;
        for (int i = 0; i < top_half; ++i) {
            top.push_back(ranked[static_cast<size_t>(n - 1 - i)]);
        }

        for (int v = 0; v < cull_count; ++v) {
            const size_t victim = ranked[static_cast<size_t>(v)];
            RngStream rng(derive_seed(state.root_seed, "evolve", static_cast<uint64_t>(state.step),
                                      role_idx * 1000003ULL + static_cast<uint64_t>(v)));
            ops::OperatorId op = live[rng.uniform_int(live.size())];
            std::vector<size_t> parent_idx;
            parent_idx.push_back(top[rng.uniform_int(top.size())]);
            if (ops::operator_arity(op) == 2) {
                if (top.size() < 2) {
                    // No distinct second parent available: fall back to mutation.
                    op = live_mutations[rng.uniform_int(live_mutations.size())];
                } else {
                    size_t second = parent_idx[0];
                    while (second == parent_idx[0]) {
                        second = top[rng.uniform_int(top.size())];
                    }
                    parent_idx.push_back(second);
                }
            }

            std::vector<const AdapterState*> parents;
            std::vector<std::string> parent_ids;
            double mu_sum = 0.0;
            for (size_t pi : parent_idx) {
                parents.push_back(&members[pi].adapter);
                parent_ids.push_back(members[pi].id);
                mu_sum += members[pi].rating.mu;
            }
            const uint64_t child_seed = rng.next_u64();
            ops::OpChild child = ops::apply_operator(op, parents, parent_ids, cfg.op_params, child_seed);

            EvolutionEvent event;
            event.step = state.step;
            event.role = role.name;
            event.culled.push_back(members[victim].id);
            event.parents = parent_ids;
            event.op = ops::to_string(op);
            event.child_seed = child_seed;

            Member replacement;
            replacement.id = std::string(1, role.prefix) + std::to_string((*role.counter)++);
            replacement.adapter = std::move(child.state);
            replacement.rating.mu = mu_sum / static_cast<double>(parent_idx.size());
            replacement.rating.sigma = cfg.rating.sigma0;
            replacement.rating.games = 0;
            replacement.origin = child.provenance;
            event.child_id = replacement.id;
            members[victim] = std::move(replacement);
            events.push_back(std::move(event));
        }
    }
    return events;
}

std::string checkpoint_json(const PopulationState& state) {
    nlohmann::json j;
    j["version"] = 1;
    j["mode"] = to_string(state.mode);
    j["step"] = state.step;
    j["root_seed"] = state.root_seed;
    j["next_teacher_id"] = state.next_teacher_id;
    j["next_student_id"] = state.next_student_id;
    j["archive"] = {{"cells", state.archive.k},
                    {"filled_hex", filled_hex(state.archive.filled)},
                    {"total_problems", state.archive.total_problems}};
    nlohmann::json teachers = nlohmann::json::array();
    for (const auto& m : state.teachers) {
        teachers.push_back(member_json(m));
    }
    nlohmann::json students = nlohmann::json::array();
    for (const auto& m : state.students) {
        students.push_back(member_json(m));
    }
    j["teachers"] = teachers;
    j["students"] = students;
    return j.dump();
}

PopulationState state_from_checkpoint_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1) {
            throw std::runtime_error("checkpoint: unsupported version");
        }
        PopulationState state;
        state.mode = mode_from_string(j.at("mode").get<std::string>());
        state.step = j.at("step").get<long>();
        state.root_seed = j.at("root_seed").get<uint64_t>();
        state.next_teacher_id = j.at("next_teacher_id").get<int>();
        state.next_student_id = j.at("next_student_id").get<int>();
        const int cells = j.at("archive").at("cells").get<int>();
        state.archive = diag::build_cvt_cached(cells, kCvtSeed);
        state.archive.filled = filled_from_hex(j.at("archive").at("filled_hex").get<std::string>(), cells);
        state.archive.total_problems = j.at("archive").at("total_problems").get<long>();
        for (const auto& m : j.at("teachers")) {
            state.teachers.push_back(member_from_json(m));
        }
        for (const auto& m : j.at("students")) {
            state.students.push_back(member_from_json(m));
        }
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: missing or mistyped field: ") + e.what());
    }
}

void save_checkpoint(const PopulationState& state, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("checkpoint: cannot open for write: " + path.string());
    }
    f << checkpoint_json(state);
    if (!f) {
        throw std::runtime_error("checkpoint: write failed: " + path.string());
    }
}

PopulationState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("checkpoint: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return state_from_checkpoint_json(text);
}

uint64_t state_hash(const PopulationState& state) {
    return fnv1a(checkpoint_json(state));
}

void run_training(const EngineConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir / "resolved_config.json");
        f << config_to_json_text(cfg) << "\n";
    }
    PopulationState state = init_state(cfg);
    std::ofstream steps_f(out_dir / "steps.jsonl");
    std::ofstream problems_f(out_dir / "problems.jsonl");
    std::ofstream events_f(out_dir / "evolution.jsonl");
    if (!steps_f || !problems_f || !events_f) {
        throw std::runtime_error("run_training: cannot open output files under " + out_dir.string());
    }
    for (int i = 0; i < cfg.steps; ++i) {
        StepResult res = training_step(state, cfg);
        diag::emit_step(res.record, steps_f);
        for (const auto& p : res.problems) {
            problems_f << problem_log_json(p) << "\n";
        }
        for (const auto& e : res.events) {
            nlohmann::json je;
            je["step"] = e.step;
            je["role"] = e.role;
            je["culled"] = e.culled;
            je["parents"] = e.parents;
            je["op"] = e.op;
            je["child_seed"] = e.child_seed;
            je["child_id"] = e.child_id;
            events_f << je.dump() << "\n";
        }
    }
    save_checkpoint(state, out_dir / "checkpoint_final.json");
}

// ---------------------------------------------------------------------------
// Retention benchmark
// ---------------------------------------------------------------------------

namespace {

struct FixedTeacher {
    env::TeacherPolicy policy;
};

FixedTeacher make_fixed_teacher(const EngineConfig& cfg) {
    RngStream rng(0);  // zero-noise init below; stream unused
    AdapterState a = env::init_teacher_adapter(cfg.rank, cfg.lora_alpha, 0.0f, rng);
    FixedTeacher t{env::make_teacher_policy(a, cfg.temperature)};
    return t;
}

// Deterministic list of valid problems of one task type from the fixed
// uniform teacher.
std::vector<env::Problem> make_eval_set(const FixedTeacher& teacher, env::TaskType type,
                                        int count, const EngineConfig& cfg, uint64_t seed) {
    std::vector<env::Problem> out;
    RngStream rng(seed);
    int guard = 0;
    while (static_cast<int>(out.size()) < count && guard < count * 200) {
        env::Problem p = env::generate_problem(teacher.policy, type, cfg.gen_max_depth, rng);
        if (p.valid) {
            out.push_back(std::move(p));
        }
        ++guard;
    }
    if (static_cast<int>(out.size()) < count) {
        throw std::runtime_error("retention: could not assemble a valid eval set");
    }
    return out;
}

double eval_reward(const AdapterState& student, const std::vector<env::Problem>& problems,
                   const EngineConfig& cfg, uint64_t rollout_seed) {
    const env::StudentPolicy policy = env::make_student_policy(student, cfg.temperature);
    RngStream rng(rollout_seed);
    double sum = 0.0;
    long n = 0;
    for (const auto& p : problems) {
        const env::SolveOutcome solve = env::solve_problem(policy, p, cfg.rollout_n, rng);
        for (const auto v : solve.verdicts) {
            sum += rl::reward_student(v);
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

// One retraining step against the fixed teacher on the given task types.
void retrain_step(Member& student, const FixedTeacher& teacher,
                  const std::vector<env::TaskType>& types, const EngineConfig& cfg,
                  uint64_t seed) {
    RngStream rng(seed);
    const env::StudentPolicy policy = env::make_student_policy(student.adapter, cfg.temperature);
    rl::RolloutBatch batch;
    // Per-step budget matches a matchup: 2 * prompts_per_type problems.
    const int per_type = 2 * cfg.prompts_per_type / static_cast<int>(types.size());
    for (env::TaskType type : types) {
        for (int k = 0; k < per_type; ++k) {
            env::Problem p = env::generate_problem(teacher.policy, type, cfg.gen_max_depth, rng);
            if (!p.valid) {
                continue;
            }
            const env::SolveOutcome solve = env::solve_problem(policy, p, cfg.rollout_n, rng);
            std::vector<double> rewards;
            for (const auto v : solve.verdicts) {
                rewards.push_back(rl::reward_student(v));
            }
            batch.rewards.push_back(std::move(rewards));
            batch.grads.push_back(solve.grads);
        }
    }
    update_member(student, batch, cfg);
}

}  // namespace

RetentionReport retention_benchmark(const EngineConfig& cfg, const RetentionOptions& opt) {
    cfg.validate();
    RetentionReport report;
    const FixedTeacher teacher = make_fixed_teacher(cfg);

    const std::vector<env::Problem> eval_in =
        make_eval_set(teacher, env::TaskType::infer_input, opt.eval_problems, cfg,
                      derive_seed(cfg.seed, "retention-eval", 0));
    const std::vector<env::Problem> eval_out =
        make_eval_set(teacher, env::TaskType::infer_output, opt.eval_problems, cfg,
                      derive_seed(cfg.seed, "retention-eval", 1));
    const uint64_t roll_seed_in = derive_seed(cfg.seed, "retention-eval-roll", 0);
    const uint64_t roll_seed_out = derive_seed(cfg.seed, "retention-eval-roll", 1);

    auto eval_on = [&](const AdapterState& a, env::TaskType type) {
        return type == env::TaskType::infer_input ? eval_reward(a, eval_in, cfg, roll_seed_in)
                                                  : eval_reward(a, eval_out, cfg, roll_seed_out);
    };
    auto eval_mixed = [&](const AdapterState& a) {
        return 0.5 * (eval_on(a, env::TaskType::infer_input) + eval_on(a, env::TaskType::infer_output));
    };

    // Two parents: one specialized per task type.
    struct Parent {
        env::TaskType type;
        Member member;
        std::map<int, AdapterState> snapshots;
        std::vector<double> curve;
    };
    std::vector<Parent> parents;
    for (int pi = 0; pi < 2; ++pi) {
        Parent p;
        p.type = pi == 0 ? env::TaskType::infer_input : env::TaskType::infer_output;
        RngStream rng(derive_seed(cfg.seed, "retention-parent-init", static_cast<uint64_t>(pi)));
        p.member.id = pi == 0 ? "parent_in" : "parent_out";
        p.member.adapter = env::init_student_adapter(cfg.rank, cfg.lora_alpha, cfg.student_init_std, rng);
        parents.push_back(std::move(p));
    }
    const int max_snapshot = *std::max_element(opt.snapshots.begin(), opt.snapshots.end());
    const int parent_steps = std::max(opt.parent_steps, max_snapshot);
    for (auto& parent : parents) {
        for (int step = 1; step <= parent_steps; ++step) {
            retrain_step(parent.member, teacher, {parent.type}, cfg,
                         derive_seed(cfg.seed, "retention-parent-step",
                                     fnv1a(parent.member.id), static_cast<uint64_t>(step)));
            parent.curve.push_back(eval_on(parent.member.adapter, parent.type));
            if (std::find(opt.snapshots.begin(), opt.snapshots.end(), step) != opt.snapshots.end()) {
                parent.snapshots.emplace(step, parent.member.adapter);
            }
        }
    }
    report.parent_in_curve = parents[0].curve;
    report.parent_out_curve = parents[1].curve;

    std::vector<ops::OperatorId> operators = opt.operators;
    if (operators.empty()) {
        operators = ops::all_operators();
    }

    for (ops::OperatorId op : operators) {
        const bool crossover = ops::operator_arity(op) == 2;
        for (int snap : opt.snapshots) {
            const AdapterState& p_in = parents[0].snapshots.at(snap);
            const AdapterState& p_out = parents[1].snapshots.at(snap);

            std::vector<const AdapterState*> op_parents;
            std::vector<std::string> op_parent_ids;
            std::vector<env::TaskType> retrain_types;
            double parent_reward;
            if (crossover) {
                op_parents = {&p_in, &p_out};
                op_parent_ids = {"parent_in", "parent_out"};
                retrain_types = {env::TaskType::infer_input, env::TaskType::infer_output};
                parent_reward = 0.5 * (eval_on(p_in, env::TaskType::infer_input) +
                                       eval_on(p_out, env::TaskType::infer_output));
            } else {
                op_parents = {&p_out};
                op_parent_ids = {"parent_out"};
                retrain_types = {env::TaskType::infer_output};
                parent_reward = eval_on(p_out, env::TaskType::infer_output);
            }

            const uint64_t child_seed = derive_seed(cfg.seed, "retention-child",
                                                    fnv1a(ops::to_string(op)), static_cast<uint64_t>(snap));
            ops::OpChild child = ops::apply_operator(op, op_parents, op_parent_ids, cfg.op_params, child_seed);

            Member member;
            member.id = std::string(ops::to_string(op)) + "@" + std::to_string(snap);
            member.adapter = std::move(child.state);

            RetentionRow row;
            row.op = ops::to_string(op);
            row.snapshot = snap;
            row.parent_reward = parent_reward;
            auto child_eval = [&]() {
                return crossover ? eval_mixed(member.adapter)
                                 : eval_on(member.adapter, env::TaskType::infer_output);
            };
            row.child_curve.push_back(child_eval());
            for (int step = 1; step <= opt.retrain_steps; ++step) {
                retrain_step(member, teacher, retrain_types, cfg,
                             derive_seed(cfg.seed, "retention-retrain",
                                         fnv1a(member.id), static_cast<uint64_t>(step)));
                row.child_curve.push_back(child_eval());
            }
            // The 90% recovery target is a fraction of a positive parent
            // reward; for parents still in the red it means parent level.
            const double target = row.parent_reward > 0.0 ? 0.9 * row.parent_reward
                                                          : row.parent_reward;
            for (size_t i = 0; i < row.child_curve.size(); ++i) {
                if (row.child_curve[i] >= target) {
                    row.steps_to_90pct = static_cast<int>(i);
                    break;
                }
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

void write_retention_report(const RetentionReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir / "retention_summary.csv");
        f.precision(10);
        f << "op,snapshot,parent_reward,child_start,steps_to_90pct,child_final\n";
        for (const auto& row : report.rows) {
            f << row.op << "," << row.snapshot << "," << row.parent_reward << ","
              << row.child_curve.front() << "," << row.steps_to_90pct << ","
              << row.child_curve.back() << "\n";
        }
    }
    {
        std::ofstream f(out_dir / "retention_curves.csv");
        f.precision(10);
        f << "op,snapshot,retrain_step,global_step,reward,parent_reward\n";
        for (const auto& row : report.rows) {
            for (size_t i = 0; i < row.child_curve.size(); ++i) {
                f << row.op << "," << row.snapshot << "," << i << "," << (row.snapshot + i) << ","
                  << row.child_curve[i] << "," << row.parent_reward << "\n";
            }
        }
    }
    {
        std::ofstream f(out_dir / "retention_parents.csv");
        f.precision(10);
        f << "parent,step,reward\n";
        for (size_t i = 0; i < report.parent_in_curve.size(); ++i) {
            f << "parent_in," << (i + 1) << "," << report.parent_in_curve[i] << "\n";
        }
        for (size_t i = 0; i < report.parent_out_curve.size(); ++i) {
            f << "parent_out," << (i + 1) << "," << report.parent_out_curve[i] << "\n";
        }
    }
}

std::string describe_checkpoint(const PopulationState& state) {
    std::string out;
    out += "mode: " + std::string(to_string(state.mode)) + "\n";
    out += "step: " + std::to_string(state.step) + "\n";
    out += "state_hash: " + std::to_string(state_hash(state)) + "\n";
    auto describe = [&](const char* role, const std::vector<Member>& members) {
        for (const auto& m : members) {
            double norm = 0.0;
            for (const auto& [name, pair] : m.adapter.slots) {
                const double na = frobenius_norm(pair.a);
                const double nb = frobenius_norm(pair.b);
                norm += na * na + nb * nb;
            }
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%s %s mu=%.3f sigma=%.3f games=%ld origin=%s norm=%.4f\n",
                          role, m.id.c_str(), m.rating.mu, m.rating.sigma, m.rating.games,
                          m.origin.op.empty() ? "init" : m.origin.op.c_str(), std::sqrt(norm));
            out += buf;
        }
    };
    describe("teacher", state.teachers);
    describe("student", state.students);
    return out;
}

}  // namespace plra::engine
