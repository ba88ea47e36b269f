#include "plra/diagnostics.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plra::diag {

double CvtArchive::coverage() const {
    return k > 0 ? static_cast<double>(filled_cells()) / static_cast<double>(k) : 0.0;
}

int CvtArchive::filled_cells() const {
    int n = 0;
    for (uint8_t f : filled) {
        n += f ? 1 : 0;
    }
    return n;
}

namespace {

size_t nearest_centroid(const std::vector<std::array<double, 4>>& centroids,
                        const std::array<double, 4>& p) {
    size_t best = 0;
    double best_d = 1e300;
    for (size_t i = 0; i < centroids.size(); ++i) {
        double d = 0.0;
        for (int j = 0; j < 4; ++j) {
            const double diff = centroids[i][static_cast<size_t>(j)] - p[static_cast<size_t>(j)];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

CvtArchive build_cvt(int k, RngStream& rng) {
    if (k < 1) {
        throw std::invalid_argument("build_cvt: k must be >= 1");
    }
    constexpr int kSamples = 100000;
    constexpr int kMaxRounds = 50;
    constexpr double kMoveTol = 1e-4;

    std::vector<std::array<double, 4>> points(kSamples);
    for (auto& p : points) {
        for (int j = 0; j < 4; ++j) {
            p[static_cast<size_t>(j)] = rng.uniform01();
        }
    }

    CvtArchive archive;
    archive.k = k;
    archive.centroids.assign(static_cast<size_t>(k), {});
    for (int i = 0; i < k; ++i) {
        archive.centroids[static_cast<size_t>(i)] = points[static_cast<size_t>(i)];
    }

    std::vector<std::array<double, 4>> sums(static_cast<size_t>(k));
    std::vector<long> counts(static_cast<size_t>(k));
    for (int round = 0; round < kMaxRounds; ++round) {
        for (auto& s : sums) {
            s = {};
        }
        std::fill(counts.begin(), counts.end(), 0L);
        for (const auto& p : points) {
            const size_t c = nearest_centroid(archive.centroids, p);
            for (int j = 0; j < 4; ++j) {
                sums[c][static_cast<size_t>(j)] += p[static_cast<size_t>(j)];
            }
            ++counts[c];
        }
        double max_move = 0.0;
        for (int i = 0; i < k; ++i) {
            if (counts[static_cast<size_t>(i)] == 0) {
                continue;  // empty cell keeps its centroid
            }
            std::array<double, 4> next{};
            double move = 0.0;
            for (int j = 0; j < 4; ++j) {
                next[static_cast<size_t>(j)] =
                    sums[static_cast<size_t>(i)][static_cast<size_t>(j)] /
                    static_cast<double>(counts[static_cast<size_t>(i)]);
                const double d = next[static_cast<size_t>(j)] -
                                 archive.centroids[static_cast<size_t>(i)][static_cast<size_t>(j)];
                move += d * d;
            }
            archive.centroids[static_cast<size_t>(i)] = next;
            max_move = std::max(max_move, std::sqrt(move));
        }
        if (max_move < kMoveTol) {
            break;
        }
    }

    archive.filled.assign(static_cast<size_t>(k), 0);
    archive.total_problems = 0;
    return archive;
}

CvtArchive build_cvt_cached(int k, uint64_t seed) {
    static std::mutex mu;
    static std::map<std::pair<int, uint64_t>, CvtArchive> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(k, seed);
    auto it = cache.find(key);
    if (it == cache.end()) {
        RngStream rng(seed);
        it = cache.emplace(key, build_cvt(k, rng)).first;
    }
    CvtArchive fresh = it->second;
    fresh.filled.assign(static_cast<size_t>(k), 0);
    fresh.total_problems = 0;
    return fresh;
}

std::array<double, 4> normalize_descriptor(const dsl::ComplexityDescriptor& d) {
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    return {clamp01(d.ast_depth / 8.0), clamp01(d.cyclomatic / 8.0),
            clamp01(d.loc / 16.0), clamp01(d.var_count / 4.0)};
}

void archive_insert(CvtArchive& a, const dsl::ComplexityDescriptor& d) {
    const std::array<double, 4> p = normalize_descriptor(d);
    const size_t c = nearest_centroid(a.centroids, p);
    a.filled[c] = 1;
    ++a.total_problems;
}

namespace {

nlohmann::json ratings_json(const std::vector<AdapterRating>& rs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rs) {
        arr.push_back({{"id", r.id}, {"mu", r.mu}, {"sigma", r.sigma}});
    }
    return arr;
}

std::vector<AdapterRating> ratings_from_json(const nlohmann::json& arr) {
    std::vector<AdapterRating> out;
    for (const auto& r : arr) {
        out.push_back({r.at("id").get<std::string>(), r.at("mu").get<double>(), r.at("sigma").get<double>()});
    }
    return out;
}

}  // namespace

std::string step_record_json(const StepRecord& rec) {
    nlohmann::json j;
    j["v"] = rec.version;
    j["step"] = rec.step;
    j["mode"] = rec.mode;
    j["solve_rate"] = rec.solve_rate;
    j["validity_rate"] = rec.validity_rate;
    j["difficulty"] = rec.difficulty;
    j["format_rate"] = rec.format_rate;
    j["teacher_entropy"] = rec.teacher_entropy;
    j["student_entropy"] = rec.student_entropy;
    j["teacher_reward_mean"] = rec.teacher_reward_mean;
    j["student_reward_mean"] = rec.student_reward_mean;
    j["mean_program_tokens"] = rec.mean_program_tokens;
    j["coverage_pct"] = rec.coverage_pct;
    j["mean_ast_depth"] = rec.mean_ast_depth;
    j["mean_cyclomatic"] = rec.mean_cyclomatic;
    j["mean_loc"] = rec.mean_loc;
    j["mean_var_count"] = rec.mean_var_count;
    j["solve_rate_infer_input"] = rec.solve_rate_by_type[0];
    j["solve_rate_infer_output"] = rec.solve_rate_by_type[1];
    j["problems_infer_input"] = rec.problems_by_type[0];
    j["problems_infer_output"] = rec.problems_by_type[1];
    j["teachers"] = ratings_json(rec.teachers);
    j["students"] = ratings_json(rec.students);
    j["outcomes"] = rec.outcomes;
    return j.dump();
}

void emit_step(const StepRecord& rec, std::ostream& sink) {
    sink << step_record_json(rec) << "\n";
}

StepRecord parse_step_record(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    StepRecord rec;
    rec.version = j.at("v").get<int>();
    rec.step = j.at("step").get<long>();
    rec.mode = j.at("mode").get<std::string>();
    rec.solve_rate = j.at("solve_rate").get<double>();
    rec.validity_rate = j.at("validity_rate").get<double>();
    rec.difficulty = j.at("difficulty").get<double>();
    rec.format_rate = j.at("format_rate").get<double>();
    rec.teacher_entropy = j.at("teacher_entropy").get<double>();
    rec.student_entropy = j.at("student_entropy").get<double>();
    rec.teacher_reward_mean = j.at("teacher_reward_mean").get<double>();
    rec.student_reward_mean = j.at("student_reward_mean").get<double>();
    rec.mean_program_tokens = j.at("mean_program_tokens").get<double>();
    rec.coverage_pct = j.at("coverage_pct").get<double>();
    rec.mean_ast_depth = j.at("mean_ast_depth").get<double>();
    rec.mean_cyclomatic = j.at("mean_cyclomatic").get<double>();
    rec.mean_loc = j.at("mean_loc").get<double>();
    rec.mean_var_count = j.at("mean_var_count").get<double>();
    rec.solve_rate_by_type[0] = j.at("solve_rate_infer_input").get<double>();
    rec.solve_rate_by_type[1] = j.at("solve_rate_infer_output").get<double>();
    rec.problems_by_type[0] = j.at("problems_infer_input").get<double>();
    rec.problems_by_type[1] = j.at("problems_infer_output").get<double>();
    rec.teachers = ratings_from_json(j.at("teachers"));
    rec.students = ratings_from_json(j.at("students"));
    rec.outcomes = j.at("outcomes").get<std::vector<std::string>>();
    return rec;
}

double linear_slope(const std::vector<double>& y) {
    const size_t n = y.size();
    if (n < 2) {
        return 0.0;
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        sx += x;
        sy += y[i];
        sxx += x * x;
        sxy += x * y[i];
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (denom == 0.0) {
        return 0.0;
    }
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

namespace {

std::vector<StepRecord> read_steps(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<StepRecord> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) {
            out.push_back(parse_step_record(line));
        }
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << header << "\n";
    f.precision(10);
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            f << (i ? "," : "") << row[i];
        }
        f << "\n";
    }
}

}  // namespace

void write_report(const std::filesystem::path& run_dir) {
    const std::filesystem::path steps_path = run_dir / "steps.jsonl";
    if (!std::filesystem::exists(steps_path)) {
        throw std::runtime_error("no steps.jsonl under " + run_dir.string());
    }
    const std::vector<StepRecord> steps = read_steps(steps_path);
    const std::filesystem::path out_dir = run_dir / "report";
    std::filesystem::create_directories(out_dir);

    std::vector<std::vector<double>> dynamics;
    std::vector<std::vector<double>> complexity_rows;
    std::vector<std::vector<double>> coverage_rows;
    std::vector<std::vector<double>> per_type_rows;
    for (const auto& r : steps) {
        dynamics.push_back({static_cast<double>(r.step), r.solve_rate, r.format_rate, r.validity_rate,
                            r.difficulty, r.teacher_entropy, r.student_entropy, r.teacher_reward_mean,
                            r.student_reward_mean, r.mean_program_tokens});
        complexity_rows.push_back({static_cast<double>(r.step), r.mean_ast_depth, r.mean_cyclomatic,
                                   r.mean_loc, r.mean_var_count});
        coverage_rows.push_back({static_cast<double>(r.step), r.coverage_pct});
        per_type_rows.push_back({static_cast<double>(r.step), r.solve_rate_by_type[0],
                                 r.solve_rate_by_type[1], r.problems_by_type[0], r.problems_by_type[1]});
    }
    write_csv(out_dir / "training_dynamics.csv",
              "step,solve_rate,format_rate,validity_rate,difficulty,teacher_entropy,student_entropy,"
              "teacher_reward_mean,student_reward_mean,mean_program_tokens",
              dynamics);
    write_csv(out_dir / "complexity.csv", "step,mean_ast_depth,mean_cyclomatic,mean_loc,mean_var_count",
              complexity_rows);
    write_csv(out_dir / "coverage.csv", "step,coverage_pct", coverage_rows);
    write_csv(out_dir / "per_type.csv",
              "step,solve_rate_infer_input,solve_rate_infer_output,problems_infer_input,problems_infer_output",
              per_type_rows);

    // Long-format TrueSkill trajectories.
    {
        std::ofstream f(out_dir / "trueskill.csv");
        f << "step,role,id,mu,sigma\n";
        f.precision(10);
        for (const auto& r : steps) {
            for (const auto& a : r.teachers) {
                f << r.step << ",teacher," << a.id << "," << a.mu << "," << a.sigma << "\n";
            }
            for (const auto& a : r.students) {
                f << r.step << ",student," << a.id << "," << a.mu << "," << a.sigma << "\n";
            }
        }
    }

    if (std::filesystem::exists(run_dir / "retention_curves.csv")) {
        std::filesystem::copy_file(run_dir / "retention_curves.csv", out_dir / "retention_curves.csv",
                                   std::filesystem::copy_options::overwrite_existing);
    }
    if (std::filesystem::exists(run_dir / "retention_summary.csv")) {
        std::filesystem::copy_file(run_dir / "retention_summary.csv", out_dir / "retention_summary.csv",
                                   std::filesystem::copy_options::overwrite_existing);
    }

    // Trend summary.
    {
        std::vector<double> depth, cyclo, loc, vars, coverage;
        for (const auto& r : steps) {
            depth.push_back(r.mean_ast_depth);
            cyclo.push_back(r.mean_cyclomatic);
            loc.push_back(r.mean_loc);
            vars.push_back(r.mean_var_count);
            coverage.push_back(r.coverage_pct);
        }
        std::ofstream f(out_dir / "summary.txt");
        f.precision(8);
        f << "steps: " << steps.size() << "\n";
        if (!steps.empty()) {
            f << "mode: " << steps.front().mode << "\n";
            f << "slope_mean_ast_depth: " << linear_slope(depth) << "\n";
            f << "slope_mean_cyclomatic: " << linear_slope(cyclo) << "\n";
            f << "slope_mean_loc: " << linear_slope(loc) << "\n";
            f << "slope_mean_var_count: " << linear_slope(vars) << "\n";
            f << "final_coverage_pct: " << coverage.back() << "\n";
            f << "final_solve_rate: " << steps.back().solve_rate << "\n";
        }
    }
}

}  // namespace plra::diag
