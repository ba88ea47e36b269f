#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "plra/dsl.hpp"
#include "plra/rng.hpp"

namespace plra::diag {

// Centroidal Voronoi tessellation over the normalized 4-D descriptor space
// (ast depth, cyclomatic, loc, var count). Coverage is the fraction of cells
// containing at least one inserted descriptor; it only ever grows.
struct CvtArchive {
    int k = 0;
    std::vector<std::array<double, 4>> centroids;
    std::vector<uint8_t> filled;
    long total_problems = 0;

    double coverage() const;
    int filled_cells() const;
};

// Lloyd's iterations over 1e5 uniform points: 50 rounds or max centroid
// movement below 1e-4.
CvtArchive build_cvt(int k, RngStream& rng);

// Same tessellation, memoized per (k, seed); archives built for matching
// arms share centroids.
CvtArchive build_cvt_cached(int k, uint64_t seed);

std::array<double, 4> normalize_descriptor(const dsl::ComplexityDescriptor& d);
void archive_insert(CvtArchive& a, const dsl::ComplexityDescriptor& d);

struct AdapterRating {
    std::string id;
    double mu = 0.0;
    double sigma = 0.0;
};

struct StepRecord {
    int version = 1;
    long step = 0;
    std::string mode;
    double solve_rate = 0.0;
    double validity_rate = 0.0;
    double difficulty = 0.0;  // 1 - solve_rate
    double format_rate = 0.0; // fraction of rollouts not malformed
    double teacher_entropy = 0.0;
    double student_entropy = 0.0;
    double teacher_reward_mean = 0.0;
    double student_reward_mean = 0.0;
    double mean_program_tokens = 0.0;
    double coverage_pct = 0.0;
    double mean_ast_depth = 0.0;
    double mean_cyclomatic = 0.0;
    double mean_loc = 0.0;
    double mean_var_count = 0.0;
    std::array<double, 2> solve_rate_by_type{};     // [infer_input, infer_output]
    std::array<double, 2> problems_by_type{};       // valid problem counts
    std::vector<AdapterRating> teachers;
    std::vector<AdapterRating> students;
    std::vector<std::string> outcomes;              // per matchup: teacher/student/none
};

// One JSON line per step; schema carried in the "v" field.
void emit_step(const StepRecord& rec, std::ostream& sink);
std::string step_record_json(const StepRecord& rec);
StepRecord parse_step_record(const std::string& line);

// Ordinary-least-squares slope of y against its index.
double linear_slope(const std::vector<double>& y);

// Reads steps.jsonl (and retention_curves.csv when present) from run_dir and
// writes plot-ready CSVs plus summary.txt under run_dir/report.
void write_report(const std::filesystem::path& run_dir);

}  // namespace plra::diag
