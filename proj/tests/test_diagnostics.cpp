#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plra/diagnostics.hpp"

using namespace plra;
using namespace plra::diag;

TEST_CASE("build_cvt with one cell lands on the centroid of the unit cube") {
    RngStream rng(1);
    const CvtArchive a = build_cvt(1, rng);
    REQUIRE(a.centroids.size() == 1);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(a.centroids[0][static_cast<size_t>(j)] - 0.5) < 0.02);
    }
    CHECK(a.coverage() == 0.0);
}

TEST_CASE("build_cvt centroids are distinct and the build is reproducible bitwise") {
    RngStream r1(9), r2(9);
    const CvtArchive a = build_cvt(16, r1);
    const CvtArchive b = build_cvt(16, r2);
    REQUIRE(a.centroids.size() == b.centroids.size());
    for (size_t i = 0; i < a.centroids.size(); ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(a.centroids[i][static_cast<size_t>(j)] == b.centroids[i][static_cast<size_t>(j)]);
        }
    }
    double min_dist = 1e300;
    for (size_t i = 0; i < a.centroids.size(); ++i) {
        for (size_t j = i + 1; j < a.centroids.size(); ++j) {
            double d = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double diff = a.centroids[i][static_cast<size_t>(k)] - a.centroids[j][static_cast<size_t>(k)];
                d += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(d));
        }
    }
    CHECK(min_dist > 0.0);
}

TEST_CASE("build_cvt_cached shares centroids and resets fill state") {
    CvtArchive a = build_cvt_cached(8, 11);
    dsl::ComplexityDescriptor d{3, 1, 1, 0};
    archive_insert(a, d);
    CHECK(a.filled_cells() == 1);
    const CvtArchive b = build_cvt_cached(8, 11);
    CHECK(b.filled_cells() == 0);
    CHECK(b.centroids[0][0] == a.centroids[0][0]);
}

TEST_CASE("archive_insert coverage behavior") {
    RngStream rng(3);
    CvtArchive a = build_cvt(16, rng);
    CHECK(a.coverage() == 0.0);

    dsl::ComplexityDescriptor d{3, 1, 1, 0};
    archive_insert(a, d);
    CHECK(a.coverage() == doctest::Approx(1.0 / 16));
    CHECK(a.total_problems == 1);

    // idempotent fill
    archive_insert(a, d);
    CHECK(a.coverage() == doctest::Approx(1.0 / 16));
    CHECK(a.total_problems == 2);

    // monotone under arbitrary inserts
    double last = a.coverage();
    RngStream gen(4);
    for (int i = 0; i < 200; ++i) {
        dsl::ComplexityDescriptor r{1 + static_cast<int>(gen.uniform_int(12)),
                                    1 + static_cast<int>(gen.uniform_int(10)),
                                    1 + static_cast<int>(gen.uniform_int(20)),
                                    static_cast<int>(gen.uniform_int(5))};
        archive_insert(a, r);
        CHECK(a.coverage() >= last);
        last = a.coverage();
    }
}

TEST_CASE("descriptor normalization clamps to the unit cube") {
    const auto low = normalize_descriptor({1, 1, 1, 0});
    CHECK(low[0] == doctest::Approx(1.0 / 8));
    CHECK(low[3] == 0.0);
    const auto high = normalize_descriptor({50, 50, 100, 9});
    for (double v : high) {
        CHECK(v == 1.0);
    }
}

TEST_CASE("step records round-trip through JSON lines") {
    StepRecord rec;
    rec.step = 17;
    rec.mode = "population";
    rec.solve_rate = 0.375;
    rec.validity_rate = 0.9375;
    rec.difficulty = 1.0 - rec.solve_rate;
    rec.format_rate = 0.875;
    rec.teacher_entropy = 1.23456789;
    rec.student_entropy = 2.3456789;
    rec.teacher_reward_mean = 0.1;
    rec.student_reward_mean = -0.2;
    rec.mean_program_tokens = 14.25;
    rec.coverage_pct = 12.5;
    rec.mean_ast_depth = 4.5;
    rec.mean_cyclomatic = 1.75;
    rec.mean_loc = 3.25;
    rec.mean_var_count = 0.5;
    rec.solve_rate_by_type = {0.25, 0.5};
    rec.problems_by_type = {4.0, 4.0};
    rec.teachers = {{"t0", 26.5, 7.1}, {"t1", 23.5, 8.0}};
    rec.students = {{"s0", 25.0, 8.33}};
    rec.outcomes = {"teacher", "none"};

    const std::string line = step_record_json(rec);
    const StepRecord back = parse_step_record(line);
    CHECK(back.step == rec.step);
    CHECK(back.solve_rate == rec.solve_rate);
    CHECK(back.teacher_entropy == rec.teacher_entropy);
    CHECK(back.teachers.size() == 2);
    CHECK(back.teachers[0].mu == rec.teachers[0].mu);
    CHECK(back.outcomes == rec.outcomes);
    CHECK(back.difficulty == doctest::Approx(1.0 - back.solve_rate).epsilon(1e-9));

    // emit is one line
    std::ostringstream sink;
    emit_step(rec, sink);
    CHECK(sink.str() == line + "\n");
}

TEST_CASE("linear_slope") {
    CHECK(linear_slope({3.0, 3.0, 3.0, 3.0}) == 0.0);
    CHECK(linear_slope({0.0, 1.0, 2.0, 3.0}) == doctest::Approx(1.0));
    CHECK(linear_slope({5.0, 3.0, 1.0}) == doctest::Approx(-2.0));
    CHECK(linear_slope({1.0}) == 0.0);
}

TEST_CASE("write_report emits stable CSV columns") {
    namespace fs = std::filesystem;
    const fs::path run_dir = fs::temp_directory_path() / "plra_report_test";
    fs::remove_all(run_dir);
    fs::create_directories(run_dir);
    {
        std::ofstream steps(run_dir / "steps.jsonl");
        for (int i = 1; i <= 5; ++i) {
            StepRecord rec;
            rec.step = i;
            rec.mode = "population";
            rec.solve_rate = 0.1 * i;
            rec.difficulty = 1.0 - rec.solve_rate;
            rec.mean_cyclomatic = 1.0 + 0.1 * i;
            rec.teachers = {{"t0", 25.0 + i, 8.0}};
            rec.students = {{"s0", 25.0 - i, 8.0}};
            rec.outcomes = {"teacher"};
            emit_step(rec, steps);
        }
    }
    write_report(run_dir);

    auto first_line = [](const fs::path& p) {
        std::ifstream f(p);
        std::string line;
        std::getline(f, line);
        return line;
    };
    CHECK(first_line(run_dir / "report" / "training_dynamics.csv") ==
          "step,solve_rate,format_rate,validity_rate,difficulty,teacher_entropy,student_entropy,"
          "teacher_reward_mean,student_reward_mean,mean_program_tokens");
    CHECK(first_line(run_dir / "report" / "complexity.csv") ==
          "step,mean_ast_depth,mean_cyclomatic,mean_loc,mean_var_count");
    CHECK(first_line(run_dir / "report" / "coverage.csv") == "step,coverage_pct");
    CHECK(first_line(run_dir / "report" / "per_type.csv") ==
          "step,solve_rate_infer_input,solve_rate_infer_output,problems_infer_input,problems_infer_output");
    CHECK(first_line(run_dir / "report" / "trueskill.csv") == "step,role,id,mu,sigma");
    CHECK(fs::exists(run_dir / "report" / "summary.txt"));

    std::ifstream summary(run_dir / "report" / "summary.txt");
    std::string text((std::istreambuf_iterator<char>(summary)), std::istreambuf_iterator<char>());
    CHECK(text.find("slope_mean_cyclomatic") != std::string::npos);

    fs::remove_all(run_dir);
}

TEST_CASE("write_report requires a run directory") {
    CHECK_THROWS_AS(write_report("/nonexistent/plra/run"), std::runtime_error);
}
