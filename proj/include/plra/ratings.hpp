#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "plra/rng.hpp"

namespace plra::ratings {

struct RatingState {
    double mu = 25.0;
    double sigma = 25.0 / 3.0;
    long games = 0;
};

struct RatingConfig {
    double mu0 = 25.0;
    double sigma0 = 25.0 / 3.0;
    double beta = 25.0 / 6.0;       // sigma0 / 2
    double tau_dyn = 25.0 / 300.0;  // sigma0 / 100
    double lcb_mult = 3.0;
};

enum class WinnerRole { teacher, student, none };

struct MatchOutcome {
    WinnerRole winner = WinnerRole::none;
    double aggregate_rho = 0.0;  // undefined when valid_problems == 0
    int valid_problems = 0;
};

// Matchup outcome from the per-valid-problem solve rates. Teacher wins on
// aggregate rho < 0.5, student on > 0.5, exactly 0.5 is a no-update tie.
// A matchup with zero valid problems is a student win: the teacher failed
// to pose anything solvable.
MatchOutcome decide_outcome(const std::vector<double>& rho_per_valid_problem);

// Two-player TrueSkill win/loss update. Both variances are first inflated
// by tau_dyn^2, then mu moves by (sigma^2/c) * v and sigma^2 shrinks by the
// factor (1 - (sigma^2/c^2) * w). Throws on non-finite intermediates.
std::pair<RatingState, RatingState> update_ratings(const RatingState& winner,
                                                   const RatingState& loser,
                                                   const RatingConfig& cfg);

// Phi((mu_a - mu_b) / sqrt(2 beta^2 + sigma_a^2 + sigma_b^2)).
double predicted_win_prob(const RatingState& a, const RatingState& b, const RatingConfig& cfg);

// PFSP opponent draw with weights p(1-p); degenerates to uniform when all
// weights vanish. Throws on an empty pool.
size_t pfsp_sample(const RatingState& self, const std::vector<RatingState>& pool,
                   const RatingConfig& cfg, RngStream& rng);

// Indices sorted ascending by mu - lcb_mult * sigma (worst first), stable
// tie-break by index.
std::vector<size_t> lcb_rank(const std::vector<RatingState>& pool, const RatingConfig& cfg);

double normal_pdf(double x);
double normal_cdf(double x);

}  // namespace plra::ratings
