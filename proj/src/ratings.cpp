#include "plra/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace plra::ratings {

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace {

// v(t) = pdf(t) / cdf(t); asymptotic branch keeps the ratio finite when
// cdf underflows for very negative t.
double v_win(double t) {
    if (t < -10.0) {
        return -t - 1.0 / t;
    }
    const double denom = normal_cdf(t);
    if (denom <= 0.0) {
        return -t - 1.0 / t;
    }
    return normal_pdf(t) / denom;
}

}  // namespace

MatchOutcome decide_outcome(const std::vector<double>& rho_per_valid_problem) {
    MatchOutcome out;
    out.valid_problems = static_cast<int>(rho_per_valid_problem.size());
    if (rho_per_valid_problem.empty()) {
        out.winner = WinnerRole::student;
        return out;
    }
    double sum = 0.0;
    for (double r : rho_per_valid_problem) {
        sum += r;
    }
    out.aggregate_rho = sum / static_cast<double>(rho_per_valid_problem.size());
    if (out.aggregate_rho < 0.5) {
        out.winner = WinnerRole::teacher;
    } else if (out.aggregate_rho > 0.5) {
        out.winner = WinnerRole::student;
    } else {
        out.winner = WinnerRole::none;
    }
    return out;
}

std::pair<RatingState, RatingState> update_ratings(const RatingState& winner,
                                                   const RatingState& loser,
                                                   const RatingConfig& cfg) {
    double var_w = winner.sigma * winner.sigma + cfg.tau_dyn * cfg.tau_dyn;
    double var_l = loser.sigma * loser.sigma + cfg.tau_dyn * cfg.tau_dyn;
    const double c2 = 2.0 * cfg.beta * cfg.beta + var_w + var_l;
    const double c = std::sqrt(c2);
    const double t = (winner.mu - loser.mu) / c;
    const double v = v_win(t);
    const double w = v * (v + t);
    if (!std::isfinite(v) || !std::isfinite(w)) {
        throw std::runtime_error("update_ratings: non-finite TrueSkill intermediate");
    }

    RatingState w_out = winner;
    RatingState l_out = loser;
    w_out.mu = winner.mu + (var_w / c) * v;
    l_out.mu = loser.mu - (var_l / c) * v;
    w_out.sigma = std::sqrt(var_w * (1.0 - (var_w / c2) * w));
    l_out.sigma = std::sqrt(var_l * (1.0 - (var_l / c2) * w));
    if (!std::isfinite(w_out.mu) || !std::isfinite(l_out.mu) ||
        !std::isfinite(w_out.sigma) || !std::isfinite(l_out.sigma)) {
        throw std::runtime_error("update_ratings: non-finite rating after update");
    }
    w_out.games = winner.games + 1;
    l_out.games = loser.games + 1;
    return {w_out, l_out};
}

double predicted_win_prob(const RatingState& a, const RatingState& b, const RatingConfig& cfg) {
    const double denom = std::sqrt(2.0 * cfg.beta * cfg.beta + a.sigma * a.sigma + b.sigma * b.sigma);
    return normal_cdf((a.mu - b.mu) / denom);
}

size_t pfsp_sample(const RatingState& self, const std::vector<RatingState>& pool,
                   const RatingConfig& cfg, RngStream& rng) {
    if (pool.empty()) {
        throw std::invalid_argument("pfsp_sample: empty pool");
    }
    std::vector<double> weights(pool.size());
    double total = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
        const double p = predicted_win_prob(self, pool[i], cfg);
        weights[i] = p * (1.0 - p);
        total += weights[i];
    }
    if (total < 1e-12) {
        return static_cast<size_t>(rng.uniform_int(pool.size()));
    }
    const double draw = rng.uniform01() * total;
    double acc = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
        acc += weights[i];
        if (draw < acc) {
            return i;
        }
    }
    return pool.size() - 1;
}

std::vector<size_t> lcb_rank(const std::vector<RatingState>& pool, const RatingConfig& cfg) {
    std::vector<size_t> order(pool.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        const double lx = pool[x].mu - cfg.lcb_mult * pool[x].sigma;
        const double ly = pool[y].mu - cfg.lcb_mult * pool[y].sigma;
        return lx < ly;
    });
    return order;
}

}  // namespace plra::ratings
