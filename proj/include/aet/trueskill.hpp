#pragma once

// Closed-form two-player TrueSkill update, no draws. Standard published
// defaults: mu0 = 25, sigma0 = 25/3, beta = sigma0/2, tau = sigma0/100.
// The per-match update itself applies no tau dynamics so that the winner's
// mu strictly rises, the loser's strictly falls, and both sigmas strictly
// shrink for every valid pair.

#include <cmath>

#include "aet/common.hpp"

namespace aet {

struct TrueSkillConfig {
    double mu0 = 25.0;
    double sigma0 = 25.0 / 3.0;
    double beta = 25.0 / 6.0;    // sigma0 / 2
    double tau = 25.0 / 300.0;   // sigma0 / 100; dynamics, not used per-update
    double sigma_min = 1e-3;
    bool operator==(const TrueSkillConfig&) const = default;
};

struct Rating {
    double mu = 25.0;
    double sigma = 25.0 / 3.0;
    int games = 0;
    bool operator==(const Rating&) const = default;
};

inline Rating initial_rating(const TrueSkillConfig& cfg = {}) { return {cfg.mu0, cfg.sigma0, 0}; }

namespace detail {

inline double gauss_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014327; }
inline double gauss_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865476); }

// v(t) = pdf(t)/cdf(t); asymptotically -t for very negative t where the cdf
// underflows. Floored at 1e-6 so an update never vanishes below double
// resolution and the winner's mu stays strictly increasing.
inline double v_win(double t) {
    const double denom = gauss_cdf(t);
    const double v = denom < 1e-300 ? -t : gauss_pdf(t) / denom;
    return v < 1e-6 ? 1e-6 : v;
}

inline double w_win(double t) {
    const double v = v_win(t);
    double w = v * (v + t);
    if (w < 1e-12) w = 1e-12;  // keep the posterior sigma strictly shrinking
    if (w > 1.0) w = 1.0;
    return w;
}

}  // namespace detail

inline std::pair<Rating, Rating> trueskill_update(const Rating& winner, const Rating& loser,
                                                  const TrueSkillConfig& cfg = {}) {
    if (!(winner.sigma > 0.0) || !(loser.sigma > 0.0)) throw InputError("trueskill: sigma must be > 0");
    if (!std::isfinite(winner.mu) || !std::isfinite(loser.mu)) throw InputError("trueskill: non-finite mu");

    const double c2 = 2.0 * cfg.beta * cfg.beta + winner.sigma * winner.sigma + loser.sigma * loser.sigma;
    const double c = std::sqrt(c2);
    const double t = (winner.mu - loser.mu) / c;
    const double v = detail::v_win(t);
    const double w = detail::w_win(t);

    Rating nw = winner, nl = loser;
    nw.mu = winner.mu + winner.sigma * winner.sigma / c * v;
    nl.mu = loser.mu - loser.sigma * loser.sigma / c * v;
    nw.sigma = std::max(cfg.sigma_min,
                        std::sqrt(winner.sigma * winner.sigma * (1.0 - winner.sigma * winner.sigma / c2 * w)));
    nl.sigma = std::max(cfg.sigma_min,
                        std::sqrt(loser.sigma * loser.sigma * (1.0 - loser.sigma * loser.sigma / c2 * w)));
    nw.games += 1;
    nl.games += 1;
    return {nw, nl};
}

}  // namespace aet
