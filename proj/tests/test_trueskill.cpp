#include <doctest.h>

#include <cmath>
#include <tuple>

#include "aet/rng.hpp"
#include "aet/trueskill.hpp"

using namespace aet;

TEST_CASE("trueskill: fresh equal ratings split around the prior mean") {
    const TrueSkillConfig cfg;
    const Rating a = initial_rating(cfg), b = initial_rating(cfg);
    auto [w, l] = trueskill_update(a, b, cfg);
    CHECK(w.mu > 25.0);
    CHECK(l.mu < 25.0);
    CHECK(w.sigma < a.sigma);
    CHECK(l.sigma < b.sigma);
    CHECK(w.games == 1);
    // symmetric prior: symmetric posteriors
    CHECK(w.mu - 25.0 == doctest::Approx(25.0 - l.mu).epsilon(1e-12));
}

TEST_CASE("trueskill: repeated wins grow the gap with diminishing increments") {
    const TrueSkillConfig cfg;
    Rating a = initial_rating(cfg), b = initial_rating(cfg);
    double prev_gap = 0.0, prev_increment = 1e18;
    for (int game = 0; game < 20; ++game) {
        std::tie(a, b) = trueskill_update(a, b, cfg);
        const double gap = a.mu - b.mu;
        CHECK(gap > prev_gap);
        const double increment = gap - prev_gap;
        CHECK(increment < prev_increment + 1e-9);
        prev_increment = increment;
        prev_gap = gap;
    }
}

TEST_CASE("trueskill: mu sum is preserved exactly when sigmas are equal") {
    const TrueSkillConfig cfg;
    SUBCASE("equal sigmas") {
        Rating a{27.0, 4.0, 0}, b{22.0, 4.0, 0};
        auto [w, l] = trueskill_update(a, b, cfg);
        CHECK(w.mu + l.mu == doctest::Approx(a.mu + b.mu).epsilon(1e-12));
    }
    SUBCASE("unequal sigmas shift the sum") {
        Rating a{27.0, 6.0, 0}, b{22.0, 2.0, 0};
        auto [w, l] = trueskill_update(a, b, cfg);
        CHECK(std::abs(w.mu + l.mu - (a.mu + b.mu)) > 1e-6);
    }
}

TEST_CASE("trueskill: winner up, loser down, sigmas down over randomized pairs") {
    const TrueSkillConfig cfg;
    Rng rng(77);
    for (int i = 0; i < 10000; ++i) {
        Rating w{rng.uniform_range(0.0, 50.0), rng.uniform_range(0.5, cfg.sigma0), 0};
        Rating l{rng.uniform_range(0.0, 50.0), rng.uniform_range(0.5, cfg.sigma0), 0};
        auto [nw, nl] = trueskill_update(w, l, cfg);
        REQUIRE(nw.mu > w.mu);
        REQUIRE(nl.mu < l.mu);
        REQUIRE(nw.sigma < w.sigma);
        REQUIRE(nl.sigma < l.sigma);
    }
}

TEST_CASE("trueskill: invalid ratings rejected") {
    const TrueSkillConfig cfg;
    CHECK_THROWS_AS(trueskill_update({25.0, 0.0, 0}, {25.0, 8.0, 0}, cfg), InputError);
    CHECK_THROWS_AS(trueskill_update({std::nan(""), 8.0, 0}, {25.0, 8.0, 0}, cfg), InputError);
}
