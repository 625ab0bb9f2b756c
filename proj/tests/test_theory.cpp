#include "doctest.h"

#include "fbe/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace fbe::theory;

TEST_CASE("esn sampling left mass and moments") {
    const std::size_t count = 200000;
    const double binom_se = [](double p, double n) { return std::sqrt(p * (1 - p) / n); }(0.25, count);

    SUBCASE("epsilon = 0 reduces to a plain Gaussian") {
        const auto draws = sample_esn({1.5, 2.0, 0.0}, count, 42);
        double mean = 0.0;
        for (double v : draws) mean += v;
        mean /= double(count);
        CHECK(std::fabs(mean - 1.5) < 4.0 * 2.0 / std::sqrt(double(count)));
        double var = 0.0;
        for (double v : draws) var += (v - mean) * (v - mean);
        var /= double(count - 1);
        // se(sample variance) ~ sigma^2 * sqrt(2/(n-1))
        CHECK(std::fabs(var - 4.0) < 5.0 * 4.0 * std::sqrt(2.0 / double(count - 1)));
        std::size_t below = 0;
        for (double v : draws)
            if (v < 1.5) ++below;
        CHECK(std::fabs(double(below) / double(count) - 0.5) < 4.0 * 0.5 / std::sqrt(double(count)));
    }
    SUBCASE("left mass equals (1+epsilon)/2") {
        const auto draws = sample_esn({0.0, 1.0, -0.5}, count, 7);
        std::size_t below = 0;
        for (double v : draws)
            if (v < 0.0) ++below;
        CHECK(std::fabs(double(below) / double(count) - 0.25) < 5.0 * binom_se);
    }
    SUBCASE("epsilon = -1 puts every draw at or above the mode") {
        const auto draws = sample_esn({2.0, 1.0, -1.0}, 10000, 3);
        CHECK(std::all_of(draws.begin(), draws.end(), [](double v) { return v >= 2.0; }));
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(sample_esn({0.0, 0.0, 0.0}, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(sample_esn({0.0, 1.0, 1.5}, 1, 1), std::invalid_argument);
    }
}

TEST_CASE("clamped normal sampling") {
    SUBCASE("infinite clamp leaves draws untouched for the same seed") {
        const auto clipped =
            sample_clamped_normal(0.0, 1.0, std::numeric_limits<double>::infinity(), 5000, 11);
        const auto plain = sample_clamped_normal(0.0, 1.0, 1e300, 5000, 11);
        CHECK(clipped == plain);
    }
    SUBCASE("tiny clamp collapses to the mean") {
        const auto draws = sample_clamped_normal(3.0, 1.0, 1e-9, 1000, 5);
        for (double v : draws) CHECK(std::fabs(v - 3.0) <= 2e-9);
    }
    SUBCASE("support and clipped fraction at 1.96 sigma") {
        const std::size_t count = 200000;
        const auto draws = sample_clamped_normal(0.0, 1.0, 1.96, count, 17);
        std::size_t at_edge = 0;
        for (double v : draws) {
            CHECK(v >= -1.96);
            CHECK(v <= 1.96);
            if (v == -1.96 || v == 1.96) ++at_edge;
        }
        const double expected = 0.05;  // two-sided N(0,1) tail mass beyond 1.96
        const double se = std::sqrt(expected * (1 - expected) / double(count));
        CHECK(std::fabs(double(at_edge) / double(count) - expected) < 5.0 * se);
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(sample_clamped_normal(0.0, 1.0, 0.0, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(sample_clamped_normal(0.0, -1.0, 1.0, 1, 1), std::invalid_argument);
    }
}

TEST_CASE("prob_pair degenerate and control cases") {
    SimConfig cfg;
    cfg.dim = 4;
    cfg.seed = 99;

    SUBCASE("single trial yields a 0/1 estimate with zero stderr") {
        cfg.trials = 1;
        const PairEstimate est = prob_pair(cfg, 2.0, -0.5);
        CHECK((est.p_base == 0.0 || est.p_base == 1.0));
        CHECK((est.p_fbe == 0.0 || est.p_fbe == 1.0));
        CHECK(est.se == 0.0);
    }
    SUBCASE("symmetry control: equal sigmas, no skew, clamp disabled") {
        cfg.trials = 100000;
        cfg.clamp = std::numeric_limits<double>::infinity();
        const PairEstimate est = prob_pair(cfg, 1.0, 0.0, true);
        const double se = std::sqrt(0.25 / double(cfg.trials));
        CHECK(std::fabs(est.p_base - 0.5) < 5.0 * se);
        CHECK(est.p_fbe == est.p_base);  // infinite clamp: identical draws
    }
    SUBCASE("equal sigma rejected unless flagged") {
        CHECK_THROWS_AS(prob_pair(cfg, 1.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("clamping raises the win probability in the scalar model") {
    // At one dimension the two distances overlap heavily, so the clamping
    // effect is measurable; high dimensions drive both probabilities to 1
    // and the difference below Monte Carlo resolution.
    SimConfig cfg;
    cfg.dim = 1;
    cfg.trials = 200000;
    cfg.seed = 2024;
    const PairEstimate est = prob_pair(cfg, 2.0, -0.5);
    CHECK(est.p_fbe - est.p_base > 3.0 * est.se);
}

TEST_CASE("sweep surface is deterministic and ordered like the grid") {
    SimConfig cfg;
    cfg.dim = 2;
    cfg.trials = 2000;
    cfg.seed = 5;
    cfg.grid = {{2.0, -0.5}, {1.5, -0.2}};
    const auto rows = sweep_surface(cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].sigma_out == 2.0);
    CHECK(rows[1].sigma_out == 1.5);

    // Single point composes with prob_pair.
    const PairEstimate direct = prob_pair(cfg, 2.0, -0.5);
    CHECK(rows[0].p_base == direct.p_base);
    CHECK(rows[0].p_fbe == direct.p_fbe);

    // Same config, same bytes.
    const auto again = sweep_surface(cfg);
    CHECK(surface_csv(again) == surface_csv(rows));

    // Grid must be nonempty and valid.
    SimConfig bad = cfg;
    bad.grid.clear();
    CHECK_THROWS_AS(sweep_surface(bad), std::invalid_argument);
    bad.grid = {{0.5, -0.2}};
    CHECK_THROWS_AS(sweep_surface(bad), std::invalid_argument);
}

TEST_CASE("surface csv format") {
    SurfaceRow row{2.0, -0.5, 0.5, 0.625, 0.125, 0.01, 100, 7};
    const std::string csv = surface_csv({row});
    CHECK(csv ==
          "sigma_out,epsilon,p_base,p_fbe,delta,stderr,trials,seed\n"
          "2,-0.5,0.5,0.625,0.125,0.01,100,7\n");
}
