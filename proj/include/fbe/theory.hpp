#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fbe::theory {

// Epsilon-skew-normal distribution (Mudholkar-Hutson form): scale sigma*(1+epsilon)
// left of mu with total mass (1+epsilon)/2, scale sigma*(1-epsilon) right of mu.
// Negative epsilon gives a positively skewed density.
struct EsnParams {
    double mu = 0.0;
    double sigma = 1.0;       // > 0
    double epsilon = 0.0;     // in [-1, 1]
};

std::vector<double> sample_esn(const EsnParams& p, std::size_t count, std::uint64_t seed);

// N(mu, sigma^2) draws clipped into [mu - clamp, mu + clamp].
std::vector<double> sample_clamped_normal(double mu, double sigma, double clamp,
                                          std::size_t count, std::uint64_t seed);

struct GridPoint {
    double sigma_out = 2.0;
    double epsilon = -0.5;
};

// Monte Carlo setup comparing the probability that an in-distribution test
// point lies closer to a training draw than an out-of-distribution test point
// does, with and without clamping the training draw.
//
// Per trial, in `dim` i.i.d. dimensions: training value ~ N(mu, sigma_in^2)
// and its copy clipped to [mu - clamp, mu + clamp]; ID test value
// ~ N(mu, sigma_in^2); OOD test value ~ ESN(mu, sigma_out^2, epsilon).
// Euclidean distances from the (clamped) training vector decide each trial.
struct SimConfig {
    double sigma_in = 1.0;
    double clamp = 1.96;      // absolute clip radius around the mean
    std::size_t dim = 64;
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    std::vector<GridPoint> grid;

    // epsilon in {-0.8, ..., -0.1} x sigma_out in {1.25, ..., 3.0}
    static std::vector<GridPoint> default_grid();
};

struct PairEstimate {
    double p_base = 0.0;  // fraction of trials with d_in < d_out, unclamped
    double p_fbe = 0.0;   // same with the clamped training draw
    double se = 0.0;      // binomial standard error of the paired difference
};

// allow_equal_sigma permits the sigma_out == sigma_in symmetry control run that
// is otherwise rejected by the sigma_out > sigma_in precondition.
PairEstimate prob_pair(const SimConfig& cfg, double sigma_out, double epsilon,
                       bool allow_equal_sigma = false);

struct SurfaceRow {
    double sigma_out = 0.0;
    double epsilon = 0.0;
    double p_base = 0.0;
    double p_fbe = 0.0;
    double delta = 0.0;
    double se = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

// prob_pair at every grid point. Each point draws from its own RNG stream
// derived from (seed, sigma_out, epsilon), so rows are reproducible
// independently of grid order or parallel schedule.
std::vector<SurfaceRow> sweep_surface(const SimConfig& cfg);

// CSV with header: sigma_out,epsilon,p_base,p_fbe,delta,stderr,trials,seed
std::string surface_csv(const std::vector<SurfaceRow>& rows);

}  // namespace fbe::theory
