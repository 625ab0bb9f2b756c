#include "fbe/theory.hpp"

#include "fbe/parallel.hpp"
#include "fbe/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fbe::theory {

namespace {

void check_esn(const EsnParams& p) {
    if (!(p.sigma > 0.0)) throw std::invalid_argument("esn sigma must be positive");
    if (!(p.epsilon >= -1.0 && p.epsilon <= 1.0))
        throw std::invalid_argument("esn epsilon must be in [-1, 1]");
}

double esn_draw(RandomStream& rng, double mu, double sigma, double epsilon) {
    const double u = rng.uniform01();
    const double z = std::fabs(rng.normal());
    // Mass (1+epsilon)/2 on the left branch with scale sigma*(1+epsilon);
    // the remainder on the right with scale sigma*(1-epsilon).
    if (u < 0.5 * (1.0 + epsilon)) return mu - sigma * (1.0 + epsilon) * z;
    return mu + sigma * (1.0 - epsilon) * z;
}

std::uint64_t point_stream_id(double sigma_out, double epsilon) {
    return mix64(std::bit_cast<std::uint64_t>(sigma_out)) ^
           mix64(~std::bit_cast<std::uint64_t>(epsilon));
}

}  // namespace

std::vector<double> sample_esn(const EsnParams& p, std::size_t count, std::uint64_t seed) {
    check_esn(p);
    RandomStream rng(seed);
    std::vector<double> out(count);
    for (auto& v : out) v = esn_draw(rng, p.mu, p.sigma, p.epsilon);
    return out;
}

std::vector<double> sample_clamped_normal(double mu, double sigma, double clamp,
                                          std::size_t count, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(clamp > 0.0)) throw std::invalid_argument("clamp must be positive");
    RandomStream rng(seed);
    std::vector<double> out(count);
    for (auto& v : out) v = std::clamp(rng.normal(mu, sigma), mu - clamp, mu + clamp);
    return out;
}

std::vector<GridPoint> SimConfig::default_grid() {
    std::vector<GridPoint> grid;
    for (int e = 8; e >= 1; --e)
        for (int s = 0; s < 8; ++s)
            grid.push_back({1.25 + 0.25 * s, -0.1 * e});
    return grid;
}

PairEstimate prob_pair(const SimConfig& cfg, double sigma_out, double epsilon,
                       bool allow_equal_sigma) {
    if (!(cfg.sigma_in > 0.0)) throw std::invalid_argument("sigma_in must be positive");
    if (!(cfg.clamp > 0.0)) throw std::invalid_argument("clamp must be positive");
    if (cfg.dim == 0 || cfg.trials == 0) throw std::invalid_argument("dim and trials must be >= 1");
    check_esn(EsnParams{0.0, sigma_out, epsilon});
    const bool sigma_ok = allow_equal_sigma ? sigma_out >= cfg.sigma_in : sigma_out > cfg.sigma_in;
    if (!sigma_ok)
        throw std::invalid_argument("grid point sigma_out " + std::to_string(sigma_out) +
                                    " must exceed sigma_in " + std::to_string(cfg.sigma_in));

    RandomStream rng = RandomStream::substream(cfg.seed, point_stream_id(sigma_out, epsilon));
    const double mu = 0.0;
    const double lo = mu - cfg.clamp;
    const double hi = mu + cfg.clamp;
    std::size_t base_wins = 0;
    std::size_t fbe_wins = 0;
    std::size_t discordant = 0;  // trials the clamped copy decides differently
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        double d_in = 0.0, d_out = 0.0, d_in_c = 0.0, d_out_c = 0.0;
        for (std::size_t j = 0; j < cfg.dim; ++j) {
            const double train = rng.normal(mu, cfg.sigma_in);
            const double train_c = std::clamp(train, lo, hi);
            const double z_in = rng.normal(mu, cfg.sigma_in);
            const double z_out = esn_draw(rng, mu, sigma_out, epsilon);
            d_in += (train - z_in) * (train - z_in);
            d_out += (train - z_out) * (train - z_out);
            d_in_c += (train_c - z_in) * (train_c - z_in);
            d_out_c += (train_c - z_out) * (train_c - z_out);
        }
        // Comparing squared Euclidean distances decides the same event.
        const bool base_win = d_in < d_out;
        const bool fbe_win = d_in_c < d_out_c;
        base_wins += base_win;
        fbe_wins += fbe_win;
        discordant += base_win != fbe_win;
    }
    PairEstimate est;
    const auto trials = static_cast<double>(cfg.trials);
    est.p_base = static_cast<double>(base_wins) / trials;
    est.p_fbe = static_cast<double>(fbe_wins) / trials;
    // The two indicators share the training draw, so the delta's sampling
    // error comes from the discordant trials alone: the per-trial difference
    // is -1/0/+1 and Var = P(discordant) - delta^2, the binomial form.
    const double delta = est.p_fbe - est.p_base;
    est.se = std::sqrt(
        std::max(0.0, static_cast<double>(discordant) / trials - delta * delta) / trials);
    return est;
}

std::vector<SurfaceRow> sweep_surface(const SimConfig& cfg) {
    if (cfg.grid.empty()) throw std::invalid_argument("simulation grid is empty");
    for (const GridPoint& g : cfg.grid) {
        if (!(g.sigma_out > cfg.sigma_in))
            throw std::invalid_argument("grid point sigma_out " + std::to_string(g.sigma_out) +
                                        " must exceed sigma_in " + std::to_string(cfg.sigma_in));
    }
    std::vector<SurfaceRow> rows(cfg.grid.size());
    parallel_blocks(cfg.grid.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const GridPoint& g = cfg.grid[i];
            const PairEstimate est = prob_pair(cfg, g.sigma_out, g.epsilon);
            rows[i] = SurfaceRow{g.sigma_out, g.epsilon,   est.p_base, est.p_fbe,
                                 est.p_fbe - est.p_base,   est.se,     cfg.trials, cfg.seed};
        }
    });
    return rows;
}

std::string surface_csv(const std::vector<SurfaceRow>& rows) {
    std::string out = "sigma_out,epsilon,p_base,p_fbe,delta,stderr,trials,seed\n";
    char line[256];
    for (const SurfaceRow& r : rows) {
        std::snprintf(line, sizeof line, "%.6g,%.6g,%.9g,%.9g,%.9g,%.9g,%zu,%llu\n", r.sigma_out,
                      r.epsilon, r.p_base, r.p_fbe, r.delta, r.se, r.trials,
                      static_cast<unsigned long long>(r.seed));
        out += line;
    }
    return out;
}

}  // namespace fbe::theory
