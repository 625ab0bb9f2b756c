#include "fbe/synth.hpp"

#include "fbe/rng.hpp"
#include "linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbe::synth {

namespace {

enum StreamId : std::uint64_t {
    kMeansStream = 1,
    kTrainStream = 2,
    kIdTestStream = 3,
    kNearStream = 4,
    kFarStream = 5,
};

void check_config(const SynthConfig& cfg) {
    if (cfg.classes < 2) throw std::invalid_argument("classes must be >= 2");
    if (cfg.dim < 2) throw std::invalid_argument("dim must be >= 2");
    if (cfg.per_class < 10) throw std::invalid_argument("per_class must be >= 10");
    if (!(cfg.class_spread > 0.0)) throw std::invalid_argument("class_spread must be positive");
    if (!(cfg.near_shift > 0.0)) throw std::invalid_argument("near_shift must be positive");
    if (!(cfg.far_shift > cfg.near_shift))
        throw std::invalid_argument("far_shift " + std::to_string(cfg.far_shift) +
                                    " must exceed near_shift " + std::to_string(cfg.near_shift));
    if (!(cfg.heavy_tail_frac >= 0.0 && cfg.heavy_tail_frac < 1.0))
        throw std::invalid_argument("heavy_tail_frac must be in [0, 1)");
    if (cfg.queries_per_class < 1) throw std::invalid_argument("queries_per_class must be >= 1");
}

// Class centers drawn at a scale that keeps them separated without dwarfing
// the within-class noise: the per-dimension deviations of a heavy-tailed row
// must be able to overshoot the class-offset deviations, as extreme features
// do around a real feature bank's center. Resampled as a set in the unlikely
// event two centers land closer than 6 spreads.
std::vector<double> sample_class_means(const SynthConfig& cfg) {
    RandomStream rng = RandomStream::substream(cfg.seed, kMeansStream);
    const auto classes = static_cast<std::size_t>(cfg.classes);
    const auto dim = static_cast<std::size_t>(cfg.dim);
    double scale = std::max(2.0, 9.0 / std::sqrt(2.0 * double(dim))) * cfg.class_spread;
    const double min_sep = 6.0 * cfg.class_spread;
    std::vector<double> means(classes * dim);
    for (int attempt = 0; attempt < 400; ++attempt) {
        for (auto& v : means) v = scale * rng.normal();
        bool ok = true;
        for (std::size_t a = 0; a < classes && ok; ++a) {
            for (std::size_t b = a + 1; b < classes && ok; ++b) {
                double sq = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double d = means[a * dim + j] - means[b * dim + j];
                    sq += d * d;
                }
                ok = sq >= min_sep * min_sep;
            }
        }
        if (ok) return means;
        if (attempt % 20 == 19) scale *= 1.2;  // crowded layouts get more room
    }
    throw std::runtime_error("could not place well-separated class means; "
                             "increase dim or reduce classes");
}

void draw_cluster_row(RandomStream& rng, const double* center, double spread, float* out,
                      std::size_t dim) {
    for (std::size_t j = 0; j < dim; ++j)
        out[j] = static_cast<float>(center[j] + spread * rng.normal());
}

// Extreme rows carry the 4x inflated deviation on a sparse subset of
// dimensions, the way real feature outliers spike in a few channels. An
// all-dimension inflation would only grow the row's norm, which
// L2-normalized scoring ignores.
void draw_extreme_row(RandomStream& rng, const double* center, double spread, float* out,
                      std::size_t dim) {
    const std::size_t wild = std::max<std::size_t>(1, dim / 8);
    // Choose `wild` distinct dimensions via a partial Fisher-Yates pass.
    std::vector<std::size_t> dims(dim);
    for (std::size_t j = 0; j < dim; ++j) dims[j] = j;
    for (std::size_t j = 0; j < wild; ++j)
        std::swap(dims[j], dims[j + rng.uniform_below(dim - j)]);
    for (std::size_t j = 0; j < dim; ++j)
        out[j] = static_cast<float>(center[j] + spread * rng.normal());
    for (std::size_t j = 0; j < wild; ++j) {
        const std::size_t d = dims[j];
        out[d] = static_cast<float>(center[d] + 4.0 * spread * rng.normal());
    }
}

// Random direction on the unit sphere.
std::vector<double> unit_direction(RandomStream& rng, std::size_t dim) {
    std::vector<double> u(dim);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& v : u) {
            v = rng.normal();
            sq += v * v;
        }
    } while (sq == 0.0);
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& v : u) v *= inv;
    return u;
}

// Ridge least squares on one-hot targets over the bias-augmented features.
LinearHead fit_linear_head(const FeatureBank& train, std::size_t classes) {
    const std::size_t m = train.dim;
    const std::size_t a = m + 1;  // augmented with a constant column
    std::vector<double> gram(a * a, 0.0);
    std::vector<double> rhs(a * classes, 0.0);
    std::vector<double> x(a);
    for (std::size_t i = 0; i < train.rows; ++i) {
        const float* r = train.row(i);
        for (std::size_t j = 0; j < m; ++j) x[j] = r[j];
        x[m] = 1.0;
        for (std::size_t j = 0; j < a; ++j)
            for (std::size_t t = 0; t <= j; ++t) gram[j * a + t] += x[j] * x[t];
        const auto c = static_cast<std::size_t>((*train.labels)[i]);
        for (std::size_t j = 0; j < a; ++j) rhs[j * classes + c] += x[j];
    }
    for (std::size_t j = 0; j < a; ++j) {
        for (std::size_t t = 0; t < j; ++t) gram[t * a + j] = gram[j * a + t];
        gram[j * a + j] += 1e-6;
    }
    linalg::cholesky(gram, a);
    LinearHead head;
    head.classes = classes;
    head.dim = m;
    head.weights.resize(classes * m);
    head.bias.resize(classes);
    std::vector<double> col(a);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < a; ++j) col[j] = rhs[j * classes + c];
        linalg::solve_lower(gram, a, col);
        linalg::solve_upper_t(gram, a, col);
        for (std::size_t j = 0; j < m; ++j)
            head.weights[c * m + j] = static_cast<float>(col[j]);
        head.bias[c] = static_cast<float>(col[m]);
    }
    return head;
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
    check_config(cfg);
    const auto classes = static_cast<std::size_t>(cfg.classes);
    const auto dim = static_cast<std::size_t>(cfg.dim);
    const auto per_class = static_cast<std::size_t>(cfg.per_class);
    const auto per_query = static_cast<std::size_t>(cfg.queries_per_class);
    const std::vector<double> means = sample_class_means(cfg);

    SynthDataset out;

    // Training bank, grouped by class; the first heavy_count rows of each
    // class are the inflated-variance extremes.
    {
        RandomStream rng = RandomStream::substream(cfg.seed, kTrainStream);
        const auto heavy_count =
            static_cast<std::size_t>(std::llround(cfg.heavy_tail_frac * double(per_class)));
        out.train.rows = classes * per_class;
        out.train.dim = dim;
        out.train.data.resize(out.train.rows * dim);
        std::vector<std::int32_t> labels(out.train.rows);
        std::size_t row = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t i = 0; i < per_class; ++i, ++row) {
                if (i < heavy_count)
                    draw_extreme_row(rng, &means[c * dim], cfg.class_spread, out.train.row(row), dim);
                else
                    draw_cluster_row(rng, &means[c * dim], cfg.class_spread, out.train.row(row), dim);
                labels[row] = static_cast<std::int32_t>(c);
            }
        }
        out.train.labels = std::move(labels);
    }

    // ID test queries: typical draws only.
    {
        RandomStream rng = RandomStream::substream(cfg.seed, kIdTestStream);
        out.id_test.rows = classes * per_query;
        out.id_test.dim = dim;
        out.id_test.data.resize(out.id_test.rows * dim);
        std::size_t row = 0;
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t i = 0; i < per_query; ++i, ++row)
                draw_cluster_row(rng, &means[c * dim], cfg.class_spread, out.id_test.row(row), dim);
    }

    // Near-OOD: each sample sits near_shift spreads from a class mean, offset
    // toward an extreme-feature direction (a fresh draw from the same sparse
    // spike distribution the heavy training rows use). Semantic shifts live
    // at the outskirts of the training distribution, which is exactly what
    // makes them hard for distance scoring; offsets along fully random
    // directions would miss the extreme-feature region entirely. The offset
    // is taken tangentially (orthogonal to the class-mean radius) so it
    // survives L2 normalization. Drawing the directions from this stream
    // rather than reusing bank rows keeps the four output streams disjoint.
    {
        RandomStream rng = RandomStream::substream(cfg.seed, kNearStream);
        out.near_ood.rows = classes * per_query;
        out.near_ood.dim = dim;
        out.near_ood.data.resize(out.near_ood.rows * dim);
        const std::vector<double> zero(dim, 0.0);
        std::vector<float> spike(dim);
        std::vector<double> dir(dim), center(dim);
        std::size_t row = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double* mean_c = &means[c * dim];
            double mean_sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) mean_sq += mean_c[j] * mean_c[j];
            for (std::size_t i = 0; i < per_query; ++i, ++row) {
                draw_extreme_row(rng, zero.data(), cfg.class_spread, spike.data(), dim);
                double along = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    dir[j] = spike[j];
                    along += dir[j] * mean_c[j];
                }
                double tang_sq = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    dir[j] -= along / mean_sq * mean_c[j];
                    tang_sq += dir[j] * dir[j];
                }
                if (tang_sq == 0.0) {
                    dir = unit_direction(rng, dim);
                    tang_sq = 1.0;
                }
                const double inv = 1.0 / std::sqrt(tang_sq);
                for (std::size_t j = 0; j < dim; ++j)
                    center[j] = mean_c[j] + cfg.near_shift * cfg.class_spread * dir[j] * inv;
                draw_cluster_row(rng, center.data(), cfg.class_spread, out.near_ood.row(row), dim);
            }
        }
    }

    // Far-OOD: one cluster far from the class layout, with doubled spread.
    {
        RandomStream rng = RandomStream::substream(cfg.seed, kFarStream);
        out.far_ood.rows = classes * per_query;
        out.far_ood.dim = dim;
        out.far_ood.data.resize(out.far_ood.rows * dim);
        std::vector<double> global(dim, 0.0);
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t j = 0; j < dim; ++j) global[j] += means[c * dim + j] / double(classes);
        const std::vector<double> dir = unit_direction(rng, dim);
        std::vector<double> center(dim);
        // The offset is measured in spreads from the outermost class mean so
        // far_shift stays comparable with near_shift.
        double max_class_dist = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            double sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = means[c * dim + j] - global[j];
                sq += d * d;
            }
            max_class_dist = std::max(max_class_dist, std::sqrt(sq));
        }
        for (std::size_t j = 0; j < dim; ++j)
            center[j] = global[j] + (max_class_dist + cfg.far_shift * cfg.class_spread) * dir[j];
        for (std::size_t i = 0; i < out.far_ood.rows; ++i)
            draw_cluster_row(rng, center.data(), 2.0 * cfg.class_spread, out.far_ood.row(i), dim);
    }

    out.head = fit_linear_head(out.train, classes);
    validate(out.train);
    validate(out.id_test);
    validate(out.near_ood);
    validate(out.far_ood);
    validate(out.head);
    return out;
}

}  // namespace fbe::synth
