#include "fbe/enhance.hpp"

#include "fbe/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fbe {

namespace detail {

double interpolated_percentile(std::vector<double>& values, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 100.0))
        throw std::invalid_argument("percentile " + std::to_string(lambda) + " outside [0, 100]");
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    const std::size_t n = values.size();
    const double rank = (lambda / 100.0) * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= n) {
        // lambda == 100 (or n == 1): the column maximum.
        return *std::max_element(values.begin(), values.end());
    }
    const double frac = rank - static_cast<double>(lo);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (frac == 0.0) return a;
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1,
                                       values.end());
    return a + frac * (b - a);
}

}  // namespace detail

DeviationBank deviation_bank(const FeatureBank& bank, const FeatureVector& center) {
    if (center.size() != bank.dim)
        throw std::invalid_argument("center has dimension " + std::to_string(center.size()) +
                                    ", bank has " + std::to_string(bank.dim));
    DeviationBank dev;
    dev.rows = bank.rows;
    dev.dim = bank.dim;
    dev.data.resize(bank.data.size());
    for (std::size_t i = 0; i < bank.rows; ++i) {
        const float* src = bank.row(i);
        float* dst = dev.data.data() + i * dev.dim;
        for (std::size_t j = 0; j < bank.dim; ++j) dst[j] = std::fabs(src[j] - center[j]);
    }
    return dev;
}

namespace {

// Column-blocked percentile pass shared by percentile_per_dim and fit_boundaries.
// deviation_of(i, j) must return the float32 deviation entry.
template <typename EntryFn>
FeatureVector column_percentiles(std::size_t rows, std::size_t dim, double lambda,
                                 EntryFn&& deviation_of) {
    if (!(lambda >= 0.0 && lambda <= 100.0))
        throw std::invalid_argument("lambda " + std::to_string(lambda) + " outside [0, 100]");
    FeatureVector result(dim);
    // Keep roughly 64 MB of column buffers resident per pass.
    const std::size_t block = std::clamp<std::size_t>((64u << 20) / (rows * 8 + 1), 1, dim);
    std::vector<std::vector<double>> columns(block, std::vector<double>(rows));
    for (std::size_t j0 = 0; j0 < dim; j0 += block) {
        const std::size_t width = std::min(block, dim - j0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < width; ++j)
                columns[j][i] = deviation_of(i, j0 + j);
        parallel_blocks(width, [&](std::size_t begin, std::size_t end) {
            for (std::size_t j = begin; j < end; ++j)
                result[j0 + j] =
                    static_cast<float>(detail::interpolated_percentile(columns[j], lambda));
        });
    }
    return result;
}

}  // namespace

FeatureVector percentile_per_dim(const DeviationBank& dev, double lambda) {
    if (dev.rows == 0) throw std::invalid_argument("deviation bank has no rows");
    return column_percentiles(dev.rows, dev.dim, lambda,
                              [&](std::size_t i, std::size_t j) { return dev.data[i * dev.dim + j]; });
}

DeviationBoundaries fit_boundaries(const FeatureBank& bank, double lambda) {
    DeviationBoundaries b;
    b.lambda = lambda;
    b.center = mean_vector(bank);
    // Deviations are computed on the fly instead of materializing the full
    // deviation bank; the float32 values are identical to deviation_bank's.
    b.radius = column_percentiles(bank.rows, bank.dim, lambda, [&](std::size_t i, std::size_t j) {
        return std::fabs(bank.data[i * bank.dim + j] - b.center[j]);
    });
    return b;
}

FeatureBank clamp_bank(const FeatureBank& bank, const DeviationBoundaries& b) {
    if (b.dim() != bank.dim)
        throw std::invalid_argument("boundaries have dimension " + std::to_string(b.dim()) +
                                    ", bank has " + std::to_string(bank.dim));
    FeatureBank out = bank;
    parallel_blocks(out.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            float* r = out.row(i);
            for (std::size_t j = 0; j < out.dim; ++j) {
                const float dev = std::fabs(r[j] - b.center[j]);
                if (dev > b.radius[j])
                    r[j] = r[j] > b.center[j] ? b.center[j] + b.radius[j]
                                              : b.center[j] - b.radius[j];
            }
        }
    });
    return out;
}

std::pair<FeatureBank, DeviationBoundaries> enhance(const FeatureBank& bank, double lambda) {
    DeviationBoundaries b = fit_boundaries(bank, lambda);
    return {clamp_bank(bank, b), std::move(b)};
}

}  // namespace fbe
