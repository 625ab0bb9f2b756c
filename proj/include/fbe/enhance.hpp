#pragma once

#include "fbe/bank.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fbe {

// Per-dimension absolute deviations |z_ij - center_j| of a bank from its
// mean vector. Entries are nonnegative float32.
struct DeviationBank {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;

    const float* row(std::size_t i) const { return data.data() + i * dim; }
};

// Typical-feature region per dimension: [center_j - radius_j, center_j + radius_j].
// `lambda` is the retention percentile in [0, 100] the radii were fitted at.
//
// Binary file format (little-endian): magic "FBDY", version u32 = 1, dim u32,
// float64 lambda, dim float32 center, dim float32 radius.
struct DeviationBoundaries {
    std::vector<float> center;
    std::vector<float> radius;
    double lambda = 100.0;

    std::size_t dim() const { return center.size(); }
};

DeviationBank deviation_bank(const FeatureBank& bank, const FeatureVector& center);

// Linearly interpolated order statistic at fractional rank (lambda/100)*(rows-1),
// per column, ascending. lambda=0 gives the column minimum, 100 the maximum.
FeatureVector percentile_per_dim(const DeviationBank& dev, double lambda);

// center = mean_vector(bank); radius = per-column lambda-percentile of the
// absolute deviations from that center.
DeviationBoundaries fit_boundaries(const FeatureBank& bank, double lambda);

// Clamps every entry into its boundary interval. The clamp test compares the
// float32 deviation |z - center_j| against radius_j, matching exactly how the
// deviations were computed during fitting, so a bank clamped at lambda=100
// round-trips bit-for-bit. Labels are carried through unchanged.
FeatureBank clamp_bank(const FeatureBank& bank, const DeviationBoundaries& b);

// Fit-then-clamp in one step; returns the clamped bank and the fitted boundaries.
std::pair<FeatureBank, DeviationBoundaries> enhance(const FeatureBank& bank, double lambda);

DeviationBoundaries load_boundaries(const std::string& path);
void save_boundaries(const DeviationBoundaries& b, const std::string& path);

namespace detail {
// Shared interpolation kernel; partially sorts `values` in place.
double interpolated_percentile(std::vector<double>& values, double lambda);
}  // namespace detail

}  // namespace fbe
