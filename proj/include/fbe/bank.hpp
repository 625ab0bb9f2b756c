#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbe {

using FeatureVector = std::vector<float>;

// Row-major matrix of deep features, one sample per row, float32 storage.
// Immutable by convention after construction; all operations return copies.
//
// Binary file format (little-endian):
//   magic "FBNK", version u32 = 1, rows u64, dim u32, labels-flag u8,
//   3 reserved zero bytes, rows*dim float32 row-major,
//   then rows int32 labels if the flag is set.
struct FeatureBank {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<float> data;  // rows * dim
    std::optional<std::vector<std::int32_t>> labels;

    float* row(std::size_t i) { return data.data() + i * dim; }
    const float* row(std::size_t i) const { return data.data() + i * dim; }
    float at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }

    // Number of classes implied by the labels (max label + 1), 0 when unlabeled.
    std::size_t class_count() const;
};

// Linear classification head mapping a feature vector to class logits.
//
// Binary file format (little-endian):
//   magic "FHED", version u32 = 1, classes u32, dim u32,
//   classes*dim float32 row-major weights, classes float32 biases.
struct LinearHead {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<float> weights;  // classes * dim
    std::vector<float> bias;     // classes

    const float* weight_row(std::size_t c) const { return weights.data() + c * dim; }
};

enum class BankFormat { binary, csv };

// Throws std::runtime_error naming the offending entry on non-finite values,
// size mismatches, or negative labels.
void validate(const FeatureBank& bank);
void validate(const LinearHead& head);

FeatureBank make_bank(std::size_t rows, std::size_t dim, std::vector<float> data,
                      std::optional<std::vector<std::int32_t>> labels = std::nullopt);

// csv_labels_column: treat the final CSV column as integer class labels.
// Ignored for the binary format (the header's flag decides).
FeatureBank load_bank(const std::string& path, BankFormat format,
                      bool csv_labels_column = false);
void save_bank(const FeatureBank& bank, const std::string& path);

LinearHead load_head(const std::string& path);
void save_head(const LinearHead& head, const std::string& path);

// Per-column arithmetic mean, accumulated in double, stored as float32.
FeatureVector mean_vector(const FeatureBank& bank);

// Scales every row to unit Euclidean norm. Zero rows pass through unchanged.
FeatureBank l2_normalize_rows(const FeatureBank& bank);

// FNV-1a hash of a file's bytes, as a hex string; used to fingerprint report inputs.
std::string file_content_hash(const std::string& path);

}  // namespace fbe
