#pragma once

#include "fbe/bank.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fbe {

enum class ScoreKind { knn, mahalanobis, nnguide, energy, msp, maxlogit };

ScoreKind score_kind_from_string(const std::string& name);
std::string to_string(ScoreKind kind);
bool needs_head(ScoreKind kind);

struct ScoreSpec {
    ScoreKind kind = ScoreKind::knn;
    int k = 50;                // knn / nnguide
    double temperature = 1.0;  // energy
    std::optional<double> react_percentile;  // clip queries before scoring
};

// One score per query row; higher = more in-distribution.
struct ScoreBatch {
    std::vector<double> scores;
    ScoreSpec spec;
};

// Negative Euclidean distance to the k-th nearest L2-normalized bank row.
// Exact search, self-matches allowed.
ScoreBatch knn_score(const FeatureBank& bank, const FeatureBank& queries, int k);

// Negative minimum Mahalanobis distance to the per-class means under a pooled
// within-class covariance with trace shrinkage. Requires labels with at least
// two samples per class.
ScoreBatch mahalanobis_score(const FeatureBank& bank, const FeatureBank& queries);

// Mean of the k largest inner products between the normalized query and bank
// rows that were normalized and rescaled by a per-row confidence weight
// softplus(energy(head(row))).
ScoreBatch nnguide_score(const FeatureBank& bank, const LinearHead& head,
                         const FeatureBank& queries, int k);

// temperature * logsumexp(logits / temperature), computed stably.
ScoreBatch energy_score(const LinearHead& head, const FeatureBank& queries,
                        double temperature);

// Maximum softmax probability, in (0, 1].
ScoreBatch msp_score(const LinearHead& head, const FeatureBank& queries);

ScoreBatch maxlogit_score(const LinearHead& head, const FeatureBank& queries);

// Global activation-clipping threshold: the percentile (same interpolation
// rule as boundary fitting) over every entry of the bank.
double react_threshold(const FeatureBank& bank, double percentile);

// Returns `queries` with each entry replaced by min(entry, threshold).
FeatureBank react_clip(const FeatureBank& queries, const FeatureBank& bank,
                       double percentile);

// Dispatch on spec.kind; applies spec.react_percentile to the queries first
// when present. `head` may be null for kinds that do not use one.
ScoreBatch score_queries(const ScoreSpec& spec, const FeatureBank& bank,
                         const LinearHead* head, const FeatureBank& queries);

std::string score_csv(const ScoreBatch& batch);
std::string score_json(const ScoreBatch& batch);

// Canonical accumulation for distances and inner products: eight independent
// partial sums over strided lanes, combined in a fixed order. Every scoring
// path (and any reference reimplementation that wants bit-equal results)
// follows this order.
double squared_distance(const float* a, const float* b, std::size_t dim);
double dot_product(const float* a, const float* b, std::size_t dim);

namespace detail {
// nnguide with externally supplied per-row confidences (used by tests).
ScoreBatch nnguide_with_confidence(const FeatureBank& bank,
                                   const std::vector<double>& confidence,
                                   const FeatureBank& queries, int k);
std::vector<double> logits_for(const LinearHead& head, const float* feature);
double logsumexp(const std::vector<double>& v);
}  // namespace detail

}  // namespace fbe
