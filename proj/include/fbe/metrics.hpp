#pragma once

#include "fbe/bank.hpp"
#include "fbe/scores.hpp"

#include <cstdint>
#include <vector>

namespace fbe {

struct EvalSet {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
};

// Probability that a random ID score exceeds a random OOD score, ties counted
// half (Mann-Whitney form). Computed via a sorted rank pass with midranks.
double auroc(const EvalSet& e);

// Fraction of OOD scores at or above the largest threshold that still accepts
// at least `tpr` of the ID scores (decision rule: score >= threshold => ID).
double fpr_at_tpr(const EvalSet& e, double tpr);

struct EvalReport {
    double auroc = 0.0;
    double fpr95 = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    std::int64_t wall_ms = 0;
};

// Scores both query sets with `spec` against `bank` and evaluates AUROC and
// FPR at 95% TPR. `head` may be null for score kinds that do not use one.
EvalReport evaluate(const ScoreSpec& spec, const FeatureBank& bank,
                    const LinearHead* head, const FeatureBank& id_queries,
                    const FeatureBank& ood_queries);

}  // namespace fbe
