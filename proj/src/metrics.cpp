#include "fbe/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace fbe {

namespace {

void check_eval_set(const EvalSet& e) {
    if (e.id_scores.empty() || e.ood_scores.empty())
        throw std::invalid_argument("both score sets must be nonempty");
    for (double s : e.id_scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite ID score");
    for (double s : e.ood_scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite OOD score");
}

}  // namespace

double auroc(const EvalSet& e) {
    check_eval_set(e);
    const std::size_t p = e.id_scores.size();
    const std::size_t q = e.ood_scores.size();
    // Midrank form of the Mann-Whitney statistic: rank the pooled scores,
    // groups of ties share the average rank.
    std::vector<std::pair<double, bool>> pooled;  // (score, is_id)
    pooled.reserve(p + q);
    for (double s : e.id_scores) pooled.emplace_back(s, true);
    for (double s : e.ood_scores) pooled.emplace_back(s, false);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double id_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < pooled.size()) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (pooled[t].second) id_rank_sum += midrank;
        i = j;
    }
    const double u = id_rank_sum - 0.5 * static_cast<double>(p) * static_cast<double>(p + 1);
    return u / (static_cast<double>(p) * static_cast<double>(q));
}

double fpr_at_tpr(const EvalSet& e, double tpr) {
    check_eval_set(e);
    if (!(tpr > 0.0 && tpr <= 1.0)) throw std::invalid_argument("tpr must be in (0, 1]");
    const std::size_t p = e.id_scores.size();
    std::vector<double> id_desc = e.id_scores;
    std::sort(id_desc.begin(), id_desc.end(), std::greater<>());
    // Smallest accepted count whose fraction reaches the required TPR; the
    // threshold is the attained score at that count, so the decision rule
    // score >= threshold keeps at least tpr of the ID set.
    auto accepted = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(p)));
    accepted = std::clamp<std::size_t>(accepted, 1, p);
    while (accepted > 1 &&
           static_cast<double>(accepted - 1) / static_cast<double>(p) >= tpr)
        --accepted;
    while (accepted < p && static_cast<double>(accepted) / static_cast<double>(p) < tpr)
        ++accepted;
    const double threshold = id_desc[accepted - 1];
    std::size_t false_positives = 0;
    for (double s : e.ood_scores)
        if (s >= threshold) ++false_positives;
    return static_cast<double>(false_positives) / static_cast<double>(e.ood_scores.size());
}

EvalReport evaluate(const ScoreSpec& spec, const FeatureBank& bank, const LinearHead* head,
                    const FeatureBank& id_queries, const FeatureBank& ood_queries) {
    const auto start = std::chrono::steady_clock::now();
    EvalSet sets;
    sets.id_scores = score_queries(spec, bank, head, id_queries).scores;
    sets.ood_scores = score_queries(spec, bank, head, ood_queries).scores;
    EvalReport report;
    report.auroc = auroc(sets);
    report.fpr95 = fpr_at_tpr(sets, 0.95);
    report.n_id = sets.id_scores.size();
    report.n_ood = sets.ood_scores.size();
    report.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return report;
}

}  // namespace fbe
