#include "fbe/scores.hpp"

#include "fbe/enhance.hpp"
#include "fbe/parallel.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <stdexcept>

namespace fbe {

ScoreKind score_kind_from_string(const std::string& name) {
    if (name == "knn") return ScoreKind::knn;
    if (name == "mahalanobis") return ScoreKind::mahalanobis;
    if (name == "nnguide") return ScoreKind::nnguide;
    if (name == "energy") return ScoreKind::energy;
    if (name == "msp") return ScoreKind::msp;
    if (name == "maxlogit") return ScoreKind::maxlogit;
    throw std::invalid_argument("unknown score kind \"" + name + "\"");
}

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::knn: return "knn";
        case ScoreKind::mahalanobis: return "mahalanobis";
        case ScoreKind::nnguide: return "nnguide";
        case ScoreKind::energy: return "energy";
        case ScoreKind::msp: return "msp";
        case ScoreKind::maxlogit: return "maxlogit";
    }
    return "unknown";
}

bool needs_head(ScoreKind kind) {
    return kind == ScoreKind::nnguide || kind == ScoreKind::energy ||
           kind == ScoreKind::msp || kind == ScoreKind::maxlogit;
}

double squared_distance(const float* a, const float* b, std::size_t dim) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t j = 0;
    for (; j + 8 <= dim; j += 8) {
        for (std::size_t l = 0; l < 8; ++l) {
            const double d = double(a[j + l]) - double(b[j + l]);
            acc[l] += d * d;
        }
    }
    for (; j < dim; ++j) {
        const double d = double(a[j]) - double(b[j]);
        acc[j % 8] += d * d;
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

double dot_product(const float* a, const float* b, std::size_t dim) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t j = 0;
    for (; j + 8 <= dim; j += 8) {
        for (std::size_t l = 0; l < 8; ++l) acc[l] += double(a[j + l]) * double(b[j + l]);
    }
    for (; j < dim; ++j) acc[j % 8] += double(a[j]) * double(b[j]);
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

namespace {

void check_dims(const FeatureBank& bank, const FeatureBank& queries) {
    if (bank.dim != queries.dim)
        throw std::invalid_argument("query dimension " + std::to_string(queries.dim) +
                                    " does not match bank dimension " + std::to_string(bank.dim));
}

void check_head(const LinearHead& head, const FeatureBank& queries) {
    if (head.dim != queries.dim)
        throw std::invalid_argument("head dimension " + std::to_string(head.dim) +
                                    " does not match feature dimension " +
                                    std::to_string(queries.dim));
}

void check_k(int k, std::size_t bank_rows) {
    if (k < 1 || static_cast<std::size_t>(k) > bank_rows)
        throw std::invalid_argument("k = " + std::to_string(k) + " outside [1, " +
                                    std::to_string(bank_rows) + "]");
}

// Exact k-th smallest value of f(bank_row, query) over all bank rows, for a
// block of queries, visiting the bank in cache-sized chunks. Each query keeps
// a bounded max-heap; the visit order does not change the k-th order statistic.
template <typename PairFn>
std::vector<double> kth_smallest_over_bank(const FeatureBank& bank, const FeatureBank& queries,
                                           std::size_t k, PairFn&& pair_value) {
    std::vector<double> kth(queries.rows);
    const std::size_t chunk_rows =
        std::clamp<std::size_t>((4u << 20) / (bank.dim * 4 + 1), 16, bank.rows);
    parallel_blocks(queries.rows, [&](std::size_t q_begin, std::size_t q_end) {
        std::vector<std::priority_queue<double>> heaps(q_end - q_begin);
        for (std::size_t r0 = 0; r0 < bank.rows; r0 += chunk_rows) {
            const std::size_t r1 = std::min(bank.rows, r0 + chunk_rows);
            for (std::size_t q = q_begin; q < q_end; ++q) {
                auto& heap = heaps[q - q_begin];
                const float* qp = queries.row(q);
                for (std::size_t r = r0; r < r1; ++r) {
                    const double v = pair_value(bank.row(r), qp);
                    if (heap.size() < k) {
                        heap.push(v);
                    } else if (v < heap.top()) {
                        heap.pop();
                        heap.push(v);
                    }
                }
            }
        }
        for (std::size_t q = q_begin; q < q_end; ++q) kth[q] = heaps[q - q_begin].top();
    });
    return kth;
}

}  // namespace

ScoreBatch knn_score(const FeatureBank& bank, const FeatureBank& queries, int k) {
    check_dims(bank, queries);
    check_k(k, bank.rows);
    const FeatureBank nbank = l2_normalize_rows(bank);
    const FeatureBank nqueries = l2_normalize_rows(queries);
    std::vector<double> kth = kth_smallest_over_bank(
        nbank, nqueries, static_cast<std::size_t>(k),
        [dim = nbank.dim](const float* row, const float* query) {
            return squared_distance(row, query, dim);
        });
    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::knn, k, 1.0, std::nullopt};
    batch.scores.resize(queries.rows);
    for (std::size_t q = 0; q < queries.rows; ++q) batch.scores[q] = -std::sqrt(kth[q]);
    return batch;
}

namespace {

// ||L^{-1} x||^2 for the Cholesky factor L, i.e. the squared Mahalanobis
// distance when L L^T is the covariance.
double mahalanobis_sq(const std::vector<double>& chol, std::size_t m, std::vector<double>& x) {
    linalg::solve_lower(chol, m, x);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += x[i] * x[i];
    return total;
}

}  // namespace

ScoreBatch mahalanobis_score(const FeatureBank& bank, const FeatureBank& queries) {
    check_dims(bank, queries);
    if (!bank.labels) throw std::invalid_argument("mahalanobis scoring requires a labeled bank");
    const std::size_t m = bank.dim;
    const std::size_t classes = bank.class_count();
    std::vector<std::size_t> counts(classes, 0);
    for (std::int32_t l : *bank.labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < classes; ++c)
        if (counts[c] < 2)
            throw std::invalid_argument("class " + std::to_string(c) +
                                        " has fewer than 2 samples");

    // Per-class means.
    std::vector<double> means(classes * m, 0.0);
    for (std::size_t i = 0; i < bank.rows; ++i) {
        const auto c = static_cast<std::size_t>((*bank.labels)[i]);
        const float* r = bank.row(i);
        for (std::size_t j = 0; j < m; ++j) means[c * m + j] += r[j];
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < m; ++j) means[c * m + j] /= static_cast<double>(counts[c]);

    // Pooled within-class covariance (divisor rows - classes) plus trace shrinkage.
    std::vector<double> cov(m * m, 0.0);
    std::vector<double> centered(m);
    for (std::size_t i = 0; i < bank.rows; ++i) {
        const auto c = static_cast<std::size_t>((*bank.labels)[i]);
        const float* r = bank.row(i);
        for (std::size_t j = 0; j < m; ++j) centered[j] = double(r[j]) - means[c * m + j];
        for (std::size_t j = 0; j < m; ++j) {
            const double cj = centered[j];
            for (std::size_t t = 0; t <= j; ++t) cov[j * m + t] += cj * centered[t];
        }
    }
    const double denom = static_cast<double>(bank.rows - classes);
    if (denom <= 0.0) throw std::invalid_argument("need more samples than classes");
    double trace = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t t = 0; t <= j; ++t) {
            cov[j * m + t] /= denom;
            cov[t * m + j] = cov[j * m + t];
        }
        trace += cov[j * m + j];
    }
    const double ridge = 1e-6 * trace / static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) cov[j * m + j] += ridge;
    try {
        linalg::cholesky(cov, m);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("covariance is singular after shrinkage: ") +
                                 e.what());
    }

    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::mahalanobis, 0, 1.0, std::nullopt};
    batch.scores.resize(queries.rows);
    parallel_blocks(queries.rows, [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(m);
        for (std::size_t q = begin; q < end; ++q) {
            const float* qp = queries.row(q);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < classes; ++c) {
                for (std::size_t j = 0; j < m; ++j) x[j] = double(qp[j]) - means[c * m + j];
                best = std::min(best, mahalanobis_sq(cov, m, x));
            }
            batch.scores[q] = -std::sqrt(best);
        }
    });
    return batch;
}

namespace detail {

std::vector<double> logits_for(const LinearHead& head, const float* feature) {
    std::vector<double> logits(head.classes);
    for (std::size_t c = 0; c < head.classes; ++c)
        logits[c] = dot_product(head.weight_row(c), feature, head.dim) + double(head.bias[c]);
    return logits;
}

double logsumexp(const std::vector<double>& v) {
    const double hi = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - hi);
    return hi + std::log(sum);
}

ScoreBatch nnguide_with_confidence(const FeatureBank& bank, const std::vector<double>& confidence,
                                   const FeatureBank& queries, int k) {
    check_dims(bank, queries);
    check_k(k, bank.rows);
    if (confidence.size() != bank.rows)
        throw std::invalid_argument("confidence length does not match bank rows");
    FeatureBank guided = l2_normalize_rows(bank);
    for (std::size_t i = 0; i < guided.rows; ++i) {
        float* r = guided.row(i);
        for (std::size_t j = 0; j < guided.dim; ++j)
            r[j] = static_cast<float>(double(r[j]) * confidence[i]);
    }
    const FeatureBank nqueries = l2_normalize_rows(queries);
    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::nnguide, k, 1.0, std::nullopt};
    batch.scores.resize(queries.rows);
    const auto kk = static_cast<std::size_t>(k);
    parallel_blocks(nqueries.rows, [&](std::size_t begin, std::size_t end) {
        std::vector<double> sims(guided.rows);
        for (std::size_t q = begin; q < end; ++q) {
            const float* qp = nqueries.row(q);
            for (std::size_t r = 0; r < guided.rows; ++r)
                sims[r] = dot_product(guided.row(r), qp, guided.dim);
            std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kk - 1),
                             sims.end(), std::greater<>());
            // Sum the selected top-k ascending so the order is fixed.
            std::sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kk));
            double sum = 0.0;
            for (std::size_t t = 0; t < kk; ++t) sum += sims[t];
            batch.scores[q] = sum / static_cast<double>(kk);
        }
    });
    return batch;
}

}  // namespace detail

ScoreBatch nnguide_score(const FeatureBank& bank, const LinearHead& head,
                         const FeatureBank& queries, int k) {
    check_head(head, bank);
    std::vector<double> confidence(bank.rows);
    parallel_blocks(bank.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double energy = detail::logsumexp(detail::logits_for(head, bank.row(i)));
            // softplus keeps the guidance weight positive.
            confidence[i] = energy > 30.0 ? energy : std::log1p(std::exp(energy));
        }
    });
    ScoreBatch batch = detail::nnguide_with_confidence(bank, confidence, queries, k);
    return batch;
}

ScoreBatch energy_score(const LinearHead& head, const FeatureBank& queries, double temperature) {
    check_head(head, queries);
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::energy, 0, temperature, std::nullopt};
    batch.scores.resize(queries.rows);
    parallel_blocks(queries.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            std::vector<double> logits = detail::logits_for(head, queries.row(q));
            for (double& l : logits) l /= temperature;
            batch.scores[q] = temperature * detail::logsumexp(logits);
        }
    });
    return batch;
}

ScoreBatch msp_score(const LinearHead& head, const FeatureBank& queries) {
    check_head(head, queries);
    if (head.classes < 2) throw std::invalid_argument("msp needs at least 2 classes");
    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::msp, 0, 1.0, std::nullopt};
    batch.scores.resize(queries.rows);
    parallel_blocks(queries.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            const std::vector<double> logits = detail::logits_for(head, queries.row(q));
            const double lse = detail::logsumexp(logits);
            const double top = *std::max_element(logits.begin(), logits.end());
            batch.scores[q] = std::exp(top - lse);
        }
    });
    return batch;
}

ScoreBatch maxlogit_score(const LinearHead& head, const FeatureBank& queries) {
    check_head(head, queries);
    if (head.classes < 2) throw std::invalid_argument("maxlogit needs at least 2 classes");
    ScoreBatch batch;
    batch.spec = ScoreSpec{ScoreKind::maxlogit, 0, 1.0, std::nullopt};
    batch.scores.resize(queries.rows);
    parallel_blocks(queries.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            const std::vector<double> logits = detail::logits_for(head, queries.row(q));
            batch.scores[q] = *std::max_element(logits.begin(), logits.end());
        }
    });
    return batch;
}

double react_threshold(const FeatureBank& bank, double percentile) {
    if (!(percentile > 0.0 && percentile <= 100.0))
        throw std::invalid_argument("react percentile must be in (0, 100]");
    std::vector<double> all(bank.data.begin(), bank.data.end());
    return detail::interpolated_percentile(all, percentile);
}

FeatureBank react_clip(const FeatureBank& queries, const FeatureBank& bank, double percentile) {
    const auto threshold = static_cast<float>(react_threshold(bank, percentile));
    FeatureBank out = queries;
    for (float& v : out.data) v = std::min(v, threshold);
    return out;
}

ScoreBatch score_queries(const ScoreSpec& spec, const FeatureBank& bank, const LinearHead* head,
                         const FeatureBank& queries) {
    if (needs_head(spec.kind) && head == nullptr)
        throw std::invalid_argument("score kind \"" + to_string(spec.kind) +
                                    "\" requires a linear head");
    const FeatureBank* q = &queries;
    FeatureBank clipped;
    if (spec.react_percentile) {
        clipped = react_clip(queries, bank, *spec.react_percentile);
        q = &clipped;
    }
    ScoreBatch batch;
    switch (spec.kind) {
        case ScoreKind::knn: batch = knn_score(bank, *q, spec.k); break;
        case ScoreKind::mahalanobis: batch = mahalanobis_score(bank, *q); break;
        case ScoreKind::nnguide: batch = nnguide_score(bank, *head, *q, spec.k); break;
        case ScoreKind::energy: batch = energy_score(*head, *q, spec.temperature); break;
        case ScoreKind::msp: batch = msp_score(*head, *q); break;
        case ScoreKind::maxlogit: batch = maxlogit_score(*head, *q); break;
    }
    batch.spec = spec;
    return batch;
}

std::string score_csv(const ScoreBatch& batch) {
    std::string out = "index,score\n";
    char line[64];
    for (std::size_t i = 0; i < batch.scores.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.17g\n", i, batch.scores[i]);
        out += line;
    }
    return out;
}

}  // namespace fbe

#include "json.hpp"

namespace fbe {

std::string score_json(const ScoreBatch& batch) {
    nlohmann::ordered_json spec{{"kind", to_string(batch.spec.kind)}};
    if (batch.spec.kind == ScoreKind::knn || batch.spec.kind == ScoreKind::nnguide)
        spec["k"] = batch.spec.k;
    if (batch.spec.kind == ScoreKind::energy) spec["temperature"] = batch.spec.temperature;
    if (batch.spec.react_percentile)
        spec["react_percentile"] = *batch.spec.react_percentile;
    else
        spec["react_percentile"] = nullptr;
    nlohmann::ordered_json j{{"score", std::move(spec)}, {"scores", batch.scores}};
    return j.dump(2) + "\n";
}

}  // namespace fbe
