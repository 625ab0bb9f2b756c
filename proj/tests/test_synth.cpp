#include "doctest.h"

#include "fbe/enhance.hpp"
#include "fbe/metrics.hpp"
#include "fbe/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace fbe;
using fbe::synth::SynthConfig;
using fbe::synth::SynthDataset;

TEST_CASE("generation is deterministic per seed") {
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.per_class = 40;
    cfg.dim = 8;
    cfg.queries_per_class = 10;
    cfg.seed = 123;
    const SynthDataset a = synth::generate(cfg);
    const SynthDataset b = synth::generate(cfg);
    CHECK(a.train.data == b.train.data);
    CHECK(a.id_test.data == b.id_test.data);
    CHECK(a.near_ood.data == b.near_ood.data);
    CHECK(a.far_ood.data == b.far_ood.data);
    CHECK(a.head.weights == b.head.weights);
    CHECK(a.head.bias == b.head.bias);
}

TEST_CASE("per_class resizing leaves the OOD draws untouched") {
    SynthConfig cfg;
    cfg.classes = 3;
    cfg.per_class = 30;
    cfg.dim = 6;
    cfg.queries_per_class = 12;
    cfg.seed = 9;
    const SynthDataset small = synth::generate(cfg);
    cfg.per_class = 90;
    const SynthDataset large = synth::generate(cfg);
    CHECK(small.near_ood.data == large.near_ood.data);
    CHECK(small.far_ood.data == large.far_ood.data);
    CHECK(small.id_test.data == large.id_test.data);
}

TEST_CASE("labels are balanced and grouped") {
    SynthConfig cfg;
    cfg.classes = 5;
    cfg.per_class = 20;
    cfg.dim = 4;
    cfg.seed = 77;
    const SynthDataset data = synth::generate(cfg);
    REQUIRE(data.train.labels.has_value());
    std::vector<std::size_t> counts(5, 0);
    for (std::int32_t l : *data.train.labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < 5; ++c) CHECK(counts[c] == 20);
    CHECK(data.train.class_count() == 5);
}

TEST_CASE("config validation") {
    SynthConfig cfg;
    cfg.far_shift = cfg.near_shift;  // must strictly exceed
    CHECK_THROWS_AS(synth::generate(cfg), std::invalid_argument);
    cfg = SynthConfig{};
    cfg.classes = 1;
    CHECK_THROWS_AS(synth::generate(cfg), std::invalid_argument);
    cfg = SynthConfig{};
    cfg.heavy_tail_frac = 1.0;
    CHECK_THROWS_AS(synth::generate(cfg), std::invalid_argument);
    cfg = SynthConfig{};
    cfg.per_class = 5;
    CHECK_THROWS_AS(synth::generate(cfg), std::invalid_argument);
}

TEST_CASE("far ood separates almost perfectly without heavy tails") {
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.per_class = 60;
    cfg.dim = 12;
    cfg.heavy_tail_frac = 0.0;
    cfg.far_shift = 40.0;
    cfg.queries_per_class = 25;
    cfg.seed = 31;
    const SynthDataset data = synth::generate(cfg);
    ScoreSpec spec;
    spec.kind = ScoreKind::knn;
    spec.k = 5;
    const EvalReport report = evaluate(spec, data.train, nullptr, data.id_test, data.far_ood);
    CHECK(report.auroc > 0.99);
}

TEST_CASE("no heavy tails plus full retention keeps the bank unchanged") {
    SynthConfig cfg;
    cfg.classes = 3;
    cfg.per_class = 25;
    cfg.dim = 5;
    cfg.heavy_tail_frac = 0.0;
    cfg.seed = 13;
    const SynthDataset data = synth::generate(cfg);
    CHECK(enhance(data.train, 100.0).first.data == data.train.data);
}

TEST_CASE("fitted head classifies the training clusters") {
    SynthConfig cfg;
    cfg.classes = 4;
    cfg.per_class = 50;
    cfg.dim = 10;
    cfg.heavy_tail_frac = 0.0;
    cfg.seed = 55;
    const SynthDataset data = synth::generate(cfg);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.train.rows; ++i) {
        const auto logits = detail::logits_for(data.head, data.train.row(i));
        const auto best = static_cast<std::int32_t>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (best == (*data.train.labels)[i]) ++correct;
    }
    CHECK(double(correct) / double(data.train.rows) > 0.95);
}
