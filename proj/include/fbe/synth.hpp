#pragma once

#include "fbe/bank.hpp"

#include <cstdint>

namespace fbe::synth {

// Seeded generator for a labeled Gaussian-cluster training bank plus ID test,
// near-OOD, and far-OOD query sets. A heavy_tail_frac share of each class's
// training rows carries 4x the class spread on a sparse subset of dimensions,
// modeling the per-channel extreme training features that per-dimension
// clamping is meant to rein in. Near-OOD samples are offset toward the same
// extreme-direction distribution, where semantic shifts actually land.
struct SynthConfig {
    int classes = 8;            // >= 2
    int dim = 6;                // >= 2
    int per_class = 250;        // >= 10 training rows per class
    double class_spread = 1.0;  // within-class standard deviation
    double near_shift = 3.0;    // near-OOD sample offset, in spreads
    double far_shift = 12.0;    // far-OOD offset, in spreads; > near_shift
    double heavy_tail_frac = 0.05;  // in [0, 1)
    int queries_per_class = 50;     // rows per class in each query set
    std::uint64_t seed = 1;
};

struct SynthDataset {
    FeatureBank train;     // labeled, classes * per_class rows
    FeatureBank id_test;   // unlabeled typical draws from the class clusters
    FeatureBank near_ood;  // clusters near_shift spreads off existing classes
    FeatureBank far_ood;   // shifted and rescaled far cluster
    LinearHead head;       // ridge least-squares classifier fitted on train
};

// Deterministic per seed; the four output sets use disjoint RNG streams so
// resizing one set never perturbs the draws of another.
SynthDataset generate(const SynthConfig& cfg);

}  // namespace fbe::synth
