#pragma once

#include <cstdint>
#include <vector>

#include "mati/expert.hpp"

namespace mati {

struct AggregationWeights {
    std::vector<double> raw;         // learnable weights w
    std::vector<double> normalized;  // softmax(raw)
    struct EpochSnapshot {
        std::vector<double> normalized;
        double gap = 0.0;  // mean prediction gap over the epoch's batches
    };
    std::vector<EpochSnapshot> history;
};

struct TtsaConfig {
    int epochs = 30;
    double corrupt_ratio = 0.1;
    double learning_rate = 0.05;
    std::size_t batch_size = 256;
    double stop_threshold = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<double> softmax(const std::vector<double>& w);

using FeatureMatrix = std::vector<std::vector<double>>;

// VIME-style corruption: each entry is independently replaced, with
// probability r, by the same feature's value from a uniformly chosen other
// row of X.
FeatureMatrix corrupt(const FeatureMatrix& X, double r, Rng& rng);

// Softmax-weighted sum of frozen expert predictions.
std::vector<double> predict_aggregated(const std::vector<ExpertModel>& experts,
                                       const AggregationWeights& w, const FeatureMatrix& X);

// Mean squared difference between aggregated predictions on two views.
double prediction_gap(const std::vector<ExpertModel>& experts, const AggregationWeights& w,
                      const FeatureMatrix& view1, const FeatureMatrix& view2);

// Closed-form gradient of the prediction gap with respect to the raw
// weights (experts stay frozen).
std::vector<double> gap_gradient(const std::vector<ExpertModel>& experts,
                                 const AggregationWeights& w, const FeatureMatrix& view1,
                                 const FeatureMatrix& view2);

// Test-time self-supervised aggregation over unlabeled test features.
AggregationWeights aggregate(const std::vector<ExpertModel>& experts,
                             const FeatureMatrix& test_features, const TtsaConfig& cfg);

}  // namespace mati
