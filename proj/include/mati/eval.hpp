#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mati/dataset.hpp"
#include "mati/gmm.hpp"
#include "mati/ttsa.hpp"

namespace mati {

struct MetricSet {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  // percent
    std::size_t n = 0;
    std::size_t mape_skipped = 0;  // |truth| < 1e-8
};

double mae(const std::vector<double>& pred, const std::vector<double>& truth);
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);
// Percent; entries with |truth| < 1e-8 are skipped (count reported via
// compute_metrics).
double mape(const std::vector<double>& pred, const std::vector<double>& truth);

MetricSet compute_metrics(const std::vector<double>& pred, const std::vector<double>& truth);

struct ShotThresholds {
    std::size_t many_min = 101;  // bins with > 100 training samples
    std::size_t few_max = 19;    // bins with < 20 training samples
};

struct DistributionReport {
    MetricSet overall;
    std::map<int, MetricSet> per_bin;
    std::optional<MetricSet> many_shot;
    std::optional<MetricSet> medium_shot;
    std::optional<MetricSet> few_shot;
};

struct EvalReport {
    DistributionReport balanced;
    DistributionReport normal;
    DistributionReport inverse;
};

using PredictFn = std::function<std::vector<double>(const FeatureMatrix&)>;

// Fills an EvalReport over all three test sets; shot regions are derived
// from the training bin counts.
EvalReport evaluate(const PredictFn& predict_fn, const SplitBundle& bundle,
                    const BinningScheme& scheme, const ShotThresholds& shots = {});

// Variant with one predictor per test distribution (used when aggregation
// weights are adapted to each distribution independently).
EvalReport evaluate(const PredictFn& predict_balanced, const PredictFn& predict_normal,
                    const PredictFn& predict_inverse, const SplitBundle& bundle,
                    const BinningScheme& scheme, const ShotThresholds& shots = {});

struct RegionTestSets {
    std::vector<TabularDataset> sets;  // one per component, component order
    std::vector<std::uint8_t> empty_flags;
};

// Region n's test set: up to per_region pool rows with a target inside
// [mu_n - sigma_n, mu_n + sigma_n].
RegionTestSets region_test_sets(const TabularDataset& pool, const GmmModel& gmm,
                                std::size_t per_region, std::uint64_t seed);

struct SweepPoint {
    double ratio = 0.0;
    MetricSet balanced;
    MetricSet normal;
    MetricSet inverse;
    MetricSet mean;  // metric-wise mean over the three distributions
};

// Re-runs aggregation and evaluation per corruption ratio, everything else
// fixed.
std::vector<SweepPoint> perturbation_sweep(const std::vector<ExpertModel>& experts,
                                           const SplitBundle& bundle,
                                           const std::vector<double>& ratios,
                                           const TtsaConfig& cfg);

// The algebraic core of the pairwise-gap / center-loss equivalence:
// returns (sum over ordered pairs of squared differences,
//          2 * |Z| * sum of squared deviations from the mean).
std::pair<double, double> gap_center_identity(const std::vector<double>& values);

}  // namespace mati
