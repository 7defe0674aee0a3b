#pragma once

#include <cstdint>
#include <vector>

#include "mati/dataset.hpp"

namespace mati {

// Piecewise-cubic monotone relevance map from target value to [0,1].
// Evaluation clamps outside the control-point range.
struct RelevanceFn {
    struct ControlPoint {
        double y = 0.0;
        double relevance = 0.0;
        double slope = 0.0;
    };
    std::vector<ControlPoint> points;  // sorted by y, strictly increasing

    double operator()(double y) const;
};

// Control points from Tukey box-plot statistics: relevance 1 at the
// adjacent values, 0 at the median.
RelevanceFn build_relevance(const std::vector<double>& labels);

struct SynthConfig {
    int k_neighbors = 5;
    double relevance_threshold = 0.8;
    double pert = 0.02;  // Gaussian-noise scale, fraction of per-feature stddev
    double alpha = 1.5;  // region half-width in component stddevs
    // When true, the region synthesizer uses the stddev of the rows inside
    // the region instead of the Gaussian component's stddev.
    bool region_sigma_from_rows = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    TabularDataset data;        // originals first (unchanged), synthetics appended
    bool no_rare_region = false;
    struct Bump {
        double y_min = 0.0, y_max = 0.0;
        std::size_t seed_rows = 0;
        std::size_t synthesized = 0;
    };
    std::vector<Bump> bumps;
};

// Whole-space SMOGN-style oversampling driven by the Tukey relevance map.
SynthResult synthesize_full(const TabularDataset& d_t, const SynthConfig& cfg);

// Region-restricted variant: relevance is 1 inside
// [mu_n - alpha*sigma_n, mu_n + alpha*sigma_n] and 0 outside.
SynthResult synthesize_region(const TabularDataset& d_s, double mu_n, double sigma_n,
                              const SynthConfig& cfg);

// HEOM distance between two rows: numeric |delta|/range, categorical 0/1
// mismatch, combined as the root of the squared sum.
double heom_distance(const TabularDataset& ds, const std::vector<double>& a,
                     const std::vector<double>& b, const std::vector<double>& ranges);

std::vector<double> feature_ranges(const TabularDataset& ds);
std::vector<double> feature_stddevs(const TabularDataset& ds);

// Indices of the k nearest rows to `row` among `pool` (self excluded);
// ties break toward the lower row index. A pool smaller than k+1 yields
// all available neighbors.
std::vector<std::size_t> knn(const TabularDataset& ds, std::size_t row, int k,
                             const std::vector<std::size_t>& pool,
                             const std::vector<double>& ranges);

struct Sample {
    std::vector<double> features;
    double target = 0.0;
};

// SMOTER interpolation between a seed row and one of its neighbors.
Sample smoter_sample(const TabularDataset& ds, std::size_t seed_row, std::size_t neighbor,
                     const std::vector<double>& ranges, Rng& rng);

// Gaussian-noise perturbation of a seed row (SMOGN's fallback branch).
Sample noise_sample(const TabularDataset& ds, std::size_t seed_row, double pert,
                    const std::vector<double>& stddevs, double target_stddev, Rng& rng);

}  // namespace mati
