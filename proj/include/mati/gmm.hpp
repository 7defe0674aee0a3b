#pragma once

#include <cstdint>
#include <vector>

#include "mati/dataset.hpp"

namespace mati {

struct GaussianComponent {
    double weight = 1.0;
    double mean = 0.0;
    double stddev = 1.0;
};

struct GmmModel {
    std::vector<GaussianComponent> components;  // sorted by ascending mean
    double log_likelihood = 0.0;
    double aic = 0.0;
    int n_iterations = 0;
    bool converged = false;
    // Log-likelihood after every iteration, for monotonicity checks.
    std::vector<double> ll_trace;

    std::size_t size() const { return components.size(); }
};

struct EmConfig {
    int max_iter = 200;
    double tol = 1e-6;                  // absolute log-likelihood improvement
    double variance_floor_ratio = 1e-6; // times var(labels)
};

// One-dimensional EM with deterministic quantile initialization.
GmmModel fit_em(const std::vector<double>& labels, int n_components,
                const EmConfig& cfg = {});

// Fits 1..n_max components and keeps the smallest AIC (ties toward fewer
// components).
GmmModel select_by_aic(const std::vector<double>& labels, int n_max,
                       const EmConfig& cfg = {});

// Maximum-posterior component index; ties break toward the lower mean.
std::size_t posterior_assign(const GmmModel& gmm, double y);

std::vector<TabularDataset> partition(const TabularDataset& ds, const GmmModel& gmm);

}  // namespace mati
