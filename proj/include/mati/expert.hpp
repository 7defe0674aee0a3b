#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mati/dataset.hpp"

namespace mati {

struct MlpConfig {
    std::vector<std::size_t> hidden_layers{64, 64};
    double learning_rate = 1e-3;
    std::size_t batch_size = 128;
    int max_epochs = 200;
    int patience = 20;
    double validation_fraction = 0.1;
    // "adam" (default) or "sgd"
    std::string optimizer = "adam";
    std::uint64_t seed = 0;

    void validate() const;
};

// Maps a raw dataset row to the network input: numeric columns are
// standardized, categorical codes are one-hot expanded.
struct InputEncoder {
    std::vector<ColumnKind> kinds;
    std::vector<std::size_t> cat_sizes;  // 0 for numeric columns
    Scaler scaler;
    std::size_t width = 0;

    static InputEncoder build(const TabularDataset& ds, const Scaler& scaler);
    void encode(const std::vector<double>& row, double* out) const;
    std::vector<double> encode(const std::vector<double>& row) const;
};

struct DenseLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

// A trained region expert: feed-forward ReLU network with a scalar linear
// output, plus the statistics of the region it was trained for.
struct ExpertModel {
    MlpConfig config;
    InputEncoder encoder;
    std::vector<DenseLayer> layers;
    double region_mean = 0.0;
    double region_stddev = 0.0;
    std::vector<EpochStats> training_history;
    double best_val_loss = 0.0;

    double forward(const double* input) const;
    // Predictions for raw (unencoded) feature rows.
    std::vector<double> predict(const std::vector<std::vector<double>>& rows) const;

    std::size_t parameter_count() const;
};

// Trains one expert with mini-batch gradient descent, MSE loss and
// validation early stopping; returns the best-validation-epoch parameters.
ExpertModel train_expert(const TabularDataset& ds, const MlpConfig& cfg,
                         double region_mean = 0.0, double region_stddev = 0.0);

// Compares analytic parameter gradients of the squared error on one sample
// against central finite differences; returns the worst relative error.
double grad_check(const ExpertModel& model, const std::vector<double>& encoded_input,
                  double target, double eps);

}  // namespace mati
