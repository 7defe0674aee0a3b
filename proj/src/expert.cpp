#include "mati/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mati {

namespace {

struct Workspace {
    // act[0] is the input; act[l+1] the output of layer l after activation.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
};

void ensure_workspace(const std::vector<DenseLayer>& layers, std::size_t input_width,
                      Workspace& ws) {
    ws.pre.resize(layers.size());
    ws.act.resize(layers.size() + 1);
    ws.act[0].resize(input_width);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        ws.pre[l].resize(layers[l].out);
        ws.act[l + 1].resize(layers[l].out);
    }
}

// Forward pass; hidden layers ReLU, output linear.
double forward_ws(const std::vector<DenseLayer>& layers, const double* input, Workspace& ws) {
    std::copy(input, input + ws.act[0].size(), ws.act[0].begin());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const auto& x = ws.act[l];
        for (std::size_t o = 0; o < L.out; ++o) {
            double z = L.biases[o];
            const double* w = &L.weights[o * L.in];
            for (std::size_t i = 0; i < L.in; ++i) z += w[i] * x[i];
            ws.pre[l][o] = z;
            ws.act[l + 1][o] = (l + 1 < layers.size()) ? std::max(0.0, z) : z;
        }
    }
    return ws.act.back()[0];
}

// Accumulates parameter gradients for one sample given dL/d(output).
void backward_ws(const std::vector<DenseLayer>& layers, const Workspace& ws, double d_out,
                 std::vector<DenseLayer>& grads) {
    std::vector<double> delta{d_out};
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& L = layers[li];
        auto& G = grads[li];
        const auto& x = ws.act[li];
        for (std::size_t o = 0; o < L.out; ++o) {
            G.biases[o] += delta[o];
            double* gw = &G.weights[o * L.in];
            for (std::size_t i = 0; i < L.in; ++i) gw[i] += delta[o] * x[i];
        }
        if (li == 0) break;
        std::vector<double> prev(L.in, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            const double* w = &L.weights[o * L.in];
            for (std::size_t i = 0; i < L.in; ++i) prev[i] += delta[o] * w[i];
        }
        // ReLU mask of the upstream layer's preactivation.
        for (std::size_t i = 0; i < L.in; ++i)
            if (ws.pre[li - 1][i] <= 0.0) prev[i] = 0.0;
        delta = std::move(prev);
    }
}

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> g = layers;
    for (auto& L : g) {
        std::fill(L.weights.begin(), L.weights.end(), 0.0);
        std::fill(L.biases.begin(), L.biases.end(), 0.0);
    }
    return g;
}

}  // namespace

void MlpConfig::validate() const {
    if (max_epochs < 1) throw Error("MlpConfig: max_epochs must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
        throw Error("MlpConfig: validation_fraction must lie in (0, 0.5)");
    if (batch_size < 1) throw Error("MlpConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("MlpConfig: learning_rate must be positive");
    if (patience < 0) throw Error("MlpConfig: patience must be >= 0");
    if (optimizer != "adam" && optimizer != "sgd")
        throw Error("MlpConfig: unknown optimizer '" + optimizer + "'");
}

InputEncoder InputEncoder::build(const TabularDataset& ds, const Scaler& scaler) {
    InputEncoder enc;
    enc.scaler = scaler;
    enc.width = 0;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        enc.kinds.push_back(ds.schema.columns[j].kind);
        if (ds.schema.columns[j].kind == ColumnKind::Categorical) {
            enc.cat_sizes.push_back(ds.code_tables[j].size());
            enc.width += std::max<std::size_t>(1, ds.code_tables[j].size());
        } else {
            enc.cat_sizes.push_back(0);
            enc.width += 1;
        }
    }
    return enc;
}

void InputEncoder::encode(const std::vector<double>& row, double* out) const {
    if (row.size() != kinds.size())
        throw Error("encode: row has " + std::to_string(row.size()) + " features, expected " +
                    std::to_string(kinds.size()));
    std::size_t pos = 0;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        if (kinds[j] == ColumnKind::Numeric) {
            out[pos++] = scaler.stddevs[j] <= 1e-12
                             ? 0.0
                             : (row[j] - scaler.means[j]) / scaler.stddevs[j];
        } else {
            const std::size_t n = std::max<std::size_t>(1, cat_sizes[j]);
            const auto code = static_cast<std::size_t>(row[j]);
            if (code >= n)
                throw Error("encode: categorical code " + std::to_string(code) +
                            " out of range for column " + std::to_string(j));
            for (std::size_t c = 0; c < n; ++c) out[pos + c] = (c == code) ? 1.0 : 0.0;
            pos += n;
        }
    }
}

std::vector<double> InputEncoder::encode(const std::vector<double>& row) const {
    std::vector<double> out(width);
    encode(row, out.data());
    return out;
}

double ExpertModel::forward(const double* input) const {
    Workspace ws;
    ensure_workspace(layers, encoder.width, ws);
    return forward_ws(layers, input, ws);
}

std::vector<double> ExpertModel::predict(const std::vector<std::vector<double>>& rows) const {
    Workspace ws;
    ensure_workspace(layers, encoder.width, ws);
    std::vector<double> encoded(encoder.width);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        encoder.encode(r, encoded.data());
        const double y = forward_ws(layers, encoded.data(), ws);
        if (!std::isfinite(y)) throw Error("predict: non-finite output");
        out.push_back(y);
    }
    return out;
}

std::size_t ExpertModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& L : layers) n += L.weights.size() + L.biases.size();
    return n;
}

ExpertModel train_expert(const TabularDataset& ds, const MlpConfig& cfg,
                         double region_mean, double region_stddev) {
    cfg.validate();
    if (ds.n_rows() == 0) throw Error("train_expert: empty dataset");

    const std::size_t n = ds.n_rows();

    // Validation split (for early stopping) carved from the expert's own data.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng = make_rng(cfg.seed, "val_split");
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::size_t val_n = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(n)));
    if (n >= 2 && val_n == 0) val_n = 1;
    std::vector<std::size_t> train_idx(order.begin(), order.end() - val_n);
    std::vector<std::size_t> val_idx(order.end() - val_n, order.end());

    ExpertModel model;
    model.config = cfg;
    model.region_mean = region_mean;
    model.region_stddev = region_stddev;

    // Scaler fit on the training rows only.
    model.encoder = InputEncoder::build(ds, fit_scaler(ds.subset(train_idx)));

    // Encode everything up front.
    std::vector<std::vector<double>> X(n);
    for (std::size_t i = 0; i < n; ++i) X[i] = model.encoder.encode(ds.rows[i]);

    // Layer shapes chain input -> hidden... -> scalar.
    std::vector<std::size_t> widths{model.encoder.width};
    widths.insert(widths.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    widths.push_back(1);
    {
        Rng rng = make_rng(cfg.seed, "init");
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            DenseLayer L;
            L.in = widths[l];
            L.out = widths[l + 1];
            L.weights.resize(L.in * L.out);
            L.biases.assign(L.out, 0.0);
            const double scale = std::sqrt(2.0 / static_cast<double>(L.in));
            for (double& w : L.weights) w = gauss(rng) * scale;
            model.layers.push_back(std::move(L));
        }
    }

    // Adam state.
    auto m1 = zero_like(model.layers);
    auto m2 = zero_like(model.layers);
    const bool adam = cfg.optimizer == "adam";
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    Workspace ws;
    ensure_workspace(model.layers, model.encoder.width, ws);
    auto grads = zero_like(model.layers);

    auto eval_loss = [&](const std::vector<std::size_t>& idx) {
        if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (std::size_t i : idx) {
            const double e = forward_ws(model.layers, X[i].data(), ws) - ds.targets[i];
            s += e * e;
        }
        return s / static_cast<double>(idx.size());
    };

    Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
    std::vector<DenseLayer> best_layers = model.layers;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_improve = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, train_idx.size());
            const auto bn = static_cast<double>(stop - start);
            for (auto& G : grads) {
                std::fill(G.weights.begin(), G.weights.end(), 0.0);
                std::fill(G.biases.begin(), G.biases.end(), 0.0);
            }
            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t i = train_idx[bi];
                const double err = forward_ws(model.layers, X[i].data(), ws) - ds.targets[i];
                batch_loss += err * err;
                backward_ws(model.layers, ws, 2.0 * err / bn, grads);
            }
            batch_loss /= bn;
            epoch_loss += batch_loss * bn;
            if (!std::isfinite(batch_loss))
                throw Error("train_expert: training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch + 1));

            ++step;
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                                  std::vector<double>& m, std::vector<double>& v) {
                    for (std::size_t k = 0; k < p.size(); ++k) {
                        if (adam) {
                            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                            const double mh = m[k] / (1.0 - std::pow(beta1, step));
                            const double vh = v[k] / (1.0 - std::pow(beta2, step));
                            p[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + adam_eps);
                        } else {
                            p[k] -= cfg.learning_rate * g[k];
                        }
                    }
                };
                update(model.layers[l].weights, grads[l].weights, m1[l].weights, m2[l].weights);
                update(model.layers[l].biases, grads[l].biases, m1[l].biases, m2[l].biases);
            }
        }
        epoch_loss /= static_cast<double>(train_idx.size());

        double val_loss = eval_loss(val_idx);
        if (std::isnan(val_loss)) val_loss = epoch_loss;  // no validation rows
        if (!std::isfinite(val_loss))
            throw Error("train_expert: training diverged (non-finite validation loss) at epoch " +
                        std::to_string(epoch + 1));
        model.training_history.push_back({epoch_loss, val_loss});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_layers = model.layers;
            epochs_since_improve = 0;
        } else {
            ++epochs_since_improve;
            if (epochs_since_improve > cfg.patience) break;
        }
    }

    model.layers = std::move(best_layers);
    model.best_val_loss = best_val;
    return model;
}

double grad_check(const ExpertModel& model, const std::vector<double>& encoded_input,
                  double target, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error("grad_check: eps out of [1e-7, 1e-3]");
    std::vector<DenseLayer> layers = model.layers;

    Workspace ws;
    ensure_workspace(layers, model.encoder.width, ws);
    auto grads = zero_like(layers);
    const double out = forward_ws(layers, encoded_input.data(), ws);
    backward_ws(layers, ws, 2.0 * (out - target), grads);

    auto loss_at = [&]() {
        const double y = forward_ws(layers, encoded_input.data(), ws);
        return (y - target) * (y - target);
    };

    double worst = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto check = [&](std::vector<double>& p, const std::vector<double>& g) {
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double saved = p[k];
                p[k] = saved + eps;
                const double lp = loss_at();
                p[k] = saved - eps;
                const double lm = loss_at();
                p[k] = saved;
                const double numeric = (lp - lm) / (2.0 * eps);
                const double rel =
                    std::abs(g[k] - numeric) / std::max(std::abs(g[k]) + std::abs(numeric), 1e-8);
                worst = std::max(worst, rel);
            }
        };
        check(layers[l].weights, grads[l].weights);
        check(layers[l].biases, grads[l].biases);
    }
    return worst;
}

}  // namespace mati
