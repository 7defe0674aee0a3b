#include "mati/ttsa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mati {

namespace {

// Per-expert prediction rows: logits[i][row].
std::vector<std::vector<double>> expert_logits(const std::vector<ExpertModel>& experts,
                                               const FeatureMatrix& X) {
    std::vector<std::vector<double>> logits;
    logits.reserve(experts.size());
    for (const auto& e : experts) logits.push_back(e.predict(X));
    return logits;
}

std::vector<double> gap_gradient_from_logits(const std::vector<double>& p,
                                             const std::vector<std::vector<double>>& l1,
                                             const std::vector<std::vector<double>>& l2) {
    const std::size_t n_experts = p.size();
    const std::size_t m = l1.empty() ? 0 : l1[0].size();
    std::vector<double> grad(n_experts, 0.0);
    for (std::size_t row = 0; row < m; ++row) {
        // d is both the row's prediction gap and the softmax-mean of deltas.
        double d = 0.0;
        for (std::size_t i = 0; i < n_experts; ++i)
            d += p[i] * (l1[i][row] - l2[i][row]);
        for (std::size_t i = 0; i < n_experts; ++i) {
            const double delta = l1[i][row] - l2[i][row];
            grad[i] += d * p[i] * (delta - d);
        }
    }
    const double scale = 2.0 / static_cast<double>(m);
    for (double& g : grad) g *= scale;
    return grad;
}

}  // namespace

void TtsaConfig::validate() const {
    if (epochs < 1) throw Error("TtsaConfig: epochs must be >= 1");
    if (!(corrupt_ratio >= 0.0 && corrupt_ratio <= 1.0))
        throw Error("TtsaConfig: corrupt_ratio must lie in [0, 1]");
    if (!(learning_rate > 0.0)) throw Error("TtsaConfig: learning_rate must be positive");
    if (batch_size < 1) throw Error("TtsaConfig: batch_size must be >= 1");
    if (stop_threshold < 0.0) throw Error("TtsaConfig: stop_threshold must be >= 0");
}

std::vector<double> softmax(const std::vector<double>& w) {
    const double mx = *std::max_element(w.begin(), w.end());
    std::vector<double> p(w.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        p[i] = std::exp(w[i] - mx);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

FeatureMatrix corrupt(const FeatureMatrix& X, double r, Rng& rng) {
    if (X.size() < 2) throw Error("corrupt: need at least 2 rows to sample the marginal");
    if (!(r >= 0.0 && r <= 1.0)) throw Error("corrupt: ratio must lie in [0, 1]");
    FeatureMatrix out = X;
    if (r == 0.0) return out;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> donor(0, X.size() - 2);
    for (std::size_t i = 0; i < X.size(); ++i) {
        for (std::size_t j = 0; j < X[i].size(); ++j) {
            if (unit(rng) < r) {
                std::size_t k = donor(rng);
                if (k >= i) ++k;  // uniform over rows other than i
                out[i][j] = X[k][j];
            }
        }
    }
    return out;
}

std::vector<double> predict_aggregated(const std::vector<ExpertModel>& experts,
                                       const AggregationWeights& w, const FeatureMatrix& X) {
    if (experts.empty()) throw Error("predict_aggregated: no experts");
    if (experts.size() != w.raw.size())
        throw Error("predict_aggregated: " + std::to_string(experts.size()) + " experts vs " +
                    std::to_string(w.raw.size()) + " weights");
    const auto p = softmax(w.raw);
    std::vector<double> out(X.size(), 0.0);
    for (std::size_t i = 0; i < experts.size(); ++i) {
        const auto v = experts[i].predict(X);
        for (std::size_t row = 0; row < X.size(); ++row) out[row] += p[i] * v[row];
    }
    return out;
}

double prediction_gap(const std::vector<ExpertModel>& experts, const AggregationWeights& w,
                      const FeatureMatrix& view1, const FeatureMatrix& view2) {
    if (view1.size() != view2.size()) throw Error("prediction_gap: view size mismatch");
    const auto y1 = predict_aggregated(experts, w, view1);
    const auto y2 = predict_aggregated(experts, w, view2);
    double s = 0.0;
    for (std::size_t row = 0; row < y1.size(); ++row) {
        const double d = y1[row] - y2[row];
        s += d * d;
    }
    return s / static_cast<double>(y1.size());
}

std::vector<double> gap_gradient(const std::vector<ExpertModel>& experts,
                                 const AggregationWeights& w, const FeatureMatrix& view1,
                                 const FeatureMatrix& view2) {
    if (view1.size() != view2.size()) throw Error("gap_gradient: view size mismatch");
    const auto p = softmax(w.raw);
    return gap_gradient_from_logits(p, expert_logits(experts, view1),
                                    expert_logits(experts, view2));
}

AggregationWeights aggregate(const std::vector<ExpertModel>& experts,
                             const FeatureMatrix& test_features, const TtsaConfig& cfg) {
    cfg.validate();
    if (experts.empty()) throw Error("aggregate: no experts");
    if (test_features.empty()) throw Error("aggregate: empty test features");

    const std::size_t n_experts = experts.size();
    AggregationWeights w;
    w.raw.assign(n_experts, 0.0);  // uniform after softmax
    w.normalized = softmax(w.raw);

    if (n_experts == 1) {
        // Nothing to learn: the softmax of a scalar is identically 1.
        w.history.push_back({w.normalized, 0.0});
        return w;
    }
    if (!(cfg.stop_threshold < 1.0 / static_cast<double>(n_experts)))
        throw Error("aggregate: stop_threshold must be below 1/N");

    Rng rng = make_rng(cfg.seed, "ttsa");
    std::vector<std::size_t> order(test_features.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_gap = 0.0;
        std::size_t n_batches = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            if (stop - start < 2) continue;  // marginal sampling needs >= 2 rows
            FeatureMatrix batch;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(test_features[order[i]]);

            // Two independent corruption functions per batch.
            const auto view1 = corrupt(batch, cfg.corrupt_ratio, rng);
            const auto view2 = corrupt(batch, cfg.corrupt_ratio, rng);

            const auto l1 = expert_logits(experts, view1);
            const auto l2 = expert_logits(experts, view2);
            const auto p = softmax(w.raw);

            double s = 0.0;
            for (std::size_t row = 0; row < view1.size(); ++row) {
                double d = 0.0;
                for (std::size_t i = 0; i < n_experts; ++i)
                    d += p[i] * (l1[i][row] - l2[i][row]);
                s += d * d;
            }
            s /= static_cast<double>(view1.size());
            if (!std::isfinite(s)) throw Error("aggregate: non-finite prediction gap");
            epoch_gap += s;
            ++n_batches;

            const auto grad = gap_gradient_from_logits(p, l1, l2);
            for (std::size_t i = 0; i < n_experts; ++i)
                w.raw[i] -= cfg.learning_rate * grad[i];
        }

        w.normalized = softmax(w.raw);
        w.history.push_back(
            {w.normalized, n_batches > 0 ? epoch_gap / static_cast<double>(n_batches) : 0.0});

        const double min_w = *std::min_element(w.normalized.begin(), w.normalized.end());
        if (min_w <= cfg.stop_threshold) break;
    }
    return w;
}

}  // namespace mati
