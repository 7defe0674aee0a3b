#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mati/ttsa.hpp"

using namespace mati;
using namespace testutil;

namespace {

// Single linear unit: predicts a*x + b on one raw numeric feature.
ExpertModel linear_expert(double a, double b) {
    ExpertModel m;
    m.encoder.kinds = {ColumnKind::Numeric};
    m.encoder.cat_sizes = {0};
    m.encoder.scaler.means = {0.0};
    m.encoder.scaler.stddevs = {1.0};
    m.encoder.width = 1;
    DenseLayer L;
    L.in = 1;
    L.out = 1;
    L.weights = {a};
    L.biases = {b};
    m.layers.push_back(L);
    return m;
}

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng = make_rng(seed, "features");
    std::uniform_real_distribution<double> unit(-3.0, 3.0);
    FeatureMatrix X(rows, std::vector<double>(cols));
    for (auto& r : X)
        for (double& v : r) v = unit(rng);
    return X;
}

AggregationWeights weights_of(std::vector<double> raw) {
    AggregationWeights w;
    w.normalized = softmax(raw);
    w.raw = std::move(raw);
    return w;
}

}  // namespace

TEST_SUITE("ttsa") {

TEST_CASE("softmax is a probability vector and shift-invariant") {
    const auto p = softmax({1.0, 2.0, 3.0});
    double sum = 0.0;
    for (double x : p) {
        CHECK(x > 0.0);
        sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto q = softmax({101.0, 102.0, 103.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("corrupt boundary ratios") {
    const auto X = random_features(50, 4, 1);
    Rng rng = make_rng(2, "corrupt");

    SUBCASE("r = 0 is the identity") { CHECK(corrupt(X, 0.0, rng) == X); }

    SUBCASE("r = 1 keeps column membership") {
        const auto Y = corrupt(X, 1.0, rng);
        for (std::size_t j = 0; j < 4; ++j) {
            std::set<double> column;
            for (const auto& r : X) column.insert(r[j]);
            for (const auto& r : Y) CHECK(column.count(r[j]) == 1);
        }
    }

    SUBCASE("single row is rejected") {
        CHECK_THROWS_AS(corrupt(FeatureMatrix{{1.0, 2.0}}, 0.5, rng), Error);
    }

    SUBCASE("changed-entry rate matches the ratio") {
        // Distinct values everywhere, and donors exclude the row itself, so
        // an entry changes exactly when its mask fires: expected rate r.
        const double r = 0.1;
        std::size_t changed = 0, total = 0;
        for (int t = 0; t < 50; ++t) {
            const auto Y = corrupt(X, r, rng);
            for (std::size_t i = 0; i < X.size(); ++i)
                for (std::size_t j = 0; j < X[i].size(); ++j) {
                    changed += Y[i][j] != X[i][j];
                    ++total;
                }
        }
        const double rate = static_cast<double>(changed) / static_cast<double>(total);
        CHECK(rate == doctest::Approx(r).epsilon(0.02 / r));
        CHECK(std::abs(rate - r) < 0.02);
    }
}

TEST_CASE("predict_aggregated") {
    const std::vector<ExpertModel> experts{linear_expert(1.0, 0.0), linear_expert(2.0, 1.0)};
    const FeatureMatrix X{{1.0}, {2.0}, {-1.0}};

    SUBCASE("zero raw weights average the experts") {
        const auto y = predict_aggregated(experts, weights_of({0.0, 0.0}), X);
        CHECK(y[0] == doctest::Approx(0.5 * (1.0 + 3.0)));
        CHECK(y[1] == doctest::Approx(0.5 * (2.0 + 5.0)));
    }
    SUBCASE("saturated softmax selects one expert") {
        const auto y = predict_aggregated(experts, weights_of({40.0, -40.0}), X);
        for (std::size_t i = 0; i < X.size(); ++i)
            CHECK(y[i] == doctest::Approx(X[i][0]).epsilon(1e-12));
    }
    SUBCASE("identical experts are weight-independent") {
        const std::vector<ExpertModel> same{linear_expert(3.0, -1.0), linear_expert(3.0, -1.0)};
        const auto a = predict_aggregated(same, weights_of({0.0, 0.0}), X);
        const auto b = predict_aggregated(same, weights_of({2.0, -5.0}), X);
        for (std::size_t i = 0; i < X.size(); ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
        CHECK(a[0] == doctest::Approx(2.0));
    }
    SUBCASE("length mismatch is an error") {
        CHECK_THROWS_AS(predict_aggregated(experts, weights_of({0.0}), X), Error);
    }
}

TEST_CASE("prediction_gap") {
    const std::vector<ExpertModel> experts{linear_expert(1.0, 0.0), linear_expert(-1.0, 0.0)};
    const FeatureMatrix v1{{1.0}, {2.0}};

    CHECK(prediction_gap(experts, weights_of({0.3, -0.7}), v1, v1) == 0.0);

    // Hand case with uniform weights: predictions are 0 on both views'
    // rows, so the gap is mean((0-0)^2, (0-0)^2) = 0; with saturated
    // weights toward expert 1 the gap is mean((1-3)^2, (2-0)^2) = 4.
    const FeatureMatrix v2{{3.0}, {0.0}};
    const auto w = weights_of({40.0, -40.0});
    CHECK(prediction_gap(experts, w, v1, v2) == doctest::Approx(4.0).epsilon(1e-9));

    // Single expert: gap is independent of the raw weight value.
    const std::vector<ExpertModel> one{linear_expert(2.0, 0.0)};
    const double g1 = prediction_gap(one, weights_of({0.0}), v1, v2);
    const double g2 = prediction_gap(one, weights_of({17.0}), v1, v2);
    CHECK(g1 == doctest::Approx(g2));
}

TEST_CASE("gap_gradient matches finite differences and sums to zero") {
    const std::vector<ExpertModel> experts{linear_expert(1.0, 0.0), linear_expert(-2.0, 1.0),
                                           linear_expert(0.5, -3.0)};
    Rng rng = make_rng(7, "fd");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    for (int trial = 0; trial < 10; ++trial) {
        const auto v1 = random_features(8, 1, 100 + static_cast<std::uint64_t>(trial));
        const auto v2 = random_features(8, 1, 200 + static_cast<std::uint64_t>(trial));
        std::vector<double> raw{unit(rng), unit(rng), unit(rng)};
        const auto grad = gap_gradient(experts, weights_of(raw), v1, v2);

        double gsum = 0.0;
        const double eps = 1e-6;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto perturbed = raw;
            perturbed[i] = raw[i] + eps;
            const double lp = prediction_gap(experts, weights_of(perturbed), v1, v2);
            perturbed[i] = raw[i] - eps;
            const double lm = prediction_gap(experts, weights_of(perturbed), v1, v2);
            const double numeric = (lp - lm) / (2.0 * eps);
            const double rel = std::abs(grad[i] - numeric) /
                               std::max(std::abs(grad[i]) + std::abs(numeric), 1e-8);
            CHECK(rel < 1e-6);
            gsum += grad[i];
        }
        CHECK(std::abs(gsum) < 1e-12);
    }

    // Identical views give a zero gradient.
    const auto v = random_features(5, 1, 300);
    for (double g : gap_gradient(experts, weights_of({0.1, 0.2, 0.3}), v, v))
        CHECK(g == 0.0);
}

TEST_CASE("aggregate basics") {
    const auto X = random_features(64, 1, 9);
    TtsaConfig cfg;
    cfg.seed = 10;

    SUBCASE("single expert returns weight one") {
        const auto w = aggregate({linear_expert(1.0, 0.0)}, X, cfg);
        REQUIRE(w.normalized.size() == 1);
        CHECK(w.normalized[0] == 1.0);
        CHECK(w.history.size() == 1);
    }
    SUBCASE("zero corruption never moves the weights") {
        TtsaConfig c = cfg;
        c.corrupt_ratio = 0.0;
        const auto w =
            aggregate({linear_expert(1.0, 0.0), linear_expert(-1.0, 0.0)}, X, c);
        CHECK(w.normalized[0] == doctest::Approx(0.5).epsilon(1e-15));
        for (const auto& snap : w.history) CHECK(snap.gap == 0.0);
    }
    SUBCASE("deterministic in the seed") {
        const std::vector<ExpertModel> experts{linear_expert(1.0, 0.0),
                                               linear_expert(0.0, 2.0)};
        const auto a = aggregate(experts, X, cfg);
        const auto b = aggregate(experts, X, cfg);
        CHECK(a.raw == b.raw);
        TtsaConfig c2 = cfg;
        c2.seed = 11;
        CHECK(aggregate(experts, X, c2).raw != a.raw);
    }
    SUBCASE("stop threshold must sit below uniform") {
        TtsaConfig c = cfg;
        c.stop_threshold = 0.6;
        CHECK_THROWS_AS(
            aggregate({linear_expert(1.0, 0.0), linear_expert(0.0, 0.0)}, X, c), Error);
    }
}

TEST_CASE("aggregation drifts toward the corruption-invariant expert") {
    // Expert 0 is constant (immune to feature corruption); expert 1 follows
    // the feature and disagrees with itself across corrupted views.
    const std::vector<ExpertModel> experts{linear_expert(0.0, 1.0), linear_expert(1.0, 0.0)};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto X = random_features(128, 1, 400 + seed);
        TtsaConfig cfg;
        cfg.seed = seed;
        cfg.epochs = 10;
        cfg.stop_threshold = 0.01;
        const auto w = aggregate(experts, X, cfg);
        REQUIRE(w.history.size() >= 2);
        for (std::size_t e = 1; e < w.history.size(); ++e)
            CHECK(w.history[e].normalized[0] > w.history[e - 1].normalized[0]);
    }
}

TEST_CASE("normalized weights stay on the simplex through training") {
    const auto X = random_features(96, 1, 12);
    TtsaConfig cfg;
    cfg.seed = 13;
    const auto w = aggregate({linear_expert(1.0, 0.0), linear_expert(2.0, 0.0),
                              linear_expert(0.0, 5.0)},
                             X, cfg);
    for (const auto& snap : w.history) {
        double sum = 0.0;
        for (double x : snap.normalized) {
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

}  // TEST_SUITE
