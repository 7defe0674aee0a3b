#include "mati/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mati {

namespace {

constexpr double kMapeGuard = 1e-8;

void check_lengths(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty() || truth.empty()) throw Error("metrics: empty input vectors");
    if (pred.size() != truth.size()) throw Error("metrics: length mismatch");
}

}  // namespace

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_lengths(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_lengths(pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

double mape(const std::vector<double>& pred, const std::vector<double>& truth) {
    check_lengths(pred, truth);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::abs(truth[i]) < kMapeGuard) continue;
        s += std::abs((pred[i] - truth[i]) / truth[i]);
        ++n;
    }
    return n == 0 ? 0.0 : 100.0 * s / static_cast<double>(n);
}

MetricSet compute_metrics(const std::vector<double>& pred, const std::vector<double>& truth) {
    MetricSet m;
    m.mae = mae(pred, truth);
    m.rmse = rmse(pred, truth);
    m.mape = mape(pred, truth);
    m.n = pred.size();
    for (double t : truth)
        if (std::abs(t) < kMapeGuard) ++m.mape_skipped;
    return m;
}

namespace {

DistributionReport report_for(const std::vector<double>& pred, const TabularDataset& test,
                              const BinningScheme& scheme,
                              const std::vector<std::size_t>& train_bin_counts,
                              const ShotThresholds& shots) {
    DistributionReport rep;
    rep.overall = compute_metrics(pred, test.targets);

    std::map<int, std::vector<std::size_t>> by_bin;
    for (std::size_t i = 0; i < test.n_rows(); ++i)
        by_bin[scheme.index(test.targets[i])].push_back(i);

    std::vector<std::size_t> many, medium, few;
    for (const auto& [bin, idx] : by_bin) {
        std::vector<double> p, t;
        for (std::size_t i : idx) {
            p.push_back(pred[i]);
            t.push_back(test.targets[i]);
        }
        rep.per_bin[bin] = compute_metrics(p, t);

        const std::size_t train_count = train_bin_counts[static_cast<std::size_t>(bin)];
        auto& dst = train_count >= shots.many_min   ? many
                    : train_count <= shots.few_max ? few
                                                   : medium;
        dst.insert(dst.end(), idx.begin(), idx.end());
    }
    auto shot_metrics = [&](const std::vector<std::size_t>& idx) -> std::optional<MetricSet> {
        if (idx.empty()) return std::nullopt;
        std::vector<double> p, t;
        for (std::size_t i : idx) {
            p.push_back(pred[i]);
            t.push_back(test.targets[i]);
        }
        return compute_metrics(p, t);
    };
    rep.many_shot = shot_metrics(many);
    rep.medium_shot = shot_metrics(medium);
    rep.few_shot = shot_metrics(few);
    return rep;
}

}  // namespace

EvalReport evaluate(const PredictFn& predict_balanced, const PredictFn& predict_normal,
                    const PredictFn& predict_inverse, const SplitBundle& bundle,
                    const BinningScheme& scheme, const ShotThresholds& shots) {
    scheme.validate();
    std::vector<std::size_t> train_counts(static_cast<std::size_t>(scheme.num_bins), 0);
    for (double y : bundle.train.targets)
        ++train_counts[static_cast<std::size_t>(scheme.index(y))];

    auto run = [&](const PredictFn& fn, const TabularDataset& test) {
        if (test.n_rows() == 0) return DistributionReport{};
        const auto pred = fn(test.rows);
        if (pred.size() != test.n_rows()) throw Error("evaluate: prediction length mismatch");
        return report_for(pred, test, scheme, train_counts, shots);
    };

    EvalReport rep;
    rep.balanced = run(predict_balanced, bundle.test_balanced);
    rep.normal = run(predict_normal, bundle.test_normal);
    rep.inverse = run(predict_inverse, bundle.test_inverse);
    return rep;
}

EvalReport evaluate(const PredictFn& predict_fn, const SplitBundle& bundle,
                    const BinningScheme& scheme, const ShotThresholds& shots) {
    return evaluate(predict_fn, predict_fn, predict_fn, bundle, scheme, shots);
}

RegionTestSets region_test_sets(const TabularDataset& pool, const GmmModel& gmm,
                                std::size_t per_region, std::uint64_t seed) {
    if (pool.n_rows() == 0) throw Error("region_test_sets: empty pool");
    RegionTestSets out;
    Rng rng = make_rng(seed, "region_test_sets");
    for (const auto& c : gmm.components) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < pool.n_rows(); ++i) {
            const double y = pool.targets[i];
            if (y >= c.mean - c.stddev && y <= c.mean + c.stddev) candidates.push_back(i);
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        if (candidates.size() > per_region) candidates.resize(per_region);
        std::sort(candidates.begin(), candidates.end());
        out.empty_flags.push_back(candidates.empty() ? 1 : 0);
        out.sets.push_back(pool.subset(candidates));
    }
    return out;
}

std::vector<SweepPoint> perturbation_sweep(const std::vector<ExpertModel>& experts,
                                           const SplitBundle& bundle,
                                           const std::vector<double>& ratios,
                                           const TtsaConfig& cfg) {
    std::vector<SweepPoint> out;
    for (double r : ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error("perturbation_sweep: ratio out of [0, 1]");
        TtsaConfig c = cfg;
        c.corrupt_ratio = r;

        SweepPoint pt;
        pt.ratio = r;
        auto eval_one = [&](const TabularDataset& test) {
            const auto w = aggregate(experts, test.rows, c);
            const auto pred = predict_aggregated(experts, w, test.rows);
            return compute_metrics(pred, test.targets);
        };
        pt.balanced = eval_one(bundle.test_balanced);
        pt.normal = eval_one(bundle.test_normal);
        pt.inverse = eval_one(bundle.test_inverse);
        pt.mean.mae = (pt.balanced.mae + pt.normal.mae + pt.inverse.mae) / 3.0;
        pt.mean.rmse = (pt.balanced.rmse + pt.normal.rmse + pt.inverse.rmse) / 3.0;
        pt.mean.mape = (pt.balanced.mape + pt.normal.mape + pt.inverse.mape) / 3.0;
        pt.mean.n = pt.balanced.n + pt.normal.n + pt.inverse.n;
        out.push_back(pt);
    }
    return out;
}

std::pair<double, double> gap_center_identity(const std::vector<double>& values) {
    if (values.size() < 2) throw Error("gap_center_identity: need at least 2 values");
    double pairwise = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j)
        for (std::size_t k = 0; k < values.size(); ++k)
            if (j != k) pairwise += (values[j] - values[k]) * (values[j] - values[k]);

    const double c = mean_of(values);
    double center = 0.0;
    for (double v : values) center += (v - c) * (v - c);
    return {pairwise, 2.0 * static_cast<double>(values.size()) * center};
}

}  // namespace mati
