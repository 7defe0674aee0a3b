#include "mati/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mati {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_pdf(double y, double mean, double stddev) {
    const double z = (y - mean) / stddev;
    return -0.5 * (kLog2Pi + z * z) - std::log(stddev);
}

// Type-7 quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - std::floor(h);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

GmmModel fit_em(const std::vector<double>& labels, int n_components, const EmConfig& cfg) {
    if (n_components < 1) throw Error("fit_em: n_components must be >= 1");
    if (labels.size() < static_cast<std::size_t>(n_components))
        throw Error("fit_em: fewer labels than components");
    const std::set<double> distinct(labels.begin(), labels.end());
    if (distinct.size() < static_cast<std::size_t>(n_components))
        throw Error("fit_em: n_components exceeds the number of distinct labels (" +
                    std::to_string(distinct.size()) + ")");

    const auto M = labels.size();
    const auto N = static_cast<std::size_t>(n_components);

    const double overall_mean = mean_of(labels);
    double overall_var = 0.0;
    for (double y : labels) overall_var += (y - overall_mean) * (y - overall_mean);
    overall_var /= static_cast<double>(M);
    const double var_floor = std::max(cfg.variance_floor_ratio * overall_var,
                                      std::numeric_limits<double>::min());
    const double init_stddev = std::max(std::sqrt(overall_var), std::sqrt(var_floor));

    GmmModel model;
    model.components.resize(N);
    {
        std::vector<double> sorted = labels;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t n = 0; n < N; ++n) {
            model.components[n].weight = 1.0 / static_cast<double>(N);
            model.components[n].mean =
                quantile_sorted(sorted, (static_cast<double>(n) + 0.5) / static_cast<double>(N));
            model.components[n].stddev = init_stddev;
        }
    }

    std::vector<double> resp(M * N);
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        // E-step with log-sum-exp.
        double ll = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            double max_lp = -std::numeric_limits<double>::infinity();
            for (std::size_t n = 0; n < N; ++n) {
                const auto& c = model.components[n];
                const double lp = std::log(c.weight) + log_normal_pdf(labels[i], c.mean, c.stddev);
                resp[i * N + n] = lp;
                max_lp = std::max(max_lp, lp);
            }
            double sum = 0.0;
            for (std::size_t n = 0; n < N; ++n) sum += std::exp(resp[i * N + n] - max_lp);
            const double log_norm = max_lp + std::log(sum);
            for (std::size_t n = 0; n < N; ++n)
                resp[i * N + n] = std::exp(resp[i * N + n] - log_norm);
            ll += log_norm;
        }
        model.n_iterations = iter + 1;
        model.log_likelihood = ll;
        model.ll_trace.push_back(ll);

        // M-step.
        for (std::size_t n = 0; n < N; ++n) {
            double rsum = 0.0, mu = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                rsum += resp[i * N + n];
                mu += resp[i * N + n] * labels[i];
            }
            rsum = std::max(rsum, 1e-300);
            mu /= rsum;
            double var = 0.0;
            for (std::size_t i = 0; i < M; ++i)
                var += resp[i * N + n] * (labels[i] - mu) * (labels[i] - mu);
            var = std::max(var / rsum, var_floor);
            model.components[n].weight = rsum / static_cast<double>(M);
            model.components[n].mean = mu;
            model.components[n].stddev = std::sqrt(var);
        }

        if (std::abs(ll - prev_ll) < cfg.tol) {
            model.converged = true;
            break;
        }
        prev_ll = ll;
    }

    std::sort(model.components.begin(), model.components.end(),
              [](const GaussianComponent& a, const GaussianComponent& b) {
                  return a.mean < b.mean;
              });
    const double k = 3.0 * static_cast<double>(N) - 1.0;
    model.aic = 2.0 * k - 2.0 * model.log_likelihood;
    return model;
}

GmmModel select_by_aic(const std::vector<double>& labels, int n_max, const EmConfig& cfg) {
    if (n_max < 1) throw Error("select_by_aic: n_max must be >= 1");
    GmmModel best;
    bool have = false;
    for (int n = 1; n <= n_max; ++n) {
        GmmModel m = fit_em(labels, n, cfg);
        if (!have || m.aic < best.aic) {
            best = std::move(m);
            have = true;
        }
    }
    return best;
}

std::size_t posterior_assign(const GmmModel& gmm, double y) {
    if (gmm.components.empty()) throw Error("posterior_assign: model has no components");
    std::size_t arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < gmm.components.size(); ++n) {
        const auto& c = gmm.components[n];
        const double lp = std::log(c.weight) + log_normal_pdf(y, c.mean, c.stddev);
        if (lp > best) {  // strict: ties keep the lower-mean component
            best = lp;
            arg = n;
        }
    }
    return arg;
}

std::vector<TabularDataset> partition(const TabularDataset& ds, const GmmModel& gmm) {
    std::vector<std::vector<std::size_t>> idx(gmm.size());
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        idx[posterior_assign(gmm, ds.targets[i])].push_back(i);
    std::vector<TabularDataset> out;
    out.reserve(gmm.size());
    for (const auto& ix : idx) out.push_back(ds.subset(ix));
    return out;
}

}  // namespace mati
