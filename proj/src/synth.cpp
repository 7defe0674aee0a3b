#include "mati/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace mati {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - std::floor(h);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Cubic Hermite segment; with the control slopes used here the curve is
// monotone between consecutive points.
double hermite(double t, double v0, double m0, double v1, double m1, double h) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * h * m0 +
           (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * h * m1;
}

struct Run {
    bool rare = false;
    std::vector<std::size_t> idx;  // dataset row indices, ascending target order
};

// Maximal runs of equal rarity along the sorted target axis.
std::vector<Run> rarity_runs(const TabularDataset& ds, const std::vector<char>& rare) {
    std::vector<std::size_t> order(ds.n_rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ds.targets[a] < ds.targets[b];
    });
    std::vector<Run> runs;
    for (std::size_t i : order) {
        if (runs.empty() || runs.back().rare != static_cast<bool>(rare[i])) {
            runs.push_back(Run{static_cast<bool>(rare[i]), {}});
        }
        runs.back().idx.push_back(i);
    }
    return runs;
}

// Shared oversampling engine: grows each rare run up to the mean run size.
SynthResult oversample_runs(const TabularDataset& input, const std::vector<char>& rare,
                            const SynthConfig& cfg, const char* stage_tag) {
    SynthResult result;
    result.data = input;

    auto runs = rarity_runs(input, rare);
    const double mean_run_size =
        static_cast<double>(input.n_rows()) / static_cast<double>(runs.size());

    const auto ranges = feature_ranges(input);
    const auto stddevs = feature_stddevs(input);
    const double target_stddev = stddev_of(input.targets);

    Rng rng = make_rng(cfg.seed, stage_tag);
    std::uint64_t next_id = 0;
    for (std::uint64_t id : input.row_ids) next_id = std::max(next_id, id + 1);

    for (const auto& run : runs) {
        if (!run.rare) continue;
        SynthResult::Bump bump;
        bump.y_min = input.targets[run.idx.front()];
        bump.y_max = input.targets[run.idx.back()];
        bump.seed_rows = run.idx.size();

        const auto target_size = static_cast<std::size_t>(std::llround(
            std::max(mean_run_size, static_cast<double>(run.idx.size()))));
        const std::size_t need = target_size - run.idx.size();

        for (std::size_t j = 0; j < need; ++j) {
            const std::size_t seed_row = run.idx[j % run.idx.size()];
            const auto neighbors = knn(input, seed_row, cfg.k_neighbors, run.idx, ranges);

            Sample s;
            if (neighbors.empty()) {
                s = noise_sample(input, seed_row, cfg.pert, stddevs, target_stddev, rng);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, neighbors.size() - 1);
                const std::size_t nb = neighbors[pick(rng)];

                std::vector<double> dists;
                dists.reserve(neighbors.size());
                for (std::size_t n : neighbors)
                    dists.push_back(
                        heom_distance(input, input.rows[seed_row], input.rows[n], ranges));
                std::vector<double> sorted_d = dists;
                std::sort(sorted_d.begin(), sorted_d.end());
                const double median_d =
                    (sorted_d.size() % 2 == 1)
                        ? sorted_d[sorted_d.size() / 2]
                        : 0.5 * (sorted_d[sorted_d.size() / 2 - 1] + sorted_d[sorted_d.size() / 2]);
                const double d_nb =
                    heom_distance(input, input.rows[seed_row], input.rows[nb], ranges);

                if (d_nb > 0.5 * median_d) {
                    s = noise_sample(input, seed_row, cfg.pert, stddevs, target_stddev, rng);
                } else {
                    s = smoter_sample(input, seed_row, nb, ranges, rng);
                }
            }
            result.data.append_row(std::move(s.features), s.target, true, next_id++);
            ++bump.synthesized;
        }
        result.bumps.push_back(bump);
    }
    if (result.bumps.empty()) result.no_rare_region = true;
    return result;
}

}  // namespace

double RelevanceFn::operator()(double y) const {
    if (points.empty()) return 0.0;
    if (y <= points.front().y) return points.front().relevance;
    if (y >= points.back().y) return points.back().relevance;
    std::size_t hi = 1;
    while (points[hi].y < y) ++hi;
    const auto& p0 = points[hi - 1];
    const auto& p1 = points[hi];
    const double h = p1.y - p0.y;
    const double t = (y - p0.y) / h;
    return std::clamp(hermite(t, p0.relevance, p0.slope, p1.relevance, p1.slope, h), 0.0, 1.0);
}

RelevanceFn build_relevance(const std::vector<double>& labels) {
    std::set<double> distinct(labels.begin(), labels.end());
    if (distinct.size() < 3)
        throw Error("build_relevance: need at least 3 distinct labels");

    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_sorted(sorted, 0.25);
    const double med = quantile_sorted(sorted, 0.50);
    const double q3 = quantile_sorted(sorted, 0.75);
    const double iqr = q3 - q1;
    const double lo_fence = q1 - 1.5 * iqr;
    const double hi_fence = q3 + 1.5 * iqr;

    // Adjacent values: extreme observations inside the fences.
    double lo_adj = sorted.front();
    for (double v : sorted) {
        if (v >= lo_fence) {
            lo_adj = v;
            break;
        }
    }
    double hi_adj = sorted.back();
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        if (*it <= hi_fence) {
            hi_adj = *it;
            break;
        }
    }

    RelevanceFn fn;
    if (lo_adj < med) fn.points.push_back({lo_adj, 1.0, 0.0});
    fn.points.push_back({med, 0.0, 0.0});
    if (hi_adj > med) fn.points.push_back({hi_adj, 1.0, 0.0});
    return fn;
}

void SynthConfig::validate() const {
    if (k_neighbors < 1) throw Error("SynthConfig: k_neighbors must be >= 1");
    if (!(relevance_threshold > 0.0 && relevance_threshold < 1.0))
        throw Error("SynthConfig: relevance_threshold must lie in (0, 1)");
    if (!(pert > 0.0)) throw Error("SynthConfig: pert must be positive");
    if (!(alpha > 0.0)) throw Error("SynthConfig: alpha must be positive");
}

SynthResult synthesize_full(const TabularDataset& d_t, const SynthConfig& cfg) {
    cfg.validate();
    if (d_t.n_rows() == 0) throw Error("synthesize_full: empty dataset");

    const auto relevance = build_relevance(d_t.targets);
    std::vector<char> rare(d_t.n_rows(), 0);
    bool any = false;
    for (std::size_t i = 0; i < d_t.n_rows(); ++i) {
        rare[i] = relevance(d_t.targets[i]) >= cfg.relevance_threshold;
        any = any || rare[i];
    }
    if (!any) {
        SynthResult r;
        r.data = d_t;
        r.no_rare_region = true;
        return r;
    }
    return oversample_runs(d_t, rare, cfg, "synth_full");
}

SynthResult synthesize_region(const TabularDataset& d_s, double mu_n, double sigma_n,
                              const SynthConfig& cfg) {
    cfg.validate();
    if (!(sigma_n > 0.0)) throw Error("synthesize_region: sigma_n must be positive");
    if (d_s.n_rows() == 0) throw Error("synthesize_region: empty dataset");

    const double lo = mu_n - cfg.alpha * sigma_n;
    const double hi = mu_n + cfg.alpha * sigma_n;
    std::vector<char> rare(d_s.n_rows(), 0);
    bool any = false;
    for (std::size_t i = 0; i < d_s.n_rows(); ++i) {
        rare[i] = d_s.targets[i] >= lo && d_s.targets[i] <= hi;
        any = any || rare[i];
    }
    if (!any)
        throw Error("synthesize_region: no rows inside target range [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return oversample_runs(d_s, rare, cfg, "synth_region");
}

std::vector<double> feature_ranges(const TabularDataset& ds) {
    const std::size_t d = ds.n_features();
    std::vector<double> ranges(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        double lo = ds.rows[0][j], hi = ds.rows[0][j];
        for (const auto& r : ds.rows) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        ranges[j] = hi - lo;
    }
    return ranges;
}

std::vector<double> feature_stddevs(const TabularDataset& ds) {
    const std::size_t d = ds.n_features();
    std::vector<double> out(d, 0.0);
    std::vector<double> col(ds.n_rows());
    for (std::size_t j = 0; j < d; ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        for (std::size_t i = 0; i < ds.n_rows(); ++i) col[i] = ds.rows[i][j];
        out[j] = stddev_of(col);
    }
    return out;
}

double heom_distance(const TabularDataset& ds, const std::vector<double>& a,
                     const std::vector<double>& b, const std::vector<double>& ranges) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        double d;
        if (ds.schema.columns[j].kind == ColumnKind::Numeric) {
            d = ranges[j] > 0.0 ? std::abs(a[j] - b[j]) / ranges[j] : 0.0;
        } else {
            d = (a[j] != b[j]) ? 1.0 : 0.0;
        }
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::vector<std::size_t> knn(const TabularDataset& ds, std::size_t row, int k,
                             const std::vector<std::size_t>& pool,
                             const std::vector<double>& ranges) {
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(pool.size());
    for (std::size_t i : pool) {
        if (i == row) continue;
        cand.emplace_back(heom_distance(ds, ds.rows[row], ds.rows[i], ranges), i);
    }
    std::sort(cand.begin(), cand.end());  // ties resolved by row index
    if (cand.size() > static_cast<std::size_t>(k)) cand.resize(static_cast<std::size_t>(k));
    std::vector<std::size_t> out;
    out.reserve(cand.size());
    for (const auto& [d, i] : cand) out.push_back(i);
    return out;
}

Sample smoter_sample(const TabularDataset& ds, std::size_t seed_row, std::size_t neighbor,
                     const std::vector<double>& ranges, Rng& rng) {
    const auto& a = ds.rows[seed_row];
    const auto& b = ds.rows[neighbor];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);

    Sample s;
    s.features.resize(ds.n_features());
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (ds.schema.columns[j].kind == ColumnKind::Numeric) {
            s.features[j] = a[j] + u * (b[j] - a[j]);
        } else {
            s.features[j] = unit(rng) < 0.5 ? a[j] : b[j];
        }
    }
    const double d_seed = heom_distance(ds, s.features, a, ranges);
    const double d_nb = heom_distance(ds, s.features, b, ranges);
    const double ya = ds.targets[seed_row];
    const double yb = ds.targets[neighbor];
    s.target = (d_seed + d_nb > 0.0) ? (d_nb * ya + d_seed * yb) / (d_seed + d_nb)
                                     : 0.5 * (ya + yb);
    return s;
}

Sample noise_sample(const TabularDataset& ds, std::size_t seed_row, double pert,
                    const std::vector<double>& stddevs, double target_stddev, Rng& rng) {
    if (!(pert > 0.0)) throw Error("noise_sample: pert must be positive");
    std::normal_distribution<double> gauss(0.0, 1.0);
    Sample s;
    s.features = ds.rows[seed_row];
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        if (stddevs[j] <= 1e-12) continue;  // constant column stays put
        s.features[j] += gauss(rng) * pert * stddevs[j];
    }
    s.target = ds.targets[seed_row];
    if (target_stddev > 1e-12) s.target += gauss(rng) * pert * target_stddev;
    return s;
}

}  // namespace mati
