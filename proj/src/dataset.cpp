#include "mati/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mati {

namespace {

constexpr double kStddevFloor = 1e-12;

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void FeatureSchema::validate() const {
    if (columns.empty()) throw Error("schema has no feature columns");
    if (target_column.empty()) throw Error("schema has no target column");
    std::set<std::string> seen;
    for (const auto& c : columns) {
        if (c.name == target_column)
            throw Error("target column '" + target_column + "' listed among features");
        if (!seen.insert(c.name).second)
            throw Error("duplicate column name '" + c.name + "'");
    }
}

TabularDataset TabularDataset::subset(const std::vector<std::size_t>& idx) const {
    TabularDataset out;
    out.schema = schema;
    out.code_tables = code_tables;
    out.rows.reserve(idx.size());
    out.targets.reserve(idx.size());
    out.synthetic.reserve(idx.size());
    out.row_ids.reserve(idx.size());
    for (std::size_t i : idx) {
        out.rows.push_back(rows[i]);
        out.targets.push_back(targets[i]);
        out.synthetic.push_back(synthetic[i]);
        out.row_ids.push_back(row_ids[i]);
    }
    return out;
}

void TabularDataset::append_row(std::vector<double> row, double target,
                                bool is_synthetic, std::uint64_t row_id) {
    rows.push_back(std::move(row));
    targets.push_back(target);
    synthetic.push_back(is_synthetic ? 1 : 0);
    row_ids.push_back(row_id);
}

void BinningScheme::validate() const {
    if (!(bin_width > 0.0)) throw Error("bin_width must be positive");
    if (num_bins < 1) throw Error("num_bins must be >= 1");
}

int BinningScheme::index(double y) const {
    const double rel = (y - origin) / bin_width;
    int b = static_cast<int>(std::floor(rel));
    if (b < 0) b = 0;
    if (b >= num_bins) b = num_bins - 1;
    return b;
}

BinningScheme BinningScheme::fit(const std::vector<double>& targets, double width) {
    if (targets.empty()) throw Error("cannot fit a binning scheme to an empty target set");
    if (!(width > 0.0)) throw Error("bin_width must be positive");
    const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
    BinningScheme s;
    s.bin_width = width;
    s.origin = std::floor(*lo / width) * width;
    s.num_bins = std::max(1, static_cast<int>(std::floor((*hi - s.origin) / width)) + 1);
    return s;
}

TabularDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                        const std::vector<std::vector<std::string>>* fixed_code_tables) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw Error("empty CSV file: " + path.string());
    const auto header = split_line(line);

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;

    const std::size_t d = schema.feature_count();
    std::vector<std::size_t> col_pos(d);
    for (std::size_t j = 0; j < d; ++j) {
        auto it = pos.find(schema.columns[j].name);
        if (it == pos.end())
            throw Error("CSV is missing column '" + schema.columns[j].name + "'");
        col_pos[j] = it->second;
    }
    auto tit = pos.find(schema.target_column);
    if (tit == pos.end())
        throw Error("CSV is missing target column '" + schema.target_column + "'");
    const std::size_t target_pos = tit->second;
    auto sit = pos.find("synthetic");
    const bool has_synth = sit != pos.end();
    const std::size_t synth_pos = has_synth ? sit->second : 0;

    TabularDataset ds;
    ds.schema = schema;
    ds.code_tables.resize(d);
    std::vector<std::unordered_map<std::string, std::size_t>> code_lookup(d);
    if (fixed_code_tables) {
        if (fixed_code_tables->size() != d)
            throw Error("fixed code tables do not match the schema");
        ds.code_tables = *fixed_code_tables;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t c = 0; c < ds.code_tables[j].size(); ++c)
                code_lookup[j][ds.code_tables[j][c]] = c;
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size())
            throw Error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));

        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& raw = fields[col_pos[j]];
            if (raw.empty())
                throw Error("line " + std::to_string(line_no) + ": missing value in column '" +
                            schema.columns[j].name + "'");
            if (schema.columns[j].kind == ColumnKind::Numeric) {
                double v;
                if (!parse_double(raw, v))
                    throw Error("line " + std::to_string(line_no) + ": unparsable numeric '" +
                                raw + "' in column '" + schema.columns[j].name + "'");
                row[j] = v;
            } else if (fixed_code_tables) {
                auto it2 = code_lookup[j].find(raw);
                if (it2 == code_lookup[j].end())
                    throw Error("line " + std::to_string(line_no) + ": value '" + raw +
                                "' not in the code table of column '" + schema.columns[j].name +
                                "'");
                row[j] = static_cast<double>(it2->second);
            } else {
                auto [it2, inserted] = code_lookup[j].try_emplace(raw, ds.code_tables[j].size());
                if (inserted) ds.code_tables[j].push_back(raw);
                row[j] = static_cast<double>(it2->second);
            }
        }
        const std::string& traw = fields[target_pos];
        double target;
        if (traw.empty())
            throw Error("line " + std::to_string(line_no) + ": missing target value");
        if (!parse_double(traw, target))
            throw Error("line " + std::to_string(line_no) + ": unparsable target '" + traw + "'");
        const bool is_synth = has_synth && fields[synth_pos] == "1";
        ds.append_row(std::move(row), target, is_synth, static_cast<std::uint64_t>(ds.n_rows()));
    }
    return ds;
}

void save_csv(const TabularDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV file: " + path.string());
    const std::size_t d = ds.n_features();
    for (std::size_t j = 0; j < d; ++j) out << ds.schema.columns[j].name << ',';
    out << ds.schema.target_column << ",synthetic\n";
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (ds.schema.columns[j].kind == ColumnKind::Categorical) {
                const auto code = static_cast<std::size_t>(ds.rows[i][j]);
                out << ds.code_tables[j][code];
            } else {
                out << format_double(ds.rows[i][j]);
            }
            out << ',';
        }
        out << format_double(ds.targets[i]) << ',' << (ds.synthetic[i] ? 1 : 0) << '\n';
    }
}

std::vector<double> bin_frequencies(const std::vector<double>& targets,
                                    const BinningScheme& scheme) {
    scheme.validate();
    if (targets.empty()) throw Error("bin_frequencies: empty dataset");
    std::vector<double> freq(static_cast<std::size_t>(scheme.num_bins), 0.0);
    for (double y : targets) freq[static_cast<std::size_t>(scheme.index(y))] += 1.0;
    const double n = static_cast<double>(targets.size());
    for (double& f : freq) f /= n;
    return freq;
}

std::vector<double> bin_frequencies(const TabularDataset& ds, const BinningScheme& scheme) {
    return bin_frequencies(ds.targets, scheme);
}

namespace {

// Splits a contended per-bin pool between the three test sets: when the
// requests exceed availability, each set gets a proportional share
// (largest-remainder rounding, ties toward the earlier set).
std::array<std::size_t, 3> allocate_bin(std::size_t avail,
                                        const std::array<std::size_t, 3>& req) {
    const std::size_t total = req[0] + req[1] + req[2];
    if (total <= avail) return req;
    std::array<std::size_t, 3> take{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = avail * (static_cast<double>(req[i]) / static_cast<double>(total));
        take[i] = static_cast<std::size_t>(std::floor(exact));
        frac[i] = exact - std::floor(exact);
        assigned += take[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return frac[a] > frac[b]; });
    for (int i = 0; assigned < avail && i < 3; ++i) {
        if (take[order[i]] < req[order[i]]) {
            ++take[order[i]];
            ++assigned;
        }
    }
    return take;
}

}  // namespace

SplitBundle make_splits(const TabularDataset& ds, const BinningScheme& scheme,
                        double test_pool_fraction, std::uint64_t seed) {
    scheme.validate();
    if (!(test_pool_fraction > 0.0 && test_pool_fraction < 0.5))
        throw Error("test_pool_fraction must lie in (0, 0.5)");
    if (ds.n_rows() == 0) throw Error("make_splits: empty dataset");

    const auto B = static_cast<std::size_t>(scheme.num_bins);
    std::vector<std::vector<std::size_t>> by_bin(B);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        by_bin[static_cast<std::size_t>(scheme.index(ds.targets[i]))].push_back(i);

    Rng rng = make_rng(seed, "splits");

    // Per-bin stratified withdrawal into a shared test pool.
    std::vector<std::vector<std::size_t>> pool(B);
    std::vector<std::size_t> train_idx;
    for (std::size_t b = 0; b < B; ++b) {
        auto idx = by_bin[b];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto take = static_cast<std::size_t>(
            std::floor(test_pool_fraction * static_cast<double>(idx.size())));
        pool[b].assign(idx.begin(), idx.begin() + take);
        train_idx.insert(train_idx.end(), idx.begin() + take, idx.end());
    }
    std::size_t pool_total = 0;
    for (const auto& p : pool) pool_total += p.size();
    if (pool_total == 0) throw Error("make_splits: test pool is empty in every bin");
    std::sort(train_idx.begin(), train_idx.end());

    // Train bin frequencies over the remaining rows.
    std::vector<double> freq(B, 0.0);
    for (std::size_t i : train_idx)
        freq[static_cast<std::size_t>(scheme.index(ds.targets[i]))] += 1.0;
    for (double& f : freq) f /= static_cast<double>(train_idx.size());

    // Inverse weights over non-empty train bins.
    std::vector<double> inv_w(B, 0.0);
    double inv_sum = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        if (freq[b] > 0.0) {
            inv_w[b] = 1.0 / freq[b];
            inv_sum += inv_w[b];
        }
    }
    for (double& w : inv_w) w /= inv_sum;

    // Balanced per-bin count: median pool bin count over non-empty pool bins.
    std::vector<std::size_t> nonempty_pool_counts;
    for (const auto& p : pool)
        if (!p.empty()) nonempty_pool_counts.push_back(p.size());
    std::sort(nonempty_pool_counts.begin(), nonempty_pool_counts.end());
    double median_count;
    {
        const std::size_t m = nonempty_pool_counts.size();
        median_count = (m % 2 == 1)
                           ? static_cast<double>(nonempty_pool_counts[m / 2])
                           : 0.5 * static_cast<double>(nonempty_pool_counts[m / 2 - 1] +
                                                       nonempty_pool_counts[m / 2]);
    }
    const auto c_star =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(median_count)));

    std::size_t n_nonempty_train = 0;
    for (std::size_t b = 0; b < B; ++b)
        if (freq[b] > 0.0) ++n_nonempty_train;
    const double total_per_set = static_cast<double>(c_star * n_nonempty_train);

    // Per-bin requests for the three sets; contention resolved proportionally.
    SplitBundle out;
    out.seed = seed;
    out.test_pool_fraction = test_pool_fraction;
    out.bin_frequencies_train = freq;
    out.shortfall_balanced.assign(B, 0);
    out.shortfall_normal.assign(B, 0);
    out.shortfall_inverse.assign(B, 0);

    std::vector<std::size_t> bal_idx, norm_idx, invd_idx;
    for (std::size_t b = 0; b < B; ++b) {
        if (freq[b] <= 0.0 && pool[b].empty()) continue;
        std::array<std::size_t, 3> req{};
        // order: normal, inverse, balanced
        req[0] = static_cast<std::size_t>(std::llround(freq[b] * total_per_set));
        req[1] = static_cast<std::size_t>(std::llround(inv_w[b] * total_per_set));
        req[2] = (freq[b] > 0.0) ? c_star : 0;
        const auto take = allocate_bin(pool[b].size(), req);
        std::size_t cursor = 0;
        auto grab = [&](std::size_t n, std::vector<std::size_t>& dst) {
            dst.insert(dst.end(), pool[b].begin() + cursor, pool[b].begin() + cursor + n);
            cursor += n;
        };
        grab(take[0], norm_idx);
        grab(take[1], invd_idx);
        grab(take[2], bal_idx);
        if (take[0] < req[0]) out.shortfall_normal[b] = 1;
        if (take[1] < req[1]) out.shortfall_inverse[b] = 1;
        if (take[2] < req[2]) out.shortfall_balanced[b] = 1;
    }
    std::sort(bal_idx.begin(), bal_idx.end());
    std::sort(norm_idx.begin(), norm_idx.end());
    std::sort(invd_idx.begin(), invd_idx.end());

    out.train = ds.subset(train_idx);
    out.test_balanced = ds.subset(bal_idx);
    out.test_normal = ds.subset(norm_idx);
    out.test_inverse = ds.subset(invd_idx);
    return out;
}

Scaler fit_scaler(const TabularDataset& ds) {
    const std::size_t d = ds.n_features();
    Scaler sc;
    sc.means.assign(d, 0.0);
    sc.stddevs.assign(d, 1.0);
    if (ds.n_rows() == 0) throw Error("fit_scaler: empty dataset");
    const double n = static_cast<double>(ds.n_rows());
    for (std::size_t j = 0; j < d; ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        double m = 0.0;
        for (const auto& r : ds.rows) m += r[j];
        m /= n;
        double v = 0.0;
        for (const auto& r : ds.rows) v += (r[j] - m) * (r[j] - m);
        sc.means[j] = m;
        sc.stddevs[j] = std::max(std::sqrt(v / n), kStddevFloor);
    }
    return sc;
}

TabularDataset apply_scaler(const TabularDataset& ds, const Scaler& scaler) {
    TabularDataset out = ds;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        if (scaler.stddevs[j] <= kStddevFloor) {
            // degenerate column: constant on the fitting set
            for (auto& r : out.rows) r[j] = 0.0;
        } else {
            for (auto& r : out.rows) r[j] = (r[j] - scaler.means[j]) / scaler.stddevs[j];
        }
    }
    return out;
}

TabularDataset invert_scaler(const TabularDataset& ds, const Scaler& scaler) {
    TabularDataset out = ds;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (ds.schema.columns[j].kind != ColumnKind::Numeric) continue;
        for (auto& r : out.rows) r[j] = r[j] * scaler.stddevs[j] + scaler.means[j];
    }
    return out;
}

}  // namespace mati
