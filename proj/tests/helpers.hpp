#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mati/dataset.hpp"

namespace testutil {

inline mati::FeatureSchema numeric_schema(std::size_t d = 1) {
    mati::FeatureSchema s;
    for (std::size_t j = 0; j < d; ++j)
        s.columns.push_back({"x" + std::to_string(j), mati::ColumnKind::Numeric});
    s.target_column = "y";
    return s;
}

// One numeric feature equal to the target: trivially learnable, so experts
// differ only through their training region.
inline mati::TabularDataset identity_dataset(const std::vector<double>& targets) {
    mati::TabularDataset ds;
    ds.schema = numeric_schema(1);
    ds.code_tables.resize(1);
    for (std::size_t i = 0; i < targets.size(); ++i)
        ds.append_row({targets[i]}, targets[i], false, i);
    return ds;
}

inline mati::TabularDataset
dataset_from(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets) {
    mati::TabularDataset ds;
    ds.schema = numeric_schema(rows.front().size());
    ds.code_tables.resize(rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) ds.append_row(rows[i], targets[i], false, i);
    return ds;
}

// Gaussian clusters in target space; the feature is target plus small noise.
inline mati::TabularDataset cluster_dataset(const std::vector<double>& means,
                                            const std::vector<std::size_t>& counts,
                                            double stddev, std::uint64_t seed) {
    mati::Rng rng = mati::make_rng(seed, "cluster_dataset");
    std::normal_distribution<double> gauss(0.0, 1.0);
    mati::TabularDataset ds;
    ds.schema = numeric_schema(1);
    ds.code_tables.resize(1);
    std::uint64_t id = 0;
    for (std::size_t c = 0; c < means.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            const double y = means[c] + stddev * gauss(rng);
            ds.append_row({y + 0.01 * gauss(rng)}, y, false, id++);
        }
    }
    return ds;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mati_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

inline std::vector<std::size_t> bin_counts(const mati::TabularDataset& ds,
                                           const mati::BinningScheme& scheme) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(scheme.num_bins), 0);
    for (double y : ds.targets) ++counts[static_cast<std::size_t>(scheme.index(y))];
    return counts;
}

}  // namespace testutil
