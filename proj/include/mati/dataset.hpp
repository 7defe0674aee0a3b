#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mati/common.hpp"

namespace mati {

enum class ColumnKind { Numeric, Categorical };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Numeric;
};

struct FeatureSchema {
    std::vector<Column> columns;   // feature columns, ordered
    std::string target_column;

    std::size_t feature_count() const { return columns.size(); }
    // Throws on duplicate names, empty feature list, or target clash.
    void validate() const;
};

// Tabular regression dataset. Categorical values are stored as integer
// codes (held in doubles); the per-column code table maps codes back to
// the original string values. Immutable by convention after construction.
struct TabularDataset {
    FeatureSchema schema;
    std::vector<std::vector<std::string>> code_tables;  // per column; empty for numeric
    std::vector<std::vector<double>> rows;              // N x d
    std::vector<double> targets;                        // N
    std::vector<std::uint8_t> synthetic;                // N, 0 = original row
    std::vector<std::uint64_t> row_ids;                 // stable row identity

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_features() const { return schema.feature_count(); }

    TabularDataset subset(const std::vector<std::size_t>& idx) const;
    void append_row(std::vector<double> row, double target, bool is_synthetic,
                    std::uint64_t row_id);
};

struct BinningScheme {
    double bin_width = 1.0;   // target units
    double origin = 0.0;      // left edge of bin 0
    int num_bins = 1;

    void validate() const;
    // Half-open bins; values outside the covered range clamp into the
    // terminal bins.
    int index(double y) const;
    // Derives origin/num_bins so the bins cover [min(targets), max(targets)].
    static BinningScheme fit(const std::vector<double>& targets, double width);
};

struct Scaler {
    std::vector<double> means;    // per feature; 0 for categorical columns
    std::vector<double> stddevs;  // per feature; 1 for categorical columns
};

struct SplitBundle {
    TabularDataset train;
    TabularDataset test_balanced;
    TabularDataset test_normal;
    TabularDataset test_inverse;
    std::vector<double> bin_frequencies_train;  // over scheme bins
    std::uint64_t seed = 0;
    double test_pool_fraction = 0.0;
    // Per-bin shortfall flags: the sampler wanted more rows than the pool
    // could supply for that bin.
    std::vector<std::uint8_t> shortfall_balanced;
    std::vector<std::uint8_t> shortfall_normal;
    std::vector<std::uint8_t> shortfall_inverse;
};

// CSV ingestion. The header row must contain every schema column; extra
// columns are ignored. Rows with missing or unparsable values are rejected
// with the offending line number. When fixed_code_tables is supplied,
// categorical values must come from those tables (used to reload persisted
// splits with stable codes); a "synthetic" column, if present, is read back
// into the row flags.
TabularDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                        const std::vector<std::vector<std::string>>* fixed_code_tables = nullptr);

void save_csv(const TabularDataset& ds, const std::filesystem::path& path);

std::vector<double> bin_frequencies(const TabularDataset& ds, const BinningScheme& scheme);
std::vector<double> bin_frequencies(const std::vector<double>& targets,
                                    const BinningScheme& scheme);

// Carves the balanced/normal/inverse test sets out of a shared per-bin
// stratified pool. Deterministic given the seed.
SplitBundle make_splits(const TabularDataset& ds, const BinningScheme& scheme,
                        double test_pool_fraction, std::uint64_t seed);

Scaler fit_scaler(const TabularDataset& ds);
TabularDataset apply_scaler(const TabularDataset& ds, const Scaler& scaler);
TabularDataset invert_scaler(const TabularDataset& ds, const Scaler& scaler);

}  // namespace mati
