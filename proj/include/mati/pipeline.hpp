#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mati/eval.hpp"
#include "mati/serialize.hpp"
#include "mati/synth.hpp"

namespace mati {

struct RunConfig {
    std::filesystem::path csv_path;
    FeatureSchema schema;
    double bin_width = 1.0;
    double test_pool_fraction = 0.2;
    int n_max = 6;
    EmConfig em;
    SynthConfig synth;
    MlpConfig expert;
    TtsaConfig ttsa;
    ShotThresholds shots;
    std::size_t region_test_size = 200;
    std::vector<std::uint64_t> seeds{1};
    bool baseline_vanilla = true;
    bool baseline_smogn = true;

    void validate() const;
    static RunConfig from_json(const json& j);
    json to_json() const;
};

// Everything one seed's pipeline produces.
struct SeedArtifacts {
    std::uint64_t seed = 0;
    BinningScheme scheme;
    SplitBundle splits;
    GmmModel gmm;
    TabularDataset d_s;                  // after whole-space synthesis
    std::vector<TabularDataset> d_s_n;   // region-synthesized sets
    std::vector<ExpertModel> experts;
    std::map<std::string, AggregationWeights> weights;  // per distribution
    EvalReport report_mati;
    std::optional<EvalReport> report_vanilla;
    std::optional<EvalReport> report_smogn;
};

// Full pipeline for one seed. When seed_dir is non-empty, every stage
// persists its output there and is content-addressed: a rerun with an
// unchanged upstream reuses the stored artifact (logged as a cache hit).
SeedArtifacts run_seed(const TabularDataset& ds, const RunConfig& cfg, std::uint64_t seed,
                       const std::filesystem::path& seed_dir, std::ostream& log);

// Multi-seed driver: one subdirectory per seed plus a cross-seed summary.
void run_all(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);

// Baselines (single expert, evaluated on all three distributions).
EvalReport run_baseline_vanilla(const SplitBundle& splits, const BinningScheme& scheme,
                                const RunConfig& cfg, std::uint64_t seed,
                                ExpertModel* model_out = nullptr);
EvalReport run_baseline_smogn(const SplitBundle& splits, const TabularDataset& d_s,
                              const BinningScheme& scheme, const RunConfig& cfg,
                              std::uint64_t seed, ExpertModel* model_out = nullptr);

// Disk layout helpers shared by the pipeline and the CLI stage commands.
namespace paths {
std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::uint64_t seed);
}

// Loaders for stage prerequisites; they never compute, and fail naming the
// missing file.
struct LoadedSplits {
    SplitBundle bundle;
    BinningScheme scheme;
    std::vector<std::vector<std::string>> code_tables;
};
LoadedSplits load_splits(const std::filesystem::path& seed_dir, const FeatureSchema& schema);
GmmModel load_gmm(const std::filesystem::path& seed_dir);
TabularDataset load_d_s(const std::filesystem::path& seed_dir, const FeatureSchema& schema,
                        const std::vector<std::vector<std::string>>& code_tables);
std::vector<TabularDataset> load_d_s_n(const std::filesystem::path& seed_dir,
                                       const FeatureSchema& schema,
                                       const std::vector<std::vector<std::string>>& code_tables,
                                       std::size_t n_components);
std::vector<ExpertModel> load_experts(const std::filesystem::path& seed_dir,
                                      std::size_t n_components);
std::map<std::string, AggregationWeights> load_weights(const std::filesystem::path& seed_dir);

// Persistence helpers (also used by the CLI stage commands).
void save_splits(const SplitBundle& bundle, const BinningScheme& scheme,
                 const std::vector<std::vector<std::string>>& code_tables,
                 const std::filesystem::path& seed_dir);
void save_synth(const SynthResult& full, const std::vector<SynthResult>& regions,
                const SynthConfig& cfg, const std::filesystem::path& seed_dir);
void save_experts(const std::vector<ExpertModel>& experts,
                  const std::filesystem::path& seed_dir);
void save_weights(const std::map<std::string, AggregationWeights>& weights,
                  const std::filesystem::path& seed_dir);

// Distribution names in canonical order.
const std::vector<std::string>& distribution_names();

std::uint64_t hash_file(const std::filesystem::path& path);
std::uint64_t hash_json(const json& j);

}  // namespace mati
