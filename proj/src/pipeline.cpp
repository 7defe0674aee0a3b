#include "mati/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <ostream>

namespace mati {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    schema.validate();
    if (!(bin_width > 0.0)) throw Error("RunConfig: bin_width must be positive");
    if (n_max < 1) throw Error("RunConfig: n_max must be >= 1");
    if (seeds.empty()) throw Error("RunConfig: at least one seed required");
    synth.validate();
    expert.validate();
    ttsa.validate();
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig cfg;
    const auto& dataset = j.at("dataset");
    cfg.csv_path = dataset.at("csv").get<std::string>();
    if (dataset.contains("schema_file")) {
        cfg.schema = read_json_file(dataset.at("schema_file").get<std::string>())
                         .get<FeatureSchema>();
    } else {
        cfg.schema = dataset.at("schema").get<FeatureSchema>();
    }
    if (j.contains("binning")) cfg.bin_width = j.at("binning").value("width", cfg.bin_width);
    if (j.contains("split"))
        cfg.test_pool_fraction =
            j.at("split").value("test_pool_fraction", cfg.test_pool_fraction);
    if (j.contains("gmm")) {
        const auto& g = j.at("gmm");
        cfg.n_max = g.value("n_max", cfg.n_max);
        cfg.em.max_iter = g.value("max_iter", cfg.em.max_iter);
        cfg.em.tol = g.value("tol", cfg.em.tol);
        cfg.em.variance_floor_ratio =
            g.value("variance_floor_ratio", cfg.em.variance_floor_ratio);
    }
    if (j.contains("synth")) cfg.synth = j.at("synth").get<SynthConfig>();
    if (j.contains("expert")) cfg.expert = j.at("expert").get<MlpConfig>();
    if (j.contains("ttsa")) cfg.ttsa = j.at("ttsa").get<TtsaConfig>();
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        cfg.shots.many_min = e.value("many_shot_min", cfg.shots.many_min);
        cfg.shots.few_max = e.value("few_shot_max", cfg.shots.few_max);
        cfg.region_test_size = e.value("region_test_size", cfg.region_test_size);
    }
    cfg.seeds = j.value("seeds", cfg.seeds);
    if (j.contains("baselines")) {
        cfg.baseline_vanilla = false;
        cfg.baseline_smogn = false;
        for (const auto& b : j.at("baselines")) {
            const auto name = b.get<std::string>();
            if (name == "vanilla") {
                cfg.baseline_vanilla = true;
            } else if (name == "smogn") {
                cfg.baseline_smogn = true;
            } else {
                throw Error("RunConfig: unknown baseline '" + name + "'");
            }
        }
    }
    cfg.validate();
    return cfg;
}

json RunConfig::to_json() const {
    json baselines = json::array();
    if (baseline_vanilla) baselines.push_back("vanilla");
    if (baseline_smogn) baselines.push_back("smogn");
    return json{
        {"dataset", {{"csv", csv_path.string()}, {"schema", schema}}},
        {"binning", {{"width", bin_width}}},
        {"split", {{"test_pool_fraction", test_pool_fraction}}},
        {"gmm",
         {{"n_max", n_max},
          {"max_iter", em.max_iter},
          {"tol", em.tol},
          {"variance_floor_ratio", em.variance_floor_ratio}}},
        {"synth", synth},
        {"expert", expert},
        {"ttsa", ttsa},
        {"eval",
         {{"many_shot_min", shots.many_min},
          {"few_shot_max", shots.few_max},
          {"region_test_size", region_test_size}}},
        {"seeds", seeds},
        {"baselines", baselines}};
}

const std::vector<std::string>& distribution_names() {
    static const std::vector<std::string> names{"balanced", "normal", "inverse"};
    return names;
}

std::uint64_t hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for hashing: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::uint64_t hash_json(const json& j) { return fnv1a64(j.dump()); }

namespace paths {
fs::path seed_dir(const fs::path& run_dir, std::uint64_t seed) {
    return run_dir / ("seed_" + std::to_string(seed));
}
}  // namespace paths

namespace {

std::string hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Content-addressed stage wrapper: the stage manifest records the hash of
// everything upstream; a matching manifest means the persisted outputs can
// be reloaded instead of recomputed.
template <typename T>
T run_stage(const fs::path& dir, const std::string& name, std::uint64_t input_hash,
            std::ostream& log, const std::function<T()>& make,
            const std::function<void(const T&)>& save, const std::function<T()>& load) {
    const fs::path manifest_path = dir / (name + ".manifest.json");
    if (fs::exists(manifest_path)) {
        try {
            const auto m = read_json_file(manifest_path);
            if (m.value("hash", "") == hex(input_hash)) {
                T value = load();
                log << "[cache] " << name << " hit (" << hex(input_hash) << ")\n";
                return value;
            }
        } catch (const std::exception&) {
            // stale or unreadable manifest: recompute below
        }
    }
    T value;
    try {
        value = make();
    } catch (const Error& e) {
        throw Error("stage " + name + ": " + e.what());
    }
    save(value);
    write_json_file(json{{"stage", name}, {"hash", hex(input_hash)}}, manifest_path);
    log << "[stage] " << name << " done (" << hex(input_hash) << ")\n";
    return value;
}

void require_file(const fs::path& p, const std::string& stage) {
    if (!fs::exists(p))
        throw Error("stage " + stage + ": missing prerequisite file " + p.string());
}

}  // namespace

void save_splits(const SplitBundle& bundle, const BinningScheme& scheme,
                 const std::vector<std::vector<std::string>>& code_tables,
                 const fs::path& seed_dir) {
    fs::create_directories(seed_dir);
    save_csv(bundle.train, seed_dir / "train.csv");
    save_csv(bundle.test_balanced, seed_dir / "test_balanced.csv");
    save_csv(bundle.test_normal, seed_dir / "test_normal.csv");
    save_csv(bundle.test_inverse, seed_dir / "test_inverse.csv");
    json manifest = split_manifest(bundle, scheme);
    manifest["code_tables"] = code_tables;
    write_json_file(manifest, seed_dir / "split_manifest.json");
}

LoadedSplits load_splits(const fs::path& seed_dir, const FeatureSchema& schema) {
    require_file(seed_dir / "split_manifest.json", "load_splits");
    const auto manifest = read_json_file(seed_dir / "split_manifest.json");
    LoadedSplits out;
    out.scheme = manifest.at("binning").get<BinningScheme>();
    out.code_tables = manifest.at("code_tables").get<std::vector<std::vector<std::string>>>();
    out.bundle.seed = manifest.at("seed").get<std::uint64_t>();
    out.bundle.test_pool_fraction = manifest.at("test_pool_fraction").get<double>();
    out.bundle.bin_frequencies_train =
        manifest.at("bin_frequencies_train").get<std::vector<double>>();
    const auto& sf = manifest.at("shortfall");
    out.bundle.shortfall_balanced = sf.at("balanced").get<std::vector<std::uint8_t>>();
    out.bundle.shortfall_normal = sf.at("normal").get<std::vector<std::uint8_t>>();
    out.bundle.shortfall_inverse = sf.at("inverse").get<std::vector<std::uint8_t>>();
    for (const char* f : {"train.csv", "test_balanced.csv", "test_normal.csv",
                          "test_inverse.csv"})
        require_file(seed_dir / f, "load_splits");
    out.bundle.train = load_csv(seed_dir / "train.csv", schema, &out.code_tables);
    out.bundle.test_balanced = load_csv(seed_dir / "test_balanced.csv", schema, &out.code_tables);
    out.bundle.test_normal = load_csv(seed_dir / "test_normal.csv", schema, &out.code_tables);
    out.bundle.test_inverse = load_csv(seed_dir / "test_inverse.csv", schema, &out.code_tables);
    return out;
}

GmmModel load_gmm(const fs::path& seed_dir) {
    require_file(seed_dir / "gmm.json", "load_gmm");
    return read_json_file(seed_dir / "gmm.json").get<GmmModel>();
}

TabularDataset load_d_s(const fs::path& seed_dir, const FeatureSchema& schema,
                        const std::vector<std::vector<std::string>>& code_tables) {
    require_file(seed_dir / "d_s.csv", "load_d_s");
    return load_csv(seed_dir / "d_s.csv", schema, &code_tables);
}

std::vector<TabularDataset> load_d_s_n(const fs::path& seed_dir, const FeatureSchema& schema,
                                       const std::vector<std::vector<std::string>>& code_tables,
                                       std::size_t n_components) {
    std::vector<TabularDataset> out;
    for (std::size_t n = 0; n < n_components; ++n) {
        const fs::path p = seed_dir / ("d_s_" + std::to_string(n) + ".csv");
        require_file(p, "load_d_s_n");
        out.push_back(load_csv(p, schema, &code_tables));
    }
    return out;
}

std::vector<ExpertModel> load_experts(const fs::path& seed_dir, std::size_t n_components) {
    std::vector<ExpertModel> out;
    for (std::size_t n = 0; n < n_components; ++n) {
        const fs::path p = seed_dir / ("expert_" + std::to_string(n) + ".json");
        require_file(p, "load_experts");
        out.push_back(read_json_file(p).get<ExpertModel>());
    }
    return out;
}

std::map<std::string, AggregationWeights> load_weights(const fs::path& seed_dir) {
    std::map<std::string, AggregationWeights> out;
    for (const auto& dist : distribution_names()) {
        const fs::path p = seed_dir / ("weights_" + dist + ".json");
        require_file(p, "load_weights");
        out[dist] = read_json_file(p).get<AggregationWeights>();
    }
    return out;
}

void save_synth(const SynthResult& full, const std::vector<SynthResult>& regions,
                const SynthConfig& cfg, const fs::path& seed_dir) {
    fs::create_directories(seed_dir);
    save_csv(full.data, seed_dir / "d_s.csv");
    json bumps = json::array();
    auto bump_json = [](const SynthResult& r) {
        json arr = json::array();
        for (const auto& b : r.bumps)
            arr.push_back(json{{"y_min", b.y_min},
                               {"y_max", b.y_max},
                               {"seed_rows", b.seed_rows},
                               {"synthesized", b.synthesized}});
        return arr;
    };
    json manifest{{"config", cfg},
                  {"full", {{"no_rare_region", full.no_rare_region},
                            {"bumps", bump_json(full)},
                            {"rows", full.data.n_rows()}}}};
    json region_list = json::array();
    for (std::size_t n = 0; n < regions.size(); ++n) {
        save_csv(regions[n].data, seed_dir / ("d_s_" + std::to_string(n) + ".csv"));
        region_list.push_back(json{{"bumps", bump_json(regions[n])},
                                   {"rows", regions[n].data.n_rows()}});
    }
    manifest["regions"] = region_list;
    write_json_file(manifest, seed_dir / "synth_manifest.json");
}

void save_experts(const std::vector<ExpertModel>& experts, const fs::path& seed_dir) {
    fs::create_directories(seed_dir);
    for (std::size_t n = 0; n < experts.size(); ++n)
        write_json_file(json(experts[n]), seed_dir / ("expert_" + std::to_string(n) + ".json"));
}

void save_weights(const std::map<std::string, AggregationWeights>& weights,
                  const fs::path& seed_dir) {
    fs::create_directories(seed_dir);
    for (const auto& [dist, w] : weights)
        write_json_file(json(w), seed_dir / ("weights_" + dist + ".json"));
}

EvalReport run_baseline_vanilla(const SplitBundle& splits, const BinningScheme& scheme,
                                const RunConfig& cfg, std::uint64_t seed,
                                ExpertModel* model_out) {
    MlpConfig mc = cfg.expert;
    mc.seed = derive_seed(seed, "expert_vanilla");
    const ExpertModel model =
        train_expert(splits.train, mc, mean_of(splits.train.targets),
                     stddev_of(splits.train.targets));
    if (model_out) *model_out = model;
    auto predict = [&model](const FeatureMatrix& rows) { return model.predict(rows); };
    return evaluate(predict, splits, scheme, cfg.shots);
}

EvalReport run_baseline_smogn(const SplitBundle& splits, const TabularDataset& d_s,
                              const BinningScheme& scheme, const RunConfig& cfg,
                              std::uint64_t seed, ExpertModel* model_out) {
    MlpConfig mc = cfg.expert;
    mc.seed = derive_seed(seed, "expert_smogn");
    const ExpertModel model =
        train_expert(d_s, mc, mean_of(d_s.targets), stddev_of(d_s.targets));
    if (model_out) *model_out = model;
    auto predict = [&model](const FeatureMatrix& rows) { return model.predict(rows); };
    return evaluate(predict, splits, scheme, cfg.shots);
}

SeedArtifacts run_seed(const TabularDataset& ds, const RunConfig& cfg, std::uint64_t seed,
                       const fs::path& seed_dir, std::ostream& log) {
    cfg.validate();
    const bool persist = !seed_dir.empty();
    if (persist) fs::create_directories(seed_dir);

    // Ephemeral (non-persisting) variant of the stage wrapper.
    auto stage = [&]<typename T>(const std::string& name, std::uint64_t h,
                                 std::function<T()> make, std::function<void(const T&)> save,
                                 std::function<T()> load) -> T {
        if (!persist) {
            try {
                return make();
            } catch (const Error& e) {
                throw Error("stage " + name + ": " + e.what());
            }
        }
        return run_stage<T>(seed_dir, name, h, log, make, save, load);
    };

    SeedArtifacts art;
    art.seed = seed;
    art.scheme = BinningScheme::fit(ds.targets, cfg.bin_width);

    const std::uint64_t h_input =
        hash_json(json{{"schema", cfg.schema},
                       {"rows", ds.n_rows()},
                       {"targets_hash", fnv1a64(ds.targets.data(),
                                                ds.targets.size() * sizeof(double))}});

    // --- splits ---
    const std::uint64_t h_split = hash_json(json{{"input", h_input},
                                                 {"bin_width", cfg.bin_width},
                                                 {"fraction", cfg.test_pool_fraction},
                                                 {"seed", seed}});
    {
        auto loaded = stage.operator()<LoadedSplits>(
            "splits", h_split,
            [&] {
                LoadedSplits l;
                l.scheme = art.scheme;
                l.code_tables = ds.code_tables;
                l.bundle = make_splits(ds, art.scheme, cfg.test_pool_fraction, seed);
                return l;
            },
            [&](const LoadedSplits& l) {
                save_splits(l.bundle, l.scheme, l.code_tables, seed_dir);
            },
            [&] { return load_splits(seed_dir, cfg.schema); });
        art.splits = std::move(loaded.bundle);
        art.scheme = loaded.scheme;
    }

    // --- gmm ---
    const std::uint64_t h_gmm = hash_json(json{{"split", h_split},
                                               {"n_max", cfg.n_max},
                                               {"max_iter", cfg.em.max_iter},
                                               {"tol", cfg.em.tol},
                                               {"vfloor", cfg.em.variance_floor_ratio}});
    art.gmm = stage.operator()<GmmModel>(
        "gmm", h_gmm,
        [&] { return select_by_aic(art.splits.train.targets, cfg.n_max, cfg.em); },
        [&](const GmmModel& m) { write_json_file(json(m), seed_dir / "gmm.json"); },
        [&] { return load_gmm(seed_dir); });
    log << "[gmm] selected " << art.gmm.size() << " components (aic=" << art.gmm.aic << ")\n";

    // --- synthesis (whole-space, then per region) ---
    SynthConfig sc = cfg.synth;
    const std::uint64_t h_synth =
        hash_json(json{{"gmm", h_gmm}, {"synth", json(cfg.synth)}, {"seed", seed}});
    struct SynthStage {
        TabularDataset d_s;
        std::vector<TabularDataset> d_s_n;
    };
    auto synth_out = stage.operator()<SynthStage>(
        "synth", h_synth,
        [&] {
            SynthConfig full_cfg = sc;
            full_cfg.seed = derive_seed(seed, "synth_full");
            SynthResult full = synthesize_full(art.splits.train, full_cfg);
            if (full.no_rare_region) log << "[synth] no rare region; D_S = D_T\n";

            std::vector<SynthResult> regions;
            const auto parts = partition(full.data, art.gmm);
            for (std::size_t n = 0; n < art.gmm.size(); ++n) {
                const auto& comp = art.gmm.components[n];
                const double sigma = sc.region_sigma_from_rows
                                         ? stddev_of(parts[n].targets)
                                         : comp.stddev;
                SynthConfig rc = sc;
                rc.seed = derive_seed(seed, "synth_region_" + std::to_string(n));
                regions.push_back(synthesize_region(full.data, comp.mean, sigma, rc));
            }
            if (persist) save_synth(full, regions, sc, seed_dir);
            SynthStage out;
            out.d_s = std::move(full.data);
            for (auto& r : regions) out.d_s_n.push_back(std::move(r.data));
            return out;
        },
        [&](const SynthStage&) { /* persisted inside make to keep bump stats */ },
        [&] {
            SynthStage out;
            out.d_s = load_d_s(seed_dir, cfg.schema, ds.code_tables);
            out.d_s_n = load_d_s_n(seed_dir, cfg.schema, ds.code_tables, art.gmm.size());
            return out;
        });
    art.d_s = std::move(synth_out.d_s);
    art.d_s_n = std::move(synth_out.d_s_n);

    // --- experts (independent datasets: train concurrently) ---
    const std::uint64_t h_expert =
        hash_json(json{{"synth", h_synth}, {"expert", json(cfg.expert)}});
    art.experts = stage.operator()<std::vector<ExpertModel>>(
        "experts", h_expert,
        [&] {
            std::vector<std::future<ExpertModel>> futs;
            for (std::size_t n = 0; n < art.gmm.size(); ++n) {
                futs.push_back(std::async(std::launch::async, [&, n] {
                    MlpConfig mc = cfg.expert;
                    mc.seed = derive_seed(seed, "expert_" + std::to_string(n));
                    const auto& comp = art.gmm.components[n];
                    return train_expert(art.d_s_n[n], mc, comp.mean, comp.stddev);
                }));
            }
            std::vector<ExpertModel> experts;
            for (auto& f : futs) experts.push_back(f.get());
            return experts;
        },
        [&](const std::vector<ExpertModel>& e) { save_experts(e, seed_dir); },
        [&] { return load_experts(seed_dir, art.gmm.size()); });

    // --- test-time aggregation, per test distribution ---
    const std::map<std::string, const TabularDataset*> tests{
        {"balanced", &art.splits.test_balanced},
        {"normal", &art.splits.test_normal},
        {"inverse", &art.splits.test_inverse}};
    for (const auto& dist : distribution_names()) {
        TtsaConfig tc = cfg.ttsa;
        tc.seed = derive_seed(seed, "ttsa_" + dist);
        try {
            art.weights[dist] = aggregate(art.experts, tests.at(dist)->rows, tc);
        } catch (const Error& e) {
            throw Error("stage aggregate_" + dist + ": " + e.what());
        }
        log << "[ttsa] " << dist << " weights:";
        for (double w : art.weights[dist].normalized) log << ' ' << w;
        log << '\n';
    }
    if (persist) save_weights(art.weights, seed_dir);

    // --- evaluation ---
    auto predictor = [&](const std::string& dist) {
        return [&, dist](const FeatureMatrix& rows) {
            return predict_aggregated(art.experts, art.weights.at(dist), rows);
        };
    };
    art.report_mati = evaluate(predictor("balanced"), predictor("normal"),
                               predictor("inverse"), art.splits, art.scheme, cfg.shots);
    if (persist) {
        write_json_file(json(art.report_mati), seed_dir / "report_mati.json");
        write_report_csv(art.report_mati, seed_dir / "report_mati.csv");
    }

    if (cfg.baseline_vanilla) {
        art.report_vanilla = run_baseline_vanilla(art.splits, art.scheme, cfg, seed);
        if (persist) {
            write_json_file(json(*art.report_vanilla), seed_dir / "report_vanilla.json");
            write_report_csv(*art.report_vanilla, seed_dir / "report_vanilla.csv");
        }
    }
    if (cfg.baseline_smogn) {
        art.report_smogn = run_baseline_smogn(art.splits, art.d_s, art.scheme, cfg, seed);
        if (persist) {
            write_json_file(json(*art.report_smogn), seed_dir / "report_smogn.json");
            write_report_csv(*art.report_smogn, seed_dir / "report_smogn.csv");
        }
    }
    return art;
}

void run_all(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
    cfg.validate();
    fs::create_directories(out_dir);
    write_json_file(cfg.to_json(), out_dir / "config.json");

    const TabularDataset ds = load_csv(cfg.csv_path, cfg.schema);
    log << "[data] loaded " << ds.n_rows() << " rows, " << ds.n_features() << " features\n";

    json per_seed = json::array();
    std::map<std::string, std::map<std::string, std::vector<double>>> maes;  // method -> dist

    for (std::uint64_t seed : cfg.seeds) {
        log << "[seed] " << seed << '\n';
        const auto art = run_seed(ds, cfg, seed, paths::seed_dir(out_dir, seed), log);

        json entry{{"seed", seed}, {"mati", art.report_mati}};
        auto record = [&](const std::string& method, const EvalReport& rep) {
            maes[method]["balanced"].push_back(rep.balanced.overall.mae);
            maes[method]["normal"].push_back(rep.normal.overall.mae);
            maes[method]["inverse"].push_back(rep.inverse.overall.mae);
        };
        record("mati", art.report_mati);
        if (art.report_vanilla) {
            entry["vanilla"] = *art.report_vanilla;
            record("vanilla", *art.report_vanilla);
        }
        if (art.report_smogn) {
            entry["smogn"] = *art.report_smogn;
            record("smogn", *art.report_smogn);
        }
        per_seed.push_back(entry);
    }

    json summary{{"seeds", cfg.seeds}, {"per_seed", per_seed}};
    json means = json::object();
    for (const auto& [method, dists] : maes) {
        json m = json::object();
        double total = 0.0;
        for (const auto& [dist, values] : dists) {
            m[dist] = mean_of(values);
            total += mean_of(values);
        }
        m["mean_over_distributions"] = total / 3.0;
        means[method] = m;
    }
    summary["mean_mae"] = means;
    write_json_file(summary, out_dir / "summary.json");
    log << "[done] summary written to " << (out_dir / "summary.json").string() << '\n';
}

}  // namespace mati
