#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mati/fetch.hpp"
#include "mati/pipeline.hpp"

namespace fs = std::filesystem;
using mati::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// Applies a dotted override ("expert.learning_rate=0.01") onto the config
// tree. Values parse as JSON when possible, otherwise as strings.
void apply_override(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw mati::Error("override '" + kv + "' is not of the form key=value");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }

    json* node = &cfg;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw mati::Error("override key '" + key + "' has an empty segment");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json cfg = path.empty() ? json::object() : mati::read_json_file(path);
    for (const auto& kv : overrides) apply_override(cfg, kv);
    return cfg;
}

mati::RunConfig make_run_config(const json& cfg, std::uint64_t seed_override,
                                bool has_seed) {
    mati::RunConfig rc = mati::RunConfig::from_json(cfg);
    if (has_seed) rc.seeds = {seed_override};
    return rc;
}

std::vector<double> parse_ratios(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            const double r = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            out.push_back(r);
        } catch (const std::exception&) {
            throw mati::Error("bad ratio '" + tok + "' in --ratios");
        }
    }
    if (out.empty()) throw mati::Error("--ratios is empty");
    return out;
}

struct StageContext {
    mati::RunConfig cfg;
    std::uint64_t seed = 0;
    fs::path out_dir;
    fs::path seed_dir;
};

StageContext stage_context(const json& cfg_json, const std::string& out,
                           std::uint64_t seed_override, bool has_seed) {
    StageContext ctx;
    ctx.cfg = make_run_config(cfg_json, seed_override, has_seed);
    ctx.seed = ctx.cfg.seeds.front();
    ctx.out_dir = out;
    ctx.seed_dir = mati::paths::seed_dir(ctx.out_dir, ctx.seed);
    fs::create_directories(ctx.seed_dir);
    return ctx;
}

int dispatch(const std::string& cmd, const json& cfg_json, const std::string& out,
             std::uint64_t seed_override, bool has_seed, const std::string& dataset_id,
             const std::string& url, const std::string& data_dir,
             const std::string& ratios_csv) {
    if (cmd == "fetch-data") {
        const auto res = mati::fetch_data(dataset_id, data_dir, url);
        std::cout << "[fetch] " << dataset_id << (res.cache_hit ? " (cache hit)" : "")
                  << ": " << res.rows << " rows -> " << res.csv_path.string() << "\n"
                  << "[fetch] schema -> " << res.schema_path.string() << "\n";
        return 0;
    }

    if (cmd == "run-all") {
        const auto rc = make_run_config(cfg_json, seed_override, has_seed);
        mati::run_all(rc, out, std::cout);
        return 0;
    }

    StageContext ctx = stage_context(cfg_json, out, seed_override, has_seed);
    const auto& cfg = ctx.cfg;

    if (cmd == "split") {
        const auto ds = mati::load_csv(cfg.csv_path, cfg.schema);
        const auto scheme = mati::BinningScheme::fit(ds.targets, cfg.bin_width);
        const auto bundle = mati::make_splits(ds, scheme, cfg.test_pool_fraction, ctx.seed);
        mati::save_splits(bundle, scheme, ds.code_tables, ctx.seed_dir);
        std::cout << "[split] train=" << bundle.train.n_rows()
                  << " balanced=" << bundle.test_balanced.n_rows()
                  << " normal=" << bundle.test_normal.n_rows()
                  << " inverse=" << bundle.test_inverse.n_rows() << "\n";
        return 0;
    }

    if (cmd == "fit-gmm") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::select_by_aic(splits.bundle.train.targets, cfg.n_max, cfg.em);
        mati::write_json_file(json(gmm), ctx.seed_dir / "gmm.json");
        std::cout << "[fit-gmm] components=" << gmm.size() << " aic=" << gmm.aic << "\n";
        return 0;
    }

    if (cmd == "synth") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::load_gmm(ctx.seed_dir);
        mati::SynthConfig sc = cfg.synth;
        sc.seed = mati::derive_seed(ctx.seed, "synth_full");
        const auto full = mati::synthesize_full(splits.bundle.train, sc);
        std::vector<mati::SynthResult> regions;
        const auto parts = mati::partition(full.data, gmm);
        for (std::size_t n = 0; n < gmm.size(); ++n) {
            mati::SynthConfig rc = cfg.synth;
            rc.seed = mati::derive_seed(ctx.seed, "synth_region_" + std::to_string(n));
            const double sigma = cfg.synth.region_sigma_from_rows
                                     ? mati::stddev_of(parts[n].targets)
                                     : gmm.components[n].stddev;
            regions.push_back(
                mati::synthesize_region(full.data, gmm.components[n].mean, sigma, rc));
        }
        mati::save_synth(full, regions, cfg.synth, ctx.seed_dir);
        std::cout << "[synth] d_s=" << full.data.n_rows() << " rows, "
                  << regions.size() << " region sets\n";
        return 0;
    }

    if (cmd == "train-experts") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::load_gmm(ctx.seed_dir);
        const auto d_s_n =
            mati::load_d_s_n(ctx.seed_dir, cfg.schema, splits.code_tables, gmm.size());
        std::vector<mati::ExpertModel> experts;
        for (std::size_t n = 0; n < gmm.size(); ++n) {
            mati::MlpConfig mc = cfg.expert;
            mc.seed = mati::derive_seed(ctx.seed, "expert_" + std::to_string(n));
            experts.push_back(mati::train_expert(d_s_n[n], mc, gmm.components[n].mean,
                                                 gmm.components[n].stddev));
            std::cout << "[train-experts] expert " << n << ": best_val_loss="
                      << experts.back().best_val_loss << "\n";
        }
        mati::save_experts(experts, ctx.seed_dir);
        return 0;
    }

    if (cmd == "aggregate") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::load_gmm(ctx.seed_dir);
        const auto experts = mati::load_experts(ctx.seed_dir, gmm.size());
        const std::map<std::string, const mati::TabularDataset*> tests{
            {"balanced", &splits.bundle.test_balanced},
            {"normal", &splits.bundle.test_normal},
            {"inverse", &splits.bundle.test_inverse}};
        std::map<std::string, mati::AggregationWeights> weights;
        for (const auto& dist : mati::distribution_names()) {
            mati::TtsaConfig tc = cfg.ttsa;
            tc.seed = mati::derive_seed(ctx.seed, "ttsa_" + dist);
            weights[dist] = mati::aggregate(experts, tests.at(dist)->rows, tc);
            std::cout << "[aggregate] " << dist << ":";
            for (double w : weights[dist].normalized) std::cout << ' ' << w;
            std::cout << "\n";
        }
        mati::save_weights(weights, ctx.seed_dir);
        return 0;
    }

    if (cmd == "evaluate") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::load_gmm(ctx.seed_dir);
        const auto experts = mati::load_experts(ctx.seed_dir, gmm.size());
        const auto weights = mati::load_weights(ctx.seed_dir);
        auto predictor = [&](const std::string& dist) {
            return [&, dist](const mati::FeatureMatrix& rows) {
                return mati::predict_aggregated(experts, weights.at(dist), rows);
            };
        };
        const auto report =
            mati::evaluate(predictor("balanced"), predictor("normal"),
                           predictor("inverse"), splits.bundle, splits.scheme, cfg.shots);
        mati::write_json_file(json(report), ctx.seed_dir / "report_mati.json");
        mati::write_report_csv(report, ctx.seed_dir / "report_mati.csv");
        std::cout << "[evaluate] mae balanced=" << report.balanced.overall.mae
                  << " normal=" << report.normal.overall.mae
                  << " inverse=" << report.inverse.overall.mae << "\n";
        return 0;
    }

    if (cmd == "sweep") {
        const auto splits = mati::load_splits(ctx.seed_dir, cfg.schema);
        const auto gmm = mati::load_gmm(ctx.seed_dir);
        const auto experts = mati::load_experts(ctx.seed_dir, gmm.size());
        mati::TtsaConfig tc = cfg.ttsa;
        tc.seed = mati::derive_seed(ctx.seed, "ttsa_sweep");
        const auto sweep =
            mati::perturbation_sweep(experts, splits.bundle, parse_ratios(ratios_csv), tc);
        json arr = json::array();
        for (const auto& pt : sweep) arr.push_back(pt);
        mati::write_json_file(arr, ctx.seed_dir / "sweep.json");
        mati::write_sweep_csv(sweep, ctx.seed_dir / "sweep.csv");
        for (const auto& pt : sweep)
            std::cout << "[sweep] ratio=" << pt.ratio << " mean_mae=" << pt.mean.mae << "\n";
        return 0;
    }

    throw mati::Error("unknown command '" + cmd + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MATI: mixture-decomposed expert training and test-time aggregation "
                 "for imbalanced regression"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out = "runs/default";
    std::uint64_t seed = 0;
    std::string dataset_id, url, data_dir = "data", ratios = "0.1,0.2,0.3,0.4,0.5,0.6,0.7";

    bool has_seed = false;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config_path, "JSON config file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--set", overrides,
                        "dotted config override, e.g. expert.learning_rate=0.01");
        sub->add_option("--out", out, "run output directory");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            has_seed = true;
        });
    };

    for (const char* name : {"split", "fit-gmm", "synth", "train-experts", "aggregate",
                             "evaluate", "run-all"})
        add_common(app.add_subcommand(name), true);

    auto* sweep_cmd = app.add_subcommand("sweep", "corruption-ratio sweep");
    add_common(sweep_cmd, true);
    sweep_cmd->add_option("--ratios", ratios, "comma-separated corruption ratios");

    auto* fetch_cmd = app.add_subcommand("fetch-data", "download a public dataset");
    fetch_cmd->add_option("--dataset", dataset_id, "abalone or bike-sharing")->required();
    fetch_cmd->add_option("--url", url, "mirror URL override (checksum pin still applies)");
    fetch_cmd->add_option("--data-dir", data_dir, "dataset cache directory");

    // Honor MATI_DATA_DIR unless --data-dir is given explicitly.
    if (const char* env = std::getenv("MATI_DATA_DIR")) data_dir = env;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        json cfg_json;
        if (cmd != "fetch-data") cfg_json = load_config(config_path, overrides);
        return dispatch(cmd, cfg_json, out, seed, has_seed, dataset_id, url, data_dir,
                        ratios);
    } catch (const std::exception& e) {
        std::cerr << "error [" << cmd << "]: " << e.what() << "\n";
        return 2;
    }
}
