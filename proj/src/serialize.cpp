#include "mati/serialize.hpp"

#include <cstdio>
#include <fstream>

namespace mati {

void to_json(json& j, const Column& c) {
    j = json{{"name", c.name},
             {"kind", c.kind == ColumnKind::Numeric ? "numeric" : "categorical"}};
}

void from_json(const json& j, Column& c) {
    c.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "numeric") {
        c.kind = ColumnKind::Numeric;
    } else if (kind == "categorical") {
        c.kind = ColumnKind::Categorical;
    } else {
        throw Error("schema: unknown column kind '" + kind + "'");
    }
}

void to_json(json& j, const FeatureSchema& s) {
    j = json{{"columns", s.columns}, {"target_column", s.target_column}};
}

void from_json(const json& j, FeatureSchema& s) {
    s.columns = j.at("columns").get<std::vector<Column>>();
    s.target_column = j.at("target_column").get<std::string>();
    s.validate();
}

void to_json(json& j, const BinningScheme& s) {
    j = json{{"bin_width", s.bin_width}, {"origin", s.origin}, {"num_bins", s.num_bins}};
}

void from_json(const json& j, BinningScheme& s) {
    s.bin_width = j.at("bin_width").get<double>();
    s.origin = j.value("origin", 0.0);
    s.num_bins = j.value("num_bins", 1);
}

void to_json(json& j, const Scaler& s) {
    j = json{{"means", s.means}, {"stddevs", s.stddevs}};
}

void from_json(const json& j, Scaler& s) {
    s.means = j.at("means").get<std::vector<double>>();
    s.stddevs = j.at("stddevs").get<std::vector<double>>();
}

void to_json(json& j, const GaussianComponent& c) {
    j = json{{"weight", c.weight}, {"mean", c.mean}, {"stddev", c.stddev}};
}

void from_json(const json& j, GaussianComponent& c) {
    c.weight = j.at("weight").get<double>();
    c.mean = j.at("mean").get<double>();
    c.stddev = j.at("stddev").get<double>();
}

void to_json(json& j, const GmmModel& m) {
    j = json{{"components", m.components},
             {"log_likelihood", m.log_likelihood},
             {"aic", m.aic},
             {"n_iterations", m.n_iterations},
             {"converged", m.converged}};
}

void from_json(const json& j, GmmModel& m) {
    m.components = j.at("components").get<std::vector<GaussianComponent>>();
    m.log_likelihood = j.at("log_likelihood").get<double>();
    m.aic = j.at("aic").get<double>();
    m.n_iterations = j.at("n_iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
}

void to_json(json& j, const SynthConfig& c) {
    j = json{{"k_neighbors", c.k_neighbors},
             {"relevance_threshold", c.relevance_threshold},
             {"pert", c.pert},
             {"alpha", c.alpha},
             {"region_sigma_from_rows", c.region_sigma_from_rows},
             {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
    c.k_neighbors = j.value("k_neighbors", c.k_neighbors);
    c.relevance_threshold = j.value("relevance_threshold", c.relevance_threshold);
    c.pert = j.value("pert", c.pert);
    c.alpha = j.value("alpha", c.alpha);
    c.region_sigma_from_rows = j.value("region_sigma_from_rows", c.region_sigma_from_rows);
    c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const MlpConfig& c) {
    j = json{{"hidden_layers", c.hidden_layers},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"max_epochs", c.max_epochs},
             {"patience", c.patience},
             {"validation_fraction", c.validation_fraction},
             {"optimizer", c.optimizer},
             {"seed", c.seed}};
}

void from_json(const json& j, MlpConfig& c) {
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const InputEncoder& e) {
    std::vector<std::string> kinds;
    for (auto k : e.kinds) kinds.push_back(k == ColumnKind::Numeric ? "numeric" : "categorical");
    j = json{{"kinds", kinds},
             {"cat_sizes", e.cat_sizes},
             {"scaler", e.scaler},
             {"width", e.width}};
}

void from_json(const json& j, InputEncoder& e) {
    e.kinds.clear();
    for (const auto& k : j.at("kinds"))
        e.kinds.push_back(k.get<std::string>() == "numeric" ? ColumnKind::Numeric
                                                            : ColumnKind::Categorical);
    e.cat_sizes = j.at("cat_sizes").get<std::vector<std::size_t>>();
    e.scaler = j.at("scaler").get<Scaler>();
    e.width = j.at("width").get<std::size_t>();
}

void to_json(json& j, const DenseLayer& l) {
    j = json{{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"biases", l.biases}};
}

void from_json(const json& j, DenseLayer& l) {
    l.in = j.at("in").get<std::size_t>();
    l.out = j.at("out").get<std::size_t>();
    l.weights = j.at("weights").get<std::vector<double>>();
    l.biases = j.at("biases").get<std::vector<double>>();
    if (l.weights.size() != l.in * l.out || l.biases.size() != l.out)
        throw Error("expert model: layer shape mismatch");
}

void to_json(json& j, const ExpertModel& m) {
    json history = json::array();
    for (const auto& h : m.training_history)
        history.push_back(json{{"train_loss", h.train_loss}, {"val_loss", h.val_loss}});
    j = json{{"config", m.config},
             {"encoder", m.encoder},
             {"layers", m.layers},
             {"region_mean", m.region_mean},
             {"region_stddev", m.region_stddev},
             {"best_val_loss", m.best_val_loss},
             {"training_history", history}};
}

void from_json(const json& j, ExpertModel& m) {
    m.config = j.at("config").get<MlpConfig>();
    m.encoder = j.at("encoder").get<InputEncoder>();
    m.layers = j.at("layers").get<std::vector<DenseLayer>>();
    m.region_mean = j.at("region_mean").get<double>();
    m.region_stddev = j.at("region_stddev").get<double>();
    m.best_val_loss = j.at("best_val_loss").get<double>();
    m.training_history.clear();
    for (const auto& h : j.at("training_history"))
        m.training_history.push_back(
            {h.at("train_loss").get<double>(), h.at("val_loss").get<double>()});
}

void to_json(json& j, const TtsaConfig& c) {
    j = json{{"epochs", c.epochs},
             {"corrupt_ratio", c.corrupt_ratio},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"stop_threshold", c.stop_threshold},
             {"seed", c.seed}};
}

void from_json(const json& j, TtsaConfig& c) {
    c.epochs = j.value("epochs", c.epochs);
    c.corrupt_ratio = j.value("corrupt_ratio", c.corrupt_ratio);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.stop_threshold = j.value("stop_threshold", c.stop_threshold);
    c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const AggregationWeights& w) {
    json history = json::array();
    for (const auto& h : w.history)
        history.push_back(json{{"normalized", h.normalized}, {"gap", h.gap}});
    j = json{{"raw", w.raw}, {"normalized", w.normalized}, {"history", history}};
}

void from_json(const json& j, AggregationWeights& w) {
    w.raw = j.at("raw").get<std::vector<double>>();
    w.normalized = j.at("normalized").get<std::vector<double>>();
    w.history.clear();
    for (const auto& h : j.at("history"))
        w.history.push_back({h.at("normalized").get<std::vector<double>>(),
                             h.at("gap").get<double>()});
}

void to_json(json& j, const MetricSet& m) {
    j = json{{"mae", m.mae},
             {"rmse", m.rmse},
             {"mape", m.mape},
             {"n", m.n},
             {"mape_skipped", m.mape_skipped}};
}

void from_json(const json& j, MetricSet& m) {
    m.mae = j.at("mae").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.mape = j.at("mape").get<double>();
    m.n = j.at("n").get<std::size_t>();
    m.mape_skipped = j.at("mape_skipped").get<std::size_t>();
}

void to_json(json& j, const DistributionReport& r) {
    json per_bin = json::object();
    for (const auto& [bin, m] : r.per_bin) per_bin[std::to_string(bin)] = m;
    j = json{{"overall", r.overall}, {"per_bin", per_bin}};
    j["many_shot"] = r.many_shot ? json(*r.many_shot) : json(nullptr);
    j["medium_shot"] = r.medium_shot ? json(*r.medium_shot) : json(nullptr);
    j["few_shot"] = r.few_shot ? json(*r.few_shot) : json(nullptr);
}

void to_json(json& j, const EvalReport& r) {
    j = json{{"balanced", r.balanced}, {"normal", r.normal}, {"inverse", r.inverse}};
}

void to_json(json& j, const SweepPoint& p) {
    j = json{{"ratio", p.ratio},
             {"balanced", p.balanced},
             {"normal", p.normal},
             {"inverse", p.inverse},
             {"mean", p.mean}};
}

json split_manifest(const SplitBundle& bundle, const BinningScheme& scheme) {
    auto bin_counts = [&](const TabularDataset& ds) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(scheme.num_bins), 0);
        for (double y : ds.targets) ++counts[static_cast<std::size_t>(scheme.index(y))];
        return counts;
    };
    return json{{"seed", bundle.seed},
                {"test_pool_fraction", bundle.test_pool_fraction},
                {"pool_policy", "shared pool, per-bin stratified withdrawal"},
                {"binning", scheme},
                {"bin_frequencies_train", bundle.bin_frequencies_train},
                {"bin_counts",
                 {{"train", bin_counts(bundle.train)},
                  {"balanced", bin_counts(bundle.test_balanced)},
                  {"normal", bin_counts(bundle.test_normal)},
                  {"inverse", bin_counts(bundle.test_inverse)}}},
                {"shortfall",
                 {{"balanced", bundle.shortfall_balanced},
                  {"normal", bundle.shortfall_normal},
                  {"inverse", bundle.shortfall_inverse}}}};
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path.string());
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_metric_row(std::ofstream& out, const std::string& dist, const std::string& bin,
                      const MetricSet& m) {
    out << dist << ',' << bin << ',' << fmt(m.mae) << ',' << fmt(m.rmse) << ',' << fmt(m.mape)
        << ',' << m.n << ',' << m.mape_skipped << '\n';
}

}  // namespace

void write_report_csv(const EvalReport& rep, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << "distribution,bin,mae,rmse,mape,n,mape_skipped\n";
    auto dump = [&](const std::string& name, const DistributionReport& r) {
        if (r.overall.n == 0) return;
        write_metric_row(out, name, "overall", r.overall);
        if (r.many_shot) write_metric_row(out, name, "many_shot", *r.many_shot);
        if (r.medium_shot) write_metric_row(out, name, "medium_shot", *r.medium_shot);
        if (r.few_shot) write_metric_row(out, name, "few_shot", *r.few_shot);
        for (const auto& [bin, m] : r.per_bin)
            write_metric_row(out, name, std::to_string(bin), m);
    };
    dump("balanced", rep.balanced);
    dump("normal", rep.normal);
    dump("inverse", rep.inverse);
}

void write_sweep_csv(const std::vector<SweepPoint>& sweep, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path.string());
    out << "ratio,distribution,mae,rmse,mape,n\n";
    for (const auto& pt : sweep) {
        auto row = [&](const std::string& dist, const MetricSet& m) {
            out << fmt(pt.ratio) << ',' << dist << ',' << fmt(m.mae) << ',' << fmt(m.rmse) << ','
                << fmt(m.mape) << ',' << m.n << '\n';
        };
        row("balanced", pt.balanced);
        row("normal", pt.normal);
        row("inverse", pt.inverse);
        row("mean", pt.mean);
    }
}

}  // namespace mati
