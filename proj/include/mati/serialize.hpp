#pragma once

#include <filesystem>

#include <json.hpp>

#include "mati/dataset.hpp"
#include "mati/eval.hpp"
#include "mati/expert.hpp"
#include "mati/gmm.hpp"
#include "mati/synth.hpp"
#include "mati/ttsa.hpp"

// JSON bindings for every persisted artifact. Doubles survive a
// serialize/parse round trip bit-exactly.

namespace mati {

using json = nlohmann::ordered_json;

void to_json(json& j, const Column& c);
void from_json(const json& j, Column& c);
void to_json(json& j, const FeatureSchema& s);
void from_json(const json& j, FeatureSchema& s);

void to_json(json& j, const BinningScheme& s);
void from_json(const json& j, BinningScheme& s);

void to_json(json& j, const Scaler& s);
void from_json(const json& j, Scaler& s);

void to_json(json& j, const GaussianComponent& c);
void from_json(const json& j, GaussianComponent& c);
void to_json(json& j, const GmmModel& m);
void from_json(const json& j, GmmModel& m);

void to_json(json& j, const SynthConfig& c);
void from_json(const json& j, SynthConfig& c);

void to_json(json& j, const MlpConfig& c);
void from_json(const json& j, MlpConfig& c);
void to_json(json& j, const InputEncoder& e);
void from_json(const json& j, InputEncoder& e);
void to_json(json& j, const DenseLayer& l);
void from_json(const json& j, DenseLayer& l);
void to_json(json& j, const ExpertModel& m);
void from_json(const json& j, ExpertModel& m);

void to_json(json& j, const TtsaConfig& c);
void from_json(const json& j, TtsaConfig& c);
void to_json(json& j, const AggregationWeights& w);
void from_json(const json& j, AggregationWeights& w);

void to_json(json& j, const MetricSet& m);
void from_json(const json& j, MetricSet& m);
void to_json(json& j, const DistributionReport& r);
void to_json(json& j, const EvalReport& r);
void to_json(json& j, const SweepPoint& p);

json split_manifest(const SplitBundle& bundle, const BinningScheme& scheme);

void write_json_file(const json& j, const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);

// Flat CSV view of an EvalReport: one row per distribution x bin.
void write_report_csv(const EvalReport& rep, const std::filesystem::path& path);

// Plot-ready sweep data: one row per ratio x distribution.
void write_sweep_csv(const std::vector<SweepPoint>& sweep, const std::filesystem::path& path);

}  // namespace mati
