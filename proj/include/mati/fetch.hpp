#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mati/dataset.hpp"

namespace mati {

// A fetchable public dataset: where to get it, how to verify it, and how
// its raw form maps onto the CSV+schema layout the pipeline consumes.
struct DatasetSpec {
    std::string id;            // "abalone" or "bike-sharing"
    std::string default_url;   // public mirror of the UCI archive file
    std::string sha256;        // pinned content checksum of the raw file
    std::string raw_filename;  // name under <data_dir>/raw/
    std::size_t expected_rows = 0;
    FeatureSchema schema;
};

const std::vector<DatasetSpec>& known_datasets();
const DatasetSpec& dataset_spec(const std::string& id);

struct FetchResult {
    std::filesystem::path csv_path;
    std::filesystem::path schema_path;
    std::size_t rows = 0;
    bool cache_hit = false;  // raw file was already present and verified
};

// Downloads (https or file URL), verifies the pinned SHA-256, converts to
// the pipeline's CSV layout and writes the schema JSON next to it. A raw
// file already in the cache with a matching checksum skips the download.
// url_override replaces the default mirror; the checksum pin still applies.
FetchResult fetch_data(const std::string& id, const std::filesystem::path& data_dir,
                       const std::string& url_override = "");

std::string sha256_file(const std::filesystem::path& path);

// Raw-to-pipeline converters, exposed for testing.
std::size_t convert_abalone(const std::filesystem::path& raw,
                            const std::filesystem::path& out_csv);
std::size_t convert_bike(const std::filesystem::path& raw,
                         const std::filesystem::path& out_csv);

}  // namespace mati
