#include "mati/fetch.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mati/serialize.hpp"

namespace mati {

namespace fs = std::filesystem;

namespace {

FeatureSchema abalone_schema() {
    FeatureSchema s;
    s.columns = {{"sex", ColumnKind::Categorical},
                 {"length", ColumnKind::Numeric},
                 {"diameter", ColumnKind::Numeric},
                 {"height", ColumnKind::Numeric},
                 {"whole_weight", ColumnKind::Numeric},
                 {"shucked_weight", ColumnKind::Numeric},
                 {"viscera_weight", ColumnKind::Numeric},
                 {"shell_weight", ColumnKind::Numeric}};
    s.target_column = "rings";
    return s;
}

FeatureSchema bike_schema() {
    FeatureSchema s;
    for (const char* name : {"season", "yr", "mnth", "hr", "holiday", "weekday",
                             "workingday", "weathersit", "temp", "atemp", "hum",
                             "windspeed"})
        s.columns.push_back({name, ColumnKind::Numeric});
    s.target_column = "cnt";
    return s;
}

std::size_t write_cb(char* data, std::size_t size, std::size_t nmemb, void* userp) {
    auto* out = static_cast<std::ofstream*>(userp);
    out->write(data, static_cast<std::streamsize>(size * nmemb));
    return out->good() ? size * nmemb : 0;
}

void download(const std::string& url, const fs::path& dest) {
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw Error("fetch: cannot write " + dest.string());

    CURL* curl = curl_easy_init();
    if (!curl) throw Error("fetch: curl initialization failed");
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_cb);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
    curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 60L);
    curl_easy_setopt(curl, CURLOPT_TIMEOUT, 600L);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    out.close();
    if (rc != CURLE_OK) {
        std::error_code ec;
        fs::remove(dest, ec);
        throw Error("fetch: download of " + url + " failed: " + curl_easy_strerror(rc));
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    return out;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("fetch: cannot open " + path.string());

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("fetch: digest initialization failed");
    }
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    std::string hexstr(2 * len, '0');
    for (unsigned int i = 0; i < len; ++i)
        std::snprintf(&hexstr[2 * i], 3, "%02x", digest[i]);
    return hexstr;
}

const std::vector<DatasetSpec>& known_datasets() {
    static const std::vector<DatasetSpec> specs{
        {"abalone",
         "https://raw.githubusercontent.com/jbrownlee/Datasets/master/abalone.csv",
         "eb2de13be807e9bb9ec4128b9c89b98ab23d7739121cfd17b7dde69b46ba7bf6",
         "abalone_raw.csv", 4177, abalone_schema()},
        {"bike-sharing",
         "https://raw.githubusercontent.com/udacity/deep-learning-v2-pytorch/master/"
         "project-bikesharing/Bike-Sharing-Dataset/hour.csv",
         "e03de4ee4ef4dc376ac6e04bf829673c6269e8eba5c60fa121640fa2f829504f",
         "bike_hour_raw.csv", 17379, bike_schema()}};
    return specs;
}

const DatasetSpec& dataset_spec(const std::string& id) {
    for (const auto& s : known_datasets())
        if (s.id == id) return s;
    throw Error("fetch: unknown dataset '" + id + "' (known: abalone, bike-sharing)");
}

std::size_t convert_abalone(const fs::path& raw, const fs::path& out_csv) {
    std::ifstream in(raw);
    if (!in) throw Error("fetch: cannot open " + raw.string());
    std::ofstream out(out_csv);
    if (!out) throw Error("fetch: cannot write " + out_csv.string());
    out << "sex,length,diameter,height,whole_weight,shucked_weight,"
           "viscera_weight,shell_weight,rings\n";
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_csv_line(line);
        if (fields.empty()) continue;
        if (fields.size() != 9)
            throw Error("fetch: abalone row " + std::to_string(rows + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected 9");
        for (std::size_t i = 0; i < fields.size(); ++i)
            out << (i ? "," : "") << fields[i];
        out << '\n';
        ++rows;
    }
    return rows;
}

std::size_t convert_bike(const fs::path& raw, const fs::path& out_csv) {
    std::ifstream in(raw);
    if (!in) throw Error("fetch: cannot open " + raw.string());
    std::string header;
    if (!std::getline(in, header)) throw Error("fetch: bike file is empty");
    const auto names = split_csv_line(header);

    const FeatureSchema schema = bike_schema();
    std::vector<std::string> wanted;
    for (const auto& c : schema.columns) wanted.push_back(c.name);
    wanted.push_back(schema.target_column);

    std::vector<std::size_t> positions;
    for (const auto& w : wanted) {
        auto it = std::find(names.begin(), names.end(), w);
        if (it == names.end())
            throw Error("fetch: bike header is missing column '" + w + "'");
        positions.push_back(static_cast<std::size_t>(it - names.begin()));
    }

    std::ofstream out(out_csv);
    if (!out) throw Error("fetch: cannot write " + out_csv.string());
    for (std::size_t i = 0; i < wanted.size(); ++i) out << (i ? "," : "") << wanted[i];
    out << '\n';

    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        const auto fields = split_csv_line(line);
        if (fields.empty()) continue;
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (positions[i] >= fields.size())
                throw Error("fetch: bike row " + std::to_string(rows + 2) + " is short");
            out << (i ? "," : "") << fields[positions[i]];
        }
        out << '\n';
        ++rows;
    }
    return rows;
}

FetchResult fetch_data(const std::string& id, const fs::path& data_dir,
                       const std::string& url_override) {
    const DatasetSpec& spec = dataset_spec(id);
    const fs::path raw_dir = data_dir / "raw";
    fs::create_directories(raw_dir);
    const fs::path raw = raw_dir / spec.raw_filename;

    FetchResult result;
    if (fs::exists(raw) && sha256_file(raw) == spec.sha256) {
        result.cache_hit = true;
    } else {
        const std::string url = url_override.empty() ? spec.default_url : url_override;
        download(url, raw);
        const std::string got = sha256_file(raw);
        if (got != spec.sha256) {
            std::error_code ec;
            fs::remove(raw, ec);
            throw Error("fetch: checksum mismatch for " + id + ": expected " +
                        spec.sha256 + ", got " + got);
        }
    }

    result.csv_path = data_dir / (spec.id + ".csv");
    result.schema_path = data_dir / (spec.id + ".schema.json");
    result.rows = spec.id == "abalone" ? convert_abalone(raw, result.csv_path)
                                       : convert_bike(raw, result.csv_path);
    if (result.rows != spec.expected_rows)
        throw Error("fetch: " + id + " has " + std::to_string(result.rows) +
                    " rows, expected " + std::to_string(spec.expected_rows));

    write_json_file(json(spec.schema), result.schema_path);
    return result;
}

}  // namespace mati
