#include "tensemb/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tensemb/error.hpp"
#include "tensemb/rng.hpp"

namespace tensemb {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open input for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string bytes = buf.str();
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return std::string("fnv1a64:") + hex;
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = "tensemb";
    j["version"] = std::string(kToolVersion);
    j["subcommand"] = m.subcommand;
    j["seed"] = m.seed;
    j["flags"] = nlohmann::json::object();
    for (const auto& [name, value] : m.flags) j["flags"][name] = value;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [path, digest] : m.inputs) {
        j["inputs"].push_back({{"path", path}, {"digest", digest}});
    }
    j["outputs"] = m.outputs;
    return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const std::string& artifact_path) {
    std::string path = artifact_path + ".manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open for writing: " + path);
    out << manifest_to_json(m);
    if (!out) throw data_error("write failed: " + path);
}

}  // namespace tensemb
