#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tensemb {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Record of one CLI invocation, written next to every output artifact as
// <artifact>.manifest.json. Identical manifests imply identical outputs.
struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> flags;              // resolved values
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::string> outputs;                      // artifact file names
    uint64_t seed = 0;
};

// "fnv1a64:<16 hex digits>" over the file bytes.
std::string file_digest(const std::string& path);

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& artifact_path);

}  // namespace tensemb
