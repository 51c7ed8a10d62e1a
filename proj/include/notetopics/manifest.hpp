#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "notetopics/common.hpp"

namespace notetopics {

// One manifest per run, written next to the outputs. Re-running the recorded
// subcommand with the recorded parameters must reproduce every output hash.
struct RunManifest {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string subcommand;
    nlohmann::json parameters;                   // resolved values, including defaults
    std::map<std::string, std::string> inputs;   // path given on the command line -> hash
    std::map<std::string, std::string> outputs;  // file name relative to out dir -> hash
    nlohmann::json stats;                        // informational counters
    std::string started_at;
    std::string finished_at;
};

std::string utc_timestamp();

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace notetopics
