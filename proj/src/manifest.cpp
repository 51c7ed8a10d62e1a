#include "notetopics/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace notetopics {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["tool"] = manifest.tool;
    doc["version"] = manifest.version;
    doc["subcommand"] = manifest.subcommand;
    doc["parameters"] = manifest.parameters;
    doc["inputs"] = manifest.inputs;
    doc["outputs"] = manifest.outputs;
    if (!manifest.stats.is_null()) doc["stats"] = manifest.stats;
    doc["started_at"] = manifest.started_at;
    doc["finished_at"] = manifest.finished_at;
    write_file(path, doc.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw DataError("malformed manifest: " + path.string());
    }
    RunManifest manifest;
    try {
        manifest.tool = doc.at("tool").get<std::string>();
        manifest.version = doc.at("version").get<std::string>();
        manifest.subcommand = doc.at("subcommand").get<std::string>();
        manifest.parameters = doc.at("parameters");
        manifest.inputs = doc.at("inputs").get<std::map<std::string, std::string>>();
        manifest.outputs = doc.at("outputs").get<std::map<std::string, std::string>>();
        if (doc.contains("stats")) manifest.stats = doc["stats"];
        manifest.started_at = doc.value("started_at", "");
        manifest.finished_at = doc.value("finished_at", "");
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path.string() + ": " + e.what());
    }
    if (manifest.tool != kToolName) {
        throw DataError("manifest was not written by " + std::string(kToolName));
    }
    return manifest;
}

}  // namespace notetopics
