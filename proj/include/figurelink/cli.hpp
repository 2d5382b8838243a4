#pragma once

#include "figurelink/config.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace figurelink::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses argv (argv[0] is the program name) and runs one subcommand:
/// ingest, finegrain, stats, retrieval, zeroshot, census.
/// Returns 0 on success, 2 for usage and configuration errors, 1 for runtime faults.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// SHA-256 over "relative/path\t<sha256 of file>\n" for every regular file, sorted by path.
std::string tree_digest(const std::filesystem::path& root);

/// Digest of a file, or of a directory tree.
std::string input_digest(const std::filesystem::path& path);

struct Manifest {
  std::string command;
  const config::PipelineConfig* config = nullptr;
  std::map<std::string, std::string> inputs;   // name -> digest
  std::map<std::string, std::string> outputs;  // name -> digest
  nlohmann::ordered_json counters = nlohmann::ordered_json::object();
};

/// {"tool", "tool_version", "command", "config_hash", "inputs", "outputs", "counters"}.
/// Contains no timestamps, so identical runs produce identical bytes.
nlohmann::ordered_json manifest_json(const Manifest& manifest);

}  // namespace figurelink::cli
