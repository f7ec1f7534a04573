#pragma once

// Batch front end: one subcommand per analysis module, JSON model files in,
// JSON or CSV reports out.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gamelab::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;

const std::vector<std::string>& subcommands();

struct RunConfig {
  std::string subcommand;
  std::string input_path;
  std::string format = "json";  // json | csv
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<double> tolerance;
  std::string output_path;      // empty: stdout
};

struct RunResult {
  int exit_code = kExitOk;
  std::string output;  // rendered report (success only)
  std::string error;   // error document (failure only)
};

/// Runs a subcommand on an already parsed document.
RunResult run_document(const RunConfig& config, const nlohmann::json& input);

/// Reads and parses config.input_path, then runs.
RunResult run(const RunConfig& config);

/// Command-line entry point: parses flags, runs, writes the report to stdout
/// or --output and the error document to stderr. Returns the exit code.
int main_entry(int argc, char** argv);

}  // namespace gamelab::cli
