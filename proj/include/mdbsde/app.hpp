#pragma once

#include "mdbsde/config.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mdbsde {

/// Result of a command: one-line JSON record and whether the run passed.
struct RunResult {
    std::string record;
    bool passed = true;
    std::vector<std::pair<std::string, std::string>> files;  // (output name, contents) to write next to the record
};

/// Solves the configured problem with the configured method.
/// Record keys: config_hash, method, Y0, SE, runtime.
RunResult cmd_price(const RunConfig& config, int threads);

/// Names accepted by cmd_verify.
const std::vector<std::string>& suite_names();
/// Runs a verification suite. Throws ConfigError for an unknown suite or a config the suite cannot use.
RunResult cmd_verify(const std::string& suite, const RunConfig& config, int threads);

/// Simulates the batch and streams it as CSV; the record summarizes the batch.
RunResult cmd_simulate(const RunConfig& config, int threads, std::ostream& csv);

/// Record without its runtime field, the only field that varies between identical runs.
std::string strip_runtime(const std::string& record);

/// Writes dir/name through a temporary file and a rename, so a failed write leaves nothing behind.
/// Throws IoError.
void write_atomic(const std::filesystem::path& dir, const std::string& name,
                  const std::function<void(std::ostream&)>& fill);

}  // namespace mdbsde
