#pragma once

#include "infoprio/common.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace infoprio::cli {

/// Exit codes shared by every verb.
enum Exit : int { kOk = 0, kCheckFailed = 1, kConfigInvalid = 2, kRuntimeError = 3 };

std::string utc_timestamp();

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Write to a sibling temp file then rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

struct PointFile {
  std::vector<Vec> rows;
  std::vector<int> labels;  // empty unless a label column was read
};

/// CSV of real vectors, one per line. With `labelled`, the first column is an
/// integer label. Blank lines and lines starting with '#' are skipped.
PointFile read_point_csv(const std::filesystem::path& path, bool labelled);

/// Flat list of reals from a CSV (any layout).
std::vector<double> read_reals(const std::filesystem::path& path);

struct Manifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
  int exit_status = 0;
  std::string config_hash;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& m);

}  // namespace infoprio::cli
