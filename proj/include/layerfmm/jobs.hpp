#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "layerfmm/config.hpp"

namespace layerfmm::cli {

/// Version stamped into every result file.
inline constexpr int kSchemaVersion = 1;

struct JobOutcome {
  /// False when a self-check job (fmm-bench, cdh-check) missed a threshold.
  bool passed = true;
  std::vector<std::filesystem::path> files;
};

/// Runs one job and writes its result files into out_dir (created if
/// needed). Files that depend on wall-clock time carry "timings" in their
/// name; all other files are byte-identical for identical config and seed.
JobOutcome run_job(const JobSpec& job, const std::filesystem::path& out_dir);

/// Parsed form of a result CSV: the schema line, header and data rows.
struct CsvTable {
  std::string schema;
  int version = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a CSV written by run_job; throws ValidationError on schema mismatch.
CsvTable read_result_csv(const std::filesystem::path& path);

}  // namespace layerfmm::cli
