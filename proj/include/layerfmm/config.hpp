#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "layerfmm/experiments.hpp"
#include "layerfmm/medium.hpp"
#include "layerfmm/quadrature.hpp"

namespace layerfmm::cli {

/// Malformed config text; carries a 1-based source position.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line, int column);
  int line;
  int column;
};

/// Well-formed config whose content is inconsistent or incomplete.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string value;
  int line = 0;
  int column = 0;  // column where the value starts
};

/// Sections of key = value lines. Keys keep their order of appearance.
struct ConfigFile {
  std::map<std::string, std::map<std::string, Entry>> sections;

  const Entry* find(const std::string& section, const std::string& key) const;
};

/// Grammar: '#' or ';' start comments, "[name]" opens a section, every other
/// non-blank line is "key = value" inside a section.
ConfigFile parse_config(std::string_view text);

enum class JobKind { green_eval, convergence, pole_scan, fmm_bench, cdh_check };

const char* to_string(JobKind k);

struct GreenEvalJob {
  std::vector<Point> targets;
  std::vector<Point> sources;
};

struct ConvergenceJob {
  experiments::ConvergenceConfig config;
  bool governance = false;
  double governance_factor = 1.5;
};

struct PoleScanJob {
  /// Zero selects the default interval.
  double lo = 0.0;
  double hi = 0.0;
  double side_eps = 1e-4;
};

struct FmmBenchJob {
  std::vector<int> sizes{500, 1000, 2000, 4000};
  double tolerance = 1e-6;
  int leaf_size = 20;
  bool direct = true;
  /// Sources and targets are drawn uniformly from [x0, x1] x [y0, y1].
  double x0 = -1.0, x1 = 1.0, y0 = -1.0, y1 = 1.0;
};

struct CdhCheckJob {
  double beta = 0.6;
  double k = 1.0;
  int samples = 1000;
  Point target{0.3, 0.5};
  Point source{0.0, 0.5};
};

struct JobSpec {
  JobKind kind = JobKind::green_eval;
  std::optional<LayeredMedium> medium;
  quad::QuadratureSpec quadrature;
  GreenEvalJob green;
  ConvergenceJob convergence;
  PoleScanJob poles;
  FmmBenchJob fmm;
  CdhCheckJob cdh;
  std::uint64_t seed = 0;
  int workers = 0;
};

/// Interprets a parsed config. Malformed values raise ParseError at their
/// position; missing, unknown or inconsistent entries raise ValidationError.
JobSpec build_job(const ConfigFile& cfg);

/// Overrides the job's controlling tolerance: the FMM target for fmm-bench,
/// the quadrature tolerance otherwise.
void override_tolerance(JobSpec& job, double tol);

}  // namespace layerfmm::cli
