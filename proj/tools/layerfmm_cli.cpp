#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "layerfmm/config.hpp"
#include "layerfmm/jobs.hpp"

namespace {

enum Exit { ok = 0, threshold = 1, parse = 2, validation = 3, numerical = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered-media Helmholtz Green's functions and FMM"};
  std::string config_path;
  std::string out_dir = ".";
  std::optional<int> workers;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "job configuration file")->required();
  app.add_option("--out", out_dir, "directory for result files");
  app.add_option("--workers", workers, "worker threads (0 uses every core)");
  app.add_option("--tolerance", tolerance, "override the job tolerance");
  app.add_option("--seed", seed, "seed for randomized geometry");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : parse;
  }

  using namespace layerfmm;
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open " << config_path << "\n";
      return parse;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    cli::JobSpec job = cli::build_job(cli::parse_config(ss.str()));
    if (workers) job.workers = *workers;
    if (seed) job.seed = *seed;
    if (tolerance) cli::override_tolerance(job, *tolerance);
    if (job.workers < 0) throw cli::ValidationError("workers must be non-negative");
    const auto outcome = cli::run_job(job, out_dir);
    for (const auto& f : outcome.files) std::cout << f.string() << "\n";
    if (!outcome.passed) {
      std::cerr << "self-check failed; see " << out_dir << "\n";
      return threshold;
    }
    return ok;
  } catch (const cli::ParseError& e) {
    std::cerr << config_path << ": parse error: " << e.what() << "\n";
    return parse;
  } catch (const cli::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return validation;
  } catch (const DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return validation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical;
  }
}
