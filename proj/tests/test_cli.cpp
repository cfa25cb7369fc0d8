#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "layerfmm/config.hpp"
#include "layerfmm/jobs.hpp"
#include "oracle_values.hpp"

using namespace layerfmm;
using namespace layerfmm::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("layerfmm_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
void check_parse_error(F f, int line, int column) {
  try {
    f();
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == line);
    CHECK(e.column == column);
  }
}

constexpr const char* kHalfSpace = R"(
# comment
[medium]
depths = 0
wavenumbers = 1 1.5
densities = 1 2

[job]
kind = green-eval
targets = 0.5 0.3; 1.0 -0.7
sources = 0 0.2
)";

}  // namespace

TEST_CASE("config grammar") {
  const auto cfg = parse_config(kHalfSpace);
  const Entry* e = cfg.find("medium", "wavenumbers");
  REQUIRE(e != nullptr);
  CHECK(e->value == "1 1.5");
  CHECK(e->line == 5);
  CHECK(e->column == 15);
  CHECK(cfg.find("job", "missing") == nullptr);

  check_parse_error([] { parse_config("[medium]\ndepths 0\n"); }, 2, 9);
  check_parse_error([] { parse_config("depths = 0\n"); }, 1, 1);
  check_parse_error([] { parse_config("[medium\n"); }, 1, 8);
  check_parse_error([] { parse_config("[a]\nx = 1\n  x = 2\n"); }, 3, 3);
  check_parse_error([] { parse_config("[a]\nx =   \n"); }, 2, 4);
}

TEST_CASE("malformed values report their position") {
  check_parse_error(
      [] {
        build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 abc\n[job]\nkind = pole-scan\n"));
      },
      3, 17);
  check_parse_error(
      [] {
        build_job(parse_config(
            "[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\nkind = green-eval\n"
            "targets = 1 2 3\nsources = 0 1\n"));
      },
      6, 11);
}

TEST_CASE("validation errors") {
  CHECK_THROWS_AS(build_job(parse_config("[job]\nkind = pole-scan\n")), ValidationError);
  CHECK_THROWS_AS(build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\n"
                                         "kind = nope\n")),
                  ValidationError);
  CHECK_THROWS_AS(build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\n"
                                         "kind = pole-scan\ntypo = 1\n")),
                  ValidationError);
  CHECK_THROWS_AS(build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1\n[job]\n"
                                         "kind = pole-scan\n")),
                  DomainError);
  CHECK_THROWS_AS(build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\n"
                                         "kind = green-eval\ntargets = 0 0\nsources = 0 1\n")),
                  ValidationError);
  CHECK_THROWS_AS(build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\n"
                                         "kind = pole-scan\n[extra]\na = 1\n")),
                  ValidationError);
}

TEST_CASE("condition rows as real pairs") {
  const auto job = build_job(parse_config(
      "[medium]\ndepths = 0\nwavenumbers = 1 1.5\nconditions = rows\n"
      "row.0.0 = 1 0 0 0 1 0 0 0\nrow.0.1 = 0 0 1 0 0 0 0.5 0\n[job]\nkind = pole-scan\n"));
  const auto ac = LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0});
  for (int j = 0; j < 2; ++j) {
    CHECK(job.medium->rows(0)[j].a_upper == ac.rows(0)[j].a_upper);
    CHECK(job.medium->rows(0)[j].b_upper == ac.rows(0)[j].b_upper);
    CHECK(job.medium->rows(0)[j].a_lower == ac.rows(0)[j].a_lower);
    CHECK(job.medium->rows(0)[j].b_lower == ac.rows(0)[j].b_lower);
  }
  check_parse_error(
      [] {
        build_job(parse_config("[medium]\ndepths = 0\nwavenumbers = 1 1.5\nconditions = rows\n"
                               "row.0.0 = 1 0 0\nrow.0.1 = 0 0 1 0 0 0 0.5 0\n[job]\nkind = pole-scan\n"));
      },
      5, 11);
}

TEST_CASE("tolerance override") {
  auto job = build_job(parse_config(kHalfSpace));
  override_tolerance(job, 1e-8);
  CHECK(job.quadrature.tolerance == 1e-8);
  CHECK_THROWS_AS(override_tolerance(job, 0.5), ValidationError);
}

TEST_CASE("green-eval writes values that re-parse") {
  const auto job = build_job(parse_config(kHalfSpace));
  const auto dir = scratch("green");
  const auto out = run_job(job, dir);
  CHECK(out.passed);
  const auto t = read_result_csv(dir / "green.csv");
  CHECK(t.schema == "green-eval");
  CHECK(t.version == kSchemaVersion);
  REQUIRE(t.rows.size() == 2);
  const auto& ref = oracle::kHalfSpace[1];
  CHECK(std::stod(t.rows[0][6]) == doctest::Approx(ref.green.real()).epsilon(1e-9));
  CHECK(std::stod(t.rows[0][7]) == doctest::Approx(ref.green.imag()).epsilon(1e-9));
  const auto s = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(s["schema_version"] == kSchemaVersion);
  CHECK(s["job"] == "green-eval");
}

TEST_CASE("pole-scan on a homogeneous medium gives an empty table") {
  const auto job = build_job(parse_config(
      "[medium]\ndepths = 0\nwavenumbers = 1 1\n[job]\nkind = pole-scan\n"));
  const auto dir = scratch("poles");
  CHECK(run_job(job, dir).passed);
  const auto t = read_result_csv(dir / "poles.csv");
  CHECK(t.rows.empty());
  CHECK(t.header.size() == 9);
}

TEST_CASE("convergence job output is reproducible") {
  const std::string text =
      "[medium]\ndepths = 0\nwavenumbers = 1 1.5\ndensities = 1 2\n[job]\nkind = convergence\n"
      "operators = ME M2L\nratios = 0.4\nmax_order = 40\n";
  const auto job = build_job(parse_config(text));
  const auto a = scratch("conv_a"), b = scratch("conv_b");
  run_job(job, a);
  run_job(job, b);
  const auto t = read_result_csv(a / "convergence.csv");
  const std::vector<std::string> header{"operator", "P", "error", "ratio", "predicted_slope",
                                        "measured_slope"};
  CHECK(t.header == header);
  CHECK(t.rows.size() == 80);
  CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
}

TEST_CASE("cdh-check self-check passes") {
  const auto job = build_job(parse_config(
      "[medium]\ndepths = 0\nwavenumbers = 1.3 1\nconditions = sound-soft\n[job]\n"
      "kind = cdh-check\nsamples = 200\ntarget = 0.3 0.5\nsource = 0 1\n"));
  const auto dir = scratch("cdh");
  const auto out = run_job(job, dir);
  CHECK(out.passed);
  const auto s = nlohmann::json::parse(slurp(dir / "cdh.json"));
  CHECK(s["d_minus_sign_violations"] == 0);
  CHECK(s["tails"].size() == 1);
}

TEST_CASE("fmm-bench separates deterministic results from timings") {
  const std::string text =
      "[medium]\ndepths = 0\nwavenumbers = 1 1.5\n[job]\nkind = fmm-bench\nsizes = 60 120\n"
      "seed = 9\n";
  auto job = build_job(parse_config(text));
  const auto a = scratch("fmm_a"), b = scratch("fmm_b");
  CHECK(run_job(job, a).passed);
  job.workers = 2;
  CHECK(run_job(job, b).passed);
  CHECK(slurp(a / "fmm.csv") == slurp(b / "fmm.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(fs::exists(a / "fmm_timings.csv"));
  const auto t = read_result_csv(a / "fmm.csv");
  CHECK(t.rows.size() == 2);
  CHECK(std::stod(t.rows[1][6]) < 1e-6);
}
