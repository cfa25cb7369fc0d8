#include "layerfmm/jobs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "layerfmm/experiments.hpp"
#include "layerfmm/fmm.hpp"
#include "layerfmm/sigma.hpp"
#include "layerfmm/special.hpp"

namespace layerfmm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& schema,
            const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# schema=" << schema << " version=" << kSchemaVersion << "\n";
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, json j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json stamp(const JobSpec& job) {
  return {{"schema_version", kSchemaVersion}, {"job", to_string(job.kind)}};
}

json medium_json(const LayeredMedium& m) {
  json k = json::array();
  for (cplx v : m.wavenumbers()) k.push_back({v.real(), v.imag()});
  return {{"depths", m.depths()}, {"wavenumbers", k}};
}

json quadrature_json(const quad::SpectralContext& ctx, const quad::QuadratureSpec& q) {
  json poles = json::array();
  for (const auto& p : ctx.poles()) poles.push_back({{"location", p.location}, {"side", p.side}});
  return {{"tolerance", q.tolerance},
          {"k_split", ctx.k_split(q)},
          {"lambda_max", q.lambda_max},
          {"pole_mode", q.pole_mode == quad::PoleMode::corrected ? "corrected" : "perturbed"},
          {"half_line", q.half_line},
          {"use_cdh", q.use_cdh},
          {"cdh_aperture", q.cdh_aperture},
          {"poles", poles}};
}

JobOutcome green_eval(const JobSpec& job, const fs::path& dir) {
  const quad::SpectralContext ctx(*job.medium);
  const auto& tg = job.green.targets;
  const auto& sr = job.green.sources;
  for (Point x : tg) {
    for (Point xs : sr) {
      if (x == xs) throw ValidationError("target and source coincide");
    }
  }
  const int n = int(tg.size() * sr.size());
  std::vector<cplx> g(n), r(n);
  fmm::parallel_for(n, job.workers, [&](int i) {
    const Point x = tg[i / sr.size()];
    const Point xs = sr[i % sr.size()];
    r[i] = quad::reaction_field(ctx, x, xs, job.quadrature);
    g[i] = r[i];
    const int t = layer_of(ctx.medium(), x.y);
    if (t == layer_of(ctx.medium(), xs.y)) {
      g[i] += special::free_space_green(ctx.medium().k_real(t), norm(x - xs));
    }
  });
  JobOutcome out;
  out.files.push_back(dir / "green.csv");
  CsvWriter csv(out.files.back(), "green-eval",
                {"target", "source", "x", "y", "xs", "ys", "green_re", "green_im",
                 "reaction_re", "reaction_im"});
  for (int i = 0; i < n; ++i) {
    const std::size_t a = i / sr.size(), b = i % sr.size();
    csv.row({std::to_string(a), std::to_string(b), num(tg[a].x), num(tg[a].y),
             num(sr[b].x), num(sr[b].y), num(g[i].real()), num(g[i].imag()),
             num(r[i].real()), num(r[i].imag())});
  }
  json s = stamp(job);
  s["medium"] = medium_json(ctx.medium());
  s["quadrature"] = quadrature_json(ctx, job.quadrature);
  s["pairs"] = n;
  out.files.push_back(dir / "summary.json");
  write_json(out.files.back(), s);
  return out;
}

json series_json(const experiments::ConvergenceSeries& c) {
  return {{"operator", c.op},
          {"ratio", c.ratio},
          {"predicted_slope", c.predicted_slope},
          {"measured_slope", c.measured_slope},
          {"relative_deviation", std::abs(c.measured_slope / c.predicted_slope - 1.0)},
          {"fit_first", c.fit_first},
          {"fit_last", c.fit_last},
          {"min_error", c.min_error}};
}

JobOutcome convergence(const JobSpec& job, const fs::path& dir) {
  const quad::SpectralContext ctx(*job.medium);
  const auto& cfg = job.convergence.config;
  const auto series = experiments::run_convergence(ctx, cfg);
  JobOutcome out;
  out.files.push_back(dir / "convergence.csv");
  CsvWriter csv(out.files.back(), "convergence",
                {"operator", "P", "error", "ratio", "predicted_slope", "measured_slope"});
  json s = stamp(job);
  s["medium"] = medium_json(ctx.medium());
  s["series"] = json::array();
  for (const auto& c : series) {
    for (std::size_t i = 0; i < c.orders.size(); ++i) {
      csv.row({c.op, std::to_string(c.orders[i]), num(c.errors[i]), num(c.ratio),
               num(c.predicted_slope), num(c.measured_slope)});
    }
    s["series"].push_back(series_json(c));
  }
  if (job.convergence.governance) {
    const auto g = experiments::polarized_governance(ctx, job.convergence.governance_factor, cfg);
    s["governance"] = {{"euclidean_distance", g.euclidean_distance},
                       {"polarized_near", g.polarized_near},
                       {"polarized_far", g.polarized_far},
                       {"near", series_json(g.near)},
                       {"far", series_json(g.far)},
                       {"ordered", g.ordered}};
  }
  out.files.push_back(dir / "summary.json");
  write_json(out.files.back(), s);
  return out;
}

JobOutcome pole_scan(const JobSpec& job, const fs::path& dir) {
  const auto& m = *job.medium;
  const auto poles = job.poles.hi > 0.0
                         ? sigma::find_real_poles(m, job.poles.lo, job.poles.hi,
                                                  job.poles.side_eps)
                         : sigma::find_real_poles(m, job.poles.side_eps);
  JobOutcome out;
  out.files.push_back(dir / "poles.csv");
  CsvWriter csv(out.files.back(), "pole-scan",
                {"pole", "location", "side", "t", "s", "dir_t", "dir_s", "residue_re",
                 "residue_im"});
  for (std::size_t i = 0; i < poles.size(); ++i) {
    for (const auto& [id, res] : poles[i].residues) {
      csv.row({std::to_string(i), num(poles[i].location), std::to_string(poles[i].side),
               std::to_string(id.t), std::to_string(id.s), to_string(id.dir_t),
               to_string(id.dir_s), num(res.real()), num(res.imag())});
    }
  }
  json s = stamp(job);
  s["medium"] = medium_json(m);
  s["poles"] = poles.size();
  out.files.push_back(dir / "summary.json");
  write_json(out.files.back(), s);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Least-squares slope of log(time) against log(N).
double fitted_exponent(const std::vector<int>& n, const std::vector<double>& t) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = double(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(double(n[i]));
    const double y = std::log(t[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

JobOutcome fmm_bench(const JobSpec& job, const fs::path& dir) {
  const quad::SpectralContext ctx(*job.medium);
  const auto& f = job.fmm;
  fmm::FmmConfig cfg;
  cfg.tolerance = f.tolerance;
  cfg.leaf_size = f.leaf_size;
  cfg.workers = job.workers;
  JobOutcome out;
  out.files.push_back(dir / "fmm.csv");
  CsvWriter csv(out.files.back(), "fmm-bench",
                {"N", "order", "trees", "m2l_count", "m2l_matrices", "near_rules",
                 "rel_error"});
  const fs::path tpath = dir / "fmm_timings.csv";
  CsvWriter tcsv(tpath, "fmm-bench-timings",
                 {"N", "seconds_fmm", "seconds_setup", "seconds_far", "seconds_near",
                  "seconds_direct"});
  std::vector<double> times;
  json s = stamp(job);
  s["medium"] = medium_json(ctx.medium());
  s["tolerance"] = f.tolerance;
  s["seed"] = job.seed;
  s["runs"] = json::array();
  for (int n : f.sizes) {
    std::mt19937_64 rng(job.seed + std::uint64_t(n));
    std::uniform_real_distribution<double> ux(f.x0, f.x1), uy(f.y0, f.y1), uq(-1.0, 1.0);
    auto draw = [&] {
      for (;;) {
        const Point p{ux(rng), uy(rng)};
        try {
          layer_of(ctx.medium(), p.y);
          return p;
        } catch (const BoundaryTieError&) {
        }
      }
    };
    std::vector<expansions::Source> src;
    std::vector<Point> tg;
    for (int i = 0; i < n; ++i) {
      const Point p = draw();
      src.push_back({p, cplx(uq(rng), uq(rng))});
    }
    for (int i = 0; i < n; ++i) tg.push_back(draw());
    auto t0 = std::chrono::steady_clock::now();
    const auto r = fmm::evaluate_all(ctx, src, tg, cfg);
    const double tf = seconds_since(t0);
    times.push_back(tf);
    double err = std::nan("");
    double td = 0.0;
    if (f.direct) {
      t0 = std::chrono::steady_clock::now();
      const auto d = fmm::direct_sum(ctx, src, tg, 1e-10, job.workers);
      td = seconds_since(t0);
      double num2 = 0.0, den2 = 0.0;
      for (int i = 0; i < n; ++i) {
        num2 += std::norm(r.values[i] - d[i]);
        den2 += std::norm(d[i]);
      }
      err = std::sqrt(num2 / den2);
      if (!(err <= f.tolerance)) out.passed = false;
    }
    const auto& st = r.stats;
    csv.row({std::to_string(n), std::to_string(st.order), std::to_string(st.trees),
             std::to_string(st.m2l_count), std::to_string(st.m2l_matrices),
             std::to_string(st.near_rules), f.direct ? num(err) : "nan"});
    tcsv.row({std::to_string(n), num(tf), num(st.seconds_setup), num(st.seconds_far),
              num(st.seconds_near), num(td)});
    json run{{"N", n}, {"order", st.order}};
    run["rel_error"] = f.direct ? json(err) : json(nullptr);
    s["runs"].push_back(run);
  }
  s["passed"] = out.passed;
  out.files.push_back(tpath);
  out.files.push_back(dir / "summary.json");
  write_json(out.files.back(), s);
  json t{{"schema_version", kSchemaVersion}, {"job", "fmm-bench-timings"}};
  t["fitted_exponent"] =
      f.sizes.size() >= 2 ? json(fitted_exponent(f.sizes, times)) : json(nullptr);
  out.files.push_back(dir / "fmm_timings.json");
  write_json(out.files.back(), t);
  return out;
}

JobOutcome cdh_check(const JobSpec& job, const fs::path& dir) {
  const auto& c = job.cdh;
  const quad::CdHMap map{c.beta, c.k};
  std::mt19937_64 rng(job.seed);
  // Sample the box Re in (0, 4k / cos beta], |Im| <= 3k sin beta, kept in D+/D-.
  std::uniform_real_distribution<double> ure(0.0, 4.0 * c.k / std::cos(c.beta));
  std::uniform_real_distribution<double> uim(0.0, 3.0 * c.k);
  double round_trip = 0.0;
  int violations = 0;
  for (int i = 0; i < c.samples;) {
    const cplx w{ure(rng), uim(rng)};
    if (!quad::in_d_plus(map, w)) continue;
    round_trip = std::max(round_trip, std::abs(quad::cdh_phi(map, quad::cdh_phi_inv(map, w)) - w));
    ++i;
  }
  for (int i = 0; i < c.samples;) {
    const cplx z{ure(rng), -uim(rng)};
    if (!quad::in_d_minus(map, z)) continue;
    const cplx p = quad::cdh_phi(map, z);
    if (!(p.real() > 0.0 && p.imag() > 0.0)) ++violations;
    ++i;
  }
  const double vertex = std::abs(quad::cdh_phi(map, c.k) - c.k * std::cos(c.beta));
  JobOutcome out;
  json s = stamp(job);
  s["beta"] = c.beta;
  s["k"] = c.k;
  s["samples"] = c.samples;
  s["seed"] = job.seed;
  s["round_trip_max"] = round_trip;
  s["d_minus_sign_violations"] = violations;
  s["vertex_error"] = vertex;
  out.passed = round_trip < 1e-12 && violations == 0 && vertex < 1e-14 * c.k;
  if (job.medium) {
    const quad::SpectralContext ctx(*job.medium);
    const int t = layer_of(ctx.medium(), c.target.y);
    const int sl = layer_of(ctx.medium(), c.source.y);
    s["tails"] = json::array();
    for (const auto& id : admissible_components(t, sl, ctx.medium().num_interfaces())) {
      const auto a = quad::tail_integral_cdh(ctx, id, c.target, c.source, job.quadrature);
      const auto b = quad::tail_integral_real(ctx, id, c.target, c.source, job.quadrature);
      const cplx full = quad::evaluate_component(ctx, id, c.target, c.source, job.quadrature);
      const double diff = std::abs(a.value - b.value);
      const double scale = std::max(std::abs(full), std::abs(b.value));
      const bool ok = diff <= 1e-9 * scale;
      out.passed = out.passed && ok;
      s["tails"].push_back({{"t", id.t},
                            {"s", id.s},
                            {"dir_t", to_string(id.dir_t)},
                            {"dir_s", to_string(id.dir_s)},
                            {"cdh", {a.value.real(), a.value.imag()}},
                            {"real_axis", {b.value.real(), b.value.imag()}},
                            {"component", {full.real(), full.imag()}},
                            {"difference", diff},
                            {"used_cdh", a.used_cdh},
                            {"panels_cdh", a.panels},
                            {"panels_real_axis", b.panels},
                            {"passed", ok}});
    }
  }
  s["passed"] = out.passed;
  out.files.push_back(dir / "cdh.json");
  write_json(out.files.back(), s);
  return out;
}

}  // namespace

JobOutcome run_job(const JobSpec& job, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  switch (job.kind) {
    case JobKind::green_eval: return green_eval(job, out_dir);
    case JobKind::convergence: return convergence(job, out_dir);
    case JobKind::pole_scan: return pole_scan(job, out_dir);
    case JobKind::fmm_bench: return fmm_bench(job, out_dir);
    case JobKind::cdh_check: return cdh_check(job, out_dir);
  }
  return {};
}

CsvTable read_result_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0) {
    throw ValidationError(path.string() + ": missing schema line");
  }
  const auto sp = line.find(" version=");
  if (sp == std::string::npos) throw ValidationError(path.string() + ": missing version");
  t.schema = line.substr(9, sp - 9);
  t.version = std::stoi(line.substr(sp + 9));
  if (t.version != kSchemaVersion) throw ValidationError(path.string() + ": unknown version");
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": missing header");
  t.header = split(line);
  while (std::getline(in, line)) {
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError(path.string() + ": ragged row");
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace layerfmm::cli
