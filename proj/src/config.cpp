#include "layerfmm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace layerfmm::cli {

namespace {

std::string position_suffix(int line, int column) {
  return " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")";
}

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view trim(std::string_view s, int& offset) {
  std::size_t b = 0;
  while (b < s.size() && is_blank(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && is_blank(s[e - 1])) --e;
  offset += int(b);
  return s.substr(b, e - b);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

struct Token {
  std::string_view text;
  int column = 0;
};

/// Splits on blanks and commas; ';' separates groups (points, rows).
std::vector<std::vector<Token>> tokenize(const Entry& e) {
  std::vector<std::vector<Token>> groups(1);
  const std::string& s = e.value;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_blank(s[i]) || s[i] == ',') {
      ++i;
    } else if (s[i] == ';') {
      groups.emplace_back();
      ++i;
    } else {
      std::size_t j = i;
      while (j < s.size() && !is_blank(s[j]) && s[j] != ',' && s[j] != ';') ++j;
      groups.back().push_back({std::string_view(s).substr(i, j - i), e.column + int(i)});
      i = j;
    }
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

std::vector<Token> flat_tokens(const Entry& e) {
  std::vector<Token> out;
  for (auto& g : tokenize(e)) out.insert(out.end(), g.begin(), g.end());
  return out;
}

double to_double(const Entry& e, const Token& t) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError("expected a real number, got '" + std::string(t.text) + "'",
                     e.line, t.column);
  }
  return v;
}

long long to_integer(const Entry& e, const Token& t) {
  long long v = 0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("expected an integer, got '" + std::string(t.text) + "'", e.line,
                     t.column);
  }
  return v;
}

/// Reads entries of one section and remembers which keys were consumed.
class SectionReader {
 public:
  SectionReader(const ConfigFile& cfg, std::string name) : name_(std::move(name)) {
    auto it = cfg.sections.find(name_);
    if (it != cfg.sections.end()) entries_ = &it->second;
  }

  bool present() const { return entries_ != nullptr; }

  const Entry* get(const std::string& key) {
    used_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  const Entry& require(const std::string& key) {
    const Entry* e = get(key);
    if (!e) throw ValidationError("missing key '" + key + "' in [" + name_ + "]");
    return *e;
  }

  std::optional<double> real(const std::string& key) {
    const Entry* e = get(key);
    if (!e) return std::nullopt;
    return single_real(*e);
  }

  std::optional<long long> integer(const std::string& key) {
    const Entry* e = get(key);
    if (!e) return std::nullopt;
    auto toks = flat_tokens(*e);
    if (toks.size() != 1) throw single_value_error(*e);
    return to_integer(*e, toks[0]);
  }

  std::optional<bool> boolean(const std::string& key) {
    const Entry* e = get(key);
    if (!e) return std::nullopt;
    auto toks = flat_tokens(*e);
    if (toks.size() == 1) {
      if (toks[0].text == "true" || toks[0].text == "yes" || toks[0].text == "1") return true;
      if (toks[0].text == "false" || toks[0].text == "no" || toks[0].text == "0") return false;
    }
    throw ParseError("expected true or false", e->line, e->column);
  }

  std::optional<std::string> word(const std::string& key) {
    const Entry* e = get(key);
    if (!e) return std::nullopt;
    auto toks = flat_tokens(*e);
    if (toks.size() != 1) throw single_value_error(*e);
    return std::string(toks[0].text);
  }

  std::vector<double> reals(const Entry& e) {
    std::vector<double> out;
    for (const auto& t : flat_tokens(e)) out.push_back(to_double(e, t));
    return out;
  }

  std::vector<Point> points(const Entry& e) {
    std::vector<Point> out;
    for (const auto& g : tokenize(e)) {
      if (g.size() != 2) {
        throw ParseError("expected points as 'x y' groups separated by ';'", e.line,
                         g.front().column);
      }
      out.push_back({to_double(e, g[0]), to_double(e, g[1])});
    }
    return out;
  }

  Point point(const Entry& e) {
    auto pts = points(e);
    if (pts.size() != 1) throw ParseError("expected a single point 'x y'", e.line, e.column);
    return pts[0];
  }

  /// Every key not read by the job raises a ValidationError, so typos surface.
  void reject_unused() const {
    if (!entries_) return;
    for (const auto& [key, e] : *entries_) {
      if (!used_.count(key)) {
        throw ValidationError("unknown key '" + key + "' in [" + name_ + "]" +
                              position_suffix(e.line, 1));
      }
    }
  }

 private:
  double single_real(const Entry& e) {
    auto toks = flat_tokens(e);
    if (toks.size() != 1) throw single_value_error(e);
    return to_double(e, toks[0]);
  }

  static ParseError single_value_error(const Entry& e) {
    return ParseError("expected a single value", e.line, e.column);
  }

  std::string name_;
  const std::map<std::string, Entry>* entries_ = nullptr;
  std::set<std::string> used_;
};

LayeredMedium build_medium(SectionReader& r) {
  if (!r.present()) throw ValidationError("missing [medium] section");
  const Entry& de = r.require("depths");
  const Entry& ke = r.require("wavenumbers");
  std::vector<double> depths = r.reals(de);
  std::vector<double> ks = r.reals(ke);
  const std::string cond = r.word("conditions").value_or("acoustic");
  const Entry* dens = r.get("densities");
  if (cond != "acoustic" && dens) {
    throw ValidationError("densities apply only to acoustic conditions" +
                          position_suffix(dens->line, dens->column));
  }
  if (cond == "acoustic") {
    std::vector<double> rho;
    if (dens) rho = r.reals(*dens);
    if (dens && rho.size() != ks.size()) {
      throw ValidationError("expected one density per layer" +
                            position_suffix(dens->line, dens->column));
    }
    return LayeredMedium::acoustic(depths, ks, rho);
  }
  if (cond == "sound-soft") {
    if (depths.size() != 1 || ks.size() != 2) {
      throw ValidationError("sound-soft conditions need one interface and two wavenumbers");
    }
    return LayeredMedium::sound_soft(depths[0], ks[0], ks[1]);
  }
  if (cond == "rows") {
    std::vector<InterfaceRows> rows(depths.size());
    for (std::size_t l = 0; l < depths.size(); ++l) {
      for (int j = 0; j < 2; ++j) {
        const Entry& e = r.require("row." + std::to_string(l) + "." + std::to_string(j));
        auto v = r.reals(e);
        if (v.size() != 8) {
          throw ParseError("a condition row needs 8 reals (4 complex pairs)", e.line,
                           e.column);
        }
        rows[l][j] = {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}};
      }
    }
    std::vector<cplx> kc(ks.begin(), ks.end());
    return LayeredMedium(depths, kc, rows);
  }
  throw ValidationError("unknown conditions '" + cond +
                        "' (acoustic, sound-soft or rows)");
}

void read_quadrature(SectionReader& r, quad::QuadratureSpec& q) {
  if (auto v = r.real("tolerance")) q.tolerance = *v;
  if (auto v = r.real("k_split")) q.k_split = *v;
  if (auto v = r.real("lambda_max")) q.lambda_max = *v;
  if (auto v = r.word("pole_mode")) {
    if (*v == "corrected") {
      q.pole_mode = quad::PoleMode::corrected;
    } else if (*v == "perturbed") {
      q.pole_mode = quad::PoleMode::perturbed;
    } else {
      throw ValidationError("pole_mode must be corrected or perturbed");
    }
  }
  if (auto v = r.boolean("half_line")) q.half_line = *v;
  if (auto v = r.boolean("use_cdh")) q.use_cdh = *v;
  if (auto v = r.real("cdh_aperture")) q.cdh_aperture = *v;
  if (auto v = r.real("perturbation")) q.perturbation = *v;
  if (auto v = r.integer("max_panels")) q.max_panels = int(*v);
  if (!(q.tolerance > 1e-14 && q.tolerance < 1e-2)) {
    throw ValidationError("quadrature tolerance must lie in (1e-14, 1e-2)");
  }
  if (q.max_panels < 1) throw ValidationError("max_panels must be positive");
}

std::vector<std::string> words(const Entry& e) {
  std::vector<std::string> out;
  for (const auto& t : flat_tokens(e)) out.emplace_back(t.text);
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& what, int line_, int column_)
    : std::runtime_error(what + position_suffix(line_, column_)),
      line(line_),
      column(column_) {}

const Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  if (s == sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

ConfigFile parse_config(std::string_view text) {
  ConfigFile cfg;
  std::string current;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::size_t hash = raw.find_first_of("#;");
    std::string_view content = raw;
    if (hash != std::string_view::npos) {
      // ';' inside a value separates groups; only a leading one is a comment.
      std::size_t first = raw.find_first_not_of(" \t\r");
      if (raw[hash] == '#' || (first != std::string_view::npos && hash == first)) {
        content = raw.substr(0, hash);
      }
    }
    int col = 1;
    std::string_view body = trim(content, col);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') {
        throw ParseError("unterminated section header", line_no, col + int(body.size()));
      }
      int ncol = col + 1;
      std::string_view name = trim(body.substr(1, body.size() - 2), ncol);
      if (!valid_name(name)) throw ParseError("invalid section name", line_no, ncol);
      current = std::string(name);
      if (cfg.sections.count(current)) {
        throw ParseError("duplicate section [" + current + "]", line_no, col);
      }
      cfg.sections[current];
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", line_no, col + int(body.size()));
    }
    int kcol = col;
    std::string_view key = trim(body.substr(0, eq), kcol);
    if (!valid_name(key)) throw ParseError("invalid key", line_no, kcol);
    if (current.empty()) throw ParseError("key outside of any section", line_no, kcol);
    int vcol = col + int(eq) + 1;
    std::string_view value = trim(body.substr(eq + 1), vcol);
    if (value.empty()) throw ParseError("missing value", line_no, vcol);
    auto& sec = cfg.sections[current];
    if (sec.count(std::string(key))) {
      throw ParseError("duplicate key '" + std::string(key) + "'", line_no, kcol);
    }
    sec[std::string(key)] = {std::string(value), line_no, vcol};
  }
  return cfg;
}

const char* to_string(JobKind k) {
  switch (k) {
    case JobKind::green_eval: return "green-eval";
    case JobKind::convergence: return "convergence";
    case JobKind::pole_scan: return "pole-scan";
    case JobKind::fmm_bench: return "fmm-bench";
    case JobKind::cdh_check: return "cdh-check";
  }
  return "";
}

JobSpec build_job(const ConfigFile& cfg) {
  static const std::set<std::string> known{"medium", "job", "quadrature"};
  for (const auto& [name, entries] : cfg.sections) {
    if (!known.count(name)) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw ValidationError("unknown section [" + name + "]" +
                            (line ? position_suffix(line, 1) : std::string()));
    }
  }
  JobSpec job;
  SectionReader med(cfg, "medium");
  SectionReader jr(cfg, "job");
  SectionReader qr(cfg, "quadrature");
  if (!jr.present()) throw ValidationError("missing [job] section");

  const auto kind_word = jr.word("kind");
  if (!kind_word) throw ValidationError("missing key 'kind' in [job]");
  const std::string kind = *kind_word;
  static const std::map<std::string, JobKind> kinds{
      {"green-eval", JobKind::green_eval},   {"convergence", JobKind::convergence},
      {"pole-scan", JobKind::pole_scan},     {"fmm-bench", JobKind::fmm_bench},
      {"cdh-check", JobKind::cdh_check}};
  auto it = kinds.find(kind);
  if (it == kinds.end()) throw ValidationError("unknown job kind '" + kind + "'");
  job.kind = it->second;

  if (job.kind != JobKind::cdh_check || med.present()) job.medium = build_medium(med);
  read_quadrature(qr, job.quadrature);
  if (auto v = jr.integer("seed")) job.seed = std::uint64_t(*v);
  if (auto v = jr.integer("workers")) job.workers = int(*v);

  const auto& m = job.medium;
  switch (job.kind) {
    case JobKind::green_eval: {
      job.green.targets = jr.points(jr.require("targets"));
      job.green.sources = jr.points(jr.require("sources"));
      for (const auto* set : {&job.green.targets, &job.green.sources}) {
        for (Point p : *set) {
          try {
            layer_of(*m, p.y);
          } catch (const BoundaryTieError&) {
            throw ValidationError("point on an interface at y = " + std::to_string(p.y));
          }
        }
      }
      break;
    }
    case JobKind::convergence: {
      auto& c = job.convergence.config;
      if (const Entry* e = jr.get("operators")) c.operators = words(*e);
      if (const Entry* e = jr.get("ratios")) c.ratios = jr.reals(*e);
      if (auto v = jr.integer("max_order")) c.max_order = int(*v);
      if (auto v = jr.integer("directions")) c.directions = int(*v);
      if (auto v = jr.integer("fit_min_order")) c.fit_min_order = int(*v);
      if (auto v = jr.real("plateau_factor")) c.plateau_factor = *v;
      if (auto v = jr.boolean("governance")) job.convergence.governance = *v;
      if (auto v = jr.real("governance_factor")) job.convergence.governance_factor = *v;
      c.tolerance = job.quadrature.tolerance;
      for (const auto& op : c.operators) {
        if (op != "ME" && op != "LE" && op != "M2L" && op != "L2L") {
          throw ValidationError("unknown operator '" + op + "'");
        }
      }
      for (double r : c.ratios) {
        if (!(r > 0.0 && r < 1.0)) throw ValidationError("ratios must lie in (0, 1)");
      }
      if (c.max_order < 2 || c.max_order > 200) {
        throw ValidationError("max_order must lie in [2, 200]");
      }
      if (c.directions < 1) throw ValidationError("directions must be positive");
      break;
    }
    case JobKind::pole_scan: {
      if (auto v = jr.real("lo")) job.poles.lo = *v;
      if (auto v = jr.real("hi")) job.poles.hi = *v;
      if (auto v = jr.real("side_eps")) job.poles.side_eps = *v;
      if ((job.poles.lo > 0.0) != (job.poles.hi > 0.0) ||
          (job.poles.hi > 0.0 && !(job.poles.lo < job.poles.hi))) {
        throw ValidationError("pole scan needs 0 < lo < hi, or neither");
      }
      break;
    }
    case JobKind::fmm_bench: {
      auto& f = job.fmm;
      if (const Entry* e = jr.get("sizes")) {
        f.sizes.clear();
        for (const auto& t : flat_tokens(*e)) f.sizes.push_back(int(to_integer(*e, t)));
      }
      if (auto v = jr.real("tolerance")) f.tolerance = *v;
      if (auto v = jr.integer("leaf_size")) f.leaf_size = int(*v);
      if (auto v = jr.boolean("direct")) f.direct = *v;
      if (const Entry* e = jr.get("box")) {
        auto b = jr.reals(*e);
        if (b.size() != 4) throw ParseError("box needs x0 x1 y0 y1", e->line, e->column);
        f.x0 = b[0];
        f.x1 = b[1];
        f.y0 = b[2];
        f.y1 = b[3];
      }
      if (f.sizes.empty()) throw ValidationError("sizes must not be empty");
      for (int n : f.sizes) {
        if (n < 1) throw ValidationError("sizes must be positive");
      }
      if (!(f.tolerance >= 1e-12 && f.tolerance <= 1e-2)) {
        throw ValidationError("fmm tolerance must lie in [1e-12, 1e-2]");
      }
      if (!(f.x0 < f.x1 && f.y0 < f.y1)) throw ValidationError("empty box");
      if (f.leaf_size < 1) throw ValidationError("leaf_size must be positive");
      break;
    }
    case JobKind::cdh_check: {
      auto& c = job.cdh;
      if (auto v = jr.real("beta")) c.beta = *v;
      if (auto v = jr.real("k")) c.k = *v;
      if (auto v = jr.integer("samples")) c.samples = int(*v);
      if (const Entry* e = jr.get("target")) c.target = jr.point(*e);
      if (const Entry* e = jr.get("source")) c.source = jr.point(*e);
      if (!(c.beta > 0.0 && c.beta < pi / 2)) throw ValidationError("beta must lie in (0, pi/2)");
      if (!(c.k > 0.0)) throw ValidationError("k must be positive");
      if (c.samples < 1) throw ValidationError("samples must be positive");
      if (m) {
        try {
          layer_of(*m, c.target.y);
          layer_of(*m, c.source.y);
        } catch (const BoundaryTieError&) {
          throw ValidationError("cdh-check points must not lie on an interface");
        }
      }
      break;
    }
  }
  if (job.workers < 0) throw ValidationError("workers must be non-negative");
  med.reject_unused();
  jr.reject_unused();
  qr.reject_unused();
  return job;
}

void override_tolerance(JobSpec& job, double tol) {
  if (job.kind == JobKind::fmm_bench) {
    if (!(tol >= 1e-12 && tol <= 1e-2)) {
      throw ValidationError("fmm tolerance must lie in [1e-12, 1e-2]");
    }
    job.fmm.tolerance = tol;
    return;
  }
  if (!(tol > 1e-14 && tol < 1e-2)) {
    throw ValidationError("quadrature tolerance must lie in (1e-14, 1e-2)");
  }
  job.quadrature.tolerance = tol;
  job.convergence.config.tolerance = tol;
}

}  // namespace layerfmm::cli
