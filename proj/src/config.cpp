#include "cmj/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace cmj {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE)
    throw InvalidParams(what + ": not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE)
    throw InvalidParams(what + ": not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE)
    throw InvalidParams(what + ": not an unsigned integer: '" + s + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& part : split(s, ','))
    out.push_back(parse_double(part, what));
  return out;
}

// "w0,w1,..." optionally followed by ";tail=zero" or ";tail=const"
WeightSeq parse_weights(const std::string& s) {
  std::string list = s;
  WeightSeq::Tail tail = WeightSeq::Tail::Zero;
  const std::size_t semi = s.find(';');
  if (semi != std::string::npos) {
    list = trim(s.substr(0, semi));
    const std::string opt = trim(s.substr(semi + 1));
    if (opt == "tail=zero")
      tail = WeightSeq::Tail::Zero;
    else if (opt == "tail=const")
      tail = WeightSeq::Tail::Const;
    else
      throw InvalidParams("weights: expected ';tail=zero' or ';tail=const', got '" + opt + "'");
  }
  return WeightSeq::explicit_prefix(parse_double_list(list, "weights"), tail);
}

Dislocation parse_dislocation(const std::string& s) {
  if (s == "uniform-binary") return Dislocation::uniform_binary();
  const std::size_t colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string head = s.substr(0, colon);
    const std::string rest = s.substr(colon + 1);
    if (head == "deterministic")
      return Dislocation::deterministic(parse_double_list(rest, "dislocation"));
    if (head == "quantile")
      return Dislocation::quantile_table(parse_double_list(rest, "dislocation"));
  }
  throw InvalidParams("dislocation: expected 'uniform-binary', 'deterministic:v1,..,vb' or "
                      "'quantile:q0,..,qK', got '" + s + "'");
}

LifetimeLaw::Component parse_lifetime_component(const std::string& s) {
  const std::size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw InvalidParams("lifetime: expected 'exp:RATE' or 'deterministic:D', got '" + s + "'");
  const std::string head = s.substr(0, colon);
  const double param = parse_double(s.substr(colon + 1), "lifetime");
  if (head == "exp")
    return {LifetimeLaw::Component::Form::Exponential, param, 1.0};
  if (head == "deterministic")
    return {LifetimeLaw::Component::Form::Deterministic, param, 1.0};
  throw InvalidParams("lifetime: unknown component form '" + head + "'");
}

// "exp:1.0" | "deterministic:2.0" | "mix:0.5*exp:1.0+0.5*deterministic:2.0"
LifetimeLaw parse_lifetime(const std::string& s) {
  if (s.rfind("mix:", 0) == 0) {
    std::vector<LifetimeLaw::Component> comps;
    for (const std::string& part : split(s.substr(4), '+')) {
      const std::size_t star = part.find('*');
      if (star == std::string::npos)
        throw InvalidParams("lifetime: mixture components look like WEIGHT*FORM:PARAM");
      LifetimeLaw::Component c = parse_lifetime_component(trim(part.substr(star + 1)));
      c.weight = parse_double(trim(part.substr(0, star)), "lifetime weight");
      comps.push_back(c);
    }
    return LifetimeLaw::mixture(std::move(comps));
  }
  return LifetimeLaw::mixture({parse_lifetime_component(s)});
}

struct KeyVal {
  std::string value;
  int line = 0;
  bool used = false;
};

using Section = std::map<std::string, KeyVal>;

std::string take(Section& sec, const std::string& key, bool required, int section_line) {
  auto it = sec.find(key);
  if (it == sec.end()) {
    if (required)
      throw ConfigError(section_line, "missing required key '" + key + "'");
    return {};
  }
  it->second.used = true;
  return it->second.value;
}

int line_of(const Section& sec, const std::string& key, int fallback) {
  auto it = sec.find(key);
  return it == sec.end() ? fallback : it->second.line;
}

}  // namespace

FamilyModel family_from_keys(const std::string& kind,
                             const std::map<std::string, std::string>& keys) {
  auto get = [&](const char* k) -> const std::string* {
    auto it = keys.find(k);
    return it == keys.end() ? nullptr : &it->second;
  };
  auto require = [&](const char* k) -> const std::string& {
    const std::string* v = get(k);
    if (!v) throw InvalidParams(std::string("family '") + kind + "' requires key '" + k + "'");
    return *v;
  };
  auto allow_only = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : keys) {
      (void)v;
      bool ok = false;
      for (const char* a : allowed)
        if (k == a) ok = true;
      if (!ok)
        throw InvalidParams("family '" + kind + "' does not accept key '" + k + "'");
    }
  };

  if (kind == "general-pa") {
    allow_only({"weights", "beta", "rho"});
    if (get("weights")) {
      if (get("beta") || get("rho"))
        throw InvalidParams("general-pa: give either 'weights' or 'beta'+'rho', not both");
      return make_family(GeneralPAParams{parse_weights(require("weights"))});
    }
    const double beta = parse_double(require("beta"), "beta");
    const double rho = parse_double(require("rho"), "rho");
    return make_family(GeneralPAParams{WeightSeq::affine(beta, rho)});
  }
  if (kind == "mary-search") {
    allow_only({"m"});
    return make_family(MarySearchParams{static_cast<int>(parse_int(require("m"), "m"))});
  }
  if (kind == "median-bst") {
    allow_only({"ell"});
    return make_family(MedianBSTParams{static_cast<int>(parse_int(require("ell"), "ell"))});
  }
  if (kind == "fragmentation") {
    allow_only({"b", "dislocation"});
    const int b = static_cast<int>(parse_int(require("b"), "b"));
    return make_family(FragmentationParams{b, parse_dislocation(require("dislocation"))});
  }
  if (kind == "homogeneous") {
    allow_only({"b", "lifetime"});
    const double b = parse_double(require("b"), "b");
    return make_family(HomogeneousParams{b, parse_lifetime(require("lifetime"))});
  }
  throw InvalidParams("unknown family kind '" + kind +
                      "' (expected general-pa, mary-search, median-bst, fragmentation or "
                      "homogeneous)");
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, Section> sections;
  std::map<std::string, int> section_lines;
  {
    std::istringstream in(text);
    std::string raw;
    std::string current;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const std::size_t hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const std::string line = trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(lineno, "malformed section header '" + line + "'");
        current = trim(line.substr(1, line.size() - 2));
        if (current != "family" && current != "schedule" && current != "experiment")
          throw ConfigError(lineno, "unknown section '" + current + "'");
        section_lines.emplace(current, lineno);
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(lineno, "expected 'key = value', got '" + line + "'");
      if (current.empty())
        throw ConfigError(lineno, "key outside of any [section]");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      auto [it, inserted] = sections[current].emplace(key, KeyVal{value, lineno, false});
      (void)it;
      if (!inserted) throw ConfigError(lineno, "duplicate key '" + key + "'");
    }
  }

  for (const char* required : {"family", "schedule", "experiment"})
    if (!sections.count(required))
      throw ConfigError(0, std::string("missing [") + required + "] section");

  Section& fam_sec = sections["family"];
  Section& sch_sec = sections["schedule"];
  Section& exp_sec = sections["experiment"];
  const int fam_line = section_lines["family"];
  const int sch_line = section_lines["schedule"];
  const int exp_line = section_lines["experiment"];

  // [family]
  const std::string kind = take(fam_sec, "kind", true, fam_line);
  std::map<std::string, std::string> fam_keys;
  for (auto& [k, v] : fam_sec) {
    if (k == "kind") continue;
    fam_keys[k] = v.value;
    v.used = true;
  }
  ExperimentConfig cfg{[&] {
    try {
      return family_from_keys(kind, fam_keys);
    } catch (const InvalidParams& e) {
      // attribute the error to the key the message names, when possible
      int line = line_of(fam_sec, "kind", fam_line);
      const std::string msg = e.what();
      for (const auto& [k, kv] : fam_sec)
        if (msg.find("'" + k + "'") != std::string::npos) line = kv.line;
      throw ConfigError(line, msg);
    }
  }()};
  cfg.family_label = kind;
  cfg.params_label = cfg.family.describe();

  // [schedule]
  const std::string regime = take(sch_sec, "regime", true, sch_line);
  try {
    if (regime == "weak") {
      cfg.schedule = RegimeSchedule::weakly();
    } else if (regime == "super") {
      cfg.schedule = RegimeSchedule::supercritical(
          parse_double(take(sch_sec, "c", true, sch_line), "c"));
    } else if (regime == "strong") {
      cfg.schedule = RegimeSchedule::strongly();
    } else if (regime == "fixed") {
      cfg.schedule =
          RegimeSchedule::fixed(parse_double(take(sch_sec, "p", true, sch_line), "p"));
    } else {
      throw ConfigError(line_of(sch_sec, "regime", sch_line),
                        "regime must be one of weak, super, strong, fixed");
    }
  } catch (const InvalidParams& e) {
    throw ConfigError(sch_line, e.what());
  }

  // [experiment]
  try {
    cfg.n_values = parse_double_list(take(exp_sec, "n_values", true, exp_line), "n_values");
    cfg.replicates =
        static_cast<int>(parse_int(take(exp_sec, "replicates", true, exp_line), "replicates"));
    const std::string seed = take(exp_sec, "master_seed", false, exp_line);
    if (!seed.empty()) cfg.master_seed = parse_u64(seed, "master_seed");
    const std::string mode = take(exp_sec, "mode", false, exp_line);
    if (mode == "full")
      cfg.mode = SimMode::Full;
    else if (!mode.empty() && mode != "streaming")
      throw InvalidParams("mode must be 'streaming' or 'full'");
    const std::string outputs = take(exp_sec, "outputs", false, exp_line);
    if (!outputs.empty()) cfg.outputs_dir = outputs;
    const std::string par = take(exp_sec, "parallelism", false, exp_line);
    if (!par.empty()) cfg.parallelism = static_cast<int>(parse_int(par, "parallelism"));
  } catch (const InvalidParams& e) {
    throw ConfigError(exp_line, e.what());
  }

  for (const auto& [name, sec] : sections)
    for (const auto& [key, kv] : sec)
      if (!kv.used) throw ConfigError(kv.line, "unknown key '" + key + "' in [" + name + "]");

  // Semantic checks: thresholds increasing, replicate count, p_n in range.
  try {
    if (cfg.replicates < 1) throw InvalidParams("replicates must be >= 1");
    if (cfg.n_values.empty()) throw InvalidParams("n_values must be non-empty");
    for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
      if (!(cfg.n_values[i] >= 1.0)) throw InvalidParams("every n must be at least 1");
      if (i > 0 && !(cfg.n_values[i] > cfg.n_values[i - 1]))
        throw InvalidParams("n_values must be strictly increasing");
      cfg.schedule.p_of_n(cfg.n_values[i]);
    }
  } catch (const InvalidParams& e) {
    throw ConfigError(line_of(exp_sec, "n_values", exp_line), e.what());
  }

  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace cmj
