#include "slans/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "slans/error.hpp"

namespace slans {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

template <class E, std::size_t N>
E parse_enum(const std::string& key, const std::string& v, const std::array<E, N>& values) {
  std::string allowed;
  for (E e : values) {
    if (v == to_string(e)) return e;
    allowed += (allowed.empty() ? "" : "|") + std::string(to_string(e));
  }
  throw ConfigError("key '" + key + "': expected one of " + allowed + ", got '" + v + "'");
}

struct KeySpec {
  const char* section;
  void (*set)(RunConfig&, const std::string& key, const std::string& value);
  std::string (*get)(const RunConfig&);
};

#define SLANS_DOUBLE(sec, name)                                                                          \
  {#name,                                                                                                \
   {sec, [](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); }, \
    [](const RunConfig& c) { return fmt(c.name); }}}
#define SLANS_INT(sec, name)                                                                                    \
  {#name,                                                                                                       \
   {sec,                                                                                                        \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.name = static_cast<int>(parse_int(k, v)); }, \
    [](const RunConfig& c) { return std::to_string(c.name); }}}
#define SLANS_ENUM(sec, name, ...)                                                                  \
  {#name,                                                                                           \
   {sec,                                                                                            \
    [](RunConfig& c, const std::string& k, const std::string& v) {                                  \
      c.name = parse_enum(k, v, std::array{__VA_ARGS__});                                           \
    },                                                                                              \
    [](const RunConfig& c) { return std::string(to_string(c.name)); }}}

const std::vector<std::pair<std::string, KeySpec>>& key_table() {
  static const std::vector<std::pair<std::string, KeySpec>> table = {
      SLANS_DOUBLE("physics", nu),
      SLANS_DOUBLE("physics", T),
      SLANS_ENUM("physics", alpha_rule, AlphaRule::kConstant, AlphaRule::kTimesH),
      SLANS_DOUBLE("physics", alpha),
      SLANS_DOUBLE("physics", alpha_c),
      SLANS_DOUBLE("physics", f_x),
      SLANS_DOUBLE("physics", f_y),
      SLANS_ENUM("physics", g_mode, DiffusionMode::kZero, DiffusionMode::kAdditive, DiffusionMode::kMultiplicative),
      SLANS_DOUBLE("physics", g_scale),
      SLANS_ENUM("physics", initial, InitialCondition::kZero, InitialCondition::kVortex),
      SLANS_DOUBLE("physics", initial_scale),
      SLANS_INT("discretization", n),
      SLANS_DOUBLE("discretization", k),
      SLANS_ENUM("discretization", solver, SolverKind::kDirect, SolverKind::kIterative),
      SLANS_DOUBLE("discretization", tol),
      SLANS_INT("discretization", max_iter),
      SLANS_ENUM("discretization", convection, ConvectionForm::kStandard, ConvectionForm::kSkew),
      SLANS_INT("noise", noise_M),
      {"seed",
       {"noise", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      SLANS_ENUM("noise", noise_realization, NoiseRealization::kInterpolate, NoiseRealization::kProject),
      SLANS_INT("run", paths),
      SLANS_INT("run", stride),
      {"out",
       {"run", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
        [](const RunConfig& c) { return c.out; }}},
      SLANS_ENUM("run", regime, Regime::kNone, Regime::kAlphaLeCh, Regime::kAlphaFixed),
      SLANS_DOUBLE("run", regime_C),
      SLANS_DOUBLE("run", regime_L),
      SLANS_INT("run", ladder_levels),
      SLANS_DOUBLE("run", ladder_k_factor),
      {"check_filter",
       {"run", [](RunConfig& c, const std::string& k, const std::string& v) { c.check_filter = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.check_filter ? "true" : "false"); }}},
      SLANS_INT("run", workers),
  };
  return table;
}

#undef SLANS_DOUBLE
#undef SLANS_INT
#undef SLANS_ENUM

// Short spellings accepted on input.
const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a = {{"c", "alpha_c"}, {"M", "noise_M"}, {"g", "g_mode"}};
  return a;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& [name, spec] : key_table()) {
    if (name == key) return &spec;
  }
  return nullptr;
}

}  // namespace

const char* to_string(AlphaRule v) { return v == AlphaRule::kConstant ? "const" : "c_times_h"; }

const char* to_string(DiffusionMode v) {
  switch (v) {
    case DiffusionMode::kZero: return "zero";
    case DiffusionMode::kAdditive: return "additive";
    case DiffusionMode::kMultiplicative: return "multiplicative";
  }
  return "?";
}

const char* to_string(SolverKind v) { return v == SolverKind::kDirect ? "direct" : "iterative"; }

const char* to_string(Regime v) {
  switch (v) {
    case Regime::kNone: return "none";
    case Regime::kAlphaLeCh: return "alpha_le_Ch";
    case Regime::kAlphaFixed: return "alpha_fixed";
  }
  return "?";
}

const char* to_string(InitialCondition v) { return v == InitialCondition::kZero ? "zero" : "vortex"; }
const char* to_string(ConvectionForm v) { return v == ConvectionForm::kStandard ? "standard" : "skew"; }
const char* to_string(NoiseRealization v) { return v == NoiseRealization::kInterpolate ? "interpolate" : "project"; }

int RunConfig::num_steps() const {
  if (!(k > 0.0) || !(T > 0.0)) throw ConfigError("T and k must be positive");
  const double ratio = T / k;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("T/k must be an integer: T=" + fmt(T) + ", k=" + fmt(k) + ", T/k=" + fmt(ratio));
  }
  return static_cast<int>(steps);
}

double RunConfig::h_max() const { return std::sqrt(2.0) / n; }

double RunConfig::resolved_alpha() const { return alpha_rule == AlphaRule::kConstant ? alpha : alpha_c * h_max(); }

void validate_regime(Regime regime, double k, double h, double alpha, double C, double L) {
  std::ostringstream msg;
  msg.precision(17);
  if (regime == Regime::kAlphaLeCh) {
    if (!(C > 0.0)) throw RegimeViolation("alpha_le_Ch requires C > 0");
    if (alpha > C * h) {
      msg << "alpha <= C*h violated: alpha=" << alpha << " > C*h=" << C * h;
      throw RegimeViolation(msg.str());
    }
  } else if (regime == Regime::kAlphaFixed) {
    if (!(L > 0.0) || L >= 1.0) throw RegimeViolation("alpha_fixed requires L in (0, 1)");
    const double r = std::sqrt(k) / h;
    if (!(r < L)) {
      msg << "sqrt(k)/h < L violated: sqrt(k)/h=" << r << " >= L=" << L;
      throw RegimeViolation(msg.str());
    }
    if (L > alpha) {
      msg << "L <= alpha violated: L=" << L << " > alpha=" << alpha;
      throw RegimeViolation(msg.str());
    }
    if (alpha > 1.0) {
      msg << "alpha <= 1 violated: alpha=" << alpha;
      throw RegimeViolation(msg.str());
    }
  }
}

void validate_config(const RunConfig& c) {
  if (!(c.nu > 0.0)) throw ConfigError("nu must be positive");
  if (c.n < 1) throw ConfigError("n must be >= 1");
  if (c.noise_M < 1) throw ConfigError("noise_M must be >= 1");
  if (c.paths < 1) throw ConfigError("paths must be >= 1");
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (c.max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (c.ladder_levels < 1) throw ConfigError("ladder_levels must be >= 1");
  if (c.ladder_k_factor < 0.0 || c.ladder_k_factor > 1.0) throw ConfigError("ladder_k_factor must lie in [0, 1]");
  if (c.workers < 0) throw ConfigError("workers must be >= 0");
  if (c.alpha_rule == AlphaRule::kTimesH && !(c.alpha_c > 0.0)) throw ConfigError("alpha_c must be positive");
  c.num_steps();
  const double a = c.resolved_alpha();
  if (!(a > 0.0) || a > 1.0) throw ConfigError("alpha must lie in (0, 1], resolved alpha=" + fmt(a));
  validate_regime(c.regime, c.k, c.h_max(), a, c.regime_C, c.regime_L);
}

RunConfig parse_config(const std::string& text, std::vector<std::string>* applied_defaults) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "physics" && section != "discretization" && section != "noise" && section != "run") {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (const auto a = aliases().find(key); a != aliases().end()) key = a->second;
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(where + "unknown key '" + key + "'");
    if (!section.empty() && section != spec->section) {
      throw ConfigError(where + "key '" + key + "' belongs to [" + spec->section + "], not [" + section + "]");
    }
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      spec->set(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (applied_defaults) {
    applied_defaults->clear();
    for (const auto& [name, spec] : key_table()) {
      if (!seen.count(name)) applied_defaults->push_back(name);
    }
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path, std::vector<std::string>* applied_defaults) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), applied_defaults);
}

std::string render_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [name, spec] : key_table()) {
    if (section != spec.section) {
      section = spec.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += name + " = " + spec.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  // Output location and worker count do not change results.
  RunConfig c = config;
  c.out.clear();
  c.workers = 0;
  const std::string text = render_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace slans
