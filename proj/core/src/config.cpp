#include "trapwalk/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "trapwalk/bridge.hpp"

namespace trapwalk::toml_lite {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw std::invalid_argument("toml: line " + std::to_string(line) + ": " +
                              what);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// strips a trailing comment, respecting quotes
std::string strip_comment(const std::string& s) {
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_basic) {
      if (c == '\\') ++i;
      else if (c == '"') in_basic = false;
    } else if (in_literal) {
      if (c == '\'') in_literal = false;
    } else if (c == '"') {
      in_basic = true;
    } else if (c == '\'') {
      in_literal = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

Value parse_scalar(const std::string& raw, std::size_t line);

Value parse_array(const std::string& raw, std::size_t line) {
  Value v;
  v.kind = Value::Kind::array;
  std::string inner = trim(raw.substr(1, raw.size() - 2));
  if (inner.empty()) return v;
  std::size_t start = 0;
  int depth = 0;
  bool in_basic = false, in_literal = false;
  for (std::size_t i = 0; i <= inner.size(); ++i) {
    const bool end = i == inner.size();
    const char c = end ? ',' : inner[i];
    if (!end && in_basic) {
      if (c == '\\') ++i;
      else if (c == '"') in_basic = false;
      continue;
    }
    if (!end && in_literal) {
      if (c == '\'') in_literal = false;
      continue;
    }
    if (!end && c == '"') { in_basic = true; continue; }
    if (!end && c == '\'') { in_literal = true; continue; }
    if (!end && c == '[') { ++depth; continue; }
    if (!end && c == ']') { --depth; continue; }
    if (c == ',' && depth == 0) {
      const std::string item = trim(inner.substr(start, i - start));
      if (!item.empty()) v.arr.push_back(parse_scalar(item, line));
      start = i + 1;
    }
  }
  return v;
}

Value parse_scalar(const std::string& raw, std::size_t line) {
  Value v;
  if (raw.empty()) fail(line, "empty value");
  if (raw.front() == '[' && raw.back() == ']') return parse_array(raw, line);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') fail(line, "unterminated string");
    v.kind = Value::Kind::string_;
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      char c = raw[i];
      if (c == '\\') {
        if (i + 2 >= raw.size()) fail(line, "dangling escape");
        const char e = raw[++i];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line, "unsupported escape");
        }
      }
      out.push_back(c);
    }
    v.str = out;
    return v;
  }
  if (raw.front() == '\'') {
    if (raw.size() < 2 || raw.back() != '\'')
      fail(line, "unterminated literal string");
    v.kind = Value::Kind::string_;
    v.str = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::bool_;
    v.b = raw == "true";
    return v;
  }
  const bool looks_float = raw.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t pos = 0;
    if (!looks_float) {
      v.kind = Value::Kind::int_;
      v.i = std::stoll(raw, &pos);
      if (pos != raw.size()) fail(line, "bad integer '" + raw + "'");
      v.f = static_cast<double>(v.i);
      return v;
    }
    v.kind = Value::Kind::float_;
    v.f = std::stod(raw, &pos);
    if (pos != raw.size()) fail(line, "bad number '" + raw + "'");
    return v;
  } catch (const std::invalid_argument&) {
    fail(line, "bad value '" + raw + "'");
  } catch (const std::out_of_range&) {
    fail(line, "number out of range '" + raw + "'");
  }
}

}  // namespace

double Value::as_double() const {
  switch (kind) {
    case Kind::int_: return static_cast<double>(i);
    case Kind::float_: return f;
    default: throw std::invalid_argument("toml: value is not a number");
  }
}

std::map<std::string, Value> parse(const std::string& text) {
  std::map<std::string, Value> out;
  std::istringstream is(text);
  std::string line, prefix;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      prefix = trim(line.substr(1, line.size() - 2));
      if (prefix.empty()) fail(lineno, "empty section name");
      prefix += '.';
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) fail(lineno, "empty key");
    if (out.count(prefix + key)) fail(lineno, "duplicate key '" + key + "'");
    out.emplace(prefix + key, parse_scalar(raw, lineno));
  }
  return out;
}

std::map<std::string, Value> parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("toml: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

}  // namespace trapwalk::toml_lite

namespace trapwalk::config {

namespace {

using toml_lite::Value;

const Value* find(const std::map<std::string, Value>& kv,
                  const std::string& key) {
  const auto it = kv.find(key);
  return it == kv.end() ? nullptr : &it->second;
}

std::vector<double> as_double_array(const Value& v, const std::string& key) {
  if (v.kind != Value::Kind::array)
    throw std::invalid_argument("config: '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& e : v.arr) out.push_back(e.as_double());
  return out;
}

rtrw::TrapModel model_from(const std::map<std::string, Value>& kv,
                           double beta) {
  std::string kind = "unit";
  if (const auto* v = find(kv, "model")) kind = v->str;

  if (kind == "unit") return rtrw::TrapModel::unit();
  if (kind == "two-point") {
    const auto* m1 = find(kv, "m1");
    const auto* m2 = find(kv, "m2");
    const auto* p = find(kv, "p");
    if (!m1 || !m2 || !p)
      throw std::invalid_argument("config: two-point model needs m1, m2, p");
    return rtrw::TrapModel::two_point(m1->as_double(), m2->as_double(),
                                      p->as_double());
  }
  if (kind == "exp-mean") {
    const auto* vals = find(kv, "means");
    const auto* probs = find(kv, "mean_probs");
    if (!vals || !probs)
      throw std::invalid_argument(
          "config: exp-mean model needs means, mean_probs");
    return rtrw::TrapModel::exp_mean(as_double_array(*vals, "means"),
                                     as_double_array(*probs, "mean_probs"));
  }
  if (kind == "tree") {
    std::string law_text;
    if (const auto* v = find(kv, "law_json")) {
      law_text = v->str;
    } else if (const auto* v2 = find(kv, "law_file")) {
      std::ifstream f(v2->str);
      if (!f)
        throw std::invalid_argument("config: cannot open law_file " + v2->str);
      std::ostringstream ss;
      ss << f.rdbuf();
      law_text = ss.str();
    } else {
      throw std::invalid_argument(
          "config: tree model needs law_json or law_file");
    }
    const auto law = offspring::OffspringLaw::from_json_text(law_text);
    return bridge::tree_trap_model(law, beta);
  }
  throw std::invalid_argument("config: unknown model '" + kind + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_toml_text(const std::string& text) {
  const auto kv = toml_lite::parse(text);
  ExperimentConfig cfg;

  if (const auto* v = find(kv, "suite")) cfg.suite = v->str;
  if (const auto* v = find(kv, "beta")) cfg.beta = v->as_double();
  if (const auto* v = find(kv, "horizon")) cfg.horizon = v->as_double();
  if (const auto* v = find(kv, "replicas")) cfg.replicas = v->i;
  if (const auto* v = find(kv, "seed")) {
    cfg.seed = static_cast<std::uint64_t>(v->i);
    cfg.seed_set = true;
  }
  if (const auto* v = find(kv, "output")) cfg.output = v->str;
  if (const auto* v = find(kv, "threads"))
    cfg.threads = static_cast<int>(v->i);
  if (const auto* v = find(kv, "betas"))
    cfg.betas = as_double_array(*v, "betas");
  if (const auto* v = find(kv, "delta")) cfg.delta = v->as_double();
  if (const auto* v = find(kv, "p_threshold"))
    cfg.p_threshold = v->as_double();
  if (const auto* v = find(kv, "centring")) cfg.centring = v->str;
  if (const auto* v = find(kv, "screen_env")) cfg.screen_env = v->b;
  if (const auto* v = find(kv, "beta_stable"))
    cfg.beta_stable = v->as_double();
  if (const auto* v = find(kv, "seeds_per_test"))
    cfg.seeds_per_test = static_cast<int>(v->i);

  cfg.model = model_from(kv, cfg.beta);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_toml_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_toml_text(ss.str());
}

void ExperimentConfig::validate() const {
  static const char* suites[] = {"verify-analytics", "speed",
                                 "annealed-clt",     "quenched-clt",
                                 "quenched-hitting", "einstein",
                                 "coupling",         "necessity",
                                 "print-regime"};
  bool known = false;
  for (const auto* s : suites) known = known || suite == s;
  if (!known) throw std::invalid_argument("config: unknown suite '" + suite + "'");
  if (!seed_set) throw std::invalid_argument("config: seed is mandatory");
  if (replicas < 1) throw std::invalid_argument("config: replicas < 1");
  if (centring != "environment" && centring != "deterministic")
    throw std::invalid_argument("config: centring must be environment or deterministic");

  const bool needs_bias_gt1 =
      suite == "speed" || suite == "annealed-clt" || suite == "quenched-clt" ||
      suite == "quenched-hitting" || suite == "coupling" ||
      suite == "necessity";
  if (needs_bias_gt1 && !(beta > 1.0))
    throw std::invalid_argument("config: suite '" + suite +
                                "' requires beta > 1");
  if (suite == "necessity") {
    if (model.kind != rtrw::TrapModel::Kind::tree)
      throw std::invalid_argument("config: necessity suite needs a tree model");
    const double mu = model.law->mean_mu();
    if (!(beta * beta * mu >= 1.0))
      throw std::invalid_argument(
          "config: necessity suite requires beta^2*mu >= 1");
    if (!(beta * mu < 1.0))
      throw std::invalid_argument("config: necessity suite requires beta*mu < 1");
  }
  if ((suite == "einstein" || suite == "verify-analytics" ||
       suite == "coupling" || suite == "print-regime") &&
      model.kind != rtrw::TrapModel::Kind::tree)
    throw std::invalid_argument("config: suite '" + suite +
                                "' needs a tree model");
}

std::string ExperimentConfig::to_json_text() const {
  nlohmann::json j{{"suite", suite},
                   {"model", model.name()},
                   {"beta", beta},
                   {"horizon", horizon},
                   {"replicas", replicas},
                   {"seed", seed},
                   {"output", output},
                   {"threads", threads},
                   {"betas", betas},
                   {"delta", delta},
                   {"p_threshold", p_threshold},
                   {"centring", centring},
                   {"screen_env", screen_env},
                   {"beta_stable", beta_stable},
                   {"seeds_per_test", seeds_per_test}};
  if (model.kind == rtrw::TrapModel::Kind::two_point)
    j["two_point"] = {{"m1", model.m1}, {"m2", model.m2}, {"p", model.p_m1}};
  if (model.kind == rtrw::TrapModel::Kind::exp_mean)
    j["exp_mean"] = {{"means", model.mean_values},
                     {"probs", model.mean_probs}};
  if (model.kind == rtrw::TrapModel::Kind::tree && model.law)
    j["law"] = nlohmann::json::parse(model.law->to_json_text());
  return j.dump();
}

std::uint64_t ExperimentConfig::hash() const {
  // hash the experiment identity only: worker count and output location do
  // not change the results and must not change the recorded hash
  auto j = nlohmann::json::parse(to_json_text());
  j.erase("threads");
  j.erase("output");
  const std::string s = j.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace trapwalk::config
