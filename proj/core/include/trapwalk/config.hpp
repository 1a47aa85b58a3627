#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trapwalk/rtrw.hpp"

namespace trapwalk::toml_lite {

// Small TOML subset: top-level (or [section]-prefixed) key = value pairs
// with strings, integers, floats, booleans and single-line arrays. Enough
// for flat experiment configs; not a general TOML implementation.
struct Value {
  enum class Kind { string_, int_, float_, bool_, array };
  Kind kind = Kind::string_;
  std::string str;
  std::int64_t i = 0;
  double f = 0.0;
  bool b = false;
  std::vector<Value> arr;

  double as_double() const;
};

std::map<std::string, Value> parse(const std::string& text);
std::map<std::string, Value> parse_file(const std::string& path);

}  // namespace trapwalk::toml_lite

namespace trapwalk::config {

// One experiment: which suite, on which trap model / offspring law, with an
// explicit seed (no wall-clock defaults anywhere).
struct ExperimentConfig {
  std::string suite;         // verify-analytics | speed | annealed-clt |
                             // quenched-clt | quenched-hitting | einstein |
                             // coupling | necessity | print-regime
  rtrw::TrapModel model;
  double beta = 2.0;
  double horizon = 1e4;      // clock horizon, step horizon, or hitting level
  std::int64_t replicas = 2000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output;        // output prefix; empty writes nothing
  int threads = 0;           // 0 = auto
  std::vector<double> betas; // einstein sweep grid
  double delta = 0.5;
  double p_threshold = 0.01;
  std::string centring = "environment";  // or "deterministic"
  bool screen_env = false;   // pre-screen the quenched environment for |J|
  double beta_stable = 0.0;  // necessity: companion stable bias (0 = skip)
  int seeds_per_test = 3;    // KS tests run on this many seeds, need >= 2

  static ExperimentConfig from_toml_text(const std::string& text);
  static ExperimentConfig from_toml_file(const std::string& path);

  void validate() const;  // throws std::invalid_argument
  std::string to_json_text() const;
  std::uint64_t hash() const;  // FNV-1a of the canonical JSON
};

}  // namespace trapwalk::config
