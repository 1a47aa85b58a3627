// Reproducible experiment runner. Each subcommand assembles an
// ExperimentConfig (seed always explicit) and executes one suite; `run`
// loads a TOML config instead. Exit codes: 0 all checks pass, 1 check
// failures, 2 config errors, 3 runtime errors.

#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "trapwalk/bridge.hpp"
#include "trapwalk/experiments.hpp"
#include "trapwalk/version.hpp"

namespace {

using trapwalk::config::ExperimentConfig;

struct CommonOpts {
  std::string law_json;
  std::string law_file;
  std::string model = "unit";
  double m1 = 1.0, m2 = 3.0, p = 0.5;
  double beta = 2.0;
  double horizon = 1e4;
  std::int64_t replicas = 2000;
  std::int64_t seed = -1;
  std::string out;
  int threads = 0;
  std::vector<double> betas;
  double delta = 0.5;
  std::string centring = "environment";
  double beta_stable = 0.0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_law) {
  cmd->add_option("--seed", o.seed, "master seed (required)")->required();
  cmd->add_option("--beta", o.beta, "walk bias");
  cmd->add_option("--horizon", o.horizon, "clock/step horizon or hitting level");
  cmd->add_option("--replicas", o.replicas, "replica count");
  cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
  cmd->add_option("--out", o.out, "output file prefix");
  if (needs_law) {
    cmd->add_option("--law-json", o.law_json,
                    "offspring law JSON, e.g. '{\"pmf\":{\"0\":0.6,\"2\":0.4}}'");
    cmd->add_option("--law-file", o.law_file, "path to offspring law JSON");
  } else {
    cmd->add_option("--model", o.model, "trap model: unit|two-point|exp-mean|tree");
    cmd->add_option("--law-json", o.law_json, "offspring law JSON (tree model)");
    cmd->add_option("--law-file", o.law_file, "offspring law file (tree model)");
    cmd->add_option("--m1", o.m1, "two-point holding time 1");
    cmd->add_option("--m2", o.m2, "two-point holding time 2");
    cmd->add_option("--p", o.p, "two-point probability of m1");
  }
}

std::string law_text(const CommonOpts& o) {
  if (!o.law_json.empty()) return o.law_json;
  if (!o.law_file.empty()) {
    std::ifstream f(o.law_file);
    if (!f) throw std::invalid_argument("cannot open " + o.law_file);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
  throw std::invalid_argument("a law is required: pass --law-json or --law-file");
}

ExperimentConfig build_config(const std::string& suite, const CommonOpts& o,
                              bool needs_law) {
  ExperimentConfig cfg;
  cfg.suite = suite;
  cfg.beta = o.beta;
  cfg.horizon = o.horizon;
  cfg.replicas = o.replicas;
  cfg.seed = static_cast<std::uint64_t>(o.seed);
  cfg.seed_set = o.seed >= 0;
  cfg.output = o.out;
  cfg.threads = o.threads;
  cfg.betas = o.betas;
  cfg.delta = o.delta;
  cfg.centring = o.centring;
  cfg.beta_stable = o.beta_stable;

  const std::string model = needs_law ? "tree" : o.model;
  if (model == "tree") {
    const auto law =
        trapwalk::offspring::OffspringLaw::from_json_text(law_text(o));
    cfg.model = trapwalk::bridge::tree_trap_model(law, cfg.beta);
  } else if (model == "unit") {
    cfg.model = trapwalk::rtrw::TrapModel::unit();
  } else if (model == "two-point") {
    cfg.model = trapwalk::rtrw::TrapModel::two_point(o.m1, o.m2, o.p);
  } else {
    throw std::invalid_argument("unknown model '" + model + "'");
  }
  cfg.validate();
  return cfg;
}

int execute(const ExperimentConfig& cfg) {
  const auto result = trapwalk::experiments::run_suite(cfg);
  std::cout << result.summary_text();
  return result.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapwalk: Monte Carlo and exact analytics for biased randomly "
               "trapped walks and walks on subcritical trees"};
  app.set_version_flag("--version", trapwalk::version_string);
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute a suite from a TOML config");
  run->add_option("--config", config_path, "TOML config file")->required();
  std::int64_t run_seed = -1;
  int run_threads = -1;
  std::string run_out;
  run->add_option("--seed", run_seed, "override config seed");
  run->add_option("--threads", run_threads, "override config threads");
  run->add_option("--out", run_out, "override config output prefix");

  CommonOpts verify, speed, clt, einstein, coupling, necessity, regime;
  auto* c_verify = app.add_subcommand("verify-analytics",
                                      "closed forms vs exact linear solves");
  add_common(c_verify, verify, true);

  auto* c_speed = app.add_subcommand("speed", "law of large numbers check");
  add_common(c_speed, speed, false);

  std::string clt_mode = "annealed";
  auto* c_clt = app.add_subcommand("clt", "KS tests of the CLTs");
  add_common(c_clt, clt, false);
  c_clt->add_option("--mode", clt_mode, "annealed|quenched|quenched-hitting");
  c_clt->add_option("--centring", clt.centring, "environment|deterministic");

  auto* c_einstein =
      app.add_subcommand("einstein", "speed-over-bias sweep toward the limit");
  add_common(c_einstein, einstein, true);
  c_einstein->add_option("--betas", einstein.betas, "bias grid");

  auto* c_coupling = app.add_subcommand(
      "coupling", "tree walk vs trap-walk agreement and deviation growth");
  add_common(c_coupling, coupling, true);

  auto* c_necessity = app.add_subcommand(
      "necessity", "divergence probe of the excursion second moment");
  add_common(c_necessity, necessity, true);
  c_necessity->add_option("--beta-stable", necessity.beta_stable,
                          "companion bias expected to stabilize");

  auto* c_regime = app.add_subcommand("print-regime", "regime flags for a law");
  add_common(c_regime, regime, true);
  c_regime->add_option("--delta", regime.delta, "extra moment exponent");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (run->parsed()) {
      cfg = ExperimentConfig::from_toml_file(config_path);
      if (run_seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(run_seed);
        cfg.seed_set = true;
      }
      if (run_threads >= 0) cfg.threads = run_threads;
      if (!run_out.empty()) cfg.output = run_out;
    } else if (c_verify->parsed()) {
      cfg = build_config("verify-analytics", verify, true);
    } else if (c_speed->parsed()) {
      cfg = build_config("speed", speed, false);
    } else if (c_clt->parsed()) {
      std::string suite;
      if (clt_mode == "annealed") suite = "annealed-clt";
      else if (clt_mode == "quenched") suite = "quenched-clt";
      else if (clt_mode == "quenched-hitting") suite = "quenched-hitting";
      else throw std::invalid_argument("unknown clt mode '" + clt_mode + "'");
      cfg = build_config(suite, clt, false);
    } else if (c_einstein->parsed()) {
      cfg = build_config("einstein", einstein, true);
    } else if (c_coupling->parsed()) {
      cfg = build_config("coupling", coupling, true);
    } else if (c_necessity->parsed()) {
      cfg = build_config("necessity", necessity, true);
    } else if (c_regime->parsed()) {
      cfg = build_config("print-regime", regime, true);
    }
    return execute(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
}
