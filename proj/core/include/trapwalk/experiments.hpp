#pragma once

#include <string>
#include <vector>

#include "trapwalk/config.hpp"
#include "trapwalk/harness.hpp"

namespace trapwalk::experiments {

struct ResultRecord {
  std::string name;
  double expected = 0.0;
  double observed = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct SuiteResult {
  std::vector<ResultRecord> records;
  std::string extra_text;  // e.g. the regime table

  bool all_pass() const;
  // one line per check: name, expected, observed, tolerance, PASS/FAIL
  std::string summary_text() const;
};

// Dispatch on cfg.suite; throws std::invalid_argument on config problems.
SuiteResult run_suite(const config::ExperimentConfig& cfg);

SuiteResult verify_analytics_suite(const config::ExperimentConfig& cfg);
SuiteResult speed_suite(const config::ExperimentConfig& cfg);
SuiteResult clt_suite(const config::ExperimentConfig& cfg);
SuiteResult einstein_suite(const config::ExperimentConfig& cfg);
SuiteResult coupling_suite(const config::ExperimentConfig& cfg);
SuiteResult necessity_suite(const config::ExperimentConfig& cfg);
SuiteResult regime_suite(const config::ExperimentConfig& cfg);

// Writes <output>.summary.csv and <output>.json (header embeds the config
// hash and library version). No-op when cfg.output is empty.
void write_outputs(const config::ExperimentConfig& cfg,
                   const SuiteResult& result);

}  // namespace trapwalk::experiments
