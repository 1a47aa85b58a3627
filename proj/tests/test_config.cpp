#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "trapwalk/config.hpp"

using namespace trapwalk;

namespace {

const char* kSpeedToml = R"(
# tree-walk speed check
suite = "speed"
model = "tree"
law_json = '{"pmf": {"0": 0.6, "2": 0.4}}'
beta = 1.1
horizon = 1e6
replicas = 1
seed = 12345
threads = 2
output = "out/speed"
)";

}  // namespace

TEST_CASE("toml subset parser") {
  const auto kv = toml_lite::parse(R"(
name = "walks"     # trailing comment
count = 42
rate = 1.5e-3
flag = true
grid = [1.02, 1.05, 1.1]
words = ["a", "b"]
[section]
inner = 'literal #not-a-comment'
)");
  CHECK(kv.at("name").str == "walks");
  CHECK(kv.at("count").i == 42);
  CHECK(kv.at("rate").f == doctest::Approx(0.0015));
  CHECK(kv.at("flag").b);
  REQUIRE(kv.at("grid").arr.size() == 3);
  CHECK(kv.at("grid").arr[1].as_double() == doctest::Approx(1.05));
  CHECK(kv.at("words").arr[0].str == "a");
  CHECK(kv.at("section.inner").str == "literal #not-a-comment");

  CHECK_THROWS_AS(toml_lite::parse("no equals sign"), std::invalid_argument);
  CHECK_THROWS_AS(toml_lite::parse("x = "), std::invalid_argument);
  CHECK_THROWS_AS(toml_lite::parse("x = \"unterminated"),
                  std::invalid_argument);
  CHECK_THROWS_AS(toml_lite::parse("x = 1\nx = 2"), std::invalid_argument);
}

TEST_CASE("experiment config from toml") {
  const auto cfg = config::ExperimentConfig::from_toml_text(kSpeedToml);
  CHECK(cfg.suite == "speed");
  CHECK(cfg.model.kind == rtrw::TrapModel::Kind::tree);
  CHECK(cfg.beta == doctest::Approx(1.1));
  CHECK(cfg.horizon == doctest::Approx(1e6));
  CHECK(cfg.seed == 12345);
  CHECK(cfg.threads == 2);
  CHECK(cfg.model.law->mean_mu() == doctest::Approx(0.8));
  // closed-form annealed mean filled by the tree factory
  CHECK(cfg.model.annealed_mean == doctest::Approx(1.9616 / 0.2016));
}

TEST_CASE("config validation") {
  // seed is mandatory
  CHECK_THROWS_AS(config::ExperimentConfig::from_toml_text(
                      "suite = \"speed\"\nmodel = \"unit\"\nbeta = 2.0"),
                  std::invalid_argument);
  // malformed law
  CHECK_THROWS_AS(
      config::ExperimentConfig::from_toml_text(
          "suite = \"speed\"\nmodel = \"tree\"\nseed = 1\nbeta = 1.1\n"
          "law_json = '{\"pmf\": {\"0\": 0.8, \"2\": 0.4}}'"),
      std::invalid_argument);
  // unknown suite
  CHECK_THROWS_AS(config::ExperimentConfig::from_toml_text(
                      "suite = \"nope\"\nmodel = \"unit\"\nseed = 1"),
                  std::invalid_argument);
  // necessity requires beta^2 mu >= 1
  CHECK_THROWS_AS(
      config::ExperimentConfig::from_toml_text(
          "suite = \"necessity\"\nmodel = \"tree\"\nseed = 1\nbeta = 1.05\n"
          "law_json = '{\"pmf\": {\"0\": 0.6, \"2\": 0.4}}'"),
      std::invalid_argument);
  // replicas must be positive
  CHECK_THROWS_AS(config::ExperimentConfig::from_toml_text(
                      "suite = \"speed\"\nmodel = \"unit\"\nseed = 1\n"
                      "replicas = 0"),
                  std::invalid_argument);
}

TEST_CASE("config hash is content-stable") {
  const auto c1 = config::ExperimentConfig::from_toml_text(kSpeedToml);
  const auto c2 = config::ExperimentConfig::from_toml_text(kSpeedToml);
  CHECK(c1.hash() == c2.hash());

  auto c3 = c1;
  c3.seed = 999;
  CHECK(c3.hash() != c1.hash());
  CHECK(c1.to_json_text().find("\"suite\":\"speed\"") != std::string::npos);
}
