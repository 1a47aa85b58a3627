#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "trapwalk/harness.hpp"

using namespace trapwalk;
using test_helpers::law_a;

namespace {

// independent series evaluation of Phi: 0.5 + phi(x) sum x^(2k+1)/(1*3*...*(2k+1))
long double phi_series(long double x) {
  const long double pdf =
      std::exp(-0.5L * x * x) / std::sqrt(2.0L * 3.14159265358979323846264338L);
  long double term = x, sum = x;
  for (int k = 1; k < 400; ++k) {
    term *= x * x / (2 * k + 1);
    sum += term;
    if (std::abs(term) < 1e-22L * std::abs(sum)) break;
  }
  return 0.5L + pdf * sum;
}

}  // namespace

TEST_CASE("normal cdf") {
  CHECK(harness::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(harness::normal_cdf(1.959963985) - 0.975) <= 1e-9);
  for (double x = -6.0; x <= 6.0; x += 0.17) {
    CHECK(std::abs(harness::normal_cdf(x) -
                   static_cast<double>(phi_series(x))) <= 1e-12);
    CHECK(std::abs(harness::normal_cdf(-x) - (1.0 - harness::normal_cdf(x))) <=
          1e-12);
  }
  for (const double p : {0.001, 0.1, 0.5, 0.9, 0.975, 0.9999})
    CHECK(std::abs(harness::normal_cdf(harness::normal_quantile(p)) - p) <=
          1e-12);
}

TEST_CASE("kolmogorov and gamma tails") {
  CHECK(harness::kolmogorov_sf(1.0) ==
        doctest::Approx(0.26999967167735452).epsilon(1e-12));
  CHECK(harness::kolmogorov_sf(0.5) ==
        doctest::Approx(0.96394524366487509).epsilon(1e-12));
  CHECK(harness::kolmogorov_sf(1e-8) == doctest::Approx(1.0));
  double prev = 1.0;
  for (double lam = 0.2; lam < 3.0; lam += 0.1) {
    const double q = harness::kolmogorov_sf(lam);
    CHECK(q <= prev + 1e-15);
    prev = q;
  }

  CHECK(harness::gamma_q(0.5, 1.92073) ==
        doctest::Approx(0.0499999648337476).epsilon(1e-10));
  CHECK(harness::gamma_q(1.0, 2.0) ==
        doctest::Approx(0.135335283236613).epsilon(1e-12));
  CHECK(harness::gamma_q(2.5, 3.0) ==
        doctest::Approx(0.306218918413279).epsilon(1e-12));
  CHECK(harness::gamma_q(5.0, 2.0) ==
        doctest::Approx(0.947346982656289).epsilon(1e-12));
}

TEST_CASE("ks one-sample") {
  // sample at the exact quantile positions: D = 1/(2n), p near 1
  const std::size_t n = 100;
  std::vector<double> sample(n);
  for (std::size_t i = 0; i < n; ++i)
    sample[i] =
        harness::normal_quantile((static_cast<double>(i) + 0.5) / n);
  const auto r = harness::ks_test(sample, harness::normal_cdf);
  CHECK(r.statistic == doctest::Approx(0.005).epsilon(1e-9));
  CHECK(r.p_value > 0.99);
  CHECK(r.pass);

  // unit shift is decisively rejected at n = 2000
  auto g = rng::Xoshiro256pp(13);
  std::vector<double> shifted(2000);
  for (auto& x : shifted) x = g.normal() + 1.0;
  CHECK(harness::ks_test(shifted, harness::normal_cdf).p_value < 1e-6);

  // statistic equals the brute-force maximum over both comparison points
  std::vector<double> uni(50);
  for (auto& x : uni) x = g.uniform();
  const auto ru = harness::ks_test(uni, [](double x) { return x; });
  std::vector<double> s = uni;
  std::sort(s.begin(), s.end());
  double brute = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    brute = std::max(brute, s[i] - static_cast<double>(i) / 50.0);
    brute = std::max(brute, static_cast<double>(i + 1) / 50.0 - s[i]);
  }
  CHECK(ru.statistic == doctest::Approx(brute).epsilon(1e-15));

  CHECK_THROWS_AS(harness::ks_test(std::vector<double>(10, 0.0),
                                   harness::normal_cdf),
                  std::invalid_argument);
}

TEST_CASE("ks size calibration under the null") {
  // at threshold 0.01 the test rejects well under 3% of 500 null samples
  auto g = rng::Xoshiro256pp(77);
  int rejects = 0;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> sample(200);
    for (auto& x : sample) x = g.normal();
    if (!harness::ks_test(sample, harness::normal_cdf, 0.01).pass) ++rejects;
  }
  CHECK(rejects <= 15);
}

TEST_CASE("ks two-sample") {
  auto g = rng::Xoshiro256pp(99);
  std::vector<double> a(1500), b(1500), c(1500);
  for (auto& x : a) x = g.normal();
  for (auto& x : b) x = g.normal();
  for (auto& x : c) x = g.normal() + 0.3;
  CHECK(harness::ks_two_sample(a, b).pass);
  CHECK(harness::ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("chi-square gof") {
  // exactly proportional counts give statistic 0
  const auto perfect =
      harness::chi_square_gof({250, 250, 250, 250}, {0.25, 0.25, 0.25, 0.25});
  CHECK(perfect.statistic == doctest::Approx(0.0));
  CHECK(perfect.p_value == doctest::Approx(1.0));

  // chi2 critical value at df=1: p = 0.05
  const auto crit = harness::chi_square_gof(
      {500 + 310, 500 - 310}, {0.5, 0.5});  // chi2 = 2*310^2/500 = 384.4
  CHECK(crit.p_value < 1e-6);

  auto g = rng::Xoshiro256pp(5);
  std::vector<std::int64_t> counts(6, 0);
  for (int i = 0; i < 6000; ++i)
    ++counts[static_cast<std::size_t>(g.uniform() * 6.0)];
  CHECK(harness::chi_square_gof(counts, std::vector<double>(6, 1.0 / 6)).pass);
}

TEST_CASE("exponential tail fit") {
  auto g = rng::Xoshiro256pp(17);
  std::vector<std::int64_t> geo(20000);
  const double q = 0.8;  // P(X > n) = q^n, rate = -log q
  for (auto& x : geo) {
    std::int64_t n = 0;
    while (g.uniform() < q) ++n;
    x = n;
  }
  const auto fit = harness::exponential_tail_fit(geo);
  CHECK(fit.corr < -0.99);
  CHECK(fit.rate == doctest::Approx(-std::log(q)).epsilon(0.08));
}

TEST_CASE("parallel determinism") {
  config::ExperimentConfig cfg;
  cfg.suite = "annealed-clt";
  cfg.model = rtrw::TrapModel::unit();
  cfg.beta = 2.0;
  cfg.horizon = 1000.0;
  cfg.replicas = 100;
  cfg.seed = 4242;
  cfg.seed_set = true;

  cfg.threads = 1;
  const auto r1 = harness::clt_experiment(cfg);
  cfg.threads = 4;
  const auto r4 = harness::clt_experiment(cfg);
  REQUIRE(r1.standardized.size() == r4.standardized.size());
  for (std::size_t i = 0; i < r1.standardized.size(); ++i)
    CHECK(r1.standardized[i] == r4.standardized[i]);
  CHECK(r1.ks.statistic == r4.ks.statistic);
}

TEST_CASE("hitting variance estimator on unit traps") {
  // Var(tau_1) for the unit-trap walk: (1 - rho^2)/rho^3 with rho = 1/3
  const double expect = (1.0 - 1.0 / 9.0) / (1.0 / 27.0);
  const double est =
      harness::estimate_sigma_hit_sq(rtrw::TrapModel::unit(), 2.0, 55, 50, 400, 1);
  CHECK(std::abs(est - expect) / expect < 0.15);
}

TEST_CASE("einstein sweep") {
  const auto empty = harness::einstein_sweep(law_a(), {}, 1, 1);
  CHECK(empty.empty());

  const auto rows = harness::einstein_sweep(law_a(), {1.1}, 321, 1, 100000, 8);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].limit == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  const double closed_nu = rows[0].closed_ratio * 0.1;
  CHECK(std::abs(rows[0].mc_nu - closed_nu) <= 4.0 * rows[0].mc_se);

  CHECK_THROWS_AS(harness::einstein_sweep(law_a(), {1.3}, 1, 1),
                  std::invalid_argument);
}
