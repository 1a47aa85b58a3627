#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trapwalk/config.hpp"
#include "trapwalk/offspring.hpp"
#include "trapwalk/rng.hpp"
#include "trapwalk/rtrw.hpp"
#include "trapwalk/trees.hpp"

namespace trapwalk::harness {

// Phi(x) to absolute error below 1e-12 (erfc-based).
double normal_cdf(double x);
// Inverse of normal_cdf (bisection + Newton polish).
double normal_quantile(double p);
// Kolmogorov tail Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);
// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  double threshold = 0.01;
  bool pass = false;
};

// One-sample KS against a cdf; asymptotic p-value with the usual
// finite-sample argument correction.
TestReport ks_test(std::vector<double> sample,
                   const std::function<double(double)>& cdf,
                   double threshold = 0.01);

TestReport ks_two_sample(std::vector<double> a, std::vector<double> b,
                         double threshold = 0.01);

// Chi-square goodness of fit; dof = #bins - 1.
TestReport chi_square_gof(const std::vector<std::int64_t>& counts,
                          const std::vector<double>& probs,
                          double threshold = 0.01);

struct TailFit {
  double rate = 0.0;  // fitted exponential decay rate (positive = decaying)
  double corr = 0.0;  // Pearson correlation of (n, log sf(n))
  std::size_t points = 0;
};

// Log-linear least-squares fit of the empirical survival function.
TailFit exponential_tail_fit(const std::vector<std::int64_t>& values);

struct McSummary {
  double mean = 0.0, sd = 0.0, se = 0.0;
  std::size_t n = 0;
  double z(double expected) const { return (mean - expected) / se; }
};
McSummary summarize(std::span<const double> xs);

int resolve_threads(int requested);

// Runs fn(0..n-1) across a worker pool with deterministic index assignment;
// results must be written to per-index slots by the caller.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

// CLT experiment per the config's suite:
//   annealed-clt     : fresh environment per replica, centring (T nu),
//                      scale sigma_hat (block estimator) * sqrt(T)
//   quenched-clt     : one fixed environment, centring G^w(T) (or T nu when
//                      centring = "deterministic"), scale theta * sqrt(T),
//                      theta = sigma_hit nu^(3/2)
//   quenched-hitting : one fixed environment, tau_n replicas, centring
//                      H^w(n), scale sigma_hit * sqrt(n)
// Calibration (block estimator / nested MC for sigma_hit^2 = E[Var_w(tau_1)])
// runs on calibration streams disjoint from the test streams.
struct CltOutcome {
  TestReport ks;
  std::vector<double> standardized;
  double nu = 0.0;
  double mean_eta0 = 0.0;
  double scale = 0.0;        // full denominator scale (e.g. sigma sqrt(T))
  double sigma_hat = 0.0;    // estimated sigma / theta component
  double centring = 0.0;     // value of the centring at the horizon
  std::uint64_t env_seed = 0;
};

CltOutcome clt_experiment(const config::ExperimentConfig& cfg);

// Quenched CLT for the walk on a fixed decorated window, standardized by
// (G^{T*}(n), theta sqrt(n)). Horizon is in steps.
CltOutcome quenched_tree_experiment(const offspring::OffspringLaw& law,
                                    double beta, std::int64_t horizon,
                                    std::int64_t replicas, std::uint64_t seed,
                                    int threads, double p_threshold = 0.01);

struct EinsteinRow {
  double beta = 0.0;
  double closed_ratio = 0.0;  // nu_beta / (beta - 1)
  double mc_nu = 0.0;         // direct tree-walk speed estimate
  double mc_se = 0.0;
  double limit = 0.0;
};

std::vector<EinsteinRow> einstein_sweep(const offspring::OffspringLaw& law,
                                        const std::vector<double>& betas,
                                        std::uint64_t seed, int threads,
                                        std::int64_t horizon_steps = 1'000'000,
                                        int replicas = 16);

// sigma_hit^2 = E[Var_w(tau_1)] by nested MC: `outer` environments x `inner`
// hitting-time replicas, on calibration streams of `seed`.
double estimate_sigma_hit_sq(const rtrw::TrapModel& model, double beta,
                             std::uint64_t seed, int outer = 200,
                             int inner = 200, int threads = 0);

// Block estimator of the annealed CLT variance from one long calibration run.
rtrw::SigmaSqEstimate calibrate_sigma_sq(const rtrw::TrapModel& model,
                                         double beta, std::uint64_t seed,
                                         double horizon_clock = 1e6);

}  // namespace trapwalk::harness
