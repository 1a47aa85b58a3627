#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trapwalk/offspring.hpp"
#include "trapwalk/rng.hpp"
#include "trapwalk/rtrw.hpp"
#include "trapwalk/trees.hpp"

namespace trapwalk::bridge {

// E[eta_0] for trap-tree excursions:
//   [mu(b+1)(1-b mu) + 2b(sigma^2 - mu(1-mu))] / [mu(b+1)(1-b mu)],
// +inf when beta >= 1/mu.
double expected_eta0(const offspring::OffspringLaw& law, double beta);

// nu_beta = mu(b-1)(1-b mu) / [mu(b+1)(1-b mu) + 2b(sigma^2 - mu(1-mu))];
// 0 in the sub-ballistic regime (beta*mu >= 1).
double tree_speed(const offspring::OffspringLaw& law, double beta);

// lim_{beta->1+} nu_beta/(beta-1) = mu(1-mu)/(2 sigma^2) = 1/(2 E[eta_0]|_1).
double einstein_limit(const offspring::OffspringLaw& law);

struct RegimeReport {
  double beta = 0, mu = 0, beta_mu = 0, beta2_mu = 0;
  bool ballistic = false;           // beta*mu < 1 and sigma^2 < inf
  bool annealed_clt = false;        // beta^2*mu < 1 and E[xi^3] < inf
  bool quenched_clt = false;        // beta^2*mu < 1 and E[xi^(3+delta)] < inf
  bool necessity_violation = false; // beta^2*mu >= 1 or E[xi^3] = inf
  double delta = 0.5;

  std::string table() const;
};

RegimeReport regime(const offspring::OffspringLaw& law, double beta,
                    double delta = 0.5);

// TrapModel whose holding times are excursions in i.i.d. trap trees;
// annealed_mean is the closed form above.
rtrw::TrapModel tree_trap_model(const offspring::OffspringLaw& law,
                                double beta);

// Environment over [lo, hi] with per-site trap trees and exact quenched
// means from the absorption solves.
rtrw::Environment build_tree_environment(const offspring::OffspringLaw& law,
                                         double beta, std::int64_t lo,
                                         std::int64_t hi,
                                         std::uint64_t env_seed);

// Direct walk on the decorated window. Tracks the tree distance |X_n| and
// the backbone projection; extends the window on demand.
class KestenWalker {
 public:
  KestenWalker(trees::KestenWindow& window, double beta);

  void step(rng::Xoshiro256pp& g);
  std::int64_t time() const { return time_; }
  // graph distance to the root
  std::int64_t depth() const;
  // backbone coordinate of the projection
  std::int64_t backbone() const { return k_; }
  // distance to the backbone
  std::int64_t deviation() const { return depth() - k_; }

 private:
  trees::KestenWindow* window_;
  double beta_;
  std::int64_t time_ = 0;
  std::int64_t k_ = 0;       // current backbone site
  std::int32_t branch_ = -1; // -1: on the backbone
  std::int32_t vertex_ = 0;  // vertex within the branch arena
};

struct TreeWalkResult {
  std::int64_t final_depth = 0;
  std::int64_t final_backbone = 0;
  std::int64_t max_deviation = 0;
  std::vector<std::int64_t> depth_path;     // when recorded
  std::vector<std::int64_t> backbone_path;  // when recorded
};

TreeWalkResult simulate_tree_walk(trees::KestenWindow& window, double beta,
                                  std::int64_t horizon_steps,
                                  rng::Xoshiro256pp& g,
                                  bool record_paths = false);

// E^{T*}[holding time of the projected walk at backbone site k]: expected
// time, started at rho_k, to step to rho_{k-1} or rho_{k+1}, including
// excursions into the branch at k. Exact linear solve.
double backbone_site_mean(trees::KestenWindow& window, std::int64_t k,
                          double beta);

// G^{T*}(t) = nu t - nu sum_{k=1}^{floor(nu t)} (b+1)/(b-1)
//             (E^{T*}[eta~_{rho_k,0}] - E[eta_0]).
double quenched_tree_centring(trees::KestenWindow& window, double beta,
                              double t);

struct DivergenceReport {
  std::vector<std::int64_t> sample_sizes;
  std::vector<double> second_moment_estimates;
  bool strictly_increasing = false;
  double last_rel_change = 0.0;
  bool divergence_consistent = false;  // increasing with no plateau
  bool stable = false;                 // last change < 10%
};

// Empirical second moments of the excursion time at growing sample sizes
// (disjoint streams per scale).
DivergenceReport divergence_probe(
    const offspring::OffspringLaw& law, double beta, std::uint64_t seed,
    std::vector<std::int64_t> sample_sizes = {10'000, 100'000, 1'000'000});

// Deterministic-trap variant (unit / two-point / exp-mean models).
DivergenceReport divergence_probe(
    const rtrw::TrapModel& model, std::uint64_t seed,
    std::vector<std::int64_t> sample_sizes = {10'000, 100'000, 1'000'000});

}  // namespace trapwalk::bridge
