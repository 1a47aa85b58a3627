#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trapwalk/offspring.hpp"
#include "trapwalk/rng.hpp"
#include "trapwalk/trees.hpp"

namespace trapwalk::rtrw {

// Family of per-site holding-time laws. `annealed_mean` is the exact mean of
// eta_0 under the environment law (+inf when it diverges); factories fill it.
struct TrapModel {
  enum class Kind { unit, two_point, exp_mean, tree };

  Kind kind = Kind::unit;
  // two_point: the site holds deterministically m1 (prob p_m1) or m2
  double m1 = 1.0, m2 = 1.0, p_m1 = 0.5;
  // exp_mean: exponential holding times, site mean drawn from a finite law
  std::vector<double> mean_values{1.0};
  std::vector<double> mean_probs{1.0};
  // tree: holding times are excursion times in an independent trap tree
  std::optional<offspring::OffspringLaw> law;
  double walk_beta = 2.0;

  double annealed_mean = 1.0;

  static TrapModel unit();
  static TrapModel two_point(double m1, double m2, double p_m1);
  static TrapModel exp_mean(std::vector<double> values,
                            std::vector<double> probs);

  bool mean_finite() const { return std::isfinite(annealed_mean); }
  std::string name() const;
};

struct SiteTrap {
  double mean = 1.0;   // exact quenched mean E^w[eta_{x,0}]
  double param = 1.0;  // two_point: m_x; exp_mean: site mean
  trees::BranchTree trap;  // tree kind only
};

// Materialized stretch of the environment. Site parameters are produced by
// the per-site stream (env_seed, site), so the window can grow in either
// direction without disturbing what exists. Extension is serialized by a
// mutex; site lookups return stable references (deque storage).
class Environment {
 public:
  Environment(TrapModel model, std::uint64_t env_seed);
  Environment(Environment&& other) noexcept
      : model_(std::move(other.model_)),
        seed_(other.seed_),
        pos_(std::move(other.pos_)),
        neg_(std::move(other.neg_)) {}
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const TrapModel& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }
  // materialized range [lo(), hi()]
  std::int64_t lo() const {
    std::lock_guard<std::mutex> lock(mu_);
    return -static_cast<std::int64_t>(neg_.size());
  }
  std::int64_t hi() const {
    std::lock_guard<std::mutex> lock(mu_);
    return static_cast<std::int64_t>(pos_.size()) - 1;
  }

  void ensure(std::int64_t lo, std::int64_t hi);
  const SiteTrap& site(std::int64_t x) const;
  double quenched_mean(std::int64_t x) const { return site(x).mean; }

  // Fresh i.i.d. draw from w_x; repeat visits never reuse a value.
  double sample_holding(std::int64_t x, rng::Xoshiro256pp& g) const;
  double sample_from_site(const SiteTrap& st, rng::Xoshiro256pp& g) const;

  // Deterministic-trap test/debug constructor: site x = lo + i holds
  // params[i] exactly.
  static Environment from_site_params(TrapModel model, std::int64_t lo,
                                      std::vector<double> params);

  std::string to_json_text() const;

 private:
  void materialize(std::int64_t x);

  TrapModel model_;
  std::uint64_t seed_ = 0;
  std::deque<SiteTrap> pos_;  // site i >= 0 at pos_[i]
  std::deque<SiteTrap> neg_;  // site -(i+1) at neg_[i]
  mutable std::mutex mu_;
};

struct RegenBlock {
  std::int64_t dx = 0;   // Y increment across the block
  double dt = 0.0;       // clock increment
  std::int64_t dk = 0;   // step increment
};

struct Trajectory {
  std::int64_t final_position = 0;
  double final_clock = 0.0;  // S at the last completed step
  std::int64_t steps = 0;
  bool hit_stop_site = false;
  double hit_time = 0.0;

  std::vector<std::int64_t> y;  // y[k], k = 0..steps (when recorded)
  std::vector<double> s;        // s[k] = S_k, size steps + 1 (when recorded)

  // X_t = y[k] for the unique k with s[k] <= t < s[k+1].
  std::int64_t position_at(double t) const;
};

struct RunOptions {
  double horizon_clock = 0.0;
  std::int64_t stop_at_site = std::numeric_limits<std::int64_t>::min();
  bool record_path = false;
  std::int64_t max_steps = -1;
};

// Simulates Y step by step, accumulating the clock S with fresh holding
// draws; X_T is the position at clock horizon (X_t = Y_k on [S_k, S_{k+1})).
Trajectory run_rtrw(Environment& env, double beta, rng::Xoshiro256pp& g,
                    const RunOptions& opts);

// Steps discarded at the end of a path as unconfirmed regenerations.
std::int64_t default_confirmation_horizon(double beta);

// All m >= 1 with min_{l >= m} y_l > max_{l < m} y_l, excluding the last
// `confirmation_horizon` steps.
std::vector<std::int64_t> detect_regenerations(
    std::span<const std::int64_t> y, std::int64_t confirmation_horizon);

// Blocks between consecutive regenerations, starting at the second
// regeneration gap boundary (the initial segment before kappa_1 is dropped).
std::vector<RegenBlock> regeneration_blocks(const Trajectory& traj,
                                            std::int64_t confirmation_horizon);

// nu = (beta - 1) / (E[eta_0] (beta + 1)).
double speed_formula(double beta, double mean_eta0);

struct SigmaSqEstimate {
  double value = 0.0;
  double se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // 99% percentile bootstrap
  std::size_t n_blocks = 0;
};

// Block estimator of the CLT variance: mean(Z_j^2) / (E[eta_0] mean(dk)),
// Z_j = dx_j - nu dt_j. Needs at least 2 blocks.
SigmaSqEstimate sigma_sq_blocks(std::span<const RegenBlock> blocks,
                                double mean_eta0, double nu,
                                rng::Xoshiro256pp& bootstrap_rng,
                                int n_bootstrap = 1000);

// G^w(t) = nu t - nu sum_{k=0}^{floor(nu t)-1} (b+1)/(b-1) (E^w[eta_k] - E[eta]).
double quenched_centring_G(Environment& env, double beta, double t, double nu,
                           double mean_eta0);

struct HittingCentrings {
  double H = 0.0;        // E^w[tau_n], exact local-time sum
  double H_tilde = 0.0;  // sum_k (b+1)/(b-1) E^w[eta_k], k = 0..n-1
};

HittingCentrings hitting_centrings(Environment& env, double beta,
                                   std::int64_t n);

// J(n) = sum_{k=0}^{n-1} (E^w[eta_k] - E[eta_0]).
double correction_sum_J(Environment& env, std::int64_t n, double mean_eta0);

// CSV block list "replica,kappa_index,dx,dt".
void write_blocks_csv(std::span<const RegenBlock> blocks, std::int64_t replica,
                      std::ostream& os, bool header = true);

}  // namespace trapwalk::rtrw
