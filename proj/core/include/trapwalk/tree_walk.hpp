#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trapwalk/rng.hpp"
#include "trapwalk/trees.hpp"

namespace trapwalk::tree_walk {

// Walk kernels on a fixed finite tree.
//
// root_reflecting: walk on a RootedTree; from an internal vertex the parent
//   has weight 1 and every child weight beta; the root jumps to a uniformly
//   chosen child.
// ancestor_absorbing: walk on a BranchTree with the extra ancestor above the
//   root absorbing; from the root the ancestor has weight beta+1 and every
//   child weight beta.
enum class KernelMode { root_reflecting, ancestor_absorbing };

class WalkKernel {
 public:
  WalkKernel(const trees::RootedTree& tree, double beta)
      : tree_(&tree), beta_(beta), mode_(KernelMode::root_reflecting) {}
  WalkKernel(const trees::BranchTree& branch, double beta)
      : tree_(&branch.inner),
        beta_(beta),
        mode_(KernelMode::ancestor_absorbing) {}

  KernelMode mode() const { return mode_; }
  double beta() const { return beta_; }
  const trees::RootedTree& tree() const { return *tree_; }

  // Number of chain states (includes the ancestor in absorbing mode).
  std::int32_t num_states() const {
    return static_cast<std::int32_t>(tree_->size()) +
           (mode_ == KernelMode::ancestor_absorbing ? 1 : 0);
  }
  std::int32_t ancestor_id() const {
    return static_cast<std::int32_t>(tree_->size());
  }
  bool is_absorbing(std::int32_t x) const {
    return mode_ == KernelMode::ancestor_absorbing && x == ancestor_id();
  }

 private:
  const trees::RootedTree* tree_;
  double beta_;
  KernelMode mode_;
};

// Exact one-step distribution from x; probabilities sum to 1 within 1e-12.
std::vector<std::pair<std::int32_t, double>> transition_row(
    const WalkKernel& kernel, std::int32_t x);

// Result of a first-step linear solve; `value` is indexed by chain state.
struct HittingSolve {
  std::vector<double> value;
  double residual = 0.0;  // max-norm residual of the linear system
};

// E_v[time to hit target] for every state v (value[target] = 0).
// Throws std::runtime_error if the system is singular (target unreachable).
HittingSolve hitting_times(const WalkKernel& kernel, std::int32_t target);

double expected_hitting_time(const WalkKernel& kernel, std::int32_t start,
                             std::int32_t target);

// E_x[first return time to x].
double expected_return_time(const WalkKernel& kernel, std::int32_t x);

// E_x[(first return time to x)^2] via the paired first/second moment solves.
double return_time_second_moment(const WalkKernel& kernel, std::int32_t x);

// P_start(hit target before any vertex in `avoid`).
double absorption_probability(const WalkKernel& kernel, std::int32_t start,
                              std::int32_t target,
                              std::span<const std::int32_t> avoid);

// E_rho[tau_rho^+] = 2 sum_n Z_n beta^(n-1) / Z_1 for the reflected walk.
double expected_return_time_formula(const trees::RootedTree& tree,
                                    double beta);

// Steps of the absorbing walk from rho until it hits the ancestor.
std::int64_t simulate_excursion(const trees::BranchTree& branch, double beta,
                                rng::Xoshiro256pp& g);

// P_0(tau_k < tau_n) = (beta^n - 1)/(beta^(n-k) - 1) for k < 0 < n, beta > 1.
double gamblers_ruin(double beta, std::int64_t k, std::int64_t n);

// E_0[L(k, tau_n)] for the biased walk on Z, k < n, beta > 1:
//   (beta^n - 1)(beta+1) / (beta^(n-k)(beta-1))        if k < 0
//   (beta^(n-k) - 1)(beta+1) / (beta^(n-k)(beta-1))    if 0 <= k < n
double expected_local_time(double beta, std::int64_t k, std::int64_t n);

// q_w(rho, {x,y}) on the two-arm tree with branching point w at depth dw and
// arm endpoints at depths dx, dy (> dw >= 1).
double branching_escape_probability(double beta, std::int64_t dw,
                                    std::int64_t dx, std::int64_t dy);

// Moments of excursion visit counts v_x (visits to x between leaving rho and
// first return), from the fundamental matrix of the absorbed chain.
class VisitMoments {
 public:
  VisitMoments(const trees::RootedTree& tree, double beta);

  // E_rho[v_x v_y]; v_rho == 1 by convention.
  double pair(std::int32_t x, std::int32_t y) const;
  // sum over all ordered pairs (x,y), which equals E_rho[(tau_rho^+)^2]
  double sum_all_pairs() const;
  double mean(std::int32_t x) const;  // E_rho[v_x]

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

double visit_covariance_exact(const trees::RootedTree& tree, double beta,
                              std::int32_t x, std::int32_t y);

}  // namespace trapwalk::tree_walk
