#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trapwalk/offspring.hpp"
#include "trapwalk/trees.hpp"

namespace test_helpers {

inline trapwalk::offspring::OffspringLaw law_a() {
  return trapwalk::offspring::OffspringLaw::from_pmf({0.6, 0.0, 0.4});
}

inline trapwalk::offspring::OffspringLaw law_b() {
  return trapwalk::offspring::OffspringLaw::from_pmf({0.5, 0.2, 0.2, 0.1});
}

inline trapwalk::trees::BranchTree make_branch(
    std::vector<std::int32_t> parents, std::uint32_t xstar) {
  trapwalk::trees::BranchTree bt;
  bt.inner = trapwalk::trees::RootedTree::from_parents(std::move(parents));
  bt.xstar = xstar;
  return bt;
}

// dense Gaussian elimination with partial pivoting (test-side oracle,
// independent of the library's solver)
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    if (std::abs(a[col][col]) < 1e-300)
      throw std::runtime_error("solve_linear: singular");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

// P_0(hit k before n) for the beta-biased walk on Z, k < 0 < n, by a direct
// absorption solve on states k+1..n-1
inline double ruin_prob_bruteforce(double beta, std::int64_t k,
                                   std::int64_t n) {
  const auto m = static_cast<std::size_t>(n - k - 1);  // transient states
  const double pr = beta / (beta + 1.0), pl = 1.0 / (beta + 1.0);
  std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
  std::vector<double> b(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    a[i][i] = 1.0;
    // state value k+1+i; absorb at k (value 1) and n (value 0)
    if (i == 0)
      b[i] += pl;
    else
      a[i][i - 1] -= pl;
    if (i + 1 < m) a[i][i + 1] -= pr;
  }
  const auto x = solve_linear(std::move(a), std::move(b));
  return x[static_cast<std::size_t>(-k - 1)];  // state 0
}

// E_0[L(k, tau_n)] by an absorption solve truncated at depth -K (the walk
// reaches -K with probability beta^-K, negligible for large K)
inline double local_time_bruteforce(double beta, std::int64_t k,
                                    std::int64_t n, std::int64_t K = 220) {
  const std::int64_t lo = -K;
  const auto m = static_cast<std::size_t>(n - lo);  // states lo..n-1
  const double pr = beta / (beta + 1.0), pl = 1.0 / (beta + 1.0);
  // expected visits to k from state i: v = e_k + Q v
  std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
  std::vector<double> b(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    a[i][i] = 1.0;
    if (i > 0) a[i][i - 1] -= pl;          // step left (absorb below lo)
    if (i + 1 < m) a[i][i + 1] -= pr;      // step right (absorb at n)
    if (static_cast<std::int64_t>(i) + lo == k) b[i] = 1.0;
  }
  const auto x = solve_linear(std::move(a), std::move(b));
  return x[static_cast<std::size_t>(-lo)];  // start state 0
}

// exact pmf of Z_n by dynamic programming over convolution powers
inline std::vector<double> exact_Zn_pmf(
    const trapwalk::offspring::OffspringLaw& law, std::int64_t n) {
  std::vector<double> dist{0.0, 1.0};  // Z_0 = 1
  const auto& pmf = law.pmf();
  for (std::int64_t g = 1; g <= n; ++g) {
    // conv powers of the offspring pmf, built incrementally over parents
    std::vector<double> next{0.0};
    std::vector<double> power{1.0};  // pmf^{*0}
    for (std::size_t parents = 0; parents < dist.size(); ++parents) {
      if (dist[parents] > 0.0) {
        if (next.size() < power.size()) next.resize(power.size(), 0.0);
        for (std::size_t j = 0; j < power.size(); ++j)
          next[j] += dist[parents] * power[j];
      }
      // power *= pmf
      std::vector<double> np(power.size() + pmf.size() - 1, 0.0);
      for (std::size_t i = 0; i < power.size(); ++i)
        for (std::size_t j = 0; j < pmf.size(); ++j)
          np[i + j] += power[i] * pmf[j];
      power = std::move(np);
    }
    dist = std::move(next);
  }
  return dist;
}

inline double pmf_moment(const std::vector<double>& pmf, int r) {
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k)
    acc += std::pow(static_cast<double>(k), r) * pmf[k];
  return acc;
}

// lowest common ancestor by parent-walking
inline std::int32_t lca(const trapwalk::trees::RootedTree& t, std::int32_t x,
                        std::int32_t y) {
  while (x != y) {
    if (t.depth[x] >= t.depth[y])
      x = t.parent[x];
    else
      y = t.parent[y];
  }
  return x;
}

}  // namespace test_helpers
