#include "trapwalk/tree_walk.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trapwalk::tree_walk {

namespace {

// deep trees condition the first-step systems like beta^height; the extra
// long double mantissa keeps the dual-route identities at 1e-8 relative
using Ld = long double;
using MatrixXld = Eigen::Matrix<Ld, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXld = Eigen::Matrix<Ld, Eigen::Dynamic, 1>;

constexpr double kResidualTol = 1e-10;
constexpr std::int32_t kDenseLimit = 2000;

// Solves (I - Q) x = rhs with Q the kernel restricted to the transient
// states (local index = position in `transient`). Dense LU for small
// systems, sparse LU above. Verifies the residual relative to the solution
// scale: hitting times grow like beta^depth, so an absolute bound would
// reject well-solved systems.
VectorXld solve_transient(const WalkKernel& kernel,
                          const std::vector<std::int32_t>& transient,
                          const VectorXld& rhs,
                          double* residual_out = nullptr) {
  const auto n = static_cast<std::int32_t>(transient.size());
  std::vector<std::int32_t> local(kernel.num_states(), -1);
  for (std::int32_t i = 0; i < n; ++i) local[transient[i]] = i;

  const auto scaled_tol = [&](const VectorXld& x, Ld res) {
    return res <= kResidualTol * (1.0L + x.cwiseAbs().maxCoeff() +
                                  rhs.cwiseAbs().maxCoeff());
  };

  VectorXld x;
  if (n <= kDenseLimit) {
    MatrixXld m = MatrixXld::Identity(n, n);
    for (std::int32_t i = 0; i < n; ++i)
      for (const auto& [to, p] : transition_row(kernel, transient[i]))
        if (local[to] >= 0) m(i, local[to]) -= static_cast<Ld>(p);
    const auto lu = m.partialPivLu();
    x = lu.solve(rhs);
    x += lu.solve(rhs - m * x);  // one refinement pass
    const Ld res = (m * x - rhs).cwiseAbs().maxCoeff();
    if (!x.allFinite() || !scaled_tol(x, res))
      throw std::runtime_error("tree_walk: singular or ill-conditioned system");
    if (residual_out) *residual_out = static_cast<double>(res);
    return x;
  }

  std::vector<Eigen::Triplet<Ld>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 3);
  for (std::int32_t i = 0; i < n; ++i) {
    trip.emplace_back(i, i, 1.0L);
    for (const auto& [to, p] : transition_row(kernel, transient[i]))
      if (local[to] >= 0) trip.emplace_back(i, local[to], -static_cast<Ld>(p));
  }
  Eigen::SparseMatrix<Ld> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<Ld>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("tree_walk: singular system");
  x = lu.solve(rhs);
  x += lu.solve(rhs - m * x);
  const Ld res = (m * x - rhs).cwiseAbs().maxCoeff();
  if (!x.allFinite() || !scaled_tol(x, res))
    throw std::runtime_error("tree_walk: sparse solve residual too large");
  if (residual_out) *residual_out = static_cast<double>(res);
  return x;
}

// E_v[time to hit target] over all states, long double precision.
VectorXld hitting_times_ld(const WalkKernel& kernel, std::int32_t target,
                           double* residual_out = nullptr) {
  const auto n_states = kernel.num_states();
  std::vector<std::int32_t> transient;
  transient.reserve(n_states - 1);
  for (std::int32_t v = 0; v < n_states; ++v)
    if (v != target) transient.push_back(v);

  const VectorXld h = solve_transient(
      kernel, transient,
      VectorXld::Ones(static_cast<std::int32_t>(transient.size())),
      residual_out);
  VectorXld full = VectorXld::Zero(n_states);
  for (std::size_t i = 0; i < transient.size(); ++i)
    full[transient[i]] = h[static_cast<std::int32_t>(i)];
  return full;
}

double pow_int(double b, std::int64_t e) {
  return std::pow(b, static_cast<double>(e));
}

// First-step elimination in postorder: T[v] = E_v[time to hit parent] obeys
// T_v = 1 + beta d_v + beta sum_children T_c. Every term is positive, so the
// relative error stays near machine precision however deep the tree is --
// unlike a generic LU on these beta^height-conditioned systems.
std::vector<Ld> parent_hit_times(const trees::RootedTree& tree, double beta) {
  std::vector<Ld> t(tree.size(), 0.0L);
  const Ld b = static_cast<Ld>(beta);
  for (std::size_t v = tree.size(); v-- > 1;) {
    Ld acc = 1.0L + b * static_cast<Ld>(tree.children[v].size());
    for (const auto c : tree.children[v]) acc += b * t[static_cast<std::size_t>(c)];
    t[v] = acc;
  }
  return t;
}

// Second moments S[v] = E_v[(time to hit parent)^2] given the first moments:
// S_v = 1 + beta sum_c (1 + S_c + 2 T_c + 2 T_v + 2 T_c T_v), again positive.
std::vector<Ld> parent_hit_second_moments(const trees::RootedTree& tree,
                                          double beta,
                                          const std::vector<Ld>& t) {
  std::vector<Ld> s(tree.size(), 0.0L);
  const Ld b = static_cast<Ld>(beta);
  for (std::size_t v = tree.size(); v-- > 1;) {
    Ld acc = 1.0L;
    for (const auto c : tree.children[v]) {
      const auto cc = static_cast<std::size_t>(c);
      acc += b * (1.0L + s[cc] + 2.0L * t[cc] + 2.0L * t[v] +
                  2.0L * t[cc] * t[v]);
    }
    s[v] = acc;
  }
  return s;
}

// E_v[time to hit the root] = sum of T along the upward path.
std::vector<Ld> root_hit_times(const trees::RootedTree& tree,
                               const std::vector<Ld>& t) {
  std::vector<Ld> h(tree.size(), 0.0L);
  for (std::size_t v = 1; v < tree.size(); ++v)
    h[v] = t[v] + h[static_cast<std::size_t>(tree.parent[v])];
  return h;
}

}  // namespace

std::vector<std::pair<std::int32_t, double>> transition_row(
    const WalkKernel& kernel, std::int32_t x) {
  const auto& tree = kernel.tree();
  const double beta = kernel.beta();
  std::vector<std::pair<std::int32_t, double>> row;

  if (kernel.is_absorbing(x)) {
    row.emplace_back(x, 1.0);
    return row;
  }
  const auto& kids = tree.children[x];
  const auto d = static_cast<double>(kids.size());

  if (x == 0) {
    if (kernel.mode() == KernelMode::root_reflecting) {
      if (kids.empty())
        throw std::invalid_argument("transition_row: isolated root");
      for (const auto c : kids) row.emplace_back(c, 1.0 / d);
    } else {
      // root of the trap tree: ancestor weight beta+1, children weight beta
      const double total = beta * (d + 1.0) + 1.0;
      row.emplace_back(kernel.ancestor_id(), (beta + 1.0) / total);
      for (const auto c : kids) row.emplace_back(c, beta / total);
    }
    return row;
  }
  const double total = 1.0 + beta * d;
  row.emplace_back(tree.parent[x], 1.0 / total);
  for (const auto c : kids) row.emplace_back(c, beta / total);
  return row;
}

HittingSolve hitting_times(const WalkKernel& kernel, std::int32_t target) {
  HittingSolve out;
  const VectorXld h = hitting_times_ld(kernel, target, &out.residual);
  out.value.resize(static_cast<std::size_t>(h.size()));
  for (std::int64_t i = 0; i < h.size(); ++i)
    out.value[static_cast<std::size_t>(i)] = static_cast<double>(h[i]);
  return out;
}

double expected_hitting_time(const WalkKernel& kernel, std::int32_t start,
                             std::int32_t target) {
  if (start == target) return 0.0;
  const auto& tree = kernel.tree();

  // targets at the top of the tree admit the exact postorder elimination
  if (kernel.mode() == KernelMode::ancestor_absorbing &&
      target == kernel.ancestor_id()) {
    const auto t = parent_hit_times(tree, kernel.beta());
    const Ld b = static_cast<Ld>(kernel.beta());
    const auto d = static_cast<Ld>(tree.children[0].size());
    Ld root = b * (d + 1.0L) + 1.0L;
    for (const auto c : tree.children[0])
      root += b * t[static_cast<std::size_t>(c)];
    root /= b + 1.0L;
    if (start == 0) return static_cast<double>(root);
    const auto h = root_hit_times(tree, t);
    return static_cast<double>(h[static_cast<std::size_t>(start)] + root);
  }
  if (kernel.mode() == KernelMode::root_reflecting && target == 0) {
    const auto h = root_hit_times(tree, parent_hit_times(tree, kernel.beta()));
    return static_cast<double>(h[static_cast<std::size_t>(start)]);
  }
  return hitting_times(kernel, target).value[start];
}

double expected_return_time(const WalkKernel& kernel, std::int32_t x) {
  if (kernel.mode() == KernelMode::root_reflecting && x == 0) {
    const auto& tree = kernel.tree();
    if (tree.children[0].empty())
      throw std::invalid_argument("expected_return_time: isolated root");
    const auto t = parent_hit_times(tree, kernel.beta());
    Ld acc = 1.0L;
    for (const auto c : tree.children[0])
      acc += t[static_cast<std::size_t>(c)] /
             static_cast<Ld>(tree.children[0].size());
    return static_cast<double>(acc);
  }
  const VectorXld h = hitting_times_ld(kernel, x);
  Ld t = 1.0L;
  for (const auto& [to, p] : transition_row(kernel, x))
    t += static_cast<Ld>(p) * h[to];
  return static_cast<double>(t);
}

double return_time_second_moment(const WalkKernel& kernel, std::int32_t x) {
  if (kernel.mode() == KernelMode::root_reflecting && x == 0) {
    // E[(1 + tau_c)^2] averaged over the uniform first step
    const auto& tree = kernel.tree();
    if (tree.children[0].empty())
      throw std::invalid_argument("return_time_second_moment: isolated root");
    const auto t = parent_hit_times(tree, kernel.beta());
    const auto s = parent_hit_second_moments(tree, kernel.beta(), t);
    Ld acc = 0.0L;
    for (const auto c : tree.children[0]) {
      const auto cc = static_cast<std::size_t>(c);
      acc += (1.0L + 2.0L * t[cc] + s[cc]) /
             static_cast<Ld>(tree.children[0].size());
    }
    return static_cast<double>(acc);
  }

  const auto n_states = kernel.num_states();
  std::vector<std::int32_t> transient;
  for (std::int32_t v = 0; v < n_states; ++v)
    if (v != x) transient.push_back(v);
  const auto n = static_cast<std::int32_t>(transient.size());

  const VectorXld m1 = hitting_times_ld(kernel, x);
  // second moment of the hitting time: (I-Q) m2 = 1 + 2 Q m1
  VectorXld rhs(n);
  for (std::int32_t i = 0; i < n; ++i) {
    Ld acc = 1.0L;
    for (const auto& [to, p] : transition_row(kernel, transient[i]))
      acc += 2.0L * static_cast<Ld>(p) * m1[to];
    rhs[i] = acc;
  }
  const VectorXld m2 = solve_transient(kernel, transient, rhs);
  VectorXld m2_full = VectorXld::Zero(n_states);
  for (std::int32_t i = 0; i < n; ++i) m2_full[transient[i]] = m2[i];

  // return time = 1 + hitting time from the first step
  Ld acc = 1.0L;
  for (const auto& [to, p] : transition_row(kernel, x))
    acc += static_cast<Ld>(p) * (2.0L * m1[to] + m2_full[to]);
  return static_cast<double>(acc);
}

double absorption_probability(const WalkKernel& kernel, std::int32_t start,
                              std::int32_t target,
                              std::span<const std::int32_t> avoid) {
  if (start == target) return 1.0;
  for (const auto a : avoid)
    if (start == a) return 0.0;

  const auto n_states = kernel.num_states();
  std::vector<bool> absorbing(n_states, false);
  absorbing[target] = true;
  for (const auto a : avoid) absorbing[a] = true;
  std::vector<std::int32_t> transient;
  for (std::int32_t v = 0; v < n_states; ++v)
    if (!absorbing[v]) transient.push_back(v);
  const auto n = static_cast<std::int32_t>(transient.size());

  VectorXld rhs = VectorXld::Zero(n);
  for (std::int32_t i = 0; i < n; ++i)
    for (const auto& [to, p] : transition_row(kernel, transient[i]))
      if (to == target) rhs[i] += static_cast<Ld>(p);
  const VectorXld sol = solve_transient(kernel, transient, rhs);
  for (std::int32_t i = 0; i < n; ++i)
    if (transient[i] == start) return static_cast<double>(sol[i]);
  return 0.0;  // unreachable
}

double expected_return_time_formula(const trees::RootedTree& tree,
                                    double beta) {
  const auto z = trees::generation_sizes(tree);
  if (z.size() < 2 || z[1] == 0)
    throw std::invalid_argument(
        "expected_return_time_formula: degenerate tree (Z_1 = 0)");
  Ld sum = 0.0L;
  Ld bpow = 1.0L;  // beta^(n-1)
  for (std::size_t n = 1; n < z.size(); ++n) {
    sum += static_cast<Ld>(z[n]) * bpow;
    bpow *= static_cast<Ld>(beta);
  }
  return static_cast<double>(2.0L * sum / static_cast<Ld>(z[1]));
}

std::int64_t simulate_excursion(const trees::BranchTree& branch, double beta,
                                rng::Xoshiro256pp& g) {
  const auto& tree = branch.inner;
  std::int64_t steps = 0;
  std::int32_t v = 0;
  for (;;) {
    ++steps;
    const auto& kids = tree.children[v];
    const auto d = static_cast<double>(kids.size());
    if (v == 0) {
      const double total = beta * (d + 1.0) + 1.0;
      const double u = g.uniform() * total;
      if (u < beta + 1.0) return steps;  // absorbed at the ancestor
      auto idx = static_cast<std::size_t>((u - (beta + 1.0)) / beta);
      if (idx >= kids.size()) idx = kids.size() - 1;
      v = kids[idx];
    } else {
      const double total = 1.0 + beta * d;
      const double u = g.uniform() * total;
      if (u < 1.0) {
        v = tree.parent[v];
      } else {
        auto idx = static_cast<std::size_t>((u - 1.0) / beta);
        if (idx >= kids.size()) idx = kids.size() - 1;
        v = kids[idx];
      }
    }
  }
}

double gamblers_ruin(double beta, std::int64_t k, std::int64_t n) {
  if (!(beta > 1.0))
    throw std::domain_error("gamblers_ruin: requires beta > 1");
  if (!(k < 0 && 0 < n))
    throw std::invalid_argument("gamblers_ruin: requires k < 0 < n");
  // (beta^n - 1)/(beta^(n-k) - 1), written to avoid overflow
  return pow_int(beta, k) * (1.0 - pow_int(beta, -n)) /
         (1.0 - pow_int(beta, k - n));
}

double expected_local_time(double beta, std::int64_t k, std::int64_t n) {
  if (!(beta > 1.0))
    throw std::domain_error("expected_local_time: requires beta > 1");
  if (k >= n) throw std::domain_error("expected_local_time: requires k < n");
  const double c = (beta + 1.0) / (beta - 1.0);
  if (k < 0) return (1.0 - pow_int(beta, -n)) * pow_int(beta, k) * c;
  return (1.0 - pow_int(beta, k - n)) * c;
}

double branching_escape_probability(double beta, std::int64_t dw,
                                    std::int64_t dx, std::int64_t dy) {
  if (!(beta > 1.0))
    throw std::domain_error("branching_escape_probability: requires beta > 1");
  if (!(dw >= 1 && dx > dw && dy > dw))
    throw std::invalid_argument(
        "branching_escape_probability: requires dx, dy > dw >= 1");
  // q_w(rho,{x,y}) normalized by beta^(dx+dy-2dw) to keep exponents bounded
  const double num =
      (1.0 - pow_int(beta, dw - dy)) * (1.0 - pow_int(beta, dw - dx));
  const double den = 2.0 * pow_int(beta, dw) - 1.0 -
                     pow_int(beta, 2 * dw - dy) - pow_int(beta, 2 * dw - dx) +
                     pow_int(beta, 2 * dw - dx - dy);
  return num / den;
}

struct VisitMoments::Impl {
  std::int32_t n = 0;
  MatrixXld fundamental;
  VectorXld start;
  VectorXld visit_mean;
  Ld pair_sum = 0.0L;
};

VisitMoments::VisitMoments(const trees::RootedTree& tree, double beta)
    : impl_(std::make_shared<Impl>()) {
  if (tree.children[0].empty())
    throw std::invalid_argument("VisitMoments: root has no children");
  auto& im = *impl_;
  im.n = static_cast<std::int32_t>(tree.size()) - 1;  // vertices 1..n
  const WalkKernel kernel(tree, beta);

  MatrixXld m = MatrixXld::Identity(im.n, im.n);
  for (std::int32_t v = 1; v <= im.n; ++v)
    for (const auto& [to, p] : transition_row(kernel, v))
      if (to != 0) m(v - 1, to - 1) -= static_cast<Ld>(p);
  im.fundamental = m.partialPivLu().inverse();
  if (!im.fundamental.allFinite())
    throw std::runtime_error("VisitMoments: singular chain");

  im.start = VectorXld::Zero(im.n);
  const auto& kids = tree.children[0];
  for (const auto c : kids)
    im.start[c - 1] = 1.0L / static_cast<Ld>(kids.size());
  im.visit_mean = im.fundamental.transpose() * im.start;

  // all-pairs sum via positive identities: E[v_x] = pi(x)/pi(rho) for the
  // conductance-stationary measure, and sum_y F_xy = E_x[tau_rho], so
  // E[(tau_rho^+)^2] = 1 + sum_x a_x + 2 sum_x a_x E_x[tau_rho]
  const auto t = parent_hit_times(tree, beta);
  const auto h = root_hit_times(tree, t);
  const Ld b = static_cast<Ld>(beta);
  Ld sum_a = 0.0L, sum_ah = 0.0L;
  for (std::size_t v = 1; v < tree.size(); ++v) {
    const Ld a = std::pow(b, static_cast<Ld>(tree.depth[v] - 1)) *
                 (1.0L + b * static_cast<Ld>(tree.children[v].size())) /
                 static_cast<Ld>(kids.size());
    sum_a += a;
    sum_ah += a * h[v];
  }
  im.pair_sum = 1.0L + sum_a + 2.0L * sum_ah;
}

double VisitMoments::mean(std::int32_t x) const {
  if (x == 0) return 1.0;
  return static_cast<double>(impl_->visit_mean[x - 1]);
}

double VisitMoments::pair(std::int32_t x, std::int32_t y) const {
  const auto& im = *impl_;
  if (x == 0 && y == 0) return 1.0;
  if (x == 0) return mean(y);
  if (y == 0) return mean(x);
  if (x == y)
    return static_cast<double>(im.visit_mean[x - 1] *
                               (2.0L * im.fundamental(x - 1, x - 1) - 1.0L));
  return static_cast<double>(im.visit_mean[x - 1] * im.fundamental(x - 1, y - 1) +
                             im.visit_mean[y - 1] * im.fundamental(y - 1, x - 1));
}

double VisitMoments::sum_all_pairs() const {
  return static_cast<double>(impl_->pair_sum);
}

double visit_covariance_exact(const trees::RootedTree& tree, double beta,
                              std::int32_t x, std::int32_t y) {
  return VisitMoments(tree, beta).pair(x, y);
}

}  // namespace trapwalk::tree_walk
