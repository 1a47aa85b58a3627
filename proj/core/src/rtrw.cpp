#include "trapwalk/rtrw.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "trapwalk/tree_walk.hpp"

namespace trapwalk::rtrw {

TrapModel TrapModel::unit() {
  TrapModel m;
  m.kind = Kind::unit;
  m.annealed_mean = 1.0;
  return m;
}

TrapModel TrapModel::two_point(double m1, double m2, double p_m1) {
  if (m1 <= 0 || m2 <= 0)
    throw std::invalid_argument("two_point: holding times must be positive");
  if (p_m1 < 0 || p_m1 > 1)
    throw std::invalid_argument("two_point: p must lie in [0,1]");
  TrapModel m;
  m.kind = Kind::two_point;
  m.m1 = m1;
  m.m2 = m2;
  m.p_m1 = p_m1;
  m.annealed_mean = p_m1 * m1 + (1.0 - p_m1) * m2;
  return m;
}

TrapModel TrapModel::exp_mean(std::vector<double> values,
                              std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("exp_mean: values/probs size mismatch");
  double sum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= 0) throw std::invalid_argument("exp_mean: mean <= 0");
    if (probs[i] < 0) throw std::invalid_argument("exp_mean: negative prob");
    sum += probs[i];
    mean += probs[i] * values[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("exp_mean: probs do not sum to 1");
  TrapModel m;
  m.kind = Kind::exp_mean;
  m.mean_values = std::move(values);
  m.mean_probs = std::move(probs);
  m.annealed_mean = mean / sum;
  return m;
}

std::string TrapModel::name() const {
  switch (kind) {
    case Kind::unit: return "unit";
    case Kind::two_point: return "two-point";
    case Kind::exp_mean: return "exp-mean";
    case Kind::tree: return "tree";
  }
  return "?";
}

Environment::Environment(TrapModel model, std::uint64_t env_seed)
    : model_(std::move(model)), seed_(env_seed) {
  if (model_.kind == TrapModel::Kind::tree && !model_.law)
    throw std::invalid_argument("environment: tree model without a law");
}

void Environment::materialize(std::int64_t x) {
  SiteTrap st;
  switch (model_.kind) {
    case TrapModel::Kind::unit:
      break;
    case TrapModel::Kind::two_point: {
      auto g = rng::derive_stream(seed_, rng::StreamKind::site, rng::zigzag(x));
      st.param = g.bernoulli(model_.p_m1) ? model_.m1 : model_.m2;
      st.mean = st.param;
      break;
    }
    case TrapModel::Kind::exp_mean: {
      auto g = rng::derive_stream(seed_, rng::StreamKind::site, rng::zigzag(x));
      std::vector<double> cdf(model_.mean_probs.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += model_.mean_probs[i];
        cdf[i] = acc;
      }
      cdf.back() = 1.0;
      st.param = model_.mean_values[g.categorical(cdf)];
      st.mean = st.param;
      break;
    }
    case TrapModel::Kind::tree: {
      auto g = rng::derive_stream(seed_, rng::StreamKind::site, rng::zigzag(x));
      st.trap = trees::sample_branch_tree(*model_.law, g);
      const tree_walk::WalkKernel kernel(st.trap, model_.walk_beta);
      st.mean =
          tree_walk::expected_hitting_time(kernel, 0, st.trap.ancestor_id());
      st.param = static_cast<double>(st.trap.xstar);
      break;
    }
  }
  if (x >= 0)
    pos_.push_back(std::move(st));
  else
    neg_.push_back(std::move(st));
}

void Environment::ensure(std::int64_t lo, std::int64_t hi) {
  std::lock_guard<std::mutex> lock(mu_);
  while (static_cast<std::int64_t>(pos_.size()) <= hi)
    materialize(static_cast<std::int64_t>(pos_.size()));
  while (static_cast<std::int64_t>(neg_.size()) < -lo)
    materialize(-(static_cast<std::int64_t>(neg_.size()) + 1));
}

const SiteTrap& Environment::site(std::int64_t x) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (x >= 0) {
    if (x >= static_cast<std::int64_t>(pos_.size()))
      throw std::out_of_range("environment: site not materialized");
    return pos_[static_cast<std::size_t>(x)];
  }
  if (-x - 1 >= static_cast<std::int64_t>(neg_.size()))
    throw std::out_of_range("environment: site not materialized");
  return neg_[static_cast<std::size_t>(-x - 1)];
}

double Environment::sample_holding(std::int64_t x, rng::Xoshiro256pp& g) const {
  return sample_from_site(site(x), g);
}

double Environment::sample_from_site(const SiteTrap& st,
                                     rng::Xoshiro256pp& g) const {
  switch (model_.kind) {
    case TrapModel::Kind::unit: return 1.0;
    case TrapModel::Kind::two_point: return st.param;
    case TrapModel::Kind::exp_mean: return g.exponential(st.param);
    case TrapModel::Kind::tree:
      return static_cast<double>(
          tree_walk::simulate_excursion(st.trap, model_.walk_beta, g));
  }
  return 1.0;
}

Environment Environment::from_site_params(TrapModel model, std::int64_t lo,
                                          std::vector<double> params) {
  if (model.kind == TrapModel::Kind::tree)
    throw std::invalid_argument(
        "from_site_params: tree environments must be sampled");
  Environment env(std::move(model), 0);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(params.size()); ++i) {
    SiteTrap st;
    st.param = params[static_cast<std::size_t>(i)];
    st.mean = env.model_.kind == TrapModel::Kind::unit ? 1.0 : st.param;
    const std::int64_t x = lo + i;
    if (x >= 0)
      env.pos_.push_back(st);
    else
      env.neg_.push_front(st);  // front = most negative; fix order below
  }
  // neg_ must be ordered site -1, -2, ...; rebuild it
  if (!env.neg_.empty()) {
    std::deque<SiteTrap> fixed;
    for (std::int64_t x = -1; x >= lo; --x)
      fixed.push_back(env.neg_[static_cast<std::size_t>(x - lo)]);
    env.neg_ = std::move(fixed);
  }
  return env;
}

std::string Environment::to_json_text() const {
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::json sites = nlohmann::json::array();
  const auto lo = -static_cast<std::int64_t>(neg_.size());
  const auto hi = static_cast<std::int64_t>(pos_.size()) - 1;
  for (std::int64_t x = lo; x <= hi; ++x) {
    const SiteTrap& st = x >= 0 ? pos_[static_cast<std::size_t>(x)]
                                : neg_[static_cast<std::size_t>(-x - 1)];
    nlohmann::json js{{"x", x}, {"mean", st.mean}, {"param", st.param}};
    if (model_.kind == TrapModel::Kind::tree)
      js["trap_size"] = st.trap.inner.size();
    sites.push_back(std::move(js));
  }
  return nlohmann::json{{"model", model_.name()},
                        {"seed", seed_},
                        {"sites", sites}}
      .dump();
}

std::int64_t Trajectory::position_at(double t) const {
  if (s.empty()) throw std::logic_error("position_at: path not recorded");
  if (t < 0) throw std::invalid_argument("position_at: negative time");
  const auto it = std::upper_bound(s.begin(), s.end(), t);
  const auto k = static_cast<std::size_t>(it - s.begin());
  if (k == 0) return y.front();
  return y[std::min(k - 1, y.size() - 1)];
}

Trajectory run_rtrw(Environment& env, double beta, rng::Xoshiro256pp& g,
                    const RunOptions& opts) {
  if (beta < 1.0) throw std::domain_error("run_rtrw: requires beta >= 1");
  const double p_right = beta / (beta + 1.0);
  const bool use_horizon = opts.horizon_clock > 0.0;
  const bool use_stop =
      opts.stop_at_site != std::numeric_limits<std::int64_t>::min();

  Trajectory tr;
  if (opts.record_path) {
    tr.y.push_back(0);
    tr.s.push_back(0.0);
  }

  // Per-walker pointer cache; env.site references are deque-stable.
  std::vector<const SiteTrap*> cpos, cneg;
  const auto site_ptr = [&](std::int64_t x) -> const SiteTrap* {
    if (x >= 0) {
      if (static_cast<std::size_t>(x) >= cpos.size())
        cpos.resize(static_cast<std::size_t>(x) + 1, nullptr);
      auto*& p = cpos[static_cast<std::size_t>(x)];
      if (p == nullptr) {
        env.ensure(x, x);
        p = &env.site(x);
      }
      return p;
    }
    const auto i = static_cast<std::size_t>(-x - 1);
    if (i >= cneg.size()) cneg.resize(i + 1, nullptr);
    auto*& p = cneg[i];
    if (p == nullptr) {
      env.ensure(x, x);
      p = &env.site(x);
    }
    return p;
  };

  std::int64_t yk = 0;
  double sk = 0.0;
  for (;;) {
    if (use_stop && yk == opts.stop_at_site) {
      tr.hit_stop_site = true;
      tr.hit_time = sk;
      break;
    }
    if (opts.max_steps >= 0 && tr.steps >= opts.max_steps) break;
    const double eta = env.sample_from_site(*site_ptr(yk), g);
    const double s_next = sk + eta;
    if (use_horizon && s_next > opts.horizon_clock) break;  // X_T = yk
    yk += g.uniform() < p_right ? 1 : -1;
    sk = s_next;
    ++tr.steps;
    if (opts.record_path) {
      tr.y.push_back(yk);
      tr.s.push_back(sk);
    }
  }
  tr.final_position = yk;
  tr.final_clock = sk;
  return tr;
}

std::int64_t default_confirmation_horizon(double beta) {
  if (beta <= 1.0) return 1000;
  return static_cast<std::int64_t>(
      std::llround(std::max(1000.0, 50.0 / (beta - 1.0))));
}

std::vector<std::int64_t> detect_regenerations(
    std::span<const std::int64_t> y, std::int64_t confirmation_horizon) {
  std::vector<std::int64_t> regens;
  const auto n = static_cast<std::int64_t>(y.size()) - 1;
  if (n < 1) return regens;

  std::vector<std::int64_t> suffix_min(y.size());
  suffix_min[static_cast<std::size_t>(n)] = y[static_cast<std::size_t>(n)];
  for (std::int64_t i = n - 1; i >= 0; --i)
    suffix_min[static_cast<std::size_t>(i)] =
        std::min(y[static_cast<std::size_t>(i)],
                 suffix_min[static_cast<std::size_t>(i + 1)]);

  std::int64_t prefix_max = y[0];
  const std::int64_t last = n - confirmation_horizon;
  for (std::int64_t m = 1; m <= last; ++m) {
    if (suffix_min[static_cast<std::size_t>(m)] > prefix_max)
      regens.push_back(m);
    prefix_max = std::max(prefix_max, y[static_cast<std::size_t>(m)]);
  }
  return regens;
}

std::vector<RegenBlock> regeneration_blocks(
    const Trajectory& traj, std::int64_t confirmation_horizon) {
  if (traj.y.empty())
    throw std::logic_error("regeneration_blocks: path not recorded");
  const auto regens = detect_regenerations(traj.y, confirmation_horizon);
  std::vector<RegenBlock> blocks;
  for (std::size_t i = 1; i < regens.size(); ++i) {
    const auto a = static_cast<std::size_t>(regens[i - 1]);
    const auto b = static_cast<std::size_t>(regens[i]);
    blocks.push_back({traj.y[b] - traj.y[a], traj.s[b] - traj.s[a],
                      regens[i] - regens[i - 1]});
  }
  return blocks;
}

double speed_formula(double beta, double mean_eta0) {
  if (!(beta > 1.0)) throw std::domain_error("speed_formula: requires beta > 1");
  if (!(mean_eta0 > 0.0) || !std::isfinite(mean_eta0))
    throw std::domain_error("speed_formula: E[eta_0] must be positive finite");
  return (beta - 1.0) / (mean_eta0 * (beta + 1.0));
}

SigmaSqEstimate sigma_sq_blocks(std::span<const RegenBlock> blocks,
                                double mean_eta0, double nu,
                                rng::Xoshiro256pp& bootstrap_rng,
                                int n_bootstrap) {
  if (blocks.size() < 2)
    throw std::invalid_argument("sigma_sq_blocks: need at least 2 blocks");

  // per-block (Z^2, dk); mean(Z^2)/(E[eta] mean(dk)) = sum Z^2/(E[eta] sum dk)
  std::vector<std::pair<double, double>> items;
  items.reserve(blocks.size());
  for (const auto& b : blocks) {
    const double z = static_cast<double>(b.dx) - nu * b.dt;
    items.emplace_back(z * z, static_cast<double>(b.dk));
  }
  // batch consecutive blocks to bound the bootstrap cost
  constexpr std::size_t kMaxItems = 10'000;
  if (items.size() > kMaxItems) {
    const std::size_t group = (items.size() + kMaxItems - 1) / kMaxItems;
    std::vector<std::pair<double, double>> merged;
    merged.reserve(kMaxItems);
    for (std::size_t i = 0; i < items.size(); i += group) {
      std::pair<double, double> acc{0.0, 0.0};
      for (std::size_t j = i; j < std::min(items.size(), i + group); ++j) {
        acc.first += items[j].first;
        acc.second += items[j].second;
      }
      merged.push_back(acc);
    }
    items = std::move(merged);
  }

  const auto estimate = [&](const std::vector<std::size_t>& idx) {
    double z2 = 0.0, dk = 0.0;
    for (const auto i : idx) {
      z2 += items[i].first;
      dk += items[i].second;
    }
    return z2 / (mean_eta0 * dk);
  };

  std::vector<std::size_t> all(items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  SigmaSqEstimate out;
  out.n_blocks = blocks.size();
  out.value = estimate(all);

  std::vector<double> boots(static_cast<std::size_t>(n_bootstrap));
  std::vector<std::size_t> sample(items.size());
  for (auto& b : boots) {
    for (auto& s : sample)
      s = static_cast<std::size_t>(bootstrap_rng.uniform() *
                                   static_cast<double>(items.size()));
    b = estimate(sample);
  }
  double mean = 0.0;
  for (const auto b : boots) mean += b;
  mean /= static_cast<double>(boots.size());
  double var = 0.0;
  for (const auto b : boots) var += (b - mean) * (b - mean);
  out.se = std::sqrt(var / static_cast<double>(boots.size() - 1));
  std::sort(boots.begin(), boots.end());
  out.ci_lo = boots[static_cast<std::size_t>(0.005 * (boots.size() - 1))];
  out.ci_hi = boots[static_cast<std::size_t>(0.995 * (boots.size() - 1))];
  return out;
}

double quenched_centring_G(Environment& env, double beta, double t, double nu,
                           double mean_eta0) {
  if (!(beta > 1.0))
    throw std::domain_error("quenched_centring_G: requires beta > 1");
  const auto m = static_cast<std::int64_t>(std::floor(nu * t));
  double corr = 0.0;
  if (m >= 1) {
    env.ensure(0, m - 1);
    const double c = (beta + 1.0) / (beta - 1.0);
    for (std::int64_t k = 0; k < m; ++k)
      corr += c * (env.quenched_mean(k) - mean_eta0);
  }
  return nu * t - nu * corr;
}

HittingCentrings hitting_centrings(Environment& env, double beta,
                                   std::int64_t n) {
  if (!(beta > 1.0))
    throw std::domain_error("hitting_centrings: requires beta > 1");
  if (n < 1) throw std::invalid_argument("hitting_centrings: n < 1");
  // negative-axis truncation: beta^-K < 1e-17 makes the dropped tail < 1e-10
  const auto K =
      static_cast<std::int64_t>(std::ceil(40.0 / std::log(beta)));
  env.ensure(-K, n - 1);

  HittingCentrings out;
  const double c = (beta + 1.0) / (beta - 1.0);
  for (std::int64_t k = -K; k < n; ++k) {
    const double lt = tree_walk::expected_local_time(beta, k, n);
    const double mean = env.quenched_mean(k);
    out.H += lt * mean;
    if (k >= 0) out.H_tilde += c * mean;
  }
  return out;
}

double correction_sum_J(Environment& env, std::int64_t n, double mean_eta0) {
  if (n < 1) throw std::invalid_argument("correction_sum_J: n < 1");
  env.ensure(0, n - 1);
  double j = 0.0;
  for (std::int64_t k = 0; k < n; ++k)
    j += env.quenched_mean(k) - mean_eta0;
  return j;
}

void write_blocks_csv(std::span<const RegenBlock> blocks, std::int64_t replica,
                      std::ostream& os, bool header) {
  if (header) os << "replica,kappa_index,dx,dt\n";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << replica << ',' << i << ',' << blocks[i].dx << ',' << blocks[i].dt
       << '\n';
}

}  // namespace trapwalk::rtrw
