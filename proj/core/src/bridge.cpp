#include "trapwalk/bridge.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "trapwalk/tree_walk.hpp"

namespace trapwalk::bridge {

double expected_eta0(const offspring::OffspringLaw& law, double beta) {
  if (beta < 1.0)
    throw std::domain_error("expected_eta0: requires beta >= 1");
  const double mu = law.mean_mu();
  if (mu <= 0.0) throw std::invalid_argument("expected_eta0: mu = 0");
  if (beta * mu >= 1.0) return std::numeric_limits<double>::infinity();
  const double s2 = law.var_sigma2();
  const double den = mu * (beta + 1.0) * (1.0 - beta * mu);
  return (den + 2.0 * beta * (s2 - mu * (1.0 - mu))) / den;
}

double tree_speed(const offspring::OffspringLaw& law, double beta) {
  if (!(beta > 1.0)) throw std::domain_error("tree_speed: requires beta > 1");
  const double mu = law.mean_mu();
  if (mu <= 0.0) throw std::invalid_argument("tree_speed: mu = 0");
  if (beta * mu >= 1.0) return 0.0;  // sub-ballistic
  const double s2 = law.var_sigma2();
  return mu * (beta - 1.0) * (1.0 - beta * mu) /
         (mu * (beta + 1.0) * (1.0 - beta * mu) +
          2.0 * beta * (s2 - mu * (1.0 - mu)));
}

double einstein_limit(const offspring::OffspringLaw& law) {
  if (law.var_sigma2() <= 0.0)
    throw std::domain_error("einstein_limit: degenerate law (sigma^2 = 0)");
  const double mu = law.mean_mu();
  return mu * (1.0 - mu) / (2.0 * law.var_sigma2());
}

RegimeReport regime(const offspring::OffspringLaw& law, double beta,
                    double delta) {
  if (!(beta > 1.0)) throw std::domain_error("regime: requires beta > 1");
  RegimeReport r;
  r.beta = beta;
  r.mu = law.mean_mu();
  r.beta_mu = beta * r.mu;
  r.beta2_mu = beta * beta * r.mu;
  r.delta = delta;
  // finite-support laws have every xi-moment finite
  const bool m3_finite = std::isfinite(law.m3());
  const bool m3d_finite = std::isfinite(law.moment(3.0 + delta));
  r.ballistic = r.beta_mu < 1.0 && std::isfinite(law.var_sigma2());
  r.annealed_clt = r.beta2_mu < 1.0 && m3_finite;
  r.quenched_clt = r.beta2_mu < 1.0 && m3d_finite;
  r.necessity_violation = r.beta2_mu >= 1.0 || !m3_finite;
  return r;
}

std::string RegimeReport::table() const {
  std::ostringstream os;
  os << "beta                = " << beta << '\n'
     << "mu                  = " << mu << '\n'
     << "beta*mu             = " << beta_mu << '\n'
     << "beta^2*mu           = " << beta2_mu << '\n'
     << "ballistic           = " << (ballistic ? "yes" : "no") << '\n'
     << "annealed CLT        = " << (annealed_clt ? "yes" : "no") << '\n'
     << "quenched CLT (d=" << delta << ") = " << (quenched_clt ? "yes" : "no")
     << '\n'
     << "necessity violated  = " << (necessity_violation ? "yes" : "no")
     << '\n';
  return os.str();
}

rtrw::TrapModel tree_trap_model(const offspring::OffspringLaw& law,
                                double beta) {
  if (law.nontrivial() && !law.subcritical())
    throw std::invalid_argument("tree_trap_model: law is not subcritical");
  rtrw::TrapModel m;
  m.kind = rtrw::TrapModel::Kind::tree;
  m.law = law;
  m.walk_beta = beta;
  m.annealed_mean = expected_eta0(law, beta);
  return m;
}

rtrw::Environment build_tree_environment(const offspring::OffspringLaw& law,
                                         double beta, std::int64_t lo,
                                         std::int64_t hi,
                                         std::uint64_t env_seed) {
  rtrw::Environment env(tree_trap_model(law, beta), env_seed);
  env.ensure(lo, hi);
  return env;
}

KestenWalker::KestenWalker(trees::KestenWindow& window, double beta)
    : window_(&window), beta_(beta) {
  if (beta < 1.0) throw std::domain_error("KestenWalker: requires beta >= 1");
  window_->ensure(1);
}

std::int64_t KestenWalker::depth() const {
  if (branch_ < 0) return k_;
  const auto& tree =
      window_->sites[static_cast<std::size_t>(k_)].branches[branch_];
  return k_ + 1 + tree.depth[vertex_];
}

void KestenWalker::step(rng::Xoshiro256pp& g) {
  ++time_;
  if (branch_ < 0) {
    const auto& site = window_->sites[static_cast<std::size_t>(k_)];
    const auto nb = static_cast<std::int32_t>(site.branches.size());
    if (k_ == 0) {
      // root: uniform over its children (backbone child + buds)
      const auto d = 1 + nb;
      const auto pick =
          static_cast<std::int32_t>(g.uniform() * static_cast<double>(d));
      if (pick <= 0) {
        ++k_;
        window_->ensure(k_ + 1);
      } else {
        branch_ = std::min(pick - 1, nb - 1);
        vertex_ = 0;
      }
      return;
    }
    const double total = 1.0 + beta_ * static_cast<double>(1 + nb);
    const double u = g.uniform() * total;
    if (u < 1.0) {
      --k_;
    } else if (u < 1.0 + beta_) {
      ++k_;
      window_->ensure(k_ + 1);
    } else {
      branch_ = std::min(
          static_cast<std::int32_t>((u - 1.0 - beta_) / beta_), nb - 1);
      vertex_ = 0;
    }
    return;
  }

  const auto& tree =
      window_->sites[static_cast<std::size_t>(k_)].branches[branch_];
  const auto& kids = tree.children[vertex_];
  const auto d = static_cast<double>(kids.size());
  const double total = 1.0 + beta_ * d;
  const double u = g.uniform() * total;
  if (u < 1.0) {
    if (vertex_ == 0)
      branch_ = -1;  // bud's parent is the backbone vertex
    else
      vertex_ = tree.parent[vertex_];
  } else {
    auto idx = static_cast<std::size_t>((u - 1.0) / beta_);
    if (idx >= kids.size()) idx = kids.size() - 1;
    vertex_ = kids[idx];
  }
}

TreeWalkResult simulate_tree_walk(trees::KestenWindow& window, double beta,
                                  std::int64_t horizon_steps,
                                  rng::Xoshiro256pp& g, bool record_paths) {
  KestenWalker w(window, beta);
  TreeWalkResult out;
  if (record_paths) {
    out.depth_path.reserve(static_cast<std::size_t>(horizon_steps) + 1);
    out.backbone_path.reserve(static_cast<std::size_t>(horizon_steps) + 1);
    out.depth_path.push_back(0);
    out.backbone_path.push_back(0);
  }
  for (std::int64_t n = 0; n < horizon_steps; ++n) {
    w.step(g);
    const auto dev = w.deviation();
    if (dev > out.max_deviation) out.max_deviation = dev;
    if (record_paths) {
      out.depth_path.push_back(w.depth());
      out.backbone_path.push_back(w.backbone());
    }
  }
  out.final_depth = w.depth();
  out.final_backbone = w.backbone();
  return out;
}

double backbone_site_mean(trees::KestenWindow& window, std::int64_t k,
                          double beta) {
  if (k < 0) throw std::invalid_argument("backbone_site_mean: k < 0");
  window.ensure(k + 1);
  const auto& site = window.sites[static_cast<std::size_t>(k)];

  // chain states: 0 = rho_k, then the branch arenas in order
  std::int32_t n = 1;
  std::vector<std::int32_t> offset(site.branches.size());
  for (std::size_t b = 0; b < site.branches.size(); ++b) {
    offset[b] = n;
    n += static_cast<std::int32_t>(site.branches[b].size());
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  const auto nb = static_cast<double>(site.branches.size());
  if (k == 0) {
    // uniform over backbone child + buds; stepping to rho_1 absorbs
    const double d = 1.0 + nb;
    for (std::size_t b = 0; b < site.branches.size(); ++b)
      m(0, offset[b]) -= 1.0 / d;
  } else {
    // weights: parent 1, backbone child beta, buds beta each
    const double total = 1.0 + beta * (1.0 + nb);
    for (std::size_t b = 0; b < site.branches.size(); ++b)
      m(0, offset[b]) -= beta / total;
  }
  for (std::size_t b = 0; b < site.branches.size(); ++b) {
    const auto& tree = site.branches[b];
    for (std::size_t v = 0; v < tree.size(); ++v) {
      const auto row = offset[b] + static_cast<std::int32_t>(v);
      const double d = static_cast<double>(tree.children[v].size());
      const double total = 1.0 + beta * d;
      const auto parent_col =
          v == 0 ? 0 : offset[b] + tree.parent[v];
      m(row, parent_col) -= 1.0 / total;
      for (const auto c : tree.children[v])
        m(row, offset[b] + c) -= beta / total;
    }
  }
  const Eigen::VectorXd h =
      m.partialPivLu().solve(Eigen::VectorXd::Ones(n));
  if (!h.allFinite())
    throw std::runtime_error("backbone_site_mean: singular system");
  return h[0];
}

double quenched_tree_centring(trees::KestenWindow& window, double beta,
                              double t) {
  if (!(beta > 1.0))
    throw std::domain_error("quenched_tree_centring: requires beta > 1");
  const double nu = tree_speed(window.law, beta);
  const double mean_eta0 = expected_eta0(window.law, beta);
  const auto m = static_cast<std::int64_t>(std::floor(nu * t));
  double corr = 0.0;
  const double c = (beta + 1.0) / (beta - 1.0);
  for (std::int64_t k = 1; k <= m; ++k)
    corr += c * (backbone_site_mean(window, k, beta) - mean_eta0);
  return nu * t - nu * corr;
}

namespace {

DivergenceReport finish_probe(std::vector<std::int64_t> sizes,
                              std::vector<double> est) {
  DivergenceReport r;
  r.sample_sizes = std::move(sizes);
  r.second_moment_estimates = std::move(est);
  r.strictly_increasing = true;
  for (std::size_t i = 1; i < r.second_moment_estimates.size(); ++i)
    if (r.second_moment_estimates[i] <= r.second_moment_estimates[i - 1])
      r.strictly_increasing = false;
  const auto n = r.second_moment_estimates.size();
  if (n >= 2) {
    const double a = r.second_moment_estimates[n - 2];
    const double b = r.second_moment_estimates[n - 1];
    r.last_rel_change = std::abs(b - a) / std::max(a, 1e-300);
  }
  r.stable = r.last_rel_change < 0.10;
  r.divergence_consistent = r.strictly_increasing && !r.stable;
  return r;
}

}  // namespace

DivergenceReport divergence_probe(const offspring::OffspringLaw& law,
                                  double beta, std::uint64_t seed,
                                  std::vector<std::int64_t> sample_sizes) {
  if (!(beta * law.mean_mu() < 1.0))
    throw std::invalid_argument("divergence_probe: needs beta*mu < 1");
  std::vector<double> est;
  for (std::size_t j = 0; j < sample_sizes.size(); ++j) {
    auto g = rng::derive_stream(seed, rng::StreamKind::calibration, j);
    double acc = 0.0;
    for (std::int64_t i = 0; i < sample_sizes[j]; ++i) {
      const auto branch = trees::sample_branch_tree(law, g);
      const auto eta = tree_walk::simulate_excursion(branch, beta, g);
      acc += static_cast<double>(eta) * static_cast<double>(eta);
    }
    est.push_back(acc / static_cast<double>(sample_sizes[j]));
  }
  return finish_probe(std::move(sample_sizes), std::move(est));
}

DivergenceReport divergence_probe(const rtrw::TrapModel& model,
                                  std::uint64_t seed,
                                  std::vector<std::int64_t> sample_sizes) {
  if (model.kind == rtrw::TrapModel::Kind::tree)
    return divergence_probe(*model.law, model.walk_beta, seed,
                            std::move(sample_sizes));
  std::vector<double> est;
  for (std::size_t j = 0; j < sample_sizes.size(); ++j) {
    auto g = rng::derive_stream(seed, rng::StreamKind::calibration, j);
    double acc = 0.0;
    for (std::int64_t i = 0; i < sample_sizes[j]; ++i) {
      double eta = 1.0;
      switch (model.kind) {
        case rtrw::TrapModel::Kind::unit:
          eta = 1.0;
          break;
        case rtrw::TrapModel::Kind::two_point:
          eta = g.bernoulli(model.p_m1) ? model.m1 : model.m2;
          break;
        case rtrw::TrapModel::Kind::exp_mean: {
          std::vector<double> cdf(model.mean_probs.size());
          double a = 0.0;
          for (std::size_t q = 0; q < cdf.size(); ++q) {
            a += model.mean_probs[q];
            cdf[q] = a;
          }
          cdf.back() = 1.0;
          eta = g.exponential(model.mean_values[g.categorical(cdf)]);
          break;
        }
        case rtrw::TrapModel::Kind::tree:
          break;  // handled above
      }
      acc += eta * eta;
    }
    est.push_back(acc / static_cast<double>(sample_sizes[j]));
  }
  return finish_probe(std::move(sample_sizes), std::move(est));
}

}  // namespace trapwalk::bridge
