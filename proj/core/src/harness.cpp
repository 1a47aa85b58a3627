#include "trapwalk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "trapwalk/bridge.hpp"
#include "trapwalk/tree_walk.hpp"

namespace trapwalk::harness {

namespace {

// env-id layout inside StreamKind::environment:
//   [0, 2^60)            fresh per-replica environments (annealed)
//   2^60 + attempt       fixed quenched-position environment (screened)
//   2^61 + 0             fixed quenched-hitting environment
//   2^61 + 1             fixed decorated window (tree quenched CLT)
constexpr std::uint64_t kQuenchedEnvBase = 1ULL << 60;
constexpr std::uint64_t kHittingEnvBase = 1ULL << 61;

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: p outside (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 4; ++i) {  // Newton polish
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf < 1e-300) break;
    x -= (normal_cdf(x) - p) / pdf;
  }
  return x;
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  const double a = -2.0 * lambda * lambda;
  double sum = 0.0, sign = 1.0, prev_term = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(a * k * k);
    sum += sign * term;
    if (term <= 1e-16 * sum || (k > 1 && term + prev_term <= 1e-12 * sum))
      return std::clamp(2.0 * sum, 0.0, 1.0);
    prev_term = term;
    sign = -sign;
  }
  return 1.0;  // series failed to converge: lambda tiny
}

namespace {

double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
  // Lentz continued fraction
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

TestReport ks_test(std::vector<double> sample,
                   const std::function<double(double)>& cdf,
                   double threshold) {
  if (sample.size() < 50)
    throw std::invalid_argument("ks_test: need at least 50 samples");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  TestReport r;
  r.statistic = d;
  r.n = sample.size();
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
  r.threshold = threshold;
  r.pass = r.p_value > threshold;
  return r;
}

TestReport ks_two_sample(std::vector<double> a, std::vector<double> b,
                         double threshold) {
  if (a.size() < 50 || b.size() < 50)
    throw std::invalid_argument("ks_two_sample: need at least 50 samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  TestReport r;
  r.statistic = d;
  r.n = a.size() + b.size();
  const double ne = std::sqrt(na * nb / (na + nb));
  r.p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
  r.threshold = threshold;
  r.pass = r.p_value > threshold;
  return r;
}

TestReport chi_square_gof(const std::vector<std::int64_t>& counts,
                          const std::vector<double>& probs, double threshold) {
  if (counts.size() != probs.size() || counts.size() < 2)
    throw std::invalid_argument("chi_square_gof: bad bins");
  double total = 0.0;
  for (const auto c : counts) total += static_cast<double>(c);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expect = total * probs[i];
    if (expect <= 0.0)
      throw std::invalid_argument("chi_square_gof: zero expected count");
    const double diff = static_cast<double>(counts[i]) - expect;
    chi2 += diff * diff / expect;
  }
  TestReport r;
  r.statistic = chi2;
  r.n = static_cast<std::size_t>(total);
  r.p_value = gamma_q(0.5 * static_cast<double>(counts.size() - 1), 0.5 * chi2);
  r.threshold = threshold;
  r.pass = r.p_value > threshold;
  return r;
}

TailFit exponential_tail_fit(const std::vector<std::int64_t>& values) {
  if (values.size() < 100)
    throw std::invalid_argument("exponential_tail_fit: too few values");
  const auto total = static_cast<double>(values.size());
  std::vector<std::int64_t> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  // points (n, log sf(n)) while at least 30 exceedances remain
  std::vector<double> xs, ys;
  for (std::int64_t n = 1;; ++n) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), n);
    const auto exceed = static_cast<double>(sorted.end() - it);
    if (exceed < 30.0) break;
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(exceed / total));
  }
  if (xs.size() < 3)
    throw std::invalid_argument("exponential_tail_fit: tail too short");

  const auto m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
    syy += ys[i] * ys[i];
  }
  const double cov = sxy - sx * sy / m;
  const double vx = sxx - sx * sx / m;
  const double vy = syy - sy * sy / m;
  TailFit f;
  f.rate = -(cov / vx);
  f.corr = cov / std::sqrt(vx * vy);
  f.points = xs.size();
  return f;
}

McSummary summarize(std::span<const double> xs) {
  McSummary s;
  s.n = xs.size();
  if (s.n == 0) return s;
  for (const auto x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double acc = 0.0;
    for (const auto x : xs) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(s.n - 1));
    s.se = s.sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn) {
  const int t = std::min<std::int64_t>(resolve_threads(threads), n);
  if (t <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::int64_t i = w; i < n; i += t) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

rtrw::SigmaSqEstimate calibrate_sigma_sq(const rtrw::TrapModel& model,
                                         double beta, std::uint64_t seed,
                                         double horizon_clock) {
  rtrw::Environment env(model,
                        rng::derive_seed(seed, rng::StreamKind::calibration, 0));
  auto g = rng::derive_stream(seed, rng::StreamKind::calibration, 1);
  rtrw::RunOptions opts;
  opts.horizon_clock = horizon_clock;
  opts.record_path = true;
  const auto traj = rtrw::run_rtrw(env, beta, g, opts);
  const auto blocks =
      rtrw::regeneration_blocks(traj, rtrw::default_confirmation_horizon(beta));
  auto boot = rng::derive_stream(seed, rng::StreamKind::bootstrap, 0);
  const double nu = rtrw::speed_formula(beta, model.annealed_mean);
  return rtrw::sigma_sq_blocks(blocks, model.annealed_mean, nu, boot);
}

double estimate_sigma_hit_sq(const rtrw::TrapModel& model, double beta,
                             std::uint64_t seed, int outer, int inner,
                             int threads) {
  std::vector<double> vars(static_cast<std::size_t>(outer), 0.0);
  parallel_for(outer, threads, [&](std::int64_t j) {
    const auto env_seed = rng::derive_seed(
        seed, rng::StreamKind::calibration, 1000 + static_cast<std::uint64_t>(j));
    rtrw::Environment env(model, env_seed);
    std::vector<double> taus(static_cast<std::size_t>(inner));
    for (int i = 0; i < inner; ++i) {
      auto g = rng::derive_stream(env_seed, rng::StreamKind::replica,
                                  static_cast<std::uint64_t>(i));
      rtrw::RunOptions opts;
      opts.stop_at_site = 1;
      taus[static_cast<std::size_t>(i)] =
          rtrw::run_rtrw(env, beta, g, opts).hit_time;
    }
    const auto s = summarize(taus);
    vars[static_cast<std::size_t>(j)] = s.sd * s.sd;
  });
  double acc = 0.0;
  for (const auto v : vars) acc += v;
  return acc / static_cast<double>(outer);
}

namespace {

// Var of the per-site quenched mean under the environment law; exact for the
// deterministic models, MC for tree traps.
double site_mean_variance(const rtrw::TrapModel& model, std::uint64_t seed) {
  using Kind = rtrw::TrapModel::Kind;
  switch (model.kind) {
    case Kind::unit:
      return 0.0;
    case Kind::two_point: {
      const double d = model.m1 - model.m2;
      return model.p_m1 * (1.0 - model.p_m1) * d * d;
    }
    case Kind::exp_mean: {
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < model.mean_values.size(); ++i) {
        m += model.mean_probs[i] * model.mean_values[i];
        m2 += model.mean_probs[i] * model.mean_values[i] * model.mean_values[i];
      }
      return m2 - m * m;
    }
    case Kind::tree: {
      rtrw::Environment env(
          model, rng::derive_seed(seed, rng::StreamKind::calibration, 999));
      const std::int64_t n = 2000;
      env.ensure(0, n - 1);
      std::vector<double> means(static_cast<std::size_t>(n));
      for (std::int64_t x = 0; x < n; ++x)
        means[static_cast<std::size_t>(x)] = env.quenched_mean(x);
      const auto s = summarize(means);
      return s.sd * s.sd;
    }
  }
  return 0.0;
}

std::uint64_t screened_env_seed(const config::ExperimentConfig& cfg, double nu) {
  const auto m =
      static_cast<std::int64_t>(std::floor(nu * cfg.horizon));
  const double var = site_mean_variance(cfg.model, cfg.seed);
  const double bar = std::sqrt(var * static_cast<double>(m));
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    const auto env_seed = rng::derive_seed(
        cfg.seed, rng::StreamKind::environment, kQuenchedEnvBase + attempt);
    rtrw::Environment env(cfg.model, env_seed);
    const double j =
        rtrw::correction_sum_J(env, std::max<std::int64_t>(m, 1),
                               cfg.model.annealed_mean);
    if (std::abs(j) > bar) return env_seed;
  }
  throw std::runtime_error("clt_experiment: environment screening failed");
}

}  // namespace

CltOutcome clt_experiment(const config::ExperimentConfig& cfg) {
  const auto& model = cfg.model;
  if (!model.mean_finite())
    throw std::invalid_argument("clt_experiment: E[eta_0] is infinite");
  const double beta = cfg.beta;
  const double mean_eta0 = model.annealed_mean;
  const double nu = rtrw::speed_formula(beta, mean_eta0);
  const double T = cfg.horizon;
  const auto M = cfg.replicas;
  const int threads = cfg.threads;

  CltOutcome out;
  out.nu = nu;
  out.mean_eta0 = mean_eta0;
  out.standardized.assign(static_cast<std::size_t>(M), 0.0);

  if (cfg.suite == "annealed-clt") {
    const auto sig = calibrate_sigma_sq(model, beta, cfg.seed);
    out.sigma_hat = std::sqrt(sig.value);
    out.scale = out.sigma_hat * std::sqrt(T);
    out.centring = T * nu;
    parallel_for(M, threads, [&](std::int64_t i) {
      rtrw::Environment env(
          model, rng::derive_seed(cfg.seed, rng::StreamKind::environment,
                                  static_cast<std::uint64_t>(i)));
      auto g = rng::derive_stream(cfg.seed, rng::StreamKind::replica,
                                  static_cast<std::uint64_t>(i));
      rtrw::RunOptions opts;
      opts.horizon_clock = T;
      const auto tr = rtrw::run_rtrw(env, beta, g, opts);
      out.standardized[static_cast<std::size_t>(i)] =
          (static_cast<double>(tr.final_position) - out.centring) / out.scale;
    });
  } else if (cfg.suite == "quenched-clt") {
    out.env_seed =
        cfg.screen_env
            ? screened_env_seed(cfg, nu)
            : rng::derive_seed(cfg.seed, rng::StreamKind::environment,
                               kQuenchedEnvBase);
    rtrw::Environment env(model, out.env_seed);
    const double sigma_hit_sq =
        estimate_sigma_hit_sq(model, beta, cfg.seed, 200, 200, threads);
    out.sigma_hat = std::sqrt(sigma_hit_sq) * std::pow(nu, 1.5);
    out.scale = out.sigma_hat * std::sqrt(T);
    out.centring =
        cfg.centring == "deterministic"
            ? T * nu
            : rtrw::quenched_centring_G(env, beta, T, nu, mean_eta0);
    // pre-extend so parallel walkers rarely contend on window growth
    const auto neg =
        static_cast<std::int64_t>(std::ceil((std::log(static_cast<double>(M) + 1.0) + 40.0) /
                                            std::log(beta)));
    env.ensure(-neg, static_cast<std::int64_t>(std::floor(nu * T)) + 8);
    parallel_for(M, threads, [&](std::int64_t i) {
      auto g = rng::derive_stream(cfg.seed, rng::StreamKind::replica,
                                  static_cast<std::uint64_t>(i));
      rtrw::RunOptions opts;
      opts.horizon_clock = T;
      const auto tr = rtrw::run_rtrw(env, beta, g, opts);
      out.standardized[static_cast<std::size_t>(i)] =
          (static_cast<double>(tr.final_position) - out.centring) / out.scale;
    });
  } else if (cfg.suite == "quenched-hitting") {
    const auto n = static_cast<std::int64_t>(std::llround(T));
    out.env_seed = rng::derive_seed(cfg.seed, rng::StreamKind::environment,
                                    kHittingEnvBase);
    rtrw::Environment env(model, out.env_seed);
    const double sigma_hit_sq =
        estimate_sigma_hit_sq(model, beta, cfg.seed, 200, 200, threads);
    out.sigma_hat = std::sqrt(sigma_hit_sq);
    out.scale = out.sigma_hat * std::sqrt(static_cast<double>(n));
    out.centring = rtrw::hitting_centrings(env, beta, n).H;
    parallel_for(M, threads, [&](std::int64_t i) {
      auto g = rng::derive_stream(cfg.seed, rng::StreamKind::replica,
                                  static_cast<std::uint64_t>(i));
      rtrw::RunOptions opts;
      opts.stop_at_site = n;
      const auto tr = rtrw::run_rtrw(env, beta, g, opts);
      out.standardized[static_cast<std::size_t>(i)] =
          (tr.hit_time - out.centring) / out.scale;
    });
  } else {
    throw std::invalid_argument("clt_experiment: suite '" + cfg.suite +
                                "' is not a CLT mode");
  }

  out.ks = ks_test(out.standardized, normal_cdf, cfg.p_threshold);
  return out;
}

CltOutcome quenched_tree_experiment(const offspring::OffspringLaw& law,
                                    double beta, std::int64_t horizon,
                                    std::int64_t replicas, std::uint64_t seed,
                                    int threads, double p_threshold) {
  const auto model = bridge::tree_trap_model(law, beta);
  if (!model.mean_finite())
    throw std::invalid_argument("quenched_tree_experiment: infinite E[eta_0]");
  const double nu = bridge::tree_speed(law, beta);
  const auto window_seed =
      rng::derive_seed(seed, rng::StreamKind::environment, kHittingEnvBase + 1);

  CltOutcome out;
  out.nu = nu;
  out.mean_eta0 = model.annealed_mean;
  out.env_seed = window_seed;

  // theta from the position spread of a calibration window with its own
  // seed; the quenched CLT scale does not depend on the window
  {
    const auto cal_seed =
        rng::derive_seed(seed, rng::StreamKind::calibration, 77);
    const std::int64_t m_cal = 1000;
    std::vector<double> cal(static_cast<std::size_t>(m_cal));
    parallel_for(m_cal, threads, [&](std::int64_t i) {
      auto window = trees::sample_kesten_window(law, 2, cal_seed);
      auto g = rng::derive_stream(seed, rng::StreamKind::calibration,
                                  2000 + static_cast<std::uint64_t>(i));
      cal[static_cast<std::size_t>(i)] = static_cast<double>(
          bridge::simulate_tree_walk(window, beta, horizon, g).final_depth);
    });
    out.sigma_hat =
        summarize(cal).sd / std::sqrt(static_cast<double>(horizon));
  }
  out.scale = out.sigma_hat * std::sqrt(static_cast<double>(horizon));

  auto master = trees::sample_kesten_window(law, 2, window_seed);
  out.centring = bridge::quenched_tree_centring(
      master, beta, static_cast<double>(horizon));

  out.standardized.assign(static_cast<std::size_t>(replicas), 0.0);
  parallel_for(replicas, threads, [&](std::int64_t i) {
    // private window copy; decorations are deterministic in (seed, site)
    auto window = trees::sample_kesten_window(law, 2, window_seed);
    auto g = rng::derive_stream(seed, rng::StreamKind::replica,
                                static_cast<std::uint64_t>(i));
    const auto res = bridge::simulate_tree_walk(window, beta, horizon, g);
    out.standardized[static_cast<std::size_t>(i)] =
        (static_cast<double>(res.final_depth) - out.centring) / out.scale;
  });

  out.ks = ks_test(out.standardized, normal_cdf, p_threshold);
  return out;
}

std::vector<EinsteinRow> einstein_sweep(const offspring::OffspringLaw& law,
                                        const std::vector<double>& betas,
                                        std::uint64_t seed, int threads,
                                        std::int64_t horizon_steps,
                                        int replicas) {
  std::vector<EinsteinRow> rows;
  const double limit = bridge::einstein_limit(law);
  for (std::size_t row = 0; row < betas.size(); ++row) {
    const double beta = betas[row];
    if (!(beta > 1.0) || !(beta * law.mean_mu() < 1.0))
      throw std::invalid_argument("einstein_sweep: beta outside (1, 1/mu)");
    EinsteinRow r;
    r.beta = beta;
    r.closed_ratio = bridge::tree_speed(law, beta) / (beta - 1.0);
    r.limit = limit;

    std::vector<double> speed(static_cast<std::size_t>(replicas), 0.0);
    parallel_for(replicas, threads, [&](std::int64_t i) {
      const auto id = static_cast<std::uint64_t>(row) * 1'000'000 +
                      static_cast<std::uint64_t>(i);
      auto window = trees::sample_kesten_window(
          law, 2, rng::derive_seed(seed, rng::StreamKind::environment, id));
      auto g = rng::derive_stream(seed, rng::StreamKind::replica, id);
      const auto res =
          bridge::simulate_tree_walk(window, beta, horizon_steps, g);
      speed[static_cast<std::size_t>(i)] =
          static_cast<double>(res.final_depth) /
          static_cast<double>(horizon_steps);
    });
    const auto s = summarize(speed);
    r.mc_nu = s.mean;
    r.mc_se = s.se;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace trapwalk::harness
