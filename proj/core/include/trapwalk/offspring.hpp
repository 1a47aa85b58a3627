#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trapwalk/rng.hpp"

namespace trapwalk::offspring {

// Finite-support offspring law p_k with the derived moments every other
// module reads from. Immutable after construction; safe to share.
class OffspringLaw {
 public:
  // pmf[k] = p_k. Probabilities must be nonnegative and sum to 1 within tol.
  static OffspringLaw from_pmf(std::vector<double> pmf, double tol = 1e-12);

  // JSON form {"pmf": {"0": 0.6, "2": 0.4}}. Rejects negative entries and
  // sums off by more than 1e-9, then renormalizes the accepted mass.
  static OffspringLaw from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::vector<double>& pmf() const { return pmf_; }
  double p(std::size_t k) const { return k < pmf_.size() ? pmf_[k] : 0.0; }
  std::size_t max_k() const { return pmf_.size() - 1; }

  double mean_mu() const { return mean_mu_; }
  double var_sigma2() const { return var_sigma2_; }
  double m2() const { return m2_; }
  double m3() const { return m3_; }
  double fact2() const { return fact2_; }  // f''(1) = E[xi(xi-1)]
  double fact3() const { return fact3_; }  // f'''(1) = E[xi(xi-1)(xi-2)]
  // E[xi^r] for the regime checks with fractional r.
  double moment(double r) const;

  bool subcritical() const { return subcritical_; }
  // true iff p_k > 0 for some k >= 2 (traps can form)
  bool nontrivial() const { return nontrivial_; }

  // Generating function f(s) = sum p_k s^k.
  double f(double s) const;

  std::uint32_t sample(rng::Xoshiro256pp& g) const {
    return static_cast<std::uint32_t>(g.categorical(cdf_));
  }

 private:
  OffspringLaw() = default;

  std::vector<double> pmf_;
  std::vector<double> cdf_;
  double mean_mu_ = 0, var_sigma2_ = 0, m2_ = 0, m3_ = 0, fact2_ = 0,
         fact3_ = 0;
  bool subcritical_ = false, nontrivial_ = false;
};

// Law of xi*, P(xi* = k) = k p_k / mu. Support excludes 0.
class SizeBiasedLaw {
 public:
  explicit SizeBiasedLaw(std::vector<double> pmf);

  const std::vector<double>& pmf() const { return pmf_; }
  double p(std::size_t k) const { return k < pmf_.size() ? pmf_[k] : 0.0; }

  std::uint32_t sample(rng::Xoshiro256pp& g) const {
    return static_cast<std::uint32_t>(g.categorical(cdf_));
  }

 private:
  std::vector<double> pmf_;
  std::vector<double> cdf_;
};

SizeBiasedLaw size_biased(const OffspringLaw& law);

// E[Z_n] = mu^n.
double mean_Zn(const OffspringLaw& law, std::int64_t n);

// E[Z_n^2] = f''_n(1) + mu^n via f''_{n+1}(1) = f''(1) mu^{2n} + mu f''_n(1).
double second_moment_Zn(const OffspringLaw& law, std::int64_t n);

// E[Z_n^3] = f'''_n(1) + 3 f''_n(1) + mu^n via
// f'''_{n+1}(1) = 3 f''(1) f'_n(1) f''_n(1) + f'_n(1)^3 f'''(1) + mu f'''_n(1).
double third_moment_Zn(const OffspringLaw& law, std::int64_t n);

// E[Z_n Z_m] = mu^(m-n) E[Z_n^2] for m >= n.
double cross_moment_Zn_Zm(const OffspringLaw& law, std::int64_t n,
                          std::int64_t m);

// P(Z_n > 0) = 1 - f_n(0), exact by iterating f.
double survival_probability(const OffspringLaw& law, std::int64_t n);

// P(Z_n > 0) / mu^n; non-increasing in n.
double survival_ratio(const OffspringLaw& law, std::int64_t n);

// Plateau estimate of lim P(Z_n > 0)/mu^n: first ratio whose change from the
// previous n falls below `tol` (scans n <= n_max; returns the last ratio if
// no plateau is reached).
double survival_ratio_limit(const OffspringLaw& law, double tol = 1e-6,
                            std::int64_t n_max = 400);

}  // namespace trapwalk::offspring
