#include "trapwalk/offspring.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace trapwalk::offspring {

namespace {

std::vector<double> cumulative(const std::vector<double>& pmf) {
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    acc += pmf[k];
    cdf[k] = acc;
  }
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

}  // namespace

OffspringLaw OffspringLaw::from_pmf(std::vector<double> pmf, double tol) {
  if (pmf.empty()) throw std::invalid_argument("offspring law: empty pmf");
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw std::invalid_argument("offspring law: negative p_k");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument("offspring law: pmf sums to " +
                                std::to_string(sum) + ", not 1");
  while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();

  OffspringLaw law;
  law.pmf_ = std::move(pmf);
  for (double& p : law.pmf_) p /= sum;
  for (std::size_t k = 0; k < law.pmf_.size(); ++k) {
    const double p = law.pmf_[k];
    const double kd = static_cast<double>(k);
    law.mean_mu_ += kd * p;
    law.m2_ += kd * kd * p;
    law.m3_ += kd * kd * kd * p;
    if (k >= 2 && p > 0.0) law.nontrivial_ = true;
  }
  law.var_sigma2_ = law.m2_ - law.mean_mu_ * law.mean_mu_;
  law.fact2_ = law.m2_ - law.mean_mu_;
  law.fact3_ = law.m3_ - 3.0 * law.m2_ + 2.0 * law.mean_mu_;
  law.subcritical_ = law.mean_mu_ < 1.0;
  law.cdf_ = cumulative(law.pmf_);
  return law;
}

OffspringLaw OffspringLaw::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("offspring law: bad JSON: ") +
                                e.what());
  }
  if (!j.contains("pmf") || !j["pmf"].is_object())
    throw std::invalid_argument("offspring law: missing \"pmf\" object");
  std::vector<double> pmf;
  for (auto& [key, value] : j["pmf"].items()) {
    std::size_t pos = 0;
    long k = -1;
    try {
      k = std::stol(key, &pos);
    } catch (...) {
    }
    if (k < 0 || pos != key.size())
      throw std::invalid_argument("offspring law: bad pmf key \"" + key +
                                  "\"");
    if (!value.is_number())
      throw std::invalid_argument("offspring law: pmf value for k=" + key +
                                  " is not a number");
    const double p = value.get<double>();
    if (p < 0.0)
      throw std::invalid_argument("offspring law: negative probability at k=" +
                                  key);
    if (static_cast<std::size_t>(k) >= pmf.size())
      pmf.resize(static_cast<std::size_t>(k) + 1, 0.0);
    pmf[static_cast<std::size_t>(k)] += p;
  }
  double sum = 0.0;
  for (double p : pmf) sum += p;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("offspring law: pmf sums to " +
                                std::to_string(sum) +
                                " (off by more than 1e-9)");
  return from_pmf(std::move(pmf), 1e-9);
}

std::string OffspringLaw::to_json_text() const {
  nlohmann::json pmf = nlohmann::json::object();
  for (std::size_t k = 0; k < pmf_.size(); ++k)
    if (pmf_[k] > 0.0) pmf[std::to_string(k)] = pmf_[k];
  return nlohmann::json{{"pmf", pmf}}.dump();
}

double OffspringLaw::moment(double r) const {
  double m = 0.0;
  for (std::size_t k = 0; k < pmf_.size(); ++k)
    m += std::pow(static_cast<double>(k), r) * pmf_[k];
  return m;
}

double OffspringLaw::f(double s) const {
  // Horner
  double acc = 0.0;
  for (std::size_t k = pmf_.size(); k-- > 0;) acc = acc * s + pmf_[k];
  return acc;
}

SizeBiasedLaw::SizeBiasedLaw(std::vector<double> pmf) : pmf_(std::move(pmf)) {
  if (pmf_.empty() || pmf_[0] != 0.0)
    throw std::invalid_argument("size-biased law: support must exclude 0");
  cdf_ = cumulative(pmf_);
}

SizeBiasedLaw size_biased(const OffspringLaw& law) {
  if (law.mean_mu() <= 0.0)
    throw std::invalid_argument("size-biased law: mean is zero");
  std::vector<double> pmf(law.pmf().size(), 0.0);
  for (std::size_t k = 1; k < pmf.size(); ++k)
    pmf[k] = static_cast<double>(k) * law.p(k) / law.mean_mu();
  return SizeBiasedLaw(std::move(pmf));
}

double mean_Zn(const OffspringLaw& law, std::int64_t n) {
  if (n < 0) throw std::invalid_argument("mean_Zn: n < 0");
  return std::pow(law.mean_mu(), static_cast<double>(n));
}

double second_moment_Zn(const OffspringLaw& law, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("second_moment_Zn: n < 1");
  const double mu = law.mean_mu();
  double f2 = law.fact2();  // f''_1(1)
  for (std::int64_t j = 1; j < n; ++j)
    f2 = law.fact2() * std::pow(mu, 2.0 * static_cast<double>(j)) + mu * f2;
  return f2 + std::pow(mu, static_cast<double>(n));
}

double third_moment_Zn(const OffspringLaw& law, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("third_moment_Zn: n < 1");
  const double mu = law.mean_mu();
  double f2 = law.fact2();
  double f3 = law.fact3();
  for (std::int64_t j = 1; j < n; ++j) {
    const double mu_j = std::pow(mu, static_cast<double>(j));
    const double f3_next = 3.0 * law.fact2() * mu_j * f2 +
                           mu_j * mu_j * mu_j * law.fact3() + mu * f3;
    f2 = law.fact2() * mu_j * mu_j + mu * f2;
    f3 = f3_next;
  }
  return f3 + 3.0 * f2 + std::pow(mu, static_cast<double>(n));
}

double cross_moment_Zn_Zm(const OffspringLaw& law, std::int64_t n,
                          std::int64_t m) {
  if (n < 1 || m < n)
    throw std::invalid_argument("cross_moment_Zn_Zm: need 1 <= n <= m");
  return std::pow(law.mean_mu(), static_cast<double>(m - n)) *
         second_moment_Zn(law, n);
}

double survival_probability(const OffspringLaw& law, std::int64_t n) {
  if (n < 0) throw std::invalid_argument("survival_probability: n < 0");
  // iterate P_{j+1} = 1 - f(1 - P_j) in survival form; the direct f_n(0)
  // iteration cancels catastrophically once P drops below ~1e-16
  double p = 1.0;
  for (std::int64_t j = 0; j < n; ++j) {
    double next = 0.0;
    for (std::size_t k = 1; k < law.pmf().size(); ++k)
      if (law.p(k) > 0.0)
        next -= law.p(k) *
                std::expm1(static_cast<double>(k) * std::log1p(-p));
    p = next;
  }
  return p;
}

double survival_ratio(const OffspringLaw& law, std::int64_t n) {
  return survival_probability(law, n) /
         std::pow(law.mean_mu(), static_cast<double>(n));
}

double survival_ratio_limit(const OffspringLaw& law, double tol,
                            std::int64_t n_max) {
  double prev = survival_ratio(law, 0);
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const double cur = survival_ratio(law, n);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace trapwalk::offspring
