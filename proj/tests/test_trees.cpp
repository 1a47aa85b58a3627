#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "trapwalk/offspring.hpp"
#include "trapwalk/rng.hpp"
#include "trapwalk/trees.hpp"

using namespace trapwalk;
using test_helpers::law_a;
using test_helpers::law_b;

TEST_CASE("generation sizes") {
  const auto path = trees::RootedTree::from_parents({-1, 0, 1});
  CHECK(trees::generation_sizes(path) == std::vector<std::int64_t>{1, 1, 1});

  const auto cherry = trees::RootedTree::from_parents({-1, 0, 0});
  CHECK(trees::generation_sizes(cherry) == std::vector<std::int64_t>{1, 2});

  auto g = rng::Xoshiro256pp(7);
  for (int i = 0; i < 50; ++i) {
    const auto t = trees::sample_gw_tree(law_a(), g);
    const auto z = trees::generation_sizes(t);
    std::int64_t total = 0;
    for (const auto zn : z) total += zn;
    CHECK(total == static_cast<std::int64_t>(t.size()));
    CHECK(z[0] == 1);
  }
}

TEST_CASE("gw sampler structure and reproducibility") {
  const auto line = offspring::OffspringLaw::from_pmf({0.0, 1.0});
  auto g = rng::Xoshiro256pp(1);
  CHECK_THROWS_AS(trees::sample_gw_tree(line, g), std::invalid_argument);

  auto g1 = rng::Xoshiro256pp(99);
  auto g2 = rng::Xoshiro256pp(99);
  for (int i = 0; i < 20; ++i) {
    const auto t1 = trees::sample_gw_tree(law_a(), g1);
    const auto t2 = trees::sample_gw_tree(law_a(), g2);
    CHECK(t1.parent == t2.parent);
    for (std::size_t v = 0; v < t1.size(); ++v) {
      const auto d = t1.n_children(static_cast<std::int32_t>(v));
      CHECK((d == 0 || d == 2));
    }
  }
}

TEST_CASE("sampler cap carries partial size") {
  const auto fat = offspring::OffspringLaw::from_pmf({0.51, 0.0, 0.49});
  bool thrown = false;
  for (std::uint64_t seed = 0; seed < 200 && !thrown; ++seed) {
    auto g = rng::Xoshiro256pp(seed);
    try {
      (void)trees::sample_gw_tree(fat, g, 10);
    } catch (const trees::CapExceeded& e) {
      thrown = true;
      CHECK(e.partial_size == 10);
    }
  }
  CHECK(thrown);
}

TEST_CASE("height distribution matches survival oracle") {
  // P(height >= n) = P(Z_n > 0)
  const std::int64_t m = 20000;
  auto g = rng::Xoshiro256pp(2024);
  std::vector<std::int64_t> count(5, 0);
  for (std::int64_t i = 0; i < m; ++i) {
    const auto t = trees::sample_gw_tree(law_a(), g);
    const auto h = t.height();
    for (std::int64_t n = 1; n <= 4; ++n)
      if (h >= n) ++count[static_cast<std::size_t>(n)];
  }
  for (std::int64_t n = 1; n <= 4; ++n) {
    const double p = offspring::survival_probability(law_a(), n);
    const double obs = static_cast<double>(count[static_cast<std::size_t>(n)]) /
                       static_cast<double>(m);
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(m));
    CHECK(std::abs(obs - p) <= 4.0 * se);
  }
}

TEST_CASE("branch trees") {
  auto g = rng::Xoshiro256pp(5);
  for (int i = 0; i < 200; ++i) {
    const auto bt = trees::sample_branch_tree(law_a(), g);
    CHECK(bt.xstar == 2);  // size-biased law of A is concentrated at 2
    CHECK(bt.inner.n_children(0) == 1);
  }

  // P(rho has no children) = P(xi* = 1) = 2/9 for law B
  const std::int64_t m = 20000;
  std::int64_t empty = 0;
  for (std::int64_t i = 0; i < m; ++i)
    if (trees::sample_branch_tree(law_b(), g).xstar == 1) ++empty;
  const double p = 2.0 / 9.0;
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(m));
  CHECK(std::abs(static_cast<double>(empty) / static_cast<double>(m) - p) <=
        4.0 * se);

  // degenerate p1-law: always the bare two-vertex trap
  const auto line = offspring::OffspringLaw::from_pmf({0.0, 1.0});
  const auto bt = trees::sample_branch_tree(line, g);
  CHECK(bt.xstar == 1);
  CHECK(bt.inner.size() == 1);
}

TEST_CASE("kesten window decorations") {
  const auto wa = trees::sample_kesten_window(law_a(), 5, 11);
  CHECK(wa.length() == 5);
  for (const auto& site : wa.sites) {
    CHECK(site.xstar == 2);
    CHECK(site.branches.size() == 1);
  }

  const auto line = offspring::OffspringLaw::from_pmf({0.0, 1.0});
  const auto wl = trees::sample_kesten_window(line, 3, 11);
  for (const auto& site : wl.sites) CHECK(site.branches.empty());

  // prefix property: extending never reshuffles existing sites
  auto w1 = trees::sample_kesten_window(law_b(), 5, 123);
  const auto w2 = trees::sample_kesten_window(law_b(), 10, 123);
  for (std::size_t k = 0; k < w1.sites.size(); ++k) {
    CHECK(w1.sites[k].xstar == w2.sites[k].xstar);
    CHECK(w1.sites[k].branches.size() == w2.sites[k].branches.size());
  }
  w1.ensure(10);
  for (std::size_t k = 0; k <= 10; ++k)
    CHECK(w1.sites[k].xstar == w2.sites[k].xstar);
}

TEST_CASE("kesten branch mass matches total-progeny mean") {
  // mean branch size per site = E[xi* - 1] / (1 - mu)
  const auto law = law_b();
  const double expect = (law.m2() / law.mean_mu() - 1.0) /
                        (1.0 - law.mean_mu());
  const std::int64_t L = 20000;
  const auto w = trees::sample_kesten_window(law, L, 321);
  std::vector<double> sizes;
  for (const auto& site : w.sites) {
    double s = 0.0;
    for (const auto& b : site.branches) s += static_cast<double>(b.size());
    sizes.push_back(s);
  }
  double mean = 0.0;
  for (const double s : sizes) mean += s;
  mean /= static_cast<double>(sizes.size());
  double var = 0.0;
  for (const double s : sizes) var += (s - mean) * (s - mean);
  const double se = std::sqrt(var / static_cast<double>(sizes.size() - 1) /
                              static_cast<double>(sizes.size()));
  CHECK(std::abs(mean - expect) <= 4.0 * se);
}

TEST_CASE("branch heights decay geometrically") {
  // P(branch height > h) should fall off like mu^h
  const auto law = law_a();
  const auto w = trees::sample_kesten_window(law, 50000, 77);
  std::vector<std::int64_t> tall(12, 0);
  for (const auto& site : w.sites)
    for (const auto& b : site.branches)
      for (std::int64_t h = 0; h < 12; ++h)
        if (b.height() >= h) ++tall[static_cast<std::size_t>(h)];
  // ratio of successive exceedance counts approaches mu
  for (std::int64_t h = 4; h < 8; ++h) {
    const double ratio =
        static_cast<double>(tall[static_cast<std::size_t>(h + 1)]) /
        static_cast<double>(tall[static_cast<std::size_t>(h)]);
    CHECK(ratio > law.mean_mu() - 0.12);
    CHECK(ratio < law.mean_mu() + 0.12);
  }
}

TEST_CASE("edge list export") {
  const auto t = trees::RootedTree::from_parents({-1, 0, 0, 1});
  std::ostringstream os;
  trees::write_edge_list(t, os);
  CHECK(os.str() == "0 1\n0 2\n1 3\n");
}
