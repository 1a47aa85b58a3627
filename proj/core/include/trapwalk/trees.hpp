#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "trapwalk/offspring.hpp"
#include "trapwalk/rng.hpp"

namespace trapwalk::trees {

// Thrown when a sampler would exceed its vertex cap; carries the partial size.
struct CapExceeded : std::runtime_error {
  explicit CapExceeded(std::size_t partial)
      : std::runtime_error("tree sampler exceeded vertex cap"),
        partial_size(partial) {}
  std::size_t partial_size;
};

inline constexpr std::size_t kDefaultSizeCap = 10'000'000;

// Flat-arena rooted tree. Vertex 0 is the root; parent[0] = -1.
struct RootedTree {
  std::vector<std::int32_t> parent;
  std::vector<std::int32_t> depth;
  std::vector<std::vector<std::int32_t>> children;

  std::size_t size() const { return parent.size(); }
  std::int32_t n_children(std::int32_t v) const {
    return static_cast<std::int32_t>(children[v].size());
  }
  bool is_leaf(std::int32_t v) const { return children[v].empty(); }
  std::int32_t height() const;

  // Builds from a parent array (parent[0] must be -1, parents precede
  // children). Used by tests and the edge-list importer.
  static RootedTree from_parents(std::vector<std::int32_t> parent);
};

// Trap tree: root rho plus an implicit ancestor rho-bar attached above it.
// The arena holds only the part below (and including) rho; walk kernels
// address the ancestor as vertex id inner.size().
struct BranchTree {
  RootedTree inner;
  std::uint32_t xstar = 1;  // sampled size-biased offspring count

  std::int32_t ancestor_id() const {
    return static_cast<std::int32_t>(inner.size());
  }
};

// Window of the conditioned tree: backbone rho_0..rho_L, each backbone vertex
// carrying xstar_k - 1 independent GW branch trees. Decorations are drawn
// from per-site streams of `seed`, so extending the window never re-samples
// existing sites.
struct KestenWindow {
  struct Site {
    std::uint32_t xstar = 1;
    std::vector<RootedTree> branches;  // one per non-backbone child
  };

  KestenWindow(offspring::OffspringLaw law_, std::uint64_t seed_)
      : law(std::move(law_)), seed(seed_) {}

  offspring::OffspringLaw law;
  std::uint64_t seed = 0;
  std::vector<Site> sites;

  std::int64_t length() const {
    return static_cast<std::int64_t>(sites.size()) - 1;
  }
  // Materializes sites 0..k.
  void ensure(std::int64_t k);
};

// Breadth-first GW tree sample. Requires a subcritical law.
RootedTree sample_gw_tree(const offspring::OffspringLaw& law,
                          rng::Xoshiro256pp& g,
                          std::size_t size_cap = kDefaultSizeCap);

// Trap tree: xstar - 1 children of rho, each rooting an independent GW tree.
BranchTree sample_branch_tree(const offspring::OffspringLaw& law,
                              rng::Xoshiro256pp& g,
                              std::size_t size_cap = kDefaultSizeCap);

KestenWindow sample_kesten_window(const offspring::OffspringLaw& law,
                                  std::int64_t L, std::uint64_t seed);

// Z_n for n = 0..height; Z_0 = 1.
std::vector<std::int64_t> generation_sizes(const RootedTree& tree);

// One "parent_id child_id" line per edge, root implicit.
void write_edge_list(const RootedTree& tree, std::ostream& os);

}  // namespace trapwalk::trees
