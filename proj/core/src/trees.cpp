#include "trapwalk/trees.hpp"

#include <algorithm>
#include <ostream>

namespace trapwalk::trees {

std::int32_t RootedTree::height() const {
  std::int32_t h = 0;
  for (const auto d : depth) h = std::max(h, d);
  return h;
}

RootedTree RootedTree::from_parents(std::vector<std::int32_t> parent) {
  if (parent.empty() || parent[0] != -1)
    throw std::invalid_argument("from_parents: parent[0] must be -1");
  RootedTree t;
  t.parent = std::move(parent);
  t.depth.assign(t.parent.size(), 0);
  t.children.assign(t.parent.size(), {});
  for (std::size_t v = 1; v < t.parent.size(); ++v) {
    const auto p = t.parent[v];
    if (p < 0 || static_cast<std::size_t>(p) >= v)
      throw std::invalid_argument("from_parents: parents must precede children");
    t.depth[v] = t.depth[p] + 1;
    t.children[p].push_back(static_cast<std::int32_t>(v));
  }
  return t;
}

namespace {

// Appends an independent GW subtree below `root` (already in the arena).
void grow_gw_below(RootedTree& t, std::int32_t root,
                   const offspring::OffspringLaw& law, rng::Xoshiro256pp& g,
                   std::size_t size_cap) {
  std::vector<std::int32_t> frontier{root};
  std::vector<std::int32_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (const auto v : frontier) {
      const auto k = law.sample(g);
      for (std::uint32_t c = 0; c < k; ++c) {
        if (t.size() >= size_cap) throw CapExceeded(t.size());
        const auto id = static_cast<std::int32_t>(t.size());
        t.parent.push_back(v);
        t.depth.push_back(t.depth[v] + 1);
        t.children.emplace_back();
        t.children[v].push_back(id);
        next.push_back(id);
      }
    }
    frontier.swap(next);
  }
}

RootedTree single_root() {
  RootedTree t;
  t.parent = {-1};
  t.depth = {0};
  t.children.emplace_back();
  return t;
}

}  // namespace

RootedTree sample_gw_tree(const offspring::OffspringLaw& law,
                          rng::Xoshiro256pp& g, std::size_t size_cap) {
  if (!law.subcritical())
    throw std::invalid_argument("sample_gw_tree: law is not subcritical");
  RootedTree t = single_root();
  grow_gw_below(t, 0, law, g, size_cap);
  return t;
}

BranchTree sample_branch_tree(const offspring::OffspringLaw& law,
                              rng::Xoshiro256pp& g, std::size_t size_cap) {
  // A nontrivial law must be subcritical for the bud subtrees to terminate;
  // the p1-only degenerate law has no buds and is allowed as-is.
  if (law.nontrivial() && !law.subcritical())
    throw std::invalid_argument("sample_branch_tree: law is not subcritical");
  const auto sb = offspring::size_biased(law);
  BranchTree bt;
  bt.inner = single_root();
  bt.xstar = sb.sample(g);
  for (std::uint32_t b = 1; b < bt.xstar; ++b) {
    if (bt.inner.size() >= size_cap) throw CapExceeded(bt.inner.size());
    const auto id = static_cast<std::int32_t>(bt.inner.size());
    bt.inner.parent.push_back(0);
    bt.inner.depth.push_back(1);
    bt.inner.children.emplace_back();
    bt.inner.children[0].push_back(id);
    grow_gw_below(bt.inner, id, law, g, size_cap);
  }
  return bt;
}

void KestenWindow::ensure(std::int64_t k) {
  if (law.nontrivial() && !law.subcritical())
    throw std::invalid_argument("kesten window: law is not subcritical");
  const auto sb = offspring::size_biased(law);
  while (static_cast<std::int64_t>(sites.size()) <= k) {
    const auto idx = static_cast<std::uint64_t>(sites.size());
    auto g = rng::derive_stream(seed, rng::StreamKind::site, idx);
    Site s;
    s.xstar = sb.sample(g);
    for (std::uint32_t b = 1; b < s.xstar; ++b)
      s.branches.push_back(sample_gw_tree(law, g));
    sites.push_back(std::move(s));
  }
}

KestenWindow sample_kesten_window(const offspring::OffspringLaw& law,
                                  std::int64_t L, std::uint64_t seed) {
  if (L < 1) throw std::invalid_argument("sample_kesten_window: L < 1");
  KestenWindow w(law, seed);
  w.ensure(L);
  return w;
}

std::vector<std::int64_t> generation_sizes(const RootedTree& tree) {
  std::vector<std::int64_t> z(static_cast<std::size_t>(tree.height()) + 1, 0);
  for (const auto d : tree.depth) ++z[d];
  return z;
}

void write_edge_list(const RootedTree& tree, std::ostream& os) {
  for (std::size_t v = 1; v < tree.size(); ++v)
    os << tree.parent[v] << ' ' << v << '\n';
}

}  // namespace trapwalk::trees
