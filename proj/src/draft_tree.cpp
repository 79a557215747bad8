// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spql/draft.hpp"
#include "spql/error.hpp"

namespace spql {

int DraftTree::max_depth() const {
  int d = 0;
  for (const auto& node : nodes) d = std::max(d, node.depth);
  return d;
}

std::vector<int> DraftTree::path_tokens(std::size_t i) const {
  std::vector<int> path;
  for (int cur = static_cast<int>(i); cur >= 0; cur = nodes[static_cast<std::size_t>(cur)].parent) {
    path.push_back(nodes[static_cast<std::size_t>(cur)].token);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void TreeParams::validate() const {
  if (depth < 1) throw ConfigError("tree depth d must be at least 1");
  if (beam < 1) throw ConfigError("beam width k must be at least 1");
  if (size < depth) {
    throw ConfigError("tree size n (" + std::to_string(size) + ") must be at least depth d (" +
                      std::to_string(depth) + ")");
  }
}

namespace {

struct Candidate {
  DraftNode node;
  std::size_t order = 0;  // creation index
};

// Descending score, then shallower, then lower token id, then earlier creation.
bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.node.log_score != b.node.log_score) return a.node.log_score > b.node.log_score;
  if (a.node.depth != b.node.depth) return a.node.depth < b.node.depth;
  if (a.node.token != b.node.token) return a.node.token < b.node.token;
  return a.order < b.order;
}

// Token ids of the k most probable entries with non-zero probability.
std::vector<int> top_k(const Distribution& p, int k) {
  std::vector<int> ids;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > 0.0) ids.push_back(static_cast<int>(t));
  }
  const auto cmp = [&](int a, int b) {
    if (p[static_cast<std::size_t>(a)] != p[static_cast<std::size_t>(b)]) {
      return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
    }
    return a < b;
  };
  const std::size_t keep = std::min(ids.size(), static_cast<std::size_t>(k));
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), cmp);
  ids.resize(keep);
  return ids;
}

}  // namespace

DraftTree build_draft_tree(Drafter& drafter, std::span<const int> context, const TreeParams& params) {
  params.validate();
  std::vector<Candidate> pool;
  std::vector<std::vector<int>> paths;  // token path of every candidate

  auto add_children = [&](int parent, const Distribution& p) {
    const double base = parent < 0 ? 0.0 : pool[static_cast<std::size_t>(parent)].node.log_score;
    const int depth = parent < 0 ? 1 : pool[static_cast<std::size_t>(parent)].node.depth + 1;
    std::vector<std::size_t> added;
    for (int tok : top_k(p, params.beam)) {
      Candidate c;
      c.node = {tok, parent, depth, base + std::log(p[static_cast<std::size_t>(tok)])};
      c.order = pool.size();
      std::vector<int> path = parent < 0 ? std::vector<int>{} : paths[static_cast<std::size_t>(parent)];
      path.push_back(tok);
      added.push_back(pool.size());
      pool.push_back(c);
      paths.push_back(std::move(path));
    }
    return added;
  };

  const std::vector<std::vector<int>> root_path{{}};
  std::vector<std::size_t> frontier = add_children(-1, drafter.draft_round(context, root_path)[0]);

  for (int round = 2; round <= params.depth; ++round) {
    std::sort(frontier.begin(), frontier.end(),
              [&](std::size_t a, std::size_t b) { return ranks_before(pool[a], pool[b]); });
    if (frontier.size() > static_cast<std::size_t>(params.beam)) frontier.resize(static_cast<std::size_t>(params.beam));
    std::vector<std::vector<int>> expand;
    for (std::size_t idx : frontier) expand.push_back(paths[idx]);
    const auto dists = drafter.draft_round(context, expand);
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto added = add_children(static_cast<int>(frontier[i]), dists[i]);
      next.insert(next.end(), added.begin(), added.end());
    }
    frontier = std::move(next);
  }

  std::vector<std::size_t> ranked(pool.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return ranks_before(pool[a], pool[b]); });

  const std::size_t limit = static_cast<std::size_t>(params.size);
  std::vector<bool> chosen(pool.size(), false);
  std::size_t count = 0;
  for (std::size_t idx : ranked) {
    if (count == limit) break;
    if (chosen[idx]) continue;
    std::vector<std::size_t> missing;
    for (int cur = static_cast<int>(idx); cur >= 0 && !chosen[static_cast<std::size_t>(cur)];
         cur = pool[static_cast<std::size_t>(cur)].node.parent) {
      missing.push_back(static_cast<std::size_t>(cur));
    }
    if (count + missing.size() > limit) continue;
    for (std::size_t m : missing) chosen[m] = true;
    count += missing.size();
  }

  DraftTree tree;
  std::vector<int> remap(pool.size(), -1);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!chosen[i]) continue;
    DraftNode node = pool[i].node;
    if (node.parent >= 0) node.parent = remap[static_cast<std::size_t>(node.parent)];
    remap[i] = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
  }
  return tree;
}

FlatDraft flatten_tree(const DraftTree& tree, std::size_t prefix_len) {
  FlatDraft flat;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.parent >= static_cast<int>(i)) throw InputError("draft tree is not topologically ordered");
    flat.tokens.push_back(node.token);
    flat.positions.push_back(static_cast<int>(prefix_len) + node.depth);
    flat.parents.push_back(node.parent);
  }
  flat.mask = AncestryMask::from_parents(flat.parents, prefix_len);
  return flat;
}

}  // namespace spql
