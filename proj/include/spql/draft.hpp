// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "spql/engine.hpp"
#include "spql/events.hpp"

namespace spql {

using Distribution = std::vector<double>;

/// Autoregressive proposal model. Distributions are deterministic functions of
/// the context; implementations may keep caches keyed on the last context.
class Drafter {
 public:
  virtual ~Drafter() = default;

  virtual std::size_t vocab_size() const = 0;

  /// Next-token distribution after `context`. Not recorded as a forward.
  virtual Distribution next_distribution(std::span<const int> context) = 0;

  /// Warms internal state for `context` and logs a prefill event.
  void prefill(std::span<const int> context);

  /// One drafting round: the distribution after context + path for each path.
  /// Counts as a single batched forward of paths.size() tokens.
  std::vector<Distribution> draft_round(std::span<const int> context, std::span<const std::vector<int>> paths);

  std::size_t rounds() const { return rounds_; }
  void attach_log(EventLog* log) { log_ = log; }

 protected:
  virtual void warm(std::span<const int> context) { (void)context; }
  /// Distribution after context + path for every path; per-path by default.
  virtual std::vector<Distribution> distributions(std::span<const int> context,
                                                  std::span<const std::vector<int>> paths);

 private:
  EventLog* log_ = nullptr;
  std::size_t rounds_ = 0;
};

/// Greedy pick over a distribution; ties go to the lowest token id.
int argmax(std::span<const double> probs);

/// Table-driven drafter: the longest matching context suffix (up to three
/// tokens) selects the distribution, otherwise the fallback applies.
class NgramDrafter : public Drafter {
 public:
  static constexpr std::size_t kMaxContext = 3;

  /// An empty fallback means uniform. Throws ConfigError on a malformed table.
  NgramDrafter(std::size_t vocab_size, std::map<std::vector<int>, Distribution> table,
               Distribution fallback = {});

  std::size_t vocab_size() const override { return vocab_; }
  Distribution next_distribution(std::span<const int> context) override;

  const std::map<std::vector<int>, Distribution>& table() const { return table_; }

 private:
  std::size_t vocab_;
  std::map<std::vector<int>, Distribution> table_;
  Distribution fallback_;
};

/// Reads a table of the form
///   {"vocab_size": V, "fallback": "uniform" | [p...],
///    "entries": [{"context": [t...], "probs": [p...] | {"tok": p}}]}
NgramDrafter load_ngram_drafter(const std::filesystem::path& path);
NgramDrafter parse_ngram_drafter(std::string_view json_text);

/// Softmax over engine logits. Keeps a linear KV cache of the most recent
/// context and re-syncs to new contexts through their longest common prefix.
/// A drafting round forwards the union of its paths as one masked batch.
class ModelDrafter : public Drafter {
 public:
  explicit ModelDrafter(const ModelWeights& weights);

  std::size_t vocab_size() const override { return weights_->config.vocab_size; }
  Distribution next_distribution(std::span<const int> context) override;

  /// Engine forwards actually executed, including re-sync work.
  std::size_t engine_forwards() const { return engine_forwards_; }

 protected:
  void warm(std::span<const int> context) override;
  std::vector<Distribution> distributions(std::span<const int> context,
                                          std::span<const std::vector<int>> paths) override;

 private:
  void sync(std::span<const int> context);

  const ModelWeights* weights_;
  KVCache cache_;
  std::vector<int> tokens_;
  Vector last_logits_;
  std::size_t engine_forwards_ = 0;
};

Distribution softmax(std::span<const float> logits);

struct DraftNode {
  int token = 0;
  int parent = -1;  // index into DraftTree::nodes, -1 for roots
  int depth = 1;    // roots have depth 1
  double log_score = 0.0;

  bool operator==(const DraftNode&) const = default;
};

/// Nodes are stored in topological order (parents precede children).
struct DraftTree {
  std::vector<DraftNode> nodes;

  std::size_t size() const { return nodes.size(); }
  int max_depth() const;
  /// Tokens from the root down to node i.
  std::vector<int> path_tokens(std::size_t i) const;
};

struct TreeParams {
  int depth = 6;        // d
  int size = 60;        // n
  int beam = 10;        // k

  void validate() const;
};

/// Beam-search dynamic tree: exactly `depth` drafting rounds, then the `size`
/// best candidates by cumulative log-probability, closed under parents.
DraftTree build_draft_tree(Drafter& drafter, std::span<const int> context, const TreeParams& params);

struct FlatDraft {
  std::vector<int> tokens;
  std::vector<int> positions;
  std::vector<int> parents;
  AncestryMask mask;
};

/// prefix_len is the position of the last committed token; a node of depth t
/// sits at position prefix_len + t.
FlatDraft flatten_tree(const DraftTree& tree, std::size_t prefix_len);

}  // namespace spql
