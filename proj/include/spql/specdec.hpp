// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spql/draft.hpp"
#include "spql/engine.hpp"
#include "spql/events.hpp"

namespace spql {

/// Greedy decoding state over one model. The committed sequence always ends
/// with a "pending" token whose cache entry has not been computed yet; the
/// cache holds a prefix of the remaining tokens.
class Session {
 public:
  Session(const ModelWeights& weights, ModelRole role, EventLog* log = nullptr);

  /// Starts from `prompt` and forwards everything but its last token.
  void prefill(std::span<const int> prompt);

  /// Replaces the committed sequence, keeping the longest cache prefix still valid.
  void set_committed(std::span<const int> sequence);

  struct SequenceResult {
    std::size_t accepted = 0;
    int bonus = 0;
  };
  /// One chain-masked forward over the pending tail plus `draft`. Draft token i
  /// is accepted iff every earlier one was and it equals the greedy choice.
  /// Commits the accepted tokens and the bonus token.
  SequenceResult verify_sequence(std::span<const int> draft);

  struct TreeResult {
    std::vector<std::size_t> path;  // accepted node offsets, root first
    int bonus = 0;
  };
  /// One ancestry-masked forward over the pending tail plus every tree node.
  /// `flat` must be built with prefix_len = committed().size() - 1.
  TreeResult verify_tree(const FlatDraft& flat);

  /// Plain greedy step: commits and returns the next token.
  int step();

  const std::vector<int>& committed() const { return committed_; }
  const KVCache& cache() const { return cache_; }
  const ModelWeights& weights() const { return *weights_; }
  /// Verification forwards (prefill excluded).
  std::size_t forwards() const { return forwards_; }

 private:
  SequenceResult verify_chain(std::span<const int> draft);
  void log(Phase phase, std::size_t n_tokens, std::size_t ctx_len);

  const ModelWeights* weights_;
  ModelRole role_;
  EventLog* log_;
  KVCache cache_;
  std::vector<int> committed_;
  std::size_t forwards_ = 0;
};

struct DecodeStats {
  std::size_t tokens_generated = 0;
  std::size_t target_forwards = 0;
  std::size_t intermediate_forwards = 0;
  std::size_t draft_forwards = 0;
  std::map<std::size_t, std::size_t> accepted_histogram;
  double tau = 1.0;
  double wall_time = 0.0;
  double draft_latency = 0.0;   // wall seconds spent prefilling drafter and intermediate
  double simulated_time = 0.0;  // filled in by the cost model when requested

  bool operator==(const DecodeStats&) const = default;
};

/// Stats comparison that ignores wall-clock fields.
bool same_counts(const DecodeStats& a, const DecodeStats& b);

struct DecodeOutput {
  std::vector<int> tokens;  // generated tokens only, truncated at EOS or max_tokens
  DecodeStats stats;
};

struct DecodeOptions {
  std::size_t max_tokens = 64;
  std::size_t max_steps = 0;  // target verification steps; 0 = unlimited
  EventLog* events = nullptr;
};

struct HierParams {
  int d = 6;   // sequential draft length verified by the target
  int d1 = 3;  // stage-1 tree depth
  int n1 = 30; // stage-1 tree size
  int k = 10;

  void validate() const;
};

DecodeOutput ar_decode(const ModelWeights& target, std::span<const int> prompt, const DecodeOptions& options);

DecodeOutput vanilla_sp_decode(const ModelWeights& target, Drafter& drafter, int d, std::span<const int> prompt,
                               const DecodeOptions& options);

DecodeOutput eagle2_decode(const ModelWeights& target, Drafter& drafter, const TreeParams& tree,
                           std::span<const int> prompt, const DecodeOptions& options);

DecodeOutput hierspec_decode(const ModelWeights& target, const ModelWeights& intermediate, Drafter& drafter,
                             const HierParams& params, std::span<const int> prompt, const DecodeOptions& options);

enum class Strategy { AR, SP, Eagle2, HierSpec };
Strategy parse_strategy(std::string_view name);
std::string to_string(Strategy s);

/// Exact τ over the first `horizon` target steps, recomputed without sessions:
/// the target's greedy continuation comes from fresh-cache forwards and eagle2
/// trees are rebuilt by explicit sequence enumeration. Supported for ar, sp
/// and eagle2 with vocab <= 16, d <= 3, n <= 7, horizon <= 4.
double tau_oracle(Strategy strategy, const ModelWeights& target, Drafter& drafter, const TreeParams& params,
                  std::span<const int> prompt, std::size_t horizon);

}  // namespace spql
