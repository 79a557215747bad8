// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <string>

#include "spql/error.hpp"
#include "spql/specdec.hpp"

namespace spql {

void HierParams::validate() const {
  if (d1 < 1) throw ConfigError("stage-1 depth d1 must be at least 1");
  if (d < d1) throw ConfigError("draft length d (" + std::to_string(d) + ") must be at least d1 (" + std::to_string(d1) + ")");
  TreeParams{d1, n1, k}.validate();
}

bool same_counts(const DecodeStats& a, const DecodeStats& b) {
  return a.tokens_generated == b.tokens_generated && a.target_forwards == b.target_forwards &&
         a.intermediate_forwards == b.intermediate_forwards && a.draft_forwards == b.draft_forwards &&
         a.accepted_histogram == b.accepted_histogram && a.tau == b.tau && a.simulated_time == b.simulated_time;
}

Strategy parse_strategy(std::string_view name) {
  if (name == "ar") return Strategy::AR;
  if (name == "sp") return Strategy::SP;
  if (name == "eagle2") return Strategy::Eagle2;
  if (name == "hierspec") return Strategy::HierSpec;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (expected ar, sp, eagle2, hierspec)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::AR:
      return "ar";
    case Strategy::SP:
      return "sp";
    case Strategy::Eagle2:
      return "eagle2";
    case Strategy::HierSpec:
      return "hierspec";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Accumulates per-step results and decides when decoding stops.
class Run {
 public:
  Run(const ModelConfig& target, const DecodeOptions& options) : eos_(target.eos()), options_(options) {}

  bool done() const {
    return ended_ || out_.tokens.size() >= options_.max_tokens ||
           (options_.max_steps != 0 && steps_ >= options_.max_steps);
  }

  void record(std::size_t accepted, std::span<const int> fresh) {
    ++steps_;
    out_.stats.tokens_generated += fresh.size();
    ++out_.stats.accepted_histogram[accepted];
    for (int t : fresh) {
      if (ended_ || out_.tokens.size() >= options_.max_tokens) break;
      out_.tokens.push_back(t);
      if (t == eos_) ended_ = true;
    }
  }

  DecodeOutput finish(const Session& target, Clock::time_point t0) {
    out_.stats.target_forwards = target.forwards();
    out_.stats.tau = out_.stats.target_forwards == 0
                         ? 1.0
                         : static_cast<double>(out_.stats.tokens_generated) /
                               static_cast<double>(out_.stats.target_forwards);
    out_.stats.wall_time = seconds_since(t0);
    return std::move(out_);
  }

  DecodeStats& stats() { return out_.stats; }

 private:
  int eos_;
  DecodeOptions options_;
  DecodeOutput out_;
  std::size_t steps_ = 0;
  bool ended_ = false;
};

// Detaches the drafter from the caller's event log on scope exit.
struct LogAttachment {
  LogAttachment(Drafter& d, EventLog* log) : drafter(d) { drafter.attach_log(log); }
  ~LogAttachment() { drafter.attach_log(nullptr); }
  Drafter& drafter;
};

void check_vocab(const ModelWeights& target, const Drafter& drafter) {
  if (drafter.vocab_size() != target.config.vocab_size) {
    throw ConfigError("drafter vocabulary " + std::to_string(drafter.vocab_size()) + " != target vocabulary " +
                      std::to_string(target.config.vocab_size));
  }
}

std::vector<int> tail_tokens(const Session& s, std::size_t from) {
  const auto& c = s.committed();
  return {c.begin() + static_cast<std::ptrdiff_t>(from), c.end()};
}

}  // namespace

DecodeOutput ar_decode(const ModelWeights& target, std::span<const int> prompt, const DecodeOptions& options) {
  const auto t0 = Clock::now();
  Session session(target, ModelRole::Target, options.events);
  session.prefill(prompt);
  Run run(target.config, options);
  while (!run.done()) {
    const int tok = session.step();
    run.record(0, std::span<const int>(&tok, 1));
  }
  return run.finish(session, t0);
}

DecodeOutput vanilla_sp_decode(const ModelWeights& target, Drafter& drafter, int d, std::span<const int> prompt,
                               const DecodeOptions& options) {
  if (d < 1) throw ConfigError("draft length d must be at least 1");
  check_vocab(target, drafter);
  const auto t0 = Clock::now();
  LogAttachment attach(drafter, options.events);
  const std::size_t rounds0 = drafter.rounds();
  Session session(target, ModelRole::Target, options.events);
  session.prefill(prompt);
  Run run(target.config, options);
  const auto tp = Clock::now();
  drafter.prefill(prompt);
  run.stats().draft_latency = seconds_since(tp);

  std::vector<std::vector<int>> path(1);
  while (!run.done()) {
    const std::vector<int> context = session.committed();
    path[0].clear();
    for (int i = 0; i < d; ++i) path[0].push_back(argmax(drafter.draft_round(context, path)[0]));
    const auto res = session.verify_sequence(path[0]);
    run.record(res.accepted, tail_tokens(session, context.size()));
  }
  run.stats().draft_forwards = drafter.rounds() - rounds0;
  return run.finish(session, t0);
}

DecodeOutput eagle2_decode(const ModelWeights& target, Drafter& drafter, const TreeParams& tree,
                           std::span<const int> prompt, const DecodeOptions& options) {
  tree.validate();
  check_vocab(target, drafter);
  const auto t0 = Clock::now();
  LogAttachment attach(drafter, options.events);
  const std::size_t rounds0 = drafter.rounds();
  Session session(target, ModelRole::Target, options.events);
  session.prefill(prompt);
  Run run(target.config, options);
  const auto tp = Clock::now();
  drafter.prefill(prompt);
  run.stats().draft_latency = seconds_since(tp);

  while (!run.done()) {
    const std::vector<int> context = session.committed();
    const DraftTree t = build_draft_tree(drafter, context, tree);
    const auto res = session.verify_tree(flatten_tree(t, context.size() - 1));
    run.record(res.path.size(), tail_tokens(session, context.size()));
  }
  run.stats().draft_forwards = drafter.rounds() - rounds0;
  return run.finish(session, t0);
}

DecodeOutput hierspec_decode(const ModelWeights& target, const ModelWeights& intermediate, Drafter& drafter,
                             const HierParams& params, std::span<const int> prompt, const DecodeOptions& options) {
  params.validate();
  check_vocab(target, drafter);
  if (intermediate.config.vocab_size != target.config.vocab_size) {
    throw ConfigError("intermediate vocabulary differs from target vocabulary");
  }
  const auto t0 = Clock::now();
  LogAttachment attach(drafter, options.events);
  const std::size_t rounds0 = drafter.rounds();
  Session session(target, ModelRole::Target, options.events);
  session.prefill(prompt);
  Session mid(intermediate, ModelRole::Intermediate, options.events);
  Run run(target.config, options);
  const auto tp = Clock::now();
  mid.prefill(prompt);
  drafter.prefill(prompt);
  run.stats().draft_latency = seconds_since(tp);

  const TreeParams stage1{params.d1, params.n1, params.k};
  const int eos = target.config.eos();
  std::vector<int> accumulated;
  while (!run.done()) {
    const std::vector<int> context = session.committed();
    mid.set_committed(context);
    accumulated.clear();
    // Stage 1: the intermediate model tree-verifies drafter proposals until the
    // sequential draft reaches length d. Bonus tokens count towards it.
    bool hit_eos = false;
    while (accumulated.size() < static_cast<std::size_t>(params.d) && !hit_eos) {
      const std::vector<int> ctx = mid.committed();
      const DraftTree t = build_draft_tree(drafter, ctx, stage1);
      mid.verify_tree(flatten_tree(t, ctx.size() - 1));
      for (std::size_t i = ctx.size(); i < mid.committed().size(); ++i) {
        accumulated.push_back(mid.committed()[i]);
        if (mid.committed()[i] == eos) hit_eos = true;
      }
    }
    // Stage 2: the target verifies the whole accumulated sequence at once.
    const auto res = session.verify_sequence(accumulated);
    run.record(res.accepted, tail_tokens(session, context.size()));
  }
  run.stats().intermediate_forwards = mid.forwards();
  run.stats().draft_forwards = drafter.rounds() - rounds0;
  return run.finish(session, t0);
}

}  // namespace spql
