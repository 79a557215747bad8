// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numeric>

#include "spql/error.hpp"
#include "spql/rng.hpp"
#include "spql/specdec.hpp"
#include "test_util.hpp"

namespace spql {
namespace {

using testing::small_config;

constexpr std::size_t kLong = 100000;

DecodeOptions opts(std::size_t max_tokens, std::size_t max_steps = 0, EventLog* events = nullptr) {
  DecodeOptions o;
  o.max_tokens = max_tokens;
  o.max_steps = max_steps;
  o.events = events;
  return o;
}

std::size_t histogram_total(const DecodeStats& s) {
  std::size_t total = 0;
  for (const auto& [acc, count] : s.accepted_histogram) total += count;
  return total;
}

std::size_t histogram_tokens(const DecodeStats& s) {
  std::size_t total = 0;
  for (const auto& [acc, count] : s.accepted_histogram) total += (acc + 1) * count;
  return total;
}

void expect_accounting(const DecodeStats& s) {
  EXPECT_EQ(histogram_total(s), s.target_forwards);
  EXPECT_EQ(histogram_tokens(s), s.tokens_generated);
  if (s.target_forwards > 0) {
    EXPECT_DOUBLE_EQ(s.tau, static_cast<double>(s.tokens_generated) / static_cast<double>(s.target_forwards));
  }
  EXPECT_GE(s.tau, 1.0);
}

// Puts all probability mass on the target's least likely next token.
class ArgminDrafter : public Drafter {
 public:
  explicit ArgminDrafter(const ModelWeights& target) : target_(&target) {}
  std::size_t vocab_size() const override { return target_->config.vocab_size; }
  Distribution next_distribution(std::span<const int> context) override {
    KVCache cache(target_->config);
    const Matrix logits = forward(*target_, context, testing::iota_positions(0, context.size()),
                                  AncestryMask::chain(context.size(), 0), cache);
    const auto row = logits.row(context.size() - 1);
    std::size_t worst = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i] < row[worst]) worst = i;
    }
    Distribution p(row.size(), 0.0);
    p[worst] = 1.0;
    return p;
  }

 private:
  const ModelWeights* target_;
};

std::vector<int> greedy_rollout(const ModelWeights& w, std::vector<int> seq, std::size_t n) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(reference_next_token(w, seq));
    seq.push_back(out.back());
  }
  return out;
}

TEST(ArDecode, MatchesGoldenFile) {
  const ModelWeights w = build_toy_model(small_config(), 7);
  const DecodeOutput out = ar_decode(w, encode_bytes("ab", w.config), opts(24));
  const std::string path = std::string(SPQL_SOURCE_DIR) + "/tests/data/ar_golden_ab.txt";
  if (std::getenv("SPQL_WRITE_GOLDEN") != nullptr) {
    std::ofstream f(path);
    for (int t : out.tokens) f << t << "\n";
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing golden file " << path;
  const std::vector<int> golden{std::istream_iterator<int>(in), std::istream_iterator<int>()};
  EXPECT_EQ(out.tokens, golden);
  EXPECT_EQ(out.tokens.size(), 24u);
  EXPECT_EQ(out.stats.tau, 1.0);
}

TEST(ArDecode, TauOneAndZeroBudget) {
  const ModelWeights w = build_toy_model(small_config(), 8);
  const std::vector<int> prompt = encode_bytes("xyz", w.config);
  const DecodeOutput out = ar_decode(w, prompt, opts(16));
  EXPECT_EQ(out.stats.tau, 1.0);
  EXPECT_EQ(out.stats.target_forwards, out.tokens.size());
  EXPECT_EQ(out.tokens, greedy_rollout(w, prompt, out.tokens.size()));
  const DecodeOutput none = ar_decode(w, prompt, opts(0));
  EXPECT_TRUE(none.tokens.empty());
  EXPECT_EQ(none.stats.target_forwards, 0u);
  EXPECT_EQ(none.stats.tau, 1.0);
  EXPECT_THROW(ar_decode(w, std::vector<int>{}, opts(4)), InputError);
}

TEST(ArDecode, PositionOverflow) {
  ModelConfig c = small_config();
  c.max_positions = 8;
  const ModelWeights w = build_toy_model(c, 9);
  // Prefill fills positions 0..7; the first step needs position 8.
  EXPECT_THROW(ar_decode(w, encode_bytes("abcdefgh", c), opts(20)), InputError);
}

TEST(VerifySequence, PerfectDraftFullyAccepted) {
  const ModelWeights w = build_toy_model(small_config(), 10);
  const std::vector<int> prompt = encode_bytes("hello", w.config);
  const std::vector<int> greedy = greedy_rollout(w, prompt, 5);
  Session s(w, ModelRole::Target);
  s.prefill(prompt);
  const auto r = s.verify_sequence(std::span<const int>(greedy).first(4));
  EXPECT_EQ(r.accepted, 4u);
  EXPECT_EQ(r.bonus, greedy[4]);
  EXPECT_EQ(s.committed().size(), prompt.size() + 5);
  EXPECT_EQ(s.cache().length(), s.committed().size() - 1);
  EXPECT_EQ(s.forwards(), 1u);
}

TEST(VerifySequence, WrongFirstTokenEmitsOnlyBonus) {
  const ModelWeights w = build_toy_model(small_config(), 11);
  const std::vector<int> prompt = encode_bytes("hello", w.config);
  const int want = reference_next_token(w, prompt);
  Session s(w, ModelRole::Target);
  s.prefill(prompt);
  const std::vector<int> draft{(want + 1) % 256, 3, 4};
  const auto r = s.verify_sequence(draft);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_EQ(r.bonus, want);
  EXPECT_EQ(s.committed().size(), prompt.size() + 1);
  EXPECT_THROW(s.verify_sequence({}), InputError);
}

TEST(VerifyTree, ChainMatchingGreedyIsAccepted) {
  const ModelWeights w = build_toy_model(small_config(), 12);
  const std::vector<int> prompt = encode_bytes("tree", w.config);
  const std::vector<int> greedy = greedy_rollout(w, prompt, 4);
  DraftTree tree;
  tree.nodes = {{greedy[0], -1, 1, 0}, {greedy[1], 0, 2, 0}, {greedy[2], 1, 3, 0}};
  Session s(w, ModelRole::Target);
  s.prefill(prompt);
  const auto r = s.verify_tree(flatten_tree(tree, prompt.size() - 1));
  EXPECT_EQ(r.path, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(r.bonus, greedy[3]);
  EXPECT_EQ(s.cache().length(), s.committed().size() - 1);
}

TEST(VerifyTree, NoMatchingRootGivesBonusOnly) {
  const ModelWeights w = build_toy_model(small_config(), 13);
  const std::vector<int> prompt = encode_bytes("tree", w.config);
  const int want = reference_next_token(w, prompt);
  DraftTree tree;
  tree.nodes = {{(want + 1) % 256, -1, 1, 0}, {(want + 2) % 256, -1, 1, 0}, {want, 0, 2, 0}};
  Session s(w, ModelRole::Target);
  s.prefill(prompt);
  const auto r = s.verify_tree(flatten_tree(tree, prompt.size() - 1));
  EXPECT_TRUE(r.path.empty());
  EXPECT_EQ(r.bonus, want);
  EXPECT_EQ(s.committed().size(), prompt.size() + 1);
}

TEST(VerifyTree, RejectsMalformedDraft) {
  const ModelWeights w = build_toy_model(small_config(), 14);
  const std::vector<int> prompt = encode_bytes("tree", w.config);
  DraftTree tree;
  tree.nodes = {{1, -1, 1, 0}, {2, 0, 2, 0}, {3, -1, 1, 0}};
  Session s(w, ModelRole::Target);
  s.prefill(prompt);
  FlatDraft flat = flatten_tree(tree, prompt.size() - 1);
  FlatDraft bad_mask = flat;
  bad_mask.mask.set(2, 0);
  EXPECT_THROW(s.verify_tree(bad_mask), InputError);
  FlatDraft bad_pos = flat;
  bad_pos.positions[1] += 1;
  EXPECT_THROW(s.verify_tree(bad_pos), InputError);
  FlatDraft bad_size = flat;
  bad_size.parents.pop_back();
  EXPECT_THROW(s.verify_tree(bad_size), InputError);
  EXPECT_THROW(s.verify_tree(FlatDraft{}), InputError);
  EXPECT_EQ(s.forwards(), 0u);
}

TEST(Session, CacheStaysConsistentUnderRandomVerification) {
  const ModelWeights w = build_toy_model(small_config(), 15);
  SplitMix64 rng(16);
  Session s(w, ModelRole::Target);
  s.prefill(encode_bytes("cache", w.config));
  for (int step = 0; step < 40; ++step) {
    const std::vector<int> greedy = greedy_rollout(w, s.committed(), 3);
    if (rng.next() % 2 == 0) {
      std::vector<int> draft = greedy;
      if (rng.next() % 2 == 0) draft[rng.next() % 3] = static_cast<int>(rng.next() % 256);
      s.verify_sequence(draft);
    } else {
      DraftTree tree;
      tree.nodes = {{static_cast<int>(rng.next() % 256), -1, 1, 0}, {greedy[0], -1, 1, 0}, {greedy[1], 1, 2, 0},
                    {static_cast<int>(rng.next() % 256), 1, 2, 0}};
      s.verify_tree(flatten_tree(tree, s.committed().size() - 1));
    }
    ASSERT_EQ(s.cache().length(), s.committed().size() - 1);
    const auto pos = s.cache().positions();
    for (std::size_t i = 0; i < pos.size(); ++i) ASSERT_EQ(pos[i], static_cast<int>(i));
  }
  const std::vector<int> before = s.committed();
  EXPECT_EQ(s.step(), reference_next_token(w, before));
}

TEST(Session, SetCommittedKeepsValidPrefix) {
  const ModelWeights w = build_toy_model(small_config(), 17);
  Session s(w, ModelRole::Intermediate);
  const std::vector<int> prompt = encode_bytes("abcdef", w.config);
  s.prefill(prompt);
  ASSERT_EQ(s.cache().length(), prompt.size() - 1);
  std::vector<int> other = prompt;
  other[3] = 'z';
  s.set_committed(other);
  EXPECT_EQ(s.cache().length(), 3u);
  EXPECT_EQ(s.step(), reference_next_token(w, other));
  EXPECT_THROW(s.set_committed({}), InputError);
}

TEST(Decoders, LosslessAcrossStrategies) {
  SplitMix64 rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c = small_config();
    c.n_layers = 1 + static_cast<std::uint32_t>(rng.next() % 2);
    const ModelWeights target = build_toy_model(c, rng.next());
    const ModelWeights intermediate = quantize_model(build_toy_model(c, rng.next()), Precision::w4(16));
    ModelConfig dc = c;
    dc.n_layers = 1;
    const ModelWeights draft_weights = build_toy_model(dc, rng.next());
    const std::vector<int> prompt = encode_bytes("p" + std::to_string(trial), c);
    const DecodeOutput ar = ar_decode(target, prompt, opts(20));

    ModelDrafter d1(draft_weights);
    const int d = 1 + static_cast<int>(rng.next() % 5);
    const DecodeOutput sp = vanilla_sp_decode(target, d1, d, prompt, opts(20));
    EXPECT_EQ(sp.tokens, ar.tokens) << "sp trial " << trial;
    expect_accounting(sp.stats);
    EXPECT_LE(sp.stats.tau, d + 1.0);

    ModelDrafter d2(draft_weights);
    const TreeParams tp{d, d + static_cast<int>(rng.next() % 10), 1 + static_cast<int>(rng.next() % 4)};
    const DecodeOutput eagle = eagle2_decode(target, d2, tp, prompt, opts(20));
    EXPECT_EQ(eagle.tokens, ar.tokens) << "eagle2 trial " << trial;
    expect_accounting(eagle.stats);
    EXPECT_LE(eagle.stats.tau, d + 1.0);

    ModelDrafter d3(draft_weights);
    HierParams hp;
    hp.d1 = 1 + static_cast<int>(rng.next() % 3);
    hp.d = hp.d1 + static_cast<int>(rng.next() % 4);
    hp.n1 = hp.d1 + static_cast<int>(rng.next() % 8);
    hp.k = 1 + static_cast<int>(rng.next() % 4);
    const DecodeOutput hier = hierspec_decode(target, intermediate, d3, hp, prompt, opts(20));
    EXPECT_EQ(hier.tokens, ar.tokens) << "hierspec trial " << trial;
    expect_accounting(hier.stats);
  }
}

TEST(Decoders, NgramDrafterIsLossless) {
  const ModelWeights target = build_toy_model(small_config(), 19);
  const std::vector<int> prompt = encode_bytes("ngram", target.config);
  const DecodeOutput ar = ar_decode(target, prompt, opts(30));
  // A table that predicts the target's own continuation for part of the output.
  std::map<std::vector<int>, Distribution> table;
  std::vector<int> seq = prompt;
  for (std::size_t i = 0; i < 10; ++i) {
    Distribution p(258, 0.0);
    p[static_cast<std::size_t>(ar.tokens[i])] = 1.0;
    table[{seq.end() - 3, seq.end()}] = p;
    seq.push_back(ar.tokens[i]);
  }
  NgramDrafter drafter(258, table);
  const DecodeOutput sp = vanilla_sp_decode(target, drafter, 4, prompt, opts(30));
  EXPECT_EQ(sp.tokens, ar.tokens);
  EXPECT_GT(sp.stats.tau, 1.0);
  const DecodeOutput eagle = eagle2_decode(target, drafter, {3, 8, 3}, prompt, opts(30));
  EXPECT_EQ(eagle.tokens, ar.tokens);
}

TEST(VanillaSp, PerfectDrafterTauIsDPlusOne) {
  const ModelWeights target = build_toy_model(small_config(), 20);
  for (int d : {1, 3, 6}) {
    ModelDrafter self(target);
    const DecodeOutput out = vanilla_sp_decode(target, self, d, encode_bytes("same", target.config), opts(40));
    EXPECT_DOUBLE_EQ(out.stats.tau, d + 1.0);
  }
  ModelDrafter self(target);
  EXPECT_THROW(vanilla_sp_decode(target, self, 0, encode_bytes("x", target.config), opts(4)), ConfigError);
  NgramDrafter wrong_vocab(10, {});
  EXPECT_THROW(vanilla_sp_decode(target, wrong_vocab, 2, encode_bytes("x", target.config), opts(4)), ConfigError);
}

TEST(VanillaSp, UniformDrafterTauNearOne) {
  ModelConfig c = small_config();
  c.max_positions = 1200;
  NgramDrafter uniform(258, {});
  std::size_t steps = 0;
  std::size_t tokens = 0;
  for (std::uint64_t seed = 21; steps < 1000; ++seed) {
    const ModelWeights target = build_toy_model(c, seed);
    const DecodeOutput out =
        vanilla_sp_decode(target, uniform, 4, encode_bytes("u", c), opts(kLong, 1000 - steps));
    EXPECT_EQ(out.tokens, ar_decode(target, encode_bytes("u", c), opts(out.tokens.size())).tokens);
    steps += out.stats.target_forwards;
    tokens += out.stats.tokens_generated;
  }
  const double tau = static_cast<double>(tokens) / static_cast<double>(steps);
  EXPECT_GE(tau, 1.0);
  EXPECT_LT(tau, 1.05);
}

TEST(Eagle2, BeamOneMatchesVanillaSp) {
  const ModelWeights target = build_toy_model(small_config(), 22);
  const ModelWeights draft_weights = quantize_model(target, Precision::w4(16));
  const std::vector<int> prompt = encode_bytes("beam", target.config);
  for (int d : {1, 2, 5}) {
    EventLog sp_log, eagle_log;
    ModelDrafter a(draft_weights), b(draft_weights);
    const DecodeOutput sp = vanilla_sp_decode(target, a, d, prompt, opts(40, 0, &sp_log));
    const DecodeOutput eagle = eagle2_decode(target, b, {d, d, 1}, prompt, opts(40, 0, &eagle_log));
    EXPECT_EQ(eagle.tokens, sp.tokens);
    EXPECT_TRUE(same_counts(eagle.stats, sp.stats));
    EXPECT_EQ(eagle_log, sp_log);
  }
}

TEST(Eagle2, LargerTreeDoesNotLowerTau) {
  ModelConfig c = small_config();
  c.max_positions = 1024;
  std::size_t tokens30 = 0, steps30 = 0, tokens60 = 0, steps60 = 0;
  for (std::uint64_t seed = 23; steps60 < 500; ++seed) {
    const ModelWeights target = build_toy_model(c, seed);
    const ModelWeights draft_weights = quantize_model(target, Precision::w4(32));
    const std::vector<int> prompt = encode_bytes("monotone", c);
    ModelDrafter a(draft_weights), b(draft_weights);
    const DecodeOutput small = eagle2_decode(target, a, {6, 30, 10}, prompt, opts(400));
    const DecodeOutput large = eagle2_decode(target, b, {6, 60, 10}, prompt, opts(400));
    ASSERT_EQ(small.tokens, large.tokens);
    tokens30 += small.stats.tokens_generated;
    steps30 += small.stats.target_forwards;
    tokens60 += large.stats.tokens_generated;
    steps60 += large.stats.target_forwards;
  }
  const double tau30 = static_cast<double>(tokens30) / static_cast<double>(steps30);
  const double tau60 = static_cast<double>(tokens60) / static_cast<double>(steps60);
  EXPECT_GE(tau60, tau30);
  EXPECT_LE(tau60, 7.0);
}

TEST(HierSpec, PerfectIntermediateAcceptsEveryDraft) {
  const ModelWeights target = build_toy_model(small_config(), 26);
  ModelConfig dc = small_config();
  dc.n_layers = 1;
  const ModelWeights draft_weights = build_toy_model(dc, 27);
  const std::vector<int> prompt = encode_bytes("hier", target.config);
  EventLog log;
  ModelDrafter drafter(draft_weights);
  const HierParams hp{6, 3, 10, 4};
  const DecodeOutput out = hierspec_decode(target, target, drafter, hp, prompt, opts(60, 0, &log));
  EXPECT_EQ(out.tokens, ar_decode(target, prompt, opts(60)).tokens);
  // Each target forward covers the pending token plus the accumulated draft,
  // so full acceptance means every batch turns into committed tokens.
  std::size_t verified = 0, verify_events = 0;
  for (const auto& e : log) {
    if (e.role == ModelRole::Target && e.phase == Phase::Verify) {
      verified += e.n_tokens;
      ++verify_events;
    }
  }
  EXPECT_EQ(verify_events, out.stats.target_forwards);
  EXPECT_EQ(verified, out.stats.tokens_generated);
  for (const auto& [acc, count] : out.stats.accepted_histogram) EXPECT_GE(acc, 6u);
  EXPECT_GT(out.stats.tau, 7.0 - 1e-12);
}

TEST(HierSpec, AlignedIntermediateBeatsVanillaSp) {
  ModelConfig c = small_config();
  c.max_positions = 1024;
  std::size_t sp_tokens = 0, sp_steps = 0, hier_tokens = 0, hier_steps = 0;
  for (std::uint64_t seed = 28; seed < 31; ++seed) {
    const ModelWeights intermediate = build_toy_model(c, seed);
    const ModelWeights target = quantize_model(intermediate, Precision::w4(32));
    const ModelWeights draft_weights = quantize_model(intermediate, Precision::w4(8));
    const std::vector<int> prompt = encode_bytes("aligned", c);
    ModelDrafter sp_drafter(intermediate);
    const DecodeOutput sp = vanilla_sp_decode(target, sp_drafter, 6, prompt, opts(300));
    // Toy next-token distributions are close to uniform, so cumulative scores
    // fall by about log(vocab) per level. k=2, n1=10 keeps every depth-3
    // candidate in the stage-1 tree.
    ModelDrafter drafter(draft_weights);
    const DecodeOutput hier = hierspec_decode(target, intermediate, drafter, {6, 3, 10, 2}, prompt, opts(300));
    EXPECT_EQ(hier.tokens, sp.tokens);
    sp_tokens += sp.stats.tokens_generated;
    sp_steps += sp.stats.target_forwards;
    hier_tokens += hier.stats.tokens_generated;
    hier_steps += hier.stats.target_forwards;
  }
  const double sp_tau = static_cast<double>(sp_tokens) / static_cast<double>(sp_steps);
  const double hier_tau = static_cast<double>(hier_tokens) / static_cast<double>(hier_steps);
  EXPECT_GT(hier_tau, sp_tau);
}

TEST(HierSpec, ParamValidation) {
  EXPECT_THROW((HierParams{2, 3, 5, 2}.validate()), ConfigError);
  EXPECT_THROW((HierParams{6, 0, 5, 2}.validate()), ConfigError);
  EXPECT_THROW((HierParams{6, 3, 2, 2}.validate()), ConfigError);
  EXPECT_NO_THROW((HierParams{3, 3, 3, 1}.validate()));
}

TEST(Strategy, ParseRoundTrip) {
  for (Strategy s : {Strategy::AR, Strategy::SP, Strategy::Eagle2, Strategy::HierSpec}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_strategy("medusa"), ConfigError);
}

ModelConfig tiny_vocab_config() {
  ModelConfig c = small_config(8);
  c.d_model = 16;
  c.d_ff = 32;
  c.n_heads = 2;
  c.max_positions = 64;
  return c;
}

TEST(TauOracle, PerfectDrafterGivesDPlusOne) {
  const ModelWeights target = build_toy_model(tiny_vocab_config(), 40);
  const std::vector<int> prompt{6, 1, 2};
  ModelDrafter self(target);
  EXPECT_DOUBLE_EQ(tau_oracle(Strategy::SP, target, self, {3, 3, 1}, prompt, 4), 4.0);
  EXPECT_DOUBLE_EQ(tau_oracle(Strategy::Eagle2, target, self, {2, 5, 2}, prompt, 4), 3.0);
  EXPECT_DOUBLE_EQ(tau_oracle(Strategy::AR, target, self, {1, 1, 1}, prompt, 4), 1.0);
}

TEST(TauOracle, ArgminDrafterGivesOne) {
  const ModelWeights target = build_toy_model(tiny_vocab_config(), 41);
  const std::vector<int> prompt{6, 3};
  ArgminDrafter adversary(target);
  EXPECT_DOUBLE_EQ(tau_oracle(Strategy::SP, target, adversary, {3, 3, 1}, prompt, 4), 1.0);
  EXPECT_DOUBLE_EQ(tau_oracle(Strategy::Eagle2, target, adversary, {3, 7, 1}, prompt, 4), 1.0);
  const DecodeOutput measured = vanilla_sp_decode(target, adversary, 3, prompt, opts(kLong, 4));
  EXPECT_DOUBLE_EQ(measured.stats.tau, 1.0);
}

TEST(TauOracle, MatchesMeasuredTauOnRandomModels) {
  SplitMix64 rng(42);
  int nontrivial = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const ModelWeights target = build_toy_model(tiny_vocab_config(), rng.next());
    const ModelWeights draft_weights = quantize_model(target, Precision::w4(8));
    const std::vector<int> prompt{6, static_cast<int>(rng.next() % 6)};
    const TreeParams tp{2, 3, 2};
    ModelDrafter a(draft_weights), b(draft_weights), c(draft_weights), e(draft_weights);
    const double oracle = tau_oracle(Strategy::Eagle2, target, a, tp, prompt, 4);
    const DecodeOutput measured = eagle2_decode(target, b, tp, prompt, opts(kLong, 4));
    EXPECT_EQ(measured.stats.tau, oracle) << "trial " << trial;
    const double sp_oracle = tau_oracle(Strategy::SP, target, c, tp, prompt, 4);
    const DecodeOutput sp = vanilla_sp_decode(target, e, 2, prompt, opts(kLong, 4));
    EXPECT_EQ(sp.stats.tau, sp_oracle) << "trial " << trial;
    if (oracle > 1.0 && oracle < 3.0) ++nontrivial;
  }
  EXPECT_GT(nontrivial, 0);
}

TEST(TauOracle, RefusesLargeProblems) {
  const ModelWeights big_vocab = build_toy_model(small_config(), 43);
  const ModelWeights target = build_toy_model(tiny_vocab_config(), 44);
  ModelDrafter d(target);
  const std::vector<int> prompt{6, 1};
  try {
    ModelDrafter big(big_vocab);
    tau_oracle(Strategy::SP, big_vocab, big, {2, 3, 1}, prompt, 2);
    FAIL() << "expected refusal";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau_oracle bound exceeded"), std::string::npos);
  }
  EXPECT_THROW(tau_oracle(Strategy::SP, target, d, {4, 4, 1}, prompt, 2), ConfigError);
  EXPECT_THROW(tau_oracle(Strategy::Eagle2, target, d, {3, 8, 2}, prompt, 2), ConfigError);
  EXPECT_THROW(tau_oracle(Strategy::SP, target, d, {2, 3, 1}, prompt, 5), ConfigError);
  EXPECT_THROW(tau_oracle(Strategy::HierSpec, target, d, {2, 3, 1}, prompt, 2), ConfigError);
}

}  // namespace
}  // namespace spql
