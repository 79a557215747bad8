// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "spql/error.hpp"
#include "spql/specdec.hpp"

namespace spql {

namespace {

constexpr std::size_t kMaxVocab = 16;
constexpr int kMaxDepth = 3;
constexpr int kMaxSize = 7;
constexpr std::size_t kMaxHorizon = 4;

std::vector<int> concat(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct Seq {
  std::vector<int> tokens;
  double score = 0.0;
  std::size_t created = 0;
};

bool better(const Seq& a, const Seq& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  if (a.tokens.back() != b.tokens.back()) return a.tokens.back() < b.tokens.back();
  return a.created < b.created;
}

// Children of `parent` in descending probability, zero-probability tokens excluded.
std::vector<Seq> children(Drafter& drafter, std::span<const int> context, const Seq& parent, int k,
                          std::size_t& created) {
  const Distribution p = drafter.next_distribution(concat(context, parent.tokens));
  std::vector<int> order;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > 0.0) order.push_back(static_cast<int>(t));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)];
  });
  if (order.size() > static_cast<std::size_t>(k)) order.resize(static_cast<std::size_t>(k));
  std::vector<Seq> out;
  for (int t : order) {
    Seq s{parent.tokens, parent.score + std::log(p[static_cast<std::size_t>(t)]), created++};
    s.tokens.push_back(t);
    out.push_back(std::move(s));
  }
  return out;
}

// Every draft sequence that the beam-search tree would keep, as token paths.
std::set<std::vector<int>> eagle2_selection(Drafter& drafter, std::span<const int> context,
                                            const TreeParams& params) {
  std::size_t created = 0;
  std::vector<Seq> all;
  std::vector<Seq> level = children(drafter, context, Seq{}, params.beam, created);
  all.insert(all.end(), level.begin(), level.end());
  for (int depth = 2; depth <= params.depth; ++depth) {
    std::sort(level.begin(), level.end(), better);
    if (level.size() > static_cast<std::size_t>(params.beam)) level.resize(static_cast<std::size_t>(params.beam));
    std::vector<Seq> next;
    for (const Seq& parent : level) {
      auto kids = children(drafter, context, parent, params.beam, created);
      next.insert(next.end(), kids.begin(), kids.end());
    }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
  }

  std::sort(all.begin(), all.end(), better);
  std::set<std::vector<int>> chosen;
  for (const Seq& s : all) {
    if (chosen.size() == static_cast<std::size_t>(params.size)) break;
    std::vector<std::vector<int>> missing;
    for (std::size_t len = s.tokens.size(); len >= 1; --len) {
      std::vector<int> prefix(s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(len));
      if (chosen.count(prefix) != 0) break;
      missing.push_back(std::move(prefix));
    }
    if (chosen.size() + missing.size() > static_cast<std::size_t>(params.size)) continue;
    chosen.insert(missing.begin(), missing.end());
  }
  return chosen;
}

}  // namespace

double tau_oracle(Strategy strategy, const ModelWeights& target, Drafter& drafter, const TreeParams& params,
                  std::span<const int> prompt, std::size_t horizon) {
  if (strategy == Strategy::HierSpec) throw ConfigError("tau_oracle supports ar, sp and eagle2 only");
  if (target.config.vocab_size > kMaxVocab || params.depth > kMaxDepth || horizon > kMaxHorizon ||
      (strategy == Strategy::Eagle2 && params.size > kMaxSize)) {
    throw ConfigError("tau_oracle bound exceeded: requires vocab <= 16, d <= 3, n <= 7, horizon <= 4 (got vocab " +
                      std::to_string(target.config.vocab_size) + ", d " + std::to_string(params.depth) + ", n " +
                      std::to_string(params.size) + ", horizon " + std::to_string(horizon) + ")");
  }
  if (horizon == 0) throw ConfigError("tau_oracle horizon must be positive");
  if (prompt.empty()) throw InputError("prompt must not be empty");
  if (strategy != Strategy::AR) params.validate();

  const int eos = target.config.eos();
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::size_t tokens = 0;
  std::size_t steps = 0;
  while (steps < horizon) {
    // The target's own greedy continuation, one fresh forward per token.
    std::vector<int> greedy;
    auto greedy_at = [&](std::size_t i) {
      while (greedy.size() <= i) greedy.push_back(reference_next_token(target, concat(seq, greedy)));
      return greedy[i];
    };

    std::size_t accepted = 0;
    if (strategy == Strategy::SP) {
      std::vector<int> draft;
      for (int i = 0; i < params.depth; ++i) draft.push_back(argmax(drafter.next_distribution(concat(seq, draft))));
      while (accepted < draft.size() && draft[accepted] == greedy_at(accepted)) ++accepted;
    } else if (strategy == Strategy::Eagle2) {
      const auto chosen = eagle2_selection(drafter, seq, params);
      std::vector<int> prefix;
      while (static_cast<int>(accepted) < params.depth) {
        prefix.push_back(greedy_at(accepted));
        if (chosen.count(prefix) == 0) break;
        ++accepted;
      }
    }
    greedy_at(accepted);
    ++steps;
    tokens += accepted + 1;
    const bool stop = std::find(greedy.begin(), greedy.begin() + static_cast<std::ptrdiff_t>(accepted + 1), eos) !=
                      greedy.begin() + static_cast<std::ptrdiff_t>(accepted + 1);
    seq.insert(seq.end(), greedy.begin(), greedy.begin() + static_cast<std::ptrdiff_t>(accepted + 1));
    if (stop) break;
  }
  return static_cast<double>(tokens) / static_cast<double>(steps);
}

}  // namespace spql
