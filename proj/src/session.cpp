// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <string>

#include "spql/error.hpp"
#include "spql/specdec.hpp"

namespace spql {

Session::Session(const ModelWeights& weights, ModelRole role, EventLog* log)
    : weights_(&weights), role_(role), log_(log), cache_(weights.config) {}

void Session::log(Phase phase, std::size_t n_tokens, std::size_t ctx_len) {
  if (log_ != nullptr) log_->push_back({role_, phase, n_tokens, ctx_len});
}

void Session::prefill(std::span<const int> prompt) {
  if (prompt.empty()) throw InputError("prompt must not be empty");
  cache_.truncate(0);
  committed_.assign(prompt.begin(), prompt.end());
  const std::size_t n = prompt.size() - 1;
  if (n == 0) return;
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(i);
  forward(*weights_, prompt.first(n), pos, AncestryMask::chain(n, 0), cache_);
  log(Phase::Prefill, n, n);
}

void Session::set_committed(std::span<const int> sequence) {
  if (sequence.empty()) throw InputError("committed sequence must not be empty");
  std::size_t lcp = 0;
  while (lcp < committed_.size() && lcp < sequence.size() && committed_[lcp] == sequence[lcp]) ++lcp;
  const std::size_t keep = std::min({lcp, sequence.size() - 1, cache_.length()});
  cache_.truncate(keep);
  committed_.assign(sequence.begin(), sequence.end());
}

Session::SequenceResult Session::verify_chain(std::span<const int> draft) {
  if (committed_.empty()) throw InputError("session has no committed tokens; call prefill first");
  const std::size_t base = cache_.length();
  const std::size_t tail = committed_.size() - base;
  std::vector<int> tokens(committed_.begin() + static_cast<std::ptrdiff_t>(base), committed_.end());
  tokens.insert(tokens.end(), draft.begin(), draft.end());
  const std::size_t n = tokens.size();
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(base + i);

  const Matrix logits = forward(*weights_, tokens, pos, AncestryMask::chain(n, base), cache_);
  ++forwards_;
  log(role_ == ModelRole::Target ? Phase::Verify : Phase::Draft, n, base + n);

  SequenceResult r;
  while (r.accepted < draft.size() && draft[r.accepted] == argmax(logits.row(tail - 1 + r.accepted))) ++r.accepted;
  r.bonus = argmax(logits.row(tail - 1 + r.accepted));
  cache_.truncate(base + tail + r.accepted);
  committed_.insert(committed_.end(), draft.begin(), draft.begin() + static_cast<std::ptrdiff_t>(r.accepted));
  committed_.push_back(r.bonus);
  return r;
}

Session::SequenceResult Session::verify_sequence(std::span<const int> draft) {
  if (draft.empty()) throw InputError("verify_sequence: empty draft");
  return verify_chain(draft);
}

int Session::step() { return verify_chain({}).bonus; }

Session::TreeResult Session::verify_tree(const FlatDraft& flat) {
  if (committed_.empty()) throw InputError("session has no committed tokens; call prefill first");
  const std::size_t m = flat.tokens.size();
  if (m == 0) throw InputError("verify_tree: empty draft");
  if (flat.positions.size() != m || flat.parents.size() != m || flat.mask.size() != m) {
    throw InputError("verify_tree: malformed flat draft (size mismatch)");
  }
  const std::size_t anchor = committed_.size() - 1;
  std::vector<int> depth(m, 1);
  for (std::size_t i = 0; i < m; ++i) {
    const int p = flat.parents[i];
    if (p >= static_cast<int>(i)) throw InputError("verify_tree: parent after child");
    if (p >= 0) depth[i] = depth[static_cast<std::size_t>(p)] + 1;
    if (flat.positions[i] != static_cast<int>(anchor) + depth[i]) {
      throw InputError("verify_tree: node " + std::to_string(i) + " position does not match its depth");
    }
  }
  const AncestryMask expect = AncestryMask::from_parents(flat.parents, flat.mask.prefix_len());
  if (!(expect == flat.mask)) throw InputError("verify_tree: malformed mask");

  const std::size_t base = cache_.length();
  const std::size_t tail = committed_.size() - base;
  const std::size_t n = tail + m;
  std::vector<int> tokens(committed_.begin() + static_cast<std::ptrdiff_t>(base), committed_.end());
  tokens.insert(tokens.end(), flat.tokens.begin(), flat.tokens.end());
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < tail; ++i) pos[i] = static_cast<int>(base + i);
  std::copy(flat.positions.begin(), flat.positions.end(), pos.begin() + static_cast<std::ptrdiff_t>(tail));

  AncestryMask mask(n, base);
  for (std::size_t i = 0; i < tail; ++i) {
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, j);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < tail; ++j) mask.set(tail + i, j);
    for (std::size_t j = 0; j < m; ++j) {
      if (flat.mask(i, j)) mask.set(tail + i, tail + j);
    }
  }

  const Matrix logits = forward(*weights_, tokens, pos, mask, cache_);
  ++forwards_;
  int deepest = 0;
  for (int dd : depth) deepest = std::max(deepest, dd);
  log(role_ == ModelRole::Target ? Phase::Verify : Phase::Draft, n, anchor + static_cast<std::size_t>(deepest) + 1);

  TreeResult r;
  std::size_t row = tail - 1;
  int node = -1;
  while (true) {
    const int want = argmax(logits.row(row));
    int next = -1;
    for (std::size_t i = 0; i < m; ++i) {
      if (flat.parents[i] == node && flat.tokens[i] == want) {
        next = static_cast<int>(i);
        break;
      }
    }
    if (next < 0) {
      r.bonus = want;
      break;
    }
    r.path.push_back(static_cast<std::size_t>(next));
    node = next;
    row = tail + static_cast<std::size_t>(next);
  }

  std::vector<std::size_t> keep(tail);
  for (std::size_t i = 0; i < tail; ++i) keep[i] = i;
  for (std::size_t p : r.path) keep.push_back(tail + p);
  cache_select(cache_, base, keep);
  for (std::size_t p : r.path) committed_.push_back(flat.tokens[p]);
  committed_.push_back(r.bonus);
  return r;
}

}  // namespace spql
