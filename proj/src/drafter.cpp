// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "spql/draft.hpp"
#include "spql/error.hpp"

namespace spql {

void Drafter::prefill(std::span<const int> context) {
  warm(context);
  if (log_ != nullptr && !context.empty()) {
    log_->push_back({ModelRole::Drafter, Phase::Prefill, context.size(), context.size()});
  }
}

std::vector<Distribution> Drafter::draft_round(std::span<const int> context,
                                               std::span<const std::vector<int>> paths) {
  std::vector<Distribution> out = distributions(context, paths);
  std::size_t deepest = 0;
  for (const auto& path : paths) deepest = std::max(deepest, path.size());
  ++rounds_;
  if (log_ != nullptr) {
    log_->push_back({ModelRole::Drafter, Phase::Draft, paths.size(), context.size() + deepest});
  }
  return out;
}

std::vector<Distribution> Drafter::distributions(std::span<const int> context,
                                                 std::span<const std::vector<int>> paths) {
  std::vector<Distribution> out;
  out.reserve(paths.size());
  std::vector<int> ctx(context.begin(), context.end());
  for (const auto& path : paths) {
    ctx.resize(context.size());
    ctx.insert(ctx.end(), path.begin(), path.end());
    out.push_back(next_distribution(ctx));
  }
  return out;
}

int argmax(std::span<const double> probs) {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

Distribution softmax(std::span<const float> logits) {
  Distribution p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace {

void check_distribution(const Distribution& p, std::size_t vocab, const std::string& what) {
  if (p.size() != vocab) {
    throw ConfigError(what + ": distribution has " + std::to_string(p.size()) + " entries, vocab is " +
                      std::to_string(vocab));
  }
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(what + ": probabilities must be finite and non-negative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6) throw ConfigError(what + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace

NgramDrafter::NgramDrafter(std::size_t vocab_size, std::map<std::vector<int>, Distribution> table,
                           Distribution fallback)
    : vocab_(vocab_size), table_(std::move(table)), fallback_(std::move(fallback)) {
  if (vocab_ == 0) throw ConfigError("ngram table: vocab_size must be positive");
  if (fallback_.empty()) fallback_.assign(vocab_, 1.0 / static_cast<double>(vocab_));
  check_distribution(fallback_, vocab_, "ngram fallback");
  for (const auto& [ctx, p] : table_) {
    if (ctx.size() > kMaxContext) throw ConfigError("ngram table: context longer than 3 tokens");
    for (int t : ctx) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_) {
        throw ConfigError("ngram table: context token " + std::to_string(t) + " outside vocabulary");
      }
    }
    check_distribution(p, vocab_, "ngram entry");
  }
}

Distribution NgramDrafter::next_distribution(std::span<const int> context) {
  const std::size_t longest = std::min(kMaxContext, context.size());
  std::vector<int> key;
  for (std::size_t len = longest + 1; len-- > 0;) {
    key.assign(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    auto it = table_.find(key);
    if (it != table_.end()) return it->second;
  }
  return fallback_;
}

NgramDrafter parse_ngram_drafter(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("ngram table: ") + e.what());
  }
  try {
    const auto vocab = doc.at("vocab_size").get<std::size_t>();
    Distribution fallback;
    if (doc.contains("fallback")) {
      const auto& fb = doc["fallback"];
      if (fb.is_string()) {
        if (fb.get<std::string>() != "uniform") throw ConfigError("ngram table: unknown fallback '" + fb.get<std::string>() + "'");
      } else {
        fallback = fb.get<Distribution>();
      }
    }
    std::map<std::vector<int>, Distribution> table;
    if (doc.contains("entries")) {
      for (const auto& entry : doc["entries"]) {
        auto ctx = entry.at("context").get<std::vector<int>>();
        const auto& probs = entry.at("probs");
        Distribution p;
        if (probs.is_array()) {
          p = probs.get<Distribution>();
        } else {
          p.assign(vocab, 0.0);
          for (const auto& [tok, v] : probs.items()) {
            const int t = std::stoi(tok);
            if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
              throw ConfigError("ngram table: token " + tok + " outside vocabulary");
            }
            p[static_cast<std::size_t>(t)] = v.get<double>();
          }
        }
        if (!table.emplace(std::move(ctx), std::move(p)).second) throw ConfigError("ngram table: duplicate context");
      }
    }
    return NgramDrafter(vocab, std::move(table), std::move(fallback));
  } catch (const json::exception& e) {
    throw FormatError(std::string("ngram table: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("ngram table: token keys must be integers");
  }
}

NgramDrafter load_ngram_drafter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ngram table '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ngram_drafter(ss.str());
}

ModelDrafter::ModelDrafter(const ModelWeights& weights) : weights_(&weights), cache_(weights.config) {}

void ModelDrafter::sync(std::span<const int> context) {
  if (context.empty()) throw InputError("model drafter: empty context");
  std::size_t lcp = 0;
  while (lcp < tokens_.size() && lcp < context.size() && tokens_[lcp] == context[lcp]) ++lcp;
  if (lcp == context.size() && lcp == tokens_.size()) return;
  // At least the final context token must be forwarded to produce its logits.
  const std::size_t keep = std::min(lcp, context.size() - 1);
  cache_.truncate(keep);
  tokens_.assign(context.begin(), context.begin() + static_cast<std::ptrdiff_t>(keep));

  const std::size_t n = context.size() - keep;
  std::vector<int> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(keep + i);
  const auto batch = context.subspan(keep);
  const Matrix logits = forward(*weights_, batch, pos, AncestryMask::chain(n, keep), cache_);
  ++engine_forwards_;
  tokens_.insert(tokens_.end(), batch.begin(), batch.end());
  const auto last = logits.row(n - 1);
  last_logits_.assign(last.begin(), last.end());
}

void ModelDrafter::warm(std::span<const int> context) {
  if (!context.empty()) sync(context);
}

Distribution ModelDrafter::next_distribution(std::span<const int> context) {
  sync(context);
  return softmax(last_logits_);
}

std::vector<Distribution> ModelDrafter::distributions(std::span<const int> context,
                                                      std::span<const std::vector<int>> paths) {
  sync(context);
  // Prefix trie over the paths; node i holds one token at depth depth[i].
  std::map<std::pair<int, int>, int> child;  // (parent, token) -> node
  std::vector<int> tokens, parents, pos;
  std::vector<int> ends(paths.size(), -1);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    int node = -1;
    for (std::size_t i = 0; i < paths[p].size(); ++i) {
      auto [it, fresh] = child.try_emplace({node, paths[p][i]}, static_cast<int>(tokens.size()));
      if (fresh) {
        tokens.push_back(paths[p][i]);
        parents.push_back(node);
        pos.push_back(static_cast<int>(context.size() + i));
      }
      node = it->second;
    }
    ends[p] = node;
  }

  std::vector<Distribution> out;
  out.reserve(paths.size());
  if (tokens.empty()) {
    for (std::size_t p = 0; p < paths.size(); ++p) out.push_back(softmax(last_logits_));
    return out;
  }
  const std::size_t base = cache_.length();
  const Matrix logits = forward(*weights_, tokens, pos, AncestryMask::from_parents(parents, base), cache_);
  ++engine_forwards_;
  cache_.truncate(base);
  for (int end : ends) {
    out.push_back(end < 0 ? softmax(last_logits_) : softmax(logits.row(static_cast<std::size_t>(end))));
  }
  return out;
}

}  // namespace spql
