// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include "spql/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spql/error.hpp"
#include "spql/rng.hpp"

namespace spql {

Precision Precision::parse(std::string_view text) {
  auto parse_group = [&](std::string_view digits) -> std::size_t {
    if (digits.empty()) throw ConfigError("missing group size in precision '" + std::string(text) + "'");
    std::size_t g = 0;
    for (char ch : digits) {
      if (ch < '0' || ch > '9') throw ConfigError("bad group size in precision '" + std::string(text) + "'");
      g = g * 10 + static_cast<std::size_t>(ch - '0');
    }
    if (g == 0) throw ConfigError("group size must be positive in '" + std::string(text) + "'");
    return g;
  };
  if (text == "fp32" || text == "fp16") return fp32();
  if (text == "w8") return w8();
  if (text.starts_with("w4r:")) return w4_rotated(parse_group(text.substr(4)));
  if (text.starts_with("w4:")) return w4(parse_group(text.substr(3)));
  throw ConfigError("unknown precision '" + std::string(text) + "' (expected fp32, w8, w4:<g>, w4r:<g>)");
}

std::string Precision::to_string() const {
  switch (kind) {
    case PrecisionKind::FP32:
      return "fp32";
    case PrecisionKind::W8:
      return "w8";
    case PrecisionKind::W4:
      return "w4:" + std::to_string(group_size);
    case PrecisionKind::W4Rotated:
      return "w4r:" + std::to_string(group_size);
  }
  return "?";
}

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ConfigError("vocab_size must be at least 3");
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_ff == 0 || max_positions == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (precision.kind == PrecisionKind::W4 || precision.kind == PrecisionKind::W4Rotated) {
    const std::size_t g = precision.group_size;
    if (g == 0 || d_model % g != 0 || d_ff % g != 0) {
      throw ConfigError("group size " + std::to_string(g) + " must divide d_model and d_ff");
    }
  }
  if (precision.kind == PrecisionKind::W4Rotated && (!is_power_of_two(d_model) || !is_power_of_two(d_ff))) {
    throw ConfigError("rotation requires power-of-two d_model and d_ff");
  }
}

std::size_t Linear::in_features() const {
  return std::visit([](const auto& w) { return w.cols; }, w_);
}

std::size_t Linear::out_features() const {
  return std::visit([](const auto& w) { return w.rows; }, w_);
}

Vector Linear::apply(std::span<const float> x) const {
  if (const auto* m = dense()) return gemv(*m, x);
  const auto& q = *quantized();
  if (!q.rotated) return qgemv(q, x);
  Vector xr(x.begin(), x.end());
  hadamard_transform(xr);
  return qgemv(q, xr);
}

Matrix Linear::apply_rows(const Matrix& x) const {
  if (const auto* m = dense()) return gemm(*m, x);
  const auto& q = *quantized();
  if (!q.rotated) return qgemm(q, x);
  Matrix xr = x;
  for (std::size_t i = 0; i < xr.rows; ++i) hadamard_transform(xr.row(i));
  return qgemm(q, xr);
}

namespace {

Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (float& v : m.data) v = static_cast<float>(rng.normal() * stddev);
  return m;
}

Linear make_linear(const Matrix& dense, Precision p) {
  switch (p.kind) {
    case PrecisionKind::FP32:
      return Linear(dense);
    case PrecisionKind::W8:
      return Linear(quantize_per_channel(dense, 8));
    case PrecisionKind::W4:
      return Linear(quantize_group(dense, 4, p.group_size));
    case PrecisionKind::W4Rotated: {
      QuantizedMatrix q = quantize_group(hadamard_rotate(dense), 4, p.group_size);
      q.rotated = true;
      return Linear(std::move(q));
    }
  }
  throw ConfigError("unknown precision kind");
}

const Matrix& dense_of(const Linear& l) {
  const Matrix* m = l.dense();
  if (m == nullptr) throw ConfigError("quantize_model requires a dense (fp32) source model");
  return *m;
}

}  // namespace

ModelWeights build_toy_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SplitMix64 rng(seed);
  const double stddev = 0.02 / std::sqrt(static_cast<double>(config.n_layers));
  const std::size_t d = config.d_model;

  ModelWeights w;
  w.config = config;
  w.config.precision = Precision::fp32();
  w.token_embedding = random_matrix(rng, config.vocab_size, d, stddev);
  w.position_embedding = random_matrix(rng, config.max_positions, d, stddev);
  w.layers.resize(config.n_layers);
  for (auto& layer : w.layers) {
    layer.attn_norm.assign(d, 1.0f);
    layer.mlp_norm.assign(d, 1.0f);
    layer.wq = Linear(random_matrix(rng, d, d, stddev));
    layer.wk = Linear(random_matrix(rng, d, d, stddev));
    layer.wv = Linear(random_matrix(rng, d, d, stddev));
    layer.wo = Linear(random_matrix(rng, d, d, stddev));
    layer.w_gate = Linear(random_matrix(rng, config.d_ff, d, stddev));
    layer.w_up = Linear(random_matrix(rng, config.d_ff, d, stddev));
    layer.w_down = Linear(random_matrix(rng, d, config.d_ff, stddev));
  }
  w.final_norm.assign(d, 1.0f);
  w.lm_head = Linear(random_matrix(rng, config.vocab_size, d, stddev));

  if (config.precision.kind != PrecisionKind::FP32) return quantize_model(w, config.precision);
  return w;
}

ModelWeights quantize_model(const ModelWeights& dense, Precision precision) {
  ModelConfig cfg = dense.config;
  cfg.precision = precision;
  cfg.validate();

  ModelWeights out;
  out.config = cfg;
  out.token_embedding = dense.token_embedding;
  out.position_embedding = dense.position_embedding;
  out.final_norm = dense.final_norm;
  out.layers.reserve(dense.layers.size());
  for (const auto& src : dense.layers) {
    LayerWeights l;
    l.attn_norm = src.attn_norm;
    l.mlp_norm = src.mlp_norm;
    l.wq = make_linear(dense_of(src.wq), precision);
    l.wk = make_linear(dense_of(src.wk), precision);
    l.wv = make_linear(dense_of(src.wv), precision);
    l.wo = make_linear(dense_of(src.wo), precision);
    l.w_gate = make_linear(dense_of(src.w_gate), precision);
    l.w_up = make_linear(dense_of(src.w_up), precision);
    l.w_down = make_linear(dense_of(src.w_down), precision);
    out.layers.push_back(std::move(l));
  }
  out.lm_head = make_linear(dense_of(dense.lm_head), precision);
  return out;
}

std::uint64_t weights_checksum(const ModelWeights& weights) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize_checkpoint(weights)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

AncestryMask AncestryMask::chain(std::size_t n, std::size_t prefix_len) {
  AncestryMask m(n, prefix_len);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j);
  }
  return m;
}

AncestryMask AncestryMask::from_parents(std::span<const int> parents, std::size_t prefix_len) {
  const std::size_t n = parents.size();
  AncestryMask m(n, prefix_len);
  for (std::size_t i = 0; i < n; ++i) {
    m.set(i, i);
    const int p = parents[i];
    if (p < 0) continue;
    if (static_cast<std::size_t>(p) >= i) throw InputError("parent links must point to earlier rows");
    for (std::size_t j = 0; j < n; ++j) {
      if (m(static_cast<std::size_t>(p), j)) m.set(i, j);
    }
  }
  return m;
}

int argmax(std::span<const float> logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

constexpr float kNormEps = 1e-5f;

void rms_norm(std::span<const float> x, std::span<const float> gain, std::span<float> out) {
  float ss = 0.0f;
  for (float v : x) ss += v * v;
  const float inv = 1.0f / std::sqrt(ss / static_cast<float>(x.size()) + kNormEps);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
}

void check_batch(const ModelWeights& w, std::span<const int> tokens, std::span<const int> positions,
                 const AncestryMask& mask, const KVCache& cache) {
  const auto& cfg = w.config;
  const std::size_t n = tokens.size();
  if (positions.size() != n || mask.size() != n) {
    throw InputError("forward: tokens/positions/mask sizes disagree (" + std::to_string(n) + ", " +
                     std::to_string(positions.size()) + ", " + std::to_string(mask.size()) + ")");
  }
  if (mask.prefix_len() != cache.length()) {
    throw InputError("forward: mask prefix " + std::to_string(mask.prefix_len()) + " != cache length " +
                     std::to_string(cache.length()));
  }
  if (cache.length() + n > cfg.max_positions) {
    throw InputError("position overflow: cache " + std::to_string(cache.length()) + " + batch " +
                     std::to_string(n) + " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] < 0 || tokens[i] >= static_cast<int>(cfg.vocab_size)) {
      throw InputError("forward: token " + std::to_string(tokens[i]) + " outside vocabulary");
    }
    if (positions[i] < 0 || positions[i] >= static_cast<int>(cfg.max_positions)) {
      throw InputError("position overflow: position " + std::to_string(positions[i]));
    }
    if (!mask(i, i)) throw InputError("forward: mask row " + std::to_string(i) + " cannot see itself");
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask(i, j) || j == i) continue;
      if (j > i) throw InputError("forward: mask row " + std::to_string(i) + " sees a later row");
      if (positions[j] >= positions[i]) {
        throw InputError("forward: ancestor " + std::to_string(j) + " of row " + std::to_string(i) +
                         " does not precede it in position");
      }
    }
  }
}

}  // namespace

Matrix forward(const ModelWeights& w, std::span<const int> tokens, std::span<const int> positions,
               const AncestryMask& mask, KVCache& cache) {
  check_batch(w, tokens, positions, mask, cache);
  const auto& cfg = w.config;
  const std::size_t n = tokens.size();
  const std::size_t d = cfg.d_model;
  const std::size_t hd = cfg.head_dim();
  const std::size_t base = cache.length();
  const float attn_scale = 1.0f / std::sqrt(static_cast<float>(hd));

  Matrix h(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto te = w.token_embedding.row(static_cast<std::size_t>(tokens[i]));
    const auto pe = w.position_embedding.row(static_cast<std::size_t>(positions[i]));
    for (std::size_t c = 0; c < d; ++c) h.at(i, c) = te[c] + pe[c];
  }

  cache.reserve_entries(base + n);
  Matrix x(n, d);
  Matrix attn(n, d);
  std::vector<std::size_t> visible;
  std::vector<float> scores;

  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& layer = w.layers[l];
    for (std::size_t i = 0; i < n; ++i) rms_norm(h.row(i), layer.attn_norm, x.row(i));
    const Matrix q = layer.wq.apply_rows(x);
    const Matrix k = layer.wk.apply_rows(x);
    const Matrix v = layer.wv.apply_rows(x);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(k.row(i).begin(), d, cache.keys(l, base + i).begin());
      std::copy_n(v.row(i).begin(), d, cache.values(l, base + i).begin());
    }

    for (std::size_t i = 0; i < n; ++i) {
      // Visible keys in cache order: the whole cached prefix, then in-batch ancestors.
      visible.clear();
      for (std::size_t e = 0; e < base; ++e) visible.push_back(e);
      for (std::size_t j = 0; j <= i; ++j) {
        if (mask(i, j)) visible.push_back(base + j);
      }
      scores.resize(visible.size());
      const auto qi = q.row(i);
      auto ai = attn.row(i);
      for (std::size_t hh = 0; hh < cfg.n_heads; ++hh) {
        const std::size_t off = hh * hd;
        float mx = -INFINITY;
        for (std::size_t t = 0; t < visible.size(); ++t) {
          const auto key = cache.keys(l, visible[t]);
          float s = 0.0f;
          for (std::size_t c = 0; c < hd; ++c) s += qi[off + c] * key[off + c];
          s *= attn_scale;
          scores[t] = s;
          mx = std::max(mx, s);
        }
        float sum = 0.0f;
        for (float& s : scores) {
          s = std::exp(s - mx);
          sum += s;
        }
        for (std::size_t c = 0; c < hd; ++c) ai[off + c] = 0.0f;
        for (std::size_t t = 0; t < visible.size(); ++t) {
          const float p = scores[t] / sum;
          const auto val = cache.values(l, visible[t]);
          for (std::size_t c = 0; c < hd; ++c) ai[off + c] += p * val[off + c];
        }
      }
    }
    const Matrix o = layer.wo.apply_rows(attn);
    for (std::size_t i = 0; i < n; ++i) {
      auto hi = h.row(i);
      const auto oi = o.row(i);
      for (std::size_t c = 0; c < d; ++c) hi[c] += oi[c];
      rms_norm(hi, layer.mlp_norm, x.row(i));
    }
    const Matrix g = layer.w_gate.apply_rows(x);
    Matrix u = layer.w_up.apply_rows(x);
    for (std::size_t e = 0; e < u.data.size(); ++e) u.data[e] *= g.data[e] / (1.0f + std::exp(-g.data[e]));
    const Matrix down = layer.w_down.apply_rows(u);
    for (std::size_t i = 0; i < n; ++i) {
      auto hi = h.row(i);
      const auto di = down.row(i);
      for (std::size_t c = 0; c < d; ++c) hi[c] += di[c];
    }
  }

  cache.commit(positions);

  for (std::size_t i = 0; i < n; ++i) rms_norm(h.row(i), w.final_norm, x.row(i));
  return w.lm_head.apply_rows(x);
}

int reference_next_token(const ModelWeights& weights, std::span<const int> tokens) {
  if (tokens.empty()) throw InputError("reference_next_token: empty sequence");
  KVCache cache(weights.config);
  std::vector<int> pos(tokens.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  const Matrix logits = forward(weights, tokens, pos, AncestryMask::chain(tokens.size(), 0), cache);
  return argmax(logits.row(tokens.size() - 1));
}

std::vector<int> encode_bytes(std::string_view text, const ModelConfig& config) {
  if (config.vocab_size != 258) throw ConfigError("byte tokenizer requires vocab_size 258");
  std::vector<int> out;
  out.reserve(text.size() + 1);
  out.push_back(config.bos());
  for (char ch : text) out.push_back(static_cast<int>(static_cast<unsigned char>(ch)));
  return out;
}

std::string decode_bytes(std::span<const int> tokens, const ModelConfig& config) {
  std::string out;
  for (int t : tokens) {
    if (t >= 0 && t < 256 && t < config.bos()) out.push_back(static_cast<char>(t));
  }
  return out;
}

}  // namespace spql
