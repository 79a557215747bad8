// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spql/quant.hpp"

namespace spql {

enum class PrecisionKind : std::uint32_t { FP32 = 0, W8 = 1, W4 = 2, W4Rotated = 3 };

/// Weight format applied uniformly to every linear layer of a model.
struct Precision {
  PrecisionKind kind = PrecisionKind::FP32;
  std::size_t group_size = 128;  // only meaningful for the W4 kinds

  static Precision fp32() { return {}; }
  static Precision w8() { return {PrecisionKind::W8, 0}; }
  static Precision w4(std::size_t group) { return {PrecisionKind::W4, group}; }
  static Precision w4_rotated(std::size_t group) { return {PrecisionKind::W4Rotated, group}; }

  /// Accepts "fp32", "w8", "w4:<group>" and "w4r:<group>" (rotation).
  static Precision parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const Precision&) const = default;
};

/// Toy decoder-only transformer shape. Byte-level vocabulary: ids [0, 256)
/// are bytes, vocab_size-2 is BOS and vocab_size-1 is EOS.
struct ModelConfig {
  std::uint32_t vocab_size = 258;
  std::uint32_t n_layers = 2;
  std::uint32_t d_model = 64;
  std::uint32_t n_heads = 4;
  std::uint32_t d_ff = 128;
  std::uint32_t max_positions = 512;
  Precision precision;

  int bos() const { return static_cast<int>(vocab_size) - 2; }
  int eos() const { return static_cast<int>(vocab_size) - 1; }
  std::uint32_t head_dim() const { return d_model / n_heads; }

  /// Throws ConfigError on an inconsistent shape.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// A linear layer stored either dense or quantized.
class Linear {
 public:
  Linear() = default;
  explicit Linear(Matrix m) : w_(std::move(m)) {}
  explicit Linear(QuantizedMatrix q) : w_(std::move(q)) {}

  std::size_t in_features() const;
  std::size_t out_features() const;
  bool is_quantized() const { return std::holds_alternative<QuantizedMatrix>(w_); }
  const Matrix* dense() const { return std::get_if<Matrix>(&w_); }
  const QuantizedMatrix* quantized() const { return std::get_if<QuantizedMatrix>(&w_); }

  /// y = W x. Rotated weights transform a copy of x before the product.
  Vector apply(std::span<const float> x) const;
  /// apply() on every row of x; row i of the result equals apply(x.row(i)).
  Matrix apply_rows(const Matrix& x) const;

  bool operator==(const Linear&) const = default;

 private:
  std::variant<Matrix, QuantizedMatrix> w_;
};

struct LayerWeights {
  Vector attn_norm;
  Linear wq, wk, wv, wo;
  Vector mlp_norm;
  Linear w_gate, w_up, w_down;

  bool operator==(const LayerWeights&) const = default;
};

/// Immutable after construction; safe to share across decode sessions.
struct ModelWeights {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d_model
  Matrix position_embedding;  // max_positions x d_model
  std::vector<LayerWeights> layers;
  Vector final_norm;
  Linear lm_head;  // vocab x d_model

  bool operator==(const ModelWeights&) const = default;
};

/// Deterministic weights: SplitMix64 stream, normal(0, 0.02/sqrt(n_layers))
/// for every matrix, unit norm gains. The config's precision is applied after
/// sampling so (config, seed) pairs that differ only in precision share the
/// same FP32 master weights.
ModelWeights build_toy_model(const ModelConfig& config, std::uint64_t seed);

/// Requantizes a dense (FP32) model into the requested precision.
ModelWeights quantize_model(const ModelWeights& dense, Precision precision);

/// FNV-1a over every weight byte; used for reproducibility checks.
std::uint64_t weights_checksum(const ModelWeights& weights);

/// Square visibility mask over a flattened batch. mask(i, j) holds iff j is i
/// or an ancestor of i. Every batch row also sees the first `prefix_len`
/// cached entries.
class AncestryMask {
 public:
  AncestryMask() = default;
  AncestryMask(std::size_t n, std::size_t prefix_len) : n_(n), prefix_len_(prefix_len), bits_(n * n, 0) {}

  static AncestryMask chain(std::size_t n, std::size_t prefix_len);
  /// Builds the mask from parent links (-1 for a row with no in-batch parent).
  static AncestryMask from_parents(std::span<const int> parents, std::size_t prefix_len);

  std::size_t size() const { return n_; }
  std::size_t prefix_len() const { return prefix_len_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v = true) { bits_[i * n_ + j] = v ? 1 : 0; }

  bool operator==(const AncestryMask&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t prefix_len_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-layer key/value store. Keys and values of all heads are stored side by
/// side (head h occupies columns [h*head_dim, (h+1)*head_dim)).
class KVCache {
 public:
  KVCache() = default;
  explicit KVCache(const ModelConfig& config);

  std::size_t length() const { return length_; }
  std::size_t capacity() const { return capacity_; }
  std::span<const int> positions() const { return {positions_.data(), length_}; }

  /// Drops every entry at or beyond keep_len.
  void truncate(std::size_t keep_len);

  /// Keeps entries [0, batch_start) followed by batch_start + indices[i] in order.
  /// Indices must be strictly increasing offsets into [batch_start, length).
  void select(std::size_t batch_start, std::span<const std::size_t> indices);

  // Engine internals.
  std::span<float> keys(std::size_t layer, std::size_t entry);
  std::span<float> values(std::size_t layer, std::size_t entry);
  std::span<const float> keys(std::size_t layer, std::size_t entry) const;
  std::span<const float> values(std::size_t layer, std::size_t entry) const;
  void reserve_entries(std::size_t count);
  void commit(std::span<const int> positions);

 private:
  std::size_t n_layers_ = 0;
  std::size_t width_ = 0;
  std::size_t capacity_ = 0;
  std::size_t length_ = 0;
  std::vector<std::vector<float>> k_;
  std::vector<std::vector<float>> v_;
  std::vector<int> positions_;
};

void cache_truncate(KVCache& cache, std::size_t keep_len);
void cache_select(KVCache& cache, std::size_t batch_start, std::span<const std::size_t> indices);

/// Runs the batch through the model, appending one cache entry per token.
/// Row i of the result is conditioned on the cached prefix plus the batch rows
/// visible to i under `mask`. Returns an n x vocab logits matrix.
Matrix forward(const ModelWeights& weights, std::span<const int> tokens, std::span<const int> positions,
               const AncestryMask& mask, KVCache& cache);

/// Argmax with ties broken towards the lowest token id.
int argmax(std::span<const float> logits);

/// Greedy next token after `tokens`, recomputed from an empty cache.
int reference_next_token(const ModelWeights& weights, std::span<const int> tokens);

// Checkpoint file I/O. Layout: "SPQL", u32 version, named u32 config fields,
// then every tensor in declaration order; all little-endian.
void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_checkpoint(const std::filesystem::path& path, std::optional<Precision> quantize_to = std::nullopt);
std::vector<std::uint8_t> serialize_checkpoint(const ModelWeights& weights);
ModelWeights deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// BOS followed by the UTF-8 bytes of `text`. Requires a 258-entry vocabulary.
std::vector<int> encode_bytes(std::string_view text, const ModelConfig& config);
/// Inverse of encode_bytes; BOS/EOS are dropped.
std::string decode_bytes(std::span<const int> tokens, const ModelConfig& config);

}  // namespace spql
