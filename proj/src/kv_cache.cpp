// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <string>

#include "spql/engine.hpp"
#include "spql/error.hpp"

namespace spql {

KVCache::KVCache(const ModelConfig& config)
    : n_layers_(config.n_layers),
      width_(config.d_model),
      capacity_(config.max_positions),
      k_(config.n_layers),
      v_(config.n_layers) {}

void KVCache::reserve_entries(std::size_t count) {
  if (count > capacity_) {
    throw InputError("position overflow: cache needs " + std::to_string(count) + " entries, capacity " +
                     std::to_string(capacity_));
  }
  for (std::size_t l = 0; l < n_layers_; ++l) {
    if (k_[l].size() < count * width_) {
      k_[l].resize(count * width_);
      v_[l].resize(count * width_);
    }
  }
}

std::span<float> KVCache::keys(std::size_t layer, std::size_t entry) {
  return {k_[layer].data() + entry * width_, width_};
}
std::span<float> KVCache::values(std::size_t layer, std::size_t entry) {
  return {v_[layer].data() + entry * width_, width_};
}
std::span<const float> KVCache::keys(std::size_t layer, std::size_t entry) const {
  return {k_[layer].data() + entry * width_, width_};
}
std::span<const float> KVCache::values(std::size_t layer, std::size_t entry) const {
  return {v_[layer].data() + entry * width_, width_};
}

void KVCache::commit(std::span<const int> positions) {
  positions_.resize(length_);
  positions_.insert(positions_.end(), positions.begin(), positions.end());
  length_ += positions.size();
}

void KVCache::truncate(std::size_t keep_len) {
  if (keep_len > length_) {
    throw InputError("cache_truncate: keep length " + std::to_string(keep_len) + " exceeds cache length " +
                     std::to_string(length_));
  }
  length_ = keep_len;
  positions_.resize(keep_len);
}

void KVCache::select(std::size_t batch_start, std::span<const std::size_t> indices) {
  if (batch_start > length_) {
    throw InputError("cache_select: batch start " + std::to_string(batch_start) + " beyond cache length");
  }
  const std::size_t batch_len = length_ - batch_start;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= batch_len) {
      throw InputError("cache_select: index " + std::to_string(indices[i]) + " outside last batch of " +
                       std::to_string(batch_len));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) throw InputError("cache_select: indices must be strictly increasing");
  }
  // Indices are increasing, so every destination slot is at or before its source.
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = batch_start + indices[i];
    const std::size_t dst = batch_start + i;
    if (src == dst) continue;
    for (std::size_t l = 0; l < n_layers_; ++l) {
      std::copy_n(k_[l].begin() + static_cast<std::ptrdiff_t>(src * width_), width_,
                  k_[l].begin() + static_cast<std::ptrdiff_t>(dst * width_));
      std::copy_n(v_[l].begin() + static_cast<std::ptrdiff_t>(src * width_), width_,
                  v_[l].begin() + static_cast<std::ptrdiff_t>(dst * width_));
    }
    positions_[dst] = positions_[src];
  }
  length_ = batch_start + indices.size();
  positions_.resize(length_);
}

void cache_truncate(KVCache& cache, std::size_t keep_len) { cache.truncate(keep_len); }

void cache_select(KVCache& cache, std::size_t batch_start, std::span<const std::size_t> indices) {
  cache.select(batch_start, indices);
}

}  // namespace spql
