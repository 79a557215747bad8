// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace spql {

enum class ModelRole { Target, Intermediate, Drafter };

/// Which time bucket a forward pass belongs to.
enum class Phase { Prefill, Draft, Verify };

/// One logical forward pass. ctx_len is the highest position touched plus one.
struct ForwardEvent {
  ModelRole role = ModelRole::Target;
  Phase phase = Phase::Verify;
  std::size_t n_tokens = 0;
  std::size_t ctx_len = 0;

  bool operator==(const ForwardEvent&) const = default;
};

using EventLog = std::vector<ForwardEvent>;

}  // namespace spql
