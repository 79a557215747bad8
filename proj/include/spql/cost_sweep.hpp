// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spql/perf.hpp"

namespace spql {

/// Tree-size sweep plus per-method throughput predictions, as read from a
/// cost-sweep config file.
struct CostSweepConfig {
  HardwareProfile hw;
  std::size_t ctx_len = 512;

  std::vector<SchemeProfile> sweep_schemes;
  ModelDims sweep_target;
  CostedModel sweep_drafter;
  std::size_t draft_tokens = 10;
  std::map<std::string, std::vector<SweepPoint>> tau_table;

  std::vector<MethodPlan> methods;
  std::filesystem::path output;
};

CostSweepConfig parse_cost_sweep_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
CostSweepConfig load_cost_sweep_config(const std::filesystem::path& path);

struct MethodPrediction {
  std::string name;
  double tau = 1.0;
  double tokens_per_s = 0.0;
};

struct CostSweepResult {
  std::vector<SweepRow> sweep;
  std::vector<MethodPrediction> methods;
};

CostSweepResult run_cost_sweep(const CostSweepConfig& config);

/// Columns: method, tau, tokens_per_s.
void write_methods_csv(std::ostream& out, const std::vector<MethodPrediction>& rows);

}  // namespace spql
