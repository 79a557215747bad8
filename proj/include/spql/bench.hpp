// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spql/engine.hpp"
#include "spql/perf.hpp"
#include "spql/specdec.hpp"

namespace spql {

struct Prompt {
  std::string id;
  std::string text;
  std::string category;  // "" when absent
};

/// JSON Lines, one {"id", "prompt", "category"?} object per line. Blank lines
/// are skipped. Errors name the 1-based line number.
std::vector<Prompt> parse_prompts(std::istream& in);
std::vector<Prompt> ingest_prompts(const std::filesystem::path& path);

/// {"vocab_size", "n_layers", "d_model", "n_heads", "d_ff", "max_positions",
/// "precision"}; every key optional, defaults from ModelConfig.
ModelConfig model_config_from_json(const nlohmann::json& j);
ModelConfig load_model_config(const std::filesystem::path& path);

/// Where a model comes from: a seeded toy model or a checkpoint file.
struct ModelSource {
  bool toy = true;
  ModelConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;
  std::optional<Precision> precision;

  /// Run seeds are added to the toy seed; checkpoints ignore them.
  ModelWeights load(std::uint64_t run_seed) const;
};

struct DrafterSource {
  std::optional<ModelSource> model;
  std::filesystem::path ngram;
};

struct CostRoles {
  std::filesystem::path profiles;
  std::string hardware;
  std::map<ModelRole, std::pair<std::string, std::string>> models;  // role -> (dims, scheme)
};

struct BenchConfig {
  ModelSource target;
  std::optional<ModelSource> intermediate;
  std::optional<DrafterSource> drafter;
  std::vector<Strategy> strategies{Strategy::AR};
  std::vector<int> d{6}, n{60}, k{10}, d1{3}, n1{30};
  std::filesystem::path prompts;
  std::size_t max_tokens = 64;
  std::vector<std::uint64_t> seeds{0};
  std::optional<CostRoles> cost;
  std::filesystem::path output;
  bool wall_clock = false;

  /// Throws ConfigError when a strategy lacks a model, a parameter list is
  /// empty, or a strategy's grid holds no valid (d, n, d1, n1) combination.
  void validate() const;
};

/// Canonical form with absolute paths; parse_bench_config reads it back.
nlohmann::json bench_config_to_json(const BenchConfig& config);

/// Relative paths inside the document resolve against base_dir.
BenchConfig parse_bench_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
BenchConfig load_bench_config(const std::filesystem::path& path);

struct BenchRow {
  std::string prompt_id;
  std::string category;
  Strategy strategy = Strategy::AR;
  int d = 0, n = 0, k = 0, d1 = 0, n1 = 0;
  std::uint64_t seed = 0;
  DecodeStats stats;
  std::optional<SimTimes> sim;
  std::uint64_t output_hash = 0;
  std::vector<int> output;
};

struct SummaryRow {
  std::string strategy;
  int d = 0, n = 0, k = 0, d1 = 0, n1 = 0;
  std::uint64_t seed = 0;
  std::string category;  // "overall" for the all-prompt aggregate
  std::size_t prompts = 0;
  std::size_t tokens = 0;
  std::size_t target_forwards = 0;
  double tau = 1.0;  // tokens / target_forwards
  std::optional<double> sim_s, sim_tokens_per_s, draft_latency_ms, drafting_s, verification_s;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<SummaryRow> summary;
  nlohmann::json config;
};

/// Deterministic given (config, seeds): rows are ordered by seed, strategy,
/// parameter combination and prompt index regardless of `threads`.
BenchReport run_bench(const BenchConfig& config, std::size_t threads = 1);

std::vector<SummaryRow> summarize(const std::vector<BenchRow>& rows);

/// Column order: prompt_id, category, strategy, d, n, k, tau, tokens,
/// target_forwards, wall_s, sim_s, draft_latency_s, d1, n1, seed, drafting_s,
/// verification_s, output_hash. wall_s stays empty unless wall_clock is set.
void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool wall_clock);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Writes <output>, <stem>_summary.csv and <stem>_config.json.
void write_report(const BenchReport& report, const std::filesystem::path& output, bool wall_clock);

std::uint64_t hash_tokens(std::span<const int> tokens);

struct CompareResult {
  std::vector<std::string> diffs;
  bool lossless_mismatch = false;
  int exit_code() const { return lossless_mismatch ? 1 : 0; }
};

/// Matches rows by (prompt_id, occurrence index). Throws InputError when the
/// two reports do not cover the same prompt ids.
CompareResult compare_reports(std::istream& a, std::istream& b);
CompareResult compare_report(const std::filesystem::path& a, const std::filesystem::path& b);

/// Minimal RFC 4180 reader used by compare.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

/// Number of worker threads from SPQL_THREADS (default 1).
std::size_t threads_from_env();

}  // namespace spql
