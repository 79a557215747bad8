// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "spql/events.hpp"

namespace spql {

struct HardwareProfile {
  std::string name;
  double mem_bandwidth = 0.0;       // bytes/s
  double compute_throughput = 0.0;  // FLOP/s at the activation precision
  double bandwidth_efficiency = 0.6;
  double compute_efficiency = 0.4;

  void validate() const;
};

struct SchemeProfile {
  std::string name;
  double bytes_per_weight = 2.0;
  double activation_compute_scale = 1.0;
  double dequant_flops_per_weight = 0.0;

  void validate() const;
};

struct ModelDims {
  std::string name;
  double params = 0.0;
  double head_bytes = 0.0;          // full-precision LM head / softmax traffic per forward
  double kv_bytes_per_token = 0.0;

  void validate() const;
};

/// A model as seen by the cost model: its shape and its weight format.
struct CostedModel {
  ModelDims dims;
  SchemeProfile scheme;
};

/// Roofline time of one forward over n_tokens with ctx_len cached positions:
/// max(memory bytes / effective bandwidth, FLOPs / effective throughput).
double forward_cost(const HardwareProfile& hw, const SchemeProfile& scheme, const ModelDims& dims,
                    std::size_t n_tokens, std::size_t ctx_len);
double forward_cost(const HardwareProfile& hw, const CostedModel& model, std::size_t n_tokens, std::size_t ctx_len);

struct SpeedupInputs {
  double tau = 1.0;
  double d = 0.0;
  double t_d = 0.0;
  double t_t = 1.0;
  double t_v = 1.0;

  void validate() const;
};

struct SpeedupResult {
  double ratio = 1.0;    // T_sd / T_t
  double speedup = 1.0;  // T_t / T_sd
};

/// T_sd / T_t = (1/tau) * (d * T_d / T_t + T_v / T_t).
SpeedupResult eq1_latency_ratio(const SpeedupInputs& in);

struct SweepPoint {
  int n = 0;
  int d = 0;
  double tau = 1.0;
};

struct SweepRow {
  std::string scheme;
  int n = 0;
  int d = 0;
  double tau = 1.0;
  double tv_over_tt = 1.0;
  double speedup = 1.0;
};

/// One row per (scheme, point). T_t and T_v use the target dims under each
/// scheme; T_d is one drafter forward of `draft_tokens` tokens.
std::vector<SweepRow> sweep_tree_size(const HardwareProfile& hw, const std::vector<SchemeProfile>& schemes,
                                      const ModelDims& target, const CostedModel& drafter,
                                      const std::map<std::string, std::vector<SweepPoint>>& tau_table,
                                      std::size_t draft_tokens, std::size_t ctx_len);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Expected per-step work of a decoding method: `count` forwards of `model`
/// over `n_tokens` tokens each, yielding `tau` tokens per step.
struct PlanStep {
  CostedModel model;
  double count = 1.0;
  std::size_t n_tokens = 1;
};

struct MethodPlan {
  std::string name;
  double tau = 1.0;
  std::vector<PlanStep> steps;
};

double predict_tokens_per_second(const HardwareProfile& hw, const MethodPlan& plan, std::size_t ctx_len);

MethodPlan ar_plan(const CostedModel& target);
MethodPlan sp_plan(const CostedModel& target, const CostedModel& drafter, double tau, int d);
MethodPlan eagle2_plan(const CostedModel& target, const CostedModel& head, double tau, int d, int n, int k);
/// tau1 is the accepted length of the stage-1 (intermediate) verification, so
/// ceil(d / tau1) stage-1 rounds build one sequential draft.
MethodPlan hierspec_plan(const CostedModel& target, const CostedModel& intermediate, const CostedModel& head,
                         double tau, int d, int d1, int n1, int k, double tau1);

/// Simulated time buckets of one decode run.
struct SimTimes {
  double target_prefill = 0.0;
  double draft_latency = 0.0;  // drafter and intermediate prefill
  double drafting = 0.0;       // drafter rounds and intermediate verification
  double verification = 0.0;   // target forwards after prefill
  std::size_t verify_forwards = 0;

  /// Decoding time; prefill is reported separately.
  double decode() const { return drafting + verification; }
};

struct CostModel {
  HardwareProfile hw;
  std::map<ModelRole, CostedModel> models;

  const CostedModel& at(ModelRole role) const;
};

SimTimes simulated_clock(const EventLog& events, const CostModel& cost);

/// Latency-ratio inputs reconstructed from a run: T_t is a single-token target forward
/// at the run's mean verification context, T_v and T_d are per-step averages.
SpeedupInputs latency_inputs_from_run(const EventLog& events, const CostModel& cost, std::size_t tokens, int d);

/// Profiles file: {"hardware": {name: {...}}, "schemes": {name: {...}},
/// "models": {name: {...}}}.
struct ProfileSet {
  std::map<std::string, HardwareProfile> hardware;
  std::map<std::string, SchemeProfile> schemes;
  std::map<std::string, ModelDims> models;

  const HardwareProfile& hw(const std::string& name) const;
  const SchemeProfile& scheme(const std::string& name) const;
  const ModelDims& model(const std::string& name) const;
  CostedModel costed(const std::string& model, const std::string& scheme) const;
};

ProfileSet load_profiles(const std::filesystem::path& path);
ProfileSet parse_profiles(const std::string& json_text);

}  // namespace spql
