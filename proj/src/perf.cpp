// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include "spql/perf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spql/error.hpp"

namespace spql {

namespace {

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive and finite");
}

void require_fraction(double v, const std::string& what) {
  if (!(v > 0.0 && v <= 1.0)) throw ConfigError(what + " must lie in (0, 1]");
}

}  // namespace

void HardwareProfile::validate() const {
  require_positive(mem_bandwidth, "mem_bandwidth");
  require_positive(compute_throughput, "compute_throughput");
  require_fraction(bandwidth_efficiency, "bandwidth_efficiency");
  require_fraction(compute_efficiency, "compute_efficiency");
}

void SchemeProfile::validate() const {
  require_positive(bytes_per_weight, "bytes_per_weight");
  require_positive(activation_compute_scale, "activation_compute_scale");
  if (dequant_flops_per_weight < 0.0) throw ConfigError("dequant_flops_per_weight must be non-negative");
}

void ModelDims::validate() const {
  require_positive(params, "params");
  if (head_bytes < 0.0 || kv_bytes_per_token < 0.0) throw ConfigError("head_bytes and kv_bytes_per_token must be non-negative");
}

double forward_cost(const HardwareProfile& hw, const SchemeProfile& scheme, const ModelDims& dims,
                    std::size_t n_tokens, std::size_t ctx_len) {
  if (n_tokens == 0) throw InputError("forward_cost: n_tokens must be at least 1");
  const double bytes = dims.params * scheme.bytes_per_weight + dims.head_bytes +
                       dims.kv_bytes_per_token * static_cast<double>(ctx_len);
  const double flops = 2.0 * dims.params * static_cast<double>(n_tokens) * scheme.activation_compute_scale +
                       dims.params * scheme.dequant_flops_per_weight;
  const double memory_time = bytes / (hw.mem_bandwidth * hw.bandwidth_efficiency);
  const double compute_time = flops / (hw.compute_throughput * hw.compute_efficiency);
  return std::max(memory_time, compute_time);
}

double forward_cost(const HardwareProfile& hw, const CostedModel& model, std::size_t n_tokens, std::size_t ctx_len) {
  return forward_cost(hw, model.scheme, model.dims, n_tokens, ctx_len);
}

void SpeedupInputs::validate() const {
  if (!(tau >= 1.0)) throw ConfigError("tau must be at least 1");
  if (d < 0.0 || t_d < 0.0) throw ConfigError("d and T_d must be non-negative");
  require_positive(t_t, "T_t");
  require_positive(t_v, "T_v");
}

SpeedupResult eq1_latency_ratio(const SpeedupInputs& in) {
  in.validate();
  SpeedupResult r;
  r.ratio = (in.d * in.t_d / in.t_t + in.t_v / in.t_t) / in.tau;
  r.speedup = 1.0 / r.ratio;
  return r;
}

std::vector<SweepRow> sweep_tree_size(const HardwareProfile& hw, const std::vector<SchemeProfile>& schemes,
                                      const ModelDims& target, const CostedModel& drafter,
                                      const std::map<std::string, std::vector<SweepPoint>>& tau_table,
                                      std::size_t draft_tokens, std::size_t ctx_len) {
  std::vector<SweepRow> rows;
  const double t_d = forward_cost(hw, drafter, draft_tokens, ctx_len);
  for (const auto& scheme : schemes) {
    auto it = tau_table.find(scheme.name);
    if (it == tau_table.end()) throw ConfigError("no tau values for scheme '" + scheme.name + "'");
    const double t_t = forward_cost(hw, scheme, target, 1, ctx_len);
    for (const auto& p : it->second) {
      // The verification batch holds the pending token plus n tree nodes.
      const double t_v = forward_cost(hw, scheme, target, static_cast<std::size_t>(p.n) + 1, ctx_len);
      const auto r = eq1_latency_ratio({p.tau, static_cast<double>(p.d), t_d, t_t, t_v});
      rows.push_back({scheme.name, p.n, p.d, p.tau, t_v / t_t, r.speedup});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "scheme,n,d,tau,tv_over_tt,speedup\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.n << ',' << r.d << ',' << r.tau << ',' << r.tv_over_tt << ',' << r.speedup << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

double predict_tokens_per_second(const HardwareProfile& hw, const MethodPlan& plan, std::size_t ctx_len) {
  double t = 0.0;
  for (const auto& s : plan.steps) t += s.count * forward_cost(hw, s.model, s.n_tokens, ctx_len);
  require_positive(t, "plan time");
  return plan.tau / t;
}

MethodPlan ar_plan(const CostedModel& target) { return {"ar", 1.0, {{target, 1.0, 1}}}; }

MethodPlan sp_plan(const CostedModel& target, const CostedModel& drafter, double tau, int d) {
  return {"sp", tau, {{drafter, static_cast<double>(d), 1}, {target, 1.0, static_cast<std::size_t>(d) + 1}}};
}

MethodPlan eagle2_plan(const CostedModel& target, const CostedModel& head, double tau, int d, int n, int k) {
  return {"eagle2",
          tau,
          {{head, static_cast<double>(d), static_cast<std::size_t>(k)}, {target, 1.0, static_cast<std::size_t>(n) + 1}}};
}

MethodPlan hierspec_plan(const CostedModel& target, const CostedModel& intermediate, const CostedModel& head,
                         double tau, int d, int d1, int n1, int k, double tau1) {
  require_positive(tau1, "tau1");
  const double rounds = std::ceil(static_cast<double>(d) / tau1);
  const auto seq_len = static_cast<std::size_t>(std::ceil(rounds * tau1));
  return {"hierspec",
          tau,
          {{head, rounds * d1, static_cast<std::size_t>(k)},
           {intermediate, rounds, static_cast<std::size_t>(n1) + 1},
           {target, 1.0, seq_len + 1}}};
}

const CostedModel& CostModel::at(ModelRole role) const {
  auto it = models.find(role);
  if (it == models.end()) throw ConfigError("cost model lacks a profile for a model role used by the run");
  return it->second;
}

SimTimes simulated_clock(const EventLog& events, const CostModel& cost) {
  SimTimes t;
  for (const auto& e : events) {
    const double c = forward_cost(cost.hw, cost.at(e.role), e.n_tokens, e.ctx_len);
    switch (e.phase) {
      case Phase::Prefill:
        (e.role == ModelRole::Target ? t.target_prefill : t.draft_latency) += c;
        break;
      case Phase::Draft:
        t.drafting += c;
        break;
      case Phase::Verify:
        t.verification += c;
        ++t.verify_forwards;
        break;
    }
  }
  return t;
}

SpeedupInputs latency_inputs_from_run(const EventLog& events, const CostModel& cost, std::size_t tokens, int d) {
  const SimTimes t = simulated_clock(events, cost);
  if (t.verify_forwards == 0) throw InputError("run has no target verification forwards");
  double ctx_sum = 0.0;
  for (const auto& e : events) {
    if (e.phase == Phase::Verify) ctx_sum += static_cast<double>(e.ctx_len);
  }
  const auto mean_ctx = static_cast<std::size_t>(std::lround(ctx_sum / static_cast<double>(t.verify_forwards)));
  const double f = static_cast<double>(t.verify_forwards);
  SpeedupInputs in;
  in.tau = static_cast<double>(tokens) / f;
  in.d = static_cast<double>(d);
  in.t_t = forward_cost(cost.hw, cost.at(ModelRole::Target), 1, mean_ctx);
  in.t_v = t.verification / f;
  in.t_d = d > 0 ? t.drafting / (f * static_cast<double>(d)) : 0.0;
  return in;
}

const HardwareProfile& ProfileSet::hw(const std::string& name) const {
  auto it = hardware.find(name);
  if (it == hardware.end()) throw ConfigError("unknown hardware profile '" + name + "'");
  return it->second;
}

const SchemeProfile& ProfileSet::scheme(const std::string& name) const {
  auto it = schemes.find(name);
  if (it == schemes.end()) throw ConfigError("unknown scheme profile '" + name + "'");
  return it->second;
}

const ModelDims& ProfileSet::model(const std::string& name) const {
  auto it = models.find(name);
  if (it == models.end()) throw ConfigError("unknown model dims '" + name + "'");
  return it->second;
}

CostedModel ProfileSet::costed(const std::string& model_name, const std::string& scheme_name) const {
  return {model(model_name), scheme(scheme_name)};
}

ProfileSet parse_profiles(const std::string& json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("profiles: ") + e.what());
  }
  ProfileSet set;
  try {
    const json hardware = doc.value("hardware", json::object());
    for (const auto& [name, v] : hardware.items()) {
      HardwareProfile p;
      p.name = name;
      p.mem_bandwidth = v.at("mem_bandwidth").get<double>();
      p.compute_throughput = v.at("compute_throughput").get<double>();
      p.bandwidth_efficiency = v.value("bandwidth_efficiency", p.bandwidth_efficiency);
      p.compute_efficiency = v.value("compute_efficiency", p.compute_efficiency);
      p.validate();
      set.hardware[name] = p;
    }
    const json schemes = doc.value("schemes", json::object());
    for (const auto& [name, v] : schemes.items()) {
      SchemeProfile s;
      s.name = name;
      s.bytes_per_weight = v.at("bytes_per_weight").get<double>();
      s.activation_compute_scale = v.value("activation_compute_scale", 1.0);
      s.dequant_flops_per_weight = v.value("dequant_flops_per_weight", 0.0);
      s.validate();
      set.schemes[name] = s;
    }
    const json models = doc.value("models", json::object());
    for (const auto& [name, v] : models.items()) {
      ModelDims m;
      m.name = name;
      m.params = v.at("params").get<double>();
      m.head_bytes = v.value("head_bytes", 0.0);
      m.kv_bytes_per_token = v.value("kv_bytes_per_token", 0.0);
      m.validate();
      set.models[name] = m;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("profiles: ") + e.what());
  }
  return set;
}

ProfileSet load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open profiles '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profiles(ss.str());
}

}  // namespace spql
