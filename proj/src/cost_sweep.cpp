// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include "spql/cost_sweep.hpp"

#include <cstdio>
#include <fstream>

#include "spql/error.hpp"

namespace spql {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

CostedModel costed(const ProfileSet& profiles, const json& j) {
  return profiles.costed(j.at("model").get<std::string>(), j.at("scheme").get<std::string>());
}

MethodPlan parse_method(const ProfileSet& profiles, const CostedModel& target, const std::string& name,
                        const json& j) {
  if (name == "ar") return ar_plan(target);
  const double tau = j.at("tau").get<double>();
  const int d = j.at("d").get<int>();
  if (name == "sp") return sp_plan(target, costed(profiles, j.at("drafter")), tau, d);
  if (name == "eagle2") {
    return eagle2_plan(target, costed(profiles, j.at("head")), tau, d, j.at("n").get<int>(), j.at("k").get<int>());
  }
  if (name == "hierspec") {
    return hierspec_plan(target, costed(profiles, j.at("intermediate")), costed(profiles, j.at("head")), tau, d,
                         j.at("d1").get<int>(), j.at("n1").get<int>(), j.at("k").get<int>(), j.at("tau1").get<double>());
  }
  throw ConfigError("unknown method '" + name + "' (expected ar, sp, eagle2, hierspec)");
}

}  // namespace

CostSweepConfig parse_cost_sweep_config(const json& doc, const std::filesystem::path& base) {
  CostSweepConfig c;
  try {
    const ProfileSet profiles = load_profiles(resolve(base, doc.at("profiles").get<std::string>()));
    c.hw = profiles.hw(doc.at("hardware").get<std::string>());
    c.ctx_len = doc.value("ctx_len", c.ctx_len);
    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      c.sweep_target = profiles.model(s.at("target").get<std::string>());
      c.sweep_drafter = costed(profiles, s.at("drafter"));
      c.draft_tokens = s.value("draft_tokens", c.draft_tokens);
      const json tau = s.at("tau");
      for (const auto& [scheme, points] : tau.items()) {
        c.sweep_schemes.push_back(profiles.scheme(scheme));
        auto& list = c.tau_table[scheme];
        for (const auto& p : points) list.push_back({p.at("n").get<int>(), p.at("d").get<int>(), p.at("tau").get<double>()});
      }
    }
    if (doc.contains("methods")) {
      const json& m = doc["methods"];
      const CostedModel target = costed(profiles, m.at("target"));
      const json plans = m.at("plans");
      for (const auto& [name, j] : plans.items()) c.methods.push_back(parse_method(profiles, target, name, j));
    }
    if (doc.contains("output")) c.output = resolve(base, doc["output"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cost-sweep config: ") + e.what());
  }
  return c;
}

CostSweepConfig load_cost_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return parse_cost_sweep_config(doc, path.parent_path());
}

CostSweepResult run_cost_sweep(const CostSweepConfig& config) {
  CostSweepResult r;
  if (!config.tau_table.empty()) {
    r.sweep = sweep_tree_size(config.hw, config.sweep_schemes, config.sweep_target, config.sweep_drafter,
                              config.tau_table, config.draft_tokens, config.ctx_len);
  }
  for (const auto& plan : config.methods) {
    r.methods.push_back({plan.name, plan.tau, predict_tokens_per_second(config.hw, plan, config.ctx_len)});
  }
  return r;
}

void write_methods_csv(std::ostream& out, const std::vector<MethodPrediction>& rows) {
  out << "method,tau,tokens_per_s\n";
  char buf[96];
  for (const auto& m : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", m.name.c_str(), m.tau, m.tokens_per_s);
    out << buf;
  }
}

}  // namespace spql
