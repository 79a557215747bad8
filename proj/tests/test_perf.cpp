// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spql/error.hpp"
#include "spql/perf.hpp"
#include "spql/specdec.hpp"
#include "test_util.hpp"

namespace spql {
namespace {

using testing::small_config;

const ProfileSet& profiles() {
  static const ProfileSet p = load_profiles(std::string(SPQL_SOURCE_DIR) + "/configs/profiles.json");
  return p;
}

// Measured EAGLE-2 accepted lengths on the 8B target, at (n, d) = (30,3) ... (60,6).
const std::vector<SweepPoint> kFp16Tau = {
    {30, 3, 3.356260904576567}, {40, 4, 3.727159316063697}, {50, 5, 3.9882510645008673}, {60, 6, 4.118646837718582}};
const std::vector<SweepPoint> kW4Tau = {
    {30, 3, 3.299505440158259}, {40, 4, 3.6693341164378532}, {50, 5, 3.9022474531456566}, {60, 6, 4.046442129068734}};

double memory_time(const HardwareProfile& hw, const SchemeProfile& s, const ModelDims& m, std::size_t ctx) {
  return (m.params * s.bytes_per_weight + m.head_bytes + m.kv_bytes_per_token * static_cast<double>(ctx)) /
         (hw.mem_bandwidth * hw.bandwidth_efficiency);
}

TEST(ForwardCost, SingleTokenIsMemoryBound) {
  for (const auto& [hw_name, hw] : profiles().hardware) {
    for (const auto& [s_name, s] : profiles().schemes) {
      for (const auto& [m_name, m] : profiles().models) {
        EXPECT_DOUBLE_EQ(forward_cost(hw, s, m, 1, 512), memory_time(hw, s, m, 512)) << hw_name << s_name << m_name;
      }
    }
  }
}

TEST(ForwardCost, Llama70bW4MatchesArThroughput) {
  const auto& hw = profiles().hw("a100-80g");
  const ModelDims& m = profiles().model("llama3-70b");
  const auto& w4 = profiles().scheme("w4a16");
  EXPECT_DOUBLE_EQ(m.params * w4.bytes_per_weight, 35e9);
  const double t = forward_cost(hw, w4, m, 1, 0);
  EXPECT_NEAR(t, 35e9 / (2e12 * 0.62), 1e-15);
  EXPECT_NEAR(t * 1e3, 28.3, 28.3 * 0.005);
  EXPECT_NEAR(1.0 / t, 35.28, 35.28 * 0.01);
}

TEST(ForwardCost, VerificationRatioContrast) {
  const auto& hw = profiles().hw("a100-80g");
  const ModelDims& m = profiles().model("llama3-8b");
  const auto ratio = [&](const char* scheme) {
    return forward_cost(hw, profiles().scheme(scheme), m, 60, 512) / forward_cost(hw, profiles().scheme(scheme), m, 1, 512);
  };
  EXPECT_LE(ratio("fp16"), 1.3);
  EXPECT_GE(ratio("w4a16"), 1.5);
}

TEST(ForwardCost, MonotoneAndContinuous) {
  const auto& hw = profiles().hw("a100-80g");
  for (const auto& [name, s] : profiles().schemes) {
    const ModelDims& m = profiles().model("llama3-8b");
    double prev = 0.0;
    for (std::size_t n = 1; n <= 400; ++n) {
      const double c = forward_cost(hw, s, m, n, 256);
      EXPECT_GE(c, prev) << name << " n=" << n;
      // The two roofline terms agree at the crossover, so consecutive
      // costs never jump by more than one token's compute time.
      const double step = 2.0 * m.params * s.activation_compute_scale / (hw.compute_throughput * hw.compute_efficiency);
      if (n > 1) EXPECT_LE(c - prev, step * (1 + 1e-12)) << name << " n=" << n;
      prev = c;
    }
  }
  EXPECT_THROW(forward_cost(hw, profiles().scheme("fp16"), profiles().model("llama3-8b"), 0, 0), InputError);
}

// Smallest n whose cost exceeds the single-token cost, by bisection.
std::size_t crossover(const HardwareProfile& hw, const SchemeProfile& s, const ModelDims& m) {
  const double base = forward_cost(hw, s, m, 1, 0);
  std::size_t lo = 1, hi = 1 << 20;
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    (forward_cost(hw, s, m, mid, 0) > base ? hi : lo) = mid;
  }
  return hi;
}

TEST(ForwardCost, FewerBytesCrossOverEarlier) {
  const auto& hw = profiles().hw("a100-80g");
  const ModelDims& m = profiles().model("llama3-70b");
  SchemeProfile a = profiles().scheme("fp16");
  SchemeProfile b = a;
  b.bytes_per_weight = 0.5;
  EXPECT_LT(crossover(hw, b, m), crossover(hw, a, m));
  b.bytes_per_weight = 1.0;
  EXPECT_LT(crossover(hw, b, m), crossover(hw, a, m));
}

TEST(ForwardCost, ScaleInvariance) {
  HardwareProfile hw = profiles().hw("a100-80g");
  HardwareProfile fast = hw;
  fast.mem_bandwidth *= 8;
  fast.compute_throughput *= 8;
  const ModelDims& m = profiles().model("llama3-70b");
  for (const auto& [name, s] : profiles().schemes) {
    for (std::size_t n : {1u, 7u, 49u, 200u}) {
      EXPECT_NEAR(forward_cost(fast, s, m, n, 100) * 8, forward_cost(hw, s, m, n, 100),
                  1e-12 * forward_cost(hw, s, m, n, 100));
    }
  }
}

TEST(LatencyRatio, DirectSubstitution) {
  const SpeedupResult r = eq1_latency_ratio({4.0, 1.0, 0.3, 1.0, 1.2});
  EXPECT_NEAR(r.ratio, 0.375, 1e-12);
  EXPECT_NEAR(r.speedup, 2.6667, 1e-4);
  const SpeedupResult ar = eq1_latency_ratio({1.0, 0.0, 0.0, 2.0, 2.0});
  EXPECT_DOUBLE_EQ(ar.ratio, 1.0);
  EXPECT_DOUBLE_EQ(ar.speedup, 1.0);
  EXPECT_THROW(eq1_latency_ratio({0.5, 1.0, 0.1, 1.0, 1.0}), ConfigError);
  EXPECT_THROW(eq1_latency_ratio({2.0, 1.0, 0.1, 0.0, 1.0}), ConfigError);
}

std::vector<SweepRow> reference_sweep() {
  const auto& p = profiles();
  return sweep_tree_size(p.hw("a100-80g"), {p.scheme("fp16"), p.scheme("w4a16")}, p.model("llama3-8b"),
                         p.costed("eagle-head-8b", "fp16"), {{"fp16", kFp16Tau}, {"w4a16", kW4Tau}}, 10, 512);
}

std::vector<SweepRow> rows_of(const std::vector<SweepRow>& rows, const std::string& scheme) {
  std::vector<SweepRow> out;
  for (const auto& r : rows) {
    if (r.scheme == scheme) out.push_back(r);
  }
  return out;
}

TEST(Sweep, TrendsMatchTreeSizeAnalysis) {
  const auto rows = reference_sweep();
  ASSERT_EQ(rows.size(), 8u);
  const auto fp16 = rows_of(rows, "fp16");
  const auto w4 = rows_of(rows, "w4a16");
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_GE(fp16[i].tv_over_tt, fp16[i - 1].tv_over_tt);
    EXPECT_GE(w4[i].tv_over_tt, w4[i - 1].tv_over_tt);
    EXPECT_LE(w4[i].speedup, w4[i - 1].speedup);
  }
  EXPECT_LE(fp16[3].tv_over_tt, 1.3);
  EXPECT_GE(w4[3].tv_over_tt, 1.5);
  EXPECT_GE(fp16[3].speedup, fp16[0].speedup);
  EXPECT_LT(w4[3].speedup, w4[0].speedup);

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "scheme,n,d,tau,tv_over_tt,speedup");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(Sweep, IdenticalSchemesCoincide) {
  const auto& p = profiles();
  SchemeProfile twin = p.scheme("fp16");
  twin.name = "twin";
  const auto rows = sweep_tree_size(p.hw("a100-80g"), {p.scheme("fp16"), twin}, p.model("llama3-8b"),
                                    p.costed("eagle-head-8b", "fp16"), {{"fp16", kFp16Tau}, {"twin", kFp16Tau}}, 10,
                                    512);
  const auto a = rows_of(rows, "fp16");
  const auto b = rows_of(rows, "twin");
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tv_over_tt, b[i].tv_over_tt);
    EXPECT_EQ(a[i].speedup, b[i].speedup);
  }
  EXPECT_THROW(sweep_tree_size(p.hw("a100-80g"), {twin}, p.model("llama3-8b"), p.costed("eagle-head-8b", "fp16"),
                               {{"fp16", kFp16Tau}}, 10, 512),
               ConfigError);
}

TEST(MethodPlans, OrderingFor70bW4) {
  const auto& p = profiles();
  const auto& hw = p.hw("a100-80g");
  const CostedModel target = p.costed("llama3-70b", "w4a16");
  const CostedModel small = p.costed("llama3-8b", "w4a16");
  const double ar = predict_tokens_per_second(hw, ar_plan(target), 512);
  const double sp = predict_tokens_per_second(hw, sp_plan(target, small, 4.72, 6), 512);
  const double eagle = predict_tokens_per_second(hw, eagle2_plan(target, p.costed("eagle-head-70b", "fp16"), 3.57, 4, 32, 10), 512);
  const double hier = predict_tokens_per_second(
      hw, hierspec_plan(target, small, p.costed("eagle-head-8b", "fp16"), 5.28, 6, 3, 30, 10, 3.30), 512);
  EXPECT_GT(hier, sp);
  EXPECT_GT(sp, eagle);
  EXPECT_GT(eagle, ar);
  EXPECT_GE(hier / eagle, 1.15);
  EXPECT_LE(hier / eagle, 1.5);
}

struct RunCost {
  EventLog events;
  DecodeOutput out;
};

CostModel cost_for(const char* drafter_model, const char* drafter_scheme) {
  const auto& p = profiles();
  CostModel c;
  c.hw = p.hw("a100-80g");
  c.models[ModelRole::Target] = p.costed("llama3-70b", "w4a16");
  c.models[ModelRole::Intermediate] = p.costed("llama3-8b", "w4a16");
  c.models[ModelRole::Drafter] = p.costed(drafter_model, drafter_scheme);
  return c;
}

class SimulatedRuns : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ModelConfig c = small_config();
    target_ = new ModelWeights(build_toy_model(c, 50));
    draft_ = new ModelWeights(quantize_model(*target_, Precision::w4(16)));
  }
  static void TearDownTestSuite() {
    delete target_;
    delete draft_;
  }

  RunCost run(Strategy s) {
    RunCost r;
    DecodeOptions o;
    o.max_tokens = 48;
    o.events = &r.events;
    const std::vector<int> prompt = encode_bytes("simulated clock", target_->config);
    ModelDrafter drafter(*draft_);
    switch (s) {
      case Strategy::AR:
        r.out = ar_decode(*target_, prompt, o);
        break;
      case Strategy::SP:
        r.out = vanilla_sp_decode(*target_, drafter, 6, prompt, o);
        break;
      case Strategy::Eagle2:
        r.out = eagle2_decode(*target_, drafter, {6, 48, 10}, prompt, o);
        break;
      case Strategy::HierSpec:
        r.out = hierspec_decode(*target_, *target_, drafter, {6, 3, 30, 10}, prompt, o);
        break;
    }
    return r;
  }

  static ModelWeights* target_;
  static ModelWeights* draft_;
};

ModelWeights* SimulatedRuns::target_ = nullptr;
ModelWeights* SimulatedRuns::draft_ = nullptr;

TEST_F(SimulatedRuns, ArHasNoDrafting) {
  const RunCost r = run(Strategy::AR);
  const SimTimes t = simulated_clock(r.events, cost_for("eagle-head-70b", "fp16"));
  EXPECT_EQ(t.drafting, 0.0);
  EXPECT_EQ(t.draft_latency, 0.0);
  EXPECT_EQ(t.verify_forwards, r.out.stats.target_forwards);
  EXPECT_GT(t.target_prefill, 0.0);
}

TEST_F(SimulatedRuns, DraftingAndVerificationSplit) {
  const RunCost sp = run(Strategy::SP);
  const RunCost eagle = run(Strategy::Eagle2);
  const SimTimes ts = simulated_clock(sp.events, cost_for("llama3-8b", "w4a16"));
  const SimTimes te = simulated_clock(eagle.events, cost_for("eagle-head-70b", "fp16"));
  // Per draft length and per verification forward.
  EXPECT_GT(ts.drafting / (6.0 * ts.verify_forwards), te.drafting / (6.0 * te.verify_forwards));
  EXPECT_GT(te.verification / te.verify_forwards, ts.verification / ts.verify_forwards);
}

TEST_F(SimulatedRuns, LatencyRatioSelfConsistency) {
  const std::pair<Strategy, CostModel> cases[] = {
      {Strategy::AR, cost_for("eagle-head-70b", "fp16")},
      {Strategy::SP, cost_for("llama3-8b", "w4a16")},
      {Strategy::Eagle2, cost_for("eagle-head-70b", "fp16")},
      {Strategy::HierSpec, cost_for("eagle-head-8b", "fp16")},
  };
  for (const auto& [s, cost] : cases) {
    const RunCost r = run(s);
    const SimTimes t = simulated_clock(r.events, cost);
    const double measured = static_cast<double>(r.out.stats.tokens_generated) / t.decode();
    const int d = s == Strategy::AR ? 0 : 6;
    const SpeedupInputs in = latency_inputs_from_run(r.events, cost, r.out.stats.tokens_generated, d);
    EXPECT_DOUBLE_EQ(in.tau, r.out.stats.tau);
    const double predicted = eq1_latency_ratio(in).speedup / in.t_t;
    EXPECT_NEAR(predicted / measured, 1.0, 0.01) << to_string(s);
  }
}

TEST(Profiles, ParseErrors) {
  EXPECT_THROW(parse_profiles("{"), FormatError);
  EXPECT_THROW(parse_profiles(R"({"hardware": {"x": {"mem_bandwidth": 1}}})"), FormatError);
  EXPECT_THROW(parse_profiles(R"({"hardware": {"x": {"mem_bandwidth": -1, "compute_throughput": 1}}})"), ConfigError);
  EXPECT_THROW(parse_profiles(R"({"schemes": {"s": {"bytes_per_weight": 0}}})"), ConfigError);
  EXPECT_THROW(
      parse_profiles(R"({"hardware": {"x": {"mem_bandwidth": 1, "compute_throughput": 1, "compute_efficiency": 2}}})"),
      ConfigError);
  const ProfileSet p = parse_profiles(R"({"models": {"m": {"params": 5}}})");
  EXPECT_EQ(p.model("m").params, 5.0);
  EXPECT_THROW(p.model("n"), ConfigError);
  EXPECT_THROW(p.hw("a100"), ConfigError);
  EXPECT_THROW(p.scheme("fp8"), ConfigError);
  EXPECT_THROW(load_profiles("/nonexistent/profiles.json"), FormatError);
}

}  // namespace
}  // namespace spql
