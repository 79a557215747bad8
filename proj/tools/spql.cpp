// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spql/bench.hpp"
#include "spql/cost_sweep.hpp"
#include "spql/draft.hpp"
#include "spql/engine.hpp"
#include "spql/error.hpp"
#include "spql/specdec.hpp"

namespace {

using nlohmann::json;
using namespace spql;

struct ModelArgs {
  std::string checkpoint;
  std::string config;
  std::uint64_t seed = 0;
  std::string precision;
};

ModelConfig config_or_default(const std::string& path) {
  return path.empty() ? ModelConfig{} : load_model_config(path);
}

// A checkpoint when given, else the seeded toy model. `precision` requantizes
// the FP32 master weights.
ModelWeights load_model(const ModelArgs& a, const std::string& precision) {
  std::optional<Precision> p;
  if (!precision.empty()) p = Precision::parse(precision);
  if (!a.checkpoint.empty()) return load_checkpoint(a.checkpoint, p);
  ModelConfig c = config_or_default(a.config);
  if (p) c.precision = *p;
  return build_toy_model(c, a.seed);
}

json stats_json(const DecodeStats& s) {
  json hist = json::object();
  for (const auto& [k, v] : s.accepted_histogram) hist[std::to_string(k)] = v;
  return {{"tokens_generated", s.tokens_generated}, {"target_forwards", s.target_forwards},
          {"intermediate_forwards", s.intermediate_forwards}, {"draft_forwards", s.draft_forwards},
          {"tau", s.tau}, {"wall_s", s.wall_time}, {"draft_latency_s", s.draft_latency},
          {"accepted_histogram", hist}};
}

int cmd_make_toy_model(const std::string& config, std::uint64_t seed, const std::string& precision,
                       const std::string& out) {
  ModelConfig c = config_or_default(config);
  if (!precision.empty()) c.precision = Precision::parse(precision);
  const ModelWeights w = build_toy_model(c, seed);
  save_checkpoint(w, out);
  std::cout << "wrote " << out << " (" << c.precision.to_string() << ", checksum " << std::hex
            << weights_checksum(w) << std::dec << ")\n";
  return 0;
}

int cmd_quantize(const std::string& in, const std::string& out, int bits, std::size_t group, bool rotate) {
  Precision p;
  if (bits == 8) {
    if (rotate) throw ConfigError("--rotate applies to 4-bit weights only");
    p = Precision::w8();
  } else {
    p = rotate ? Precision::w4_rotated(group) : Precision::w4(group);
  }
  const ModelWeights q = load_checkpoint(in, p);
  save_checkpoint(q, out);
  std::cout << "wrote " << out << " (" << p.to_string() << ")\n";
  return 0;
}

struct DecodeArgs {
  std::string strategy = "ar";
  ModelArgs target;
  std::string drafter_checkpoint, drafter_precision = "w4:8", ngram;
  std::string intermediate_checkpoint, intermediate_precision = "w8";
  std::string prompt;
  std::size_t max_tokens = 64;
  int d = 6, n = 60, k = 10, d1 = 3, n1 = 30;
};

int cmd_decode(const DecodeArgs& a) {
  const Strategy s = parse_strategy(a.strategy);
  const ModelWeights target = load_model(a.target, a.target.precision);
  const std::vector<int> prompt = encode_bytes(a.prompt, target.config);
  DecodeOptions opt;
  opt.max_tokens = a.max_tokens;

  std::optional<ModelWeights> draft_model;
  std::unique_ptr<Drafter> drafter;
  if (s != Strategy::AR) {
    if (!a.ngram.empty()) {
      drafter = std::make_unique<NgramDrafter>(load_ngram_drafter(a.ngram));
    } else {
      ModelArgs m = a.target;
      if (!a.drafter_checkpoint.empty()) m.checkpoint = a.drafter_checkpoint;
      draft_model = load_model(m, a.drafter_precision);
      drafter = std::make_unique<ModelDrafter>(*draft_model);
    }
  }
  DecodeOutput out;
  switch (s) {
    case Strategy::AR:
      out = ar_decode(target, prompt, opt);
      break;
    case Strategy::SP:
      out = vanilla_sp_decode(target, *drafter, a.d, prompt, opt);
      break;
    case Strategy::Eagle2:
      out = eagle2_decode(target, *drafter, {a.d, a.n, a.k}, prompt, opt);
      break;
    case Strategy::HierSpec: {
      ModelArgs m = a.target;
      if (!a.intermediate_checkpoint.empty()) m.checkpoint = a.intermediate_checkpoint;
      const ModelWeights mid = load_model(m, a.intermediate_precision);
      out = hierspec_decode(target, mid, *drafter, {a.d, a.d1, a.n1, a.k}, prompt, opt);
      break;
    }
  }
  const json j = {{"strategy", to_string(s)},
                  {"tokens", out.tokens},
                  {"text", decode_bytes(out.tokens, target.config)},
                  {"output_hash", hash_tokens(out.tokens)},
                  {"stats", stats_json(out.stats)}};
  std::cout << j.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
  return 0;
}

int cmd_bench(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& output,
              std::size_t threads) {
  BenchConfig c = load_bench_config(config_path);
  if (seed) c.seeds = {*seed};
  if (!output.empty()) c.output = output;
  if (c.output.empty()) throw ConfigError("bench needs an output path (config 'output' or --output)");
  const BenchReport report = run_bench(c, threads == 0 ? threads_from_env() : threads);
  write_report(report, c.output, c.wall_clock);
  write_summary_csv(std::cout, report.summary);
  return 0;
}

int cmd_cost_sweep(const std::string& config_path, const std::string& output) {
  CostSweepConfig c = load_cost_sweep_config(config_path);
  if (!output.empty()) c.output = output;
  const CostSweepResult r = run_cost_sweep(c);
  if (!c.output.empty()) {
    if (c.output.has_parent_path()) std::filesystem::create_directories(c.output.parent_path());
    std::ofstream f(c.output, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write '" + c.output.string() + "'");
    write_sweep_csv(f, r.sweep);
    const auto methods_path = c.output.parent_path() / (c.output.stem().string() + "_methods.csv");
    std::ofstream m(methods_path, std::ios::binary | std::ios::trunc);
    if (!m) throw FormatError("cannot write '" + methods_path.string() + "'");
    write_methods_csv(m, r.methods);
  }
  write_sweep_csv(std::cout, r.sweep);
  std::cout << '\n';
  write_methods_csv(std::cout, r.methods);
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b) {
  const CompareResult r = compare_report(a, b);
  for (const auto& d : r.diffs) std::cout << d << '\n';
  if (r.diffs.empty()) std::cout << "reports match\n";
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spql: speculative decoding and quantization laboratory"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  auto* make = app.add_subcommand("make-toy-model", "Write a seeded toy-model checkpoint");
  std::string make_config, make_precision, make_out;
  make->add_option("--config", make_config, "Model config JSON");
  make->add_option("--seed", seed, "Weight seed");
  make->add_option("--precision", make_precision, "fp32, w8, w4:<group> or w4r:<group>");
  make->add_option("--out,-o", make_out, "Output checkpoint")->required();

  auto* quant = app.add_subcommand("quantize", "Quantize an FP32 checkpoint");
  std::string q_in, q_out;
  int bits = 4;
  std::size_t group = 128;
  bool rotate = false;
  quant->add_option("input", q_in, "FP32 checkpoint")->required();
  quant->add_option("--out,-o", q_out, "Output checkpoint")->required();
  quant->add_option("--bits", bits, "Weight bits")->check(CLI::IsMember({4, 8}));
  quant->add_option("--group", group, "4-bit group size");
  quant->add_flag("--rotate", rotate, "Hadamard-rotate before quantizing");
  quant->add_option("--seed", seed, "Unused; accepted for uniformity");

  auto* dec = app.add_subcommand("decode", "Decode one prompt");
  DecodeArgs da;
  dec->add_option("--strategy", da.strategy, "ar, sp, eagle2 or hierspec");
  dec->add_option("--prompt", da.prompt, "Prompt text")->required();
  dec->add_option("--target", da.target.checkpoint, "Target checkpoint (default: toy model)");
  dec->add_option("--config", da.target.config, "Toy model config JSON");
  dec->add_option("--seed", da.target.seed, "Toy model seed");
  dec->add_option("--precision", da.target.precision, "Target precision");
  dec->add_option("--drafter", da.drafter_checkpoint, "Drafter checkpoint (default: requantized target)");
  dec->add_option("--drafter-precision", da.drafter_precision, "Drafter precision");
  dec->add_option("--ngram", da.ngram, "N-gram drafter table JSON");
  dec->add_option("--intermediate", da.intermediate_checkpoint, "Intermediate checkpoint");
  dec->add_option("--intermediate-precision", da.intermediate_precision, "Intermediate precision");
  dec->add_option("--max-tokens", da.max_tokens, "Token budget");
  dec->add_option("-d", da.d, "Draft depth");
  dec->add_option("-n", da.n, "Tree size");
  dec->add_option("-k", da.k, "Beam width");
  dec->add_option("--d1", da.d1, "Stage-1 depth");
  dec->add_option("--n1", da.n1, "Stage-1 tree size");

  auto* bench = app.add_subcommand("bench", "Run a benchmark config");
  std::string bench_config, bench_output;
  std::optional<std::uint64_t> bench_seed;
  std::size_t threads = 0;
  bench->add_option("--config", bench_config, "Bench config JSON")->required();
  bench->add_option("--seed", bench_seed, "Run only this seed");
  bench->add_option("--output,-o", bench_output, "Row CSV path");
  bench->add_option("--threads", threads, "Worker threads (default: SPQL_THREADS or 1)");

  auto* sweep = app.add_subcommand("cost-sweep", "Evaluate the roofline cost model");
  std::string sweep_config, sweep_output;
  sweep->add_option("--config", sweep_config, "Cost-sweep config JSON")->required();
  sweep->add_option("--output,-o", sweep_output, "Sweep CSV path");
  sweep->add_option("--seed", seed, "Unused; accepted for uniformity");

  auto* cmp = app.add_subcommand("compare", "Diff two bench CSVs; exit 1 when outputs differ");
  std::string cmp_a, cmp_b;
  cmp->add_option("a", cmp_a, "First report")->required();
  cmp->add_option("b", cmp_b, "Second report")->required();
  cmp->add_option("--seed", seed, "Unused; accepted for uniformity");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*make) return cmd_make_toy_model(make_config, seed, make_precision, make_out);
    if (*quant) return cmd_quantize(q_in, q_out, bits, group, rotate);
    if (*dec) return cmd_decode(da);
    if (*bench) return cmd_bench(bench_config, bench_seed, bench_output, threads);
    if (*sweep) return cmd_cost_sweep(sweep_config, sweep_output);
    if (*cmp) return cmd_compare(cmp_a, cmp_b);
  } catch (const std::exception& e) {
    std::cerr << "spql: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
