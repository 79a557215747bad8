// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "spql/bench.hpp"
#include "spql/cost_sweep.hpp"
#include "spql/draft.hpp"
#include "spql/engine.hpp"
#include "spql/error.hpp"
#include "spql/perf.hpp"
#include "spql/quant.hpp"
#include "spql/specdec.hpp"

namespace py = pybind11;
using namespace spql;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw InputError("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw InputError("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<float> from_matrix(const Matrix& m) {
  py::array_t<float> out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

py::array_t<float> from_vector(std::span<const float> v) {
  return py::array_t<float>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

QuantizedMatrix quantize(const FloatArray& w, int bits, std::size_t group_size, bool rotate) {
  Matrix m = to_matrix(w);
  if (rotate) m = hadamard_rotate(m);
  QuantizedMatrix q = quantize_group(m, bits, group_size == 0 ? m.cols : group_size);
  q.rotated = rotate;
  return q;
}

Vector quantized_matvec(const QuantizedMatrix& q, const FloatArray& x) {
  std::vector<float> v = to_vector(x);
  if (q.rotated) hadamard_transform(v);
  return qgemv(q, v);
}

ModelConfig config_from_kwargs(const py::kwargs& kw) {
  ModelConfig c;
  for (const auto& [key, value] : kw) {
    const std::string k = py::cast<std::string>(key);
    if (k == "vocab_size") c.vocab_size = py::cast<std::uint32_t>(value);
    else if (k == "n_layers") c.n_layers = py::cast<std::uint32_t>(value);
    else if (k == "d_model") c.d_model = py::cast<std::uint32_t>(value);
    else if (k == "n_heads") c.n_heads = py::cast<std::uint32_t>(value);
    else if (k == "d_ff") c.d_ff = py::cast<std::uint32_t>(value);
    else if (k == "max_positions") c.max_positions = py::cast<std::uint32_t>(value);
    else throw ConfigError("unknown model config field '" + k + "'");
  }
  c.validate();
  return c;
}

py::dict config_dict(const ModelConfig& c) {
  py::dict d;
  d["vocab_size"] = c.vocab_size;
  d["n_layers"] = c.n_layers;
  d["d_model"] = c.d_model;
  d["n_heads"] = c.n_heads;
  d["d_ff"] = c.d_ff;
  d["max_positions"] = c.max_positions;
  d["precision"] = c.precision.to_string();
  return d;
}

py::dict stats_dict(const DecodeStats& s) {
  py::dict d;
  d["tokens_generated"] = s.tokens_generated;
  d["target_forwards"] = s.target_forwards;
  d["intermediate_forwards"] = s.intermediate_forwards;
  d["draft_forwards"] = s.draft_forwards;
  d["tau"] = s.tau;
  d["wall_s"] = s.wall_time;
  d["draft_latency_s"] = s.draft_latency;
  d["accepted_histogram"] = s.accepted_histogram;
  return d;
}

std::vector<int> prompt_tokens(const py::object& prompt, const ModelConfig& c) {
  if (py::isinstance<py::str>(prompt)) return encode_bytes(py::cast<std::string>(prompt), c);
  return py::cast<std::vector<int>>(prompt);
}

std::unique_ptr<Drafter> make_drafter(const ModelWeights* drafter, const std::optional<std::string>& ngram) {
  if (ngram) return std::make_unique<NgramDrafter>(load_ngram_drafter(*ngram));
  if (drafter == nullptr) throw ConfigError("speculative strategies need a drafter model or an n-gram table");
  return std::make_unique<ModelDrafter>(*drafter);
}

py::dict decode(const std::string& strategy, const ModelWeights& target, const py::object& prompt,
                const ModelWeights* drafter, const ModelWeights* intermediate, const std::optional<std::string>& ngram,
                std::size_t max_tokens, int d, int n, int k, int d1, int n1) {
  const Strategy s = parse_strategy(strategy);
  const std::vector<int> tokens = prompt_tokens(prompt, target.config);
  DecodeOptions opt;
  opt.max_tokens = max_tokens;
  DecodeOutput out;
  {
    py::gil_scoped_release release;
    if (s == Strategy::AR) {
      out = ar_decode(target, tokens, opt);
    } else {
      auto draft = make_drafter(drafter, ngram);
      if (s == Strategy::SP) {
        out = vanilla_sp_decode(target, *draft, d, tokens, opt);
      } else if (s == Strategy::Eagle2) {
        out = eagle2_decode(target, *draft, {d, n, k}, tokens, opt);
      } else {
        if (intermediate == nullptr) throw ConfigError("hierspec needs an intermediate model");
        out = hierspec_decode(target, *intermediate, *draft, {d, d1, n1, k}, tokens, opt);
      }
    }
  }
  py::dict r;
  r["strategy"] = to_string(s);
  r["tokens"] = out.tokens;
  r["text"] = py::bytes(decode_bytes(out.tokens, target.config));
  r["output_hash"] = hash_tokens(out.tokens);
  r["stats"] = stats_dict(out.stats);
  return r;
}

py::list summary_list(const std::vector<SummaryRow>& rows) {
  py::list out;
  for (const auto& s : rows) {
    py::dict d;
    d["strategy"] = s.strategy;
    d["d"] = s.d;
    d["n"] = s.n;
    d["k"] = s.k;
    d["d1"] = s.d1;
    d["n1"] = s.n1;
    d["seed"] = s.seed;
    d["category"] = s.category;
    d["prompts"] = s.prompts;
    d["tokens"] = s.tokens;
    d["target_forwards"] = s.target_forwards;
    d["tau"] = s.tau;
    d["sim_tokens_per_s"] = s.sim_tokens_per_s;
    d["draft_latency_ms"] = s.draft_latency_ms;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_spql, m) {
  m.doc() = "spql core bindings";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<RunError>(m, "RunError", PyExc_RuntimeError);

  py::class_<QuantizedMatrix>(m, "QuantizedMatrix")
      .def_readonly("rows", &QuantizedMatrix::rows)
      .def_readonly("cols", &QuantizedMatrix::cols)
      .def_readonly("bits", &QuantizedMatrix::bits)
      .def_readonly("group_size", &QuantizedMatrix::group_size)
      .def_readonly("rotated", &QuantizedMatrix::rotated)
      .def_property_readonly("codes", [](const QuantizedMatrix& q) {
        py::array_t<int> out({q.rows, q.cols});
        int* p = out.mutable_data();
        for (std::size_t r = 0; r < q.rows; ++r) {
          for (std::size_t c = 0; c < q.cols; ++c) *p++ = q.code(r, c);
        }
        return out;
      })
      .def_property_readonly("scales", [](const QuantizedMatrix& q) {
        py::array_t<float> out({q.rows, q.groups_per_row()});
        std::copy(q.scales.begin(), q.scales.end(), out.mutable_data());
        return out;
      })
      .def_property_readonly("packed", [](const QuantizedMatrix& q) {
        return py::bytes(reinterpret_cast<const char*>(q.codes.data()), q.codes.size());
      })
      .def("dequantize", [](const QuantizedMatrix& q) { return from_matrix(dequantize(q)); })
      .def("matvec", [](const QuantizedMatrix& q, const FloatArray& x) { return from_vector(quantized_matvec(q, x)); },
           py::arg("x"), "Dequantizing product; rotates x first when the weights were rotated.");

  m.def("quantize", &quantize, py::arg("weights"), py::arg("bits") = 4, py::arg("group_size") = 128,
        py::arg("rotate") = false, "Symmetric round-to-nearest group quantization (group_size 0 = per channel).");
  m.def("gemv", [](const FloatArray& w, const FloatArray& x) { return from_vector(gemv(to_matrix(w), to_vector(x))); },
        py::arg("weights"), py::arg("x"));
  m.def("hadamard_rotate", [](const FloatArray& w) { return from_matrix(hadamard_rotate(to_matrix(w))); },
        py::arg("weights"));
  m.def("hadamard_transform", [](const FloatArray& x) {
    std::vector<float> v = to_vector(x);
    hadamard_transform(v);
    return from_vector(v);
  }, py::arg("x"));

  py::class_<ModelWeights>(m, "Model")
      .def_static("toy", [](std::uint64_t seed, const std::string& precision, const py::kwargs& kw) {
        ModelConfig c = config_from_kwargs(kw);
        c.precision = Precision::parse(precision);
        return build_toy_model(c, seed);
      }, py::arg("seed") = 0, py::arg("precision") = "fp32")
      .def_static("load", [](const std::filesystem::path& path, const std::optional<std::string>& precision) {
        std::optional<Precision> p;
        if (precision) p = Precision::parse(*precision);
        return load_checkpoint(path, p);
      }, py::arg("path"), py::arg("precision") = py::none())
      .def("save", [](const ModelWeights& w, const std::filesystem::path& path) { save_checkpoint(w, path); },
           py::arg("path"))
      .def("quantized", [](const ModelWeights& w, const std::string& p) { return quantize_model(w, Precision::parse(p)); },
           py::arg("precision"))
      .def_property_readonly("config", [](const ModelWeights& w) { return config_dict(w.config); })
      .def_property_readonly("checksum", [](const ModelWeights& w) { return weights_checksum(w); })
      .def("encode", [](const ModelWeights& w, const std::string& text) { return encode_bytes(text, w.config); })
      .def("decode_text", [](const ModelWeights& w, const std::vector<int>& tokens) {
        return py::bytes(decode_bytes(tokens, w.config));
      })
      .def("logits", [](const ModelWeights& w, const std::vector<int>& tokens) {
        KVCache cache(w.config);
        std::vector<int> pos(tokens.size());
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
        return from_matrix(forward(w, tokens, pos, AncestryMask::chain(tokens.size(), 0), cache));
      }, py::arg("tokens"), "Logits for every position of a fresh chain forward.")
      .def("next_token", [](const ModelWeights& w, const std::vector<int>& tokens) {
        return reference_next_token(w, tokens);
      });

  m.def("decode", &decode, py::arg("strategy"), py::arg("target"), py::arg("prompt"),
        py::arg("drafter") = nullptr, py::arg("intermediate") = nullptr, py::arg("ngram") = py::none(),
        py::arg("max_tokens") = 64, py::arg("d") = 6, py::arg("n") = 60, py::arg("k") = 10, py::arg("d1") = 3,
        py::arg("n1") = 30, "Greedy decode with ar, sp, eagle2 or hierspec.");

  m.def("tau_oracle", [](const std::string& strategy, const ModelWeights& target, const ModelWeights& drafter,
                         const std::vector<int>& prompt, int d, int n, int k, std::size_t horizon) {
    ModelDrafter draft(drafter);
    return tau_oracle(parse_strategy(strategy), target, draft, {d, n, k}, prompt, horizon);
  }, py::arg("strategy"), py::arg("target"), py::arg("drafter"), py::arg("prompt"), py::arg("d"), py::arg("n"),
        py::arg("k"), py::arg("horizon"));

  m.def("eq1_latency_ratio", [](double tau, double d, double t_d, double t_t, double t_v) {
    const SpeedupResult r = eq1_latency_ratio({tau, d, t_d, t_t, t_v});
    return py::make_tuple(r.ratio, r.speedup);
  }, py::arg("tau"), py::arg("d"), py::arg("t_d"), py::arg("t_t"), py::arg("t_v"),
        "Returns (T_sd / T_t, speedup).");

  m.def("forward_cost", [](const std::filesystem::path& profiles, const std::string& hardware,
                           const std::string& model, const std::string& scheme, std::size_t n_tokens,
                           std::size_t ctx_len) {
    const ProfileSet p = load_profiles(profiles);
    return forward_cost(p.hw(hardware), p.scheme(scheme), p.model(model), n_tokens, ctx_len);
  }, py::arg("profiles"), py::arg("hardware"), py::arg("model"), py::arg("scheme"), py::arg("n_tokens"),
        py::arg("ctx_len") = 0);

  m.def("cost_sweep", [](const std::filesystem::path& config) {
    const CostSweepResult r = run_cost_sweep(load_cost_sweep_config(config));
    py::list sweep, methods;
    for (const auto& row : r.sweep) {
      py::dict d;
      d["scheme"] = row.scheme;
      d["n"] = row.n;
      d["d"] = row.d;
      d["tau"] = row.tau;
      d["tv_over_tt"] = row.tv_over_tt;
      d["speedup"] = row.speedup;
      sweep.append(d);
    }
    for (const auto& mp : r.methods) {
      py::dict d;
      d["method"] = mp.name;
      d["tau"] = mp.tau;
      d["tokens_per_s"] = mp.tokens_per_s;
      methods.append(d);
    }
    py::dict out;
    out["sweep"] = sweep;
    out["methods"] = methods;
    return out;
  }, py::arg("config"));

  m.def("run_bench", [](const std::filesystem::path& config, std::size_t threads,
                        const std::optional<std::filesystem::path>& output) {
    BenchConfig c = load_bench_config(config);
    BenchReport report;
    {
      py::gil_scoped_release release;
      report = run_bench(c, threads);
    }
    std::ostringstream csv;
    write_rows_csv(csv, report.rows, c.wall_clock);
    if (output) write_report(report, *output, c.wall_clock);
    py::dict out;
    out["csv"] = csv.str();
    out["summary"] = summary_list(report.summary);
    return out;
  }, py::arg("config"), py::arg("threads") = 1, py::arg("output") = py::none());

  m.def("compare_reports", [](const std::filesystem::path& a, const std::filesystem::path& b) {
    const CompareResult r = compare_report(a, b);
    return py::make_tuple(r.diffs, r.exit_code());
  }, py::arg("a"), py::arg("b"), "Returns (diffs, exit_code); exit_code 1 flags differing outputs.");
}
