// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "spql/engine.hpp"
#include "spql/error.hpp"

namespace spql {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'Q', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> b(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_dense(Writer& w, std::string_view name, const Matrix& m) {
  w.str(name);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (float v : m.data) w.f32(v);
}

void write_vector(Writer& w, std::string_view name, const Vector& v) {
  write_dense(w, name, Matrix(1, v.size(), v));
}

void write_linear(Writer& w, std::string_view name, const Linear& l) {
  if (const Matrix* m = l.dense()) {
    write_dense(w, name, *m);
    return;
  }
  const QuantizedMatrix& q = *l.quantized();
  w.str(name);
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(q.rows));
  w.u32(static_cast<std::uint32_t>(q.cols));
  w.u32(static_cast<std::uint32_t>(q.bits));
  w.u32(static_cast<std::uint32_t>(q.group_size));
  w.u8(q.rotated ? 1 : 0);
  for (float s : q.scales) w.f32(s);
  w.u32(static_cast<std::uint32_t>(q.codes.size()));
  w.bytes(q.codes);
}

void expect_name(Reader& r, std::string_view name) {
  const std::string got = r.str();
  if (got != name) throw FormatError("checkpoint tensor '" + got + "' where '" + std::string(name) + "' expected");
}

void expect_shape(std::string_view name, std::size_t rows, std::size_t cols, std::size_t want_rows,
                  std::size_t want_cols) {
  if (rows != want_rows || cols != want_cols) {
    throw FormatError("shape mismatch for '" + std::string(name) + "': " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " + std::to_string(want_rows) + "x" +
                      std::to_string(want_cols));
  }
}

Matrix read_dense_body(Reader& r, std::string_view name, std::size_t rows, std::size_t cols) {
  const std::uint32_t got_rows = r.u32();
  const std::uint32_t got_cols = r.u32();
  expect_shape(name, got_rows, got_cols, rows, cols);
  Matrix m(rows, cols);
  r.need(rows * cols * 4);
  for (float& v : m.data) v = r.f32();
  return m;
}

Matrix read_dense(Reader& r, std::string_view name, std::size_t rows, std::size_t cols) {
  expect_name(r, name);
  if (r.u8() != 0) throw FormatError("tensor '" + std::string(name) + "' must be dense");
  return read_dense_body(r, name, rows, cols);
}

Vector read_vector(Reader& r, std::string_view name, std::size_t len) {
  return read_dense(r, name, 1, len).data;
}

Linear read_linear(Reader& r, std::string_view name, std::size_t rows, std::size_t cols) {
  expect_name(r, name);
  const std::uint8_t kind = r.u8();
  if (kind == 0) return Linear(read_dense_body(r, name, rows, cols));
  if (kind != 1) throw FormatError("unknown tensor kind " + std::to_string(kind));
  QuantizedMatrix q;
  q.rows = r.u32();
  q.cols = r.u32();
  expect_shape(name, q.rows, q.cols, rows, cols);
  q.bits = static_cast<int>(r.u32());
  q.group_size = r.u32();
  q.rotated = r.u8() != 0;
  if ((q.bits != 4 && q.bits != 8) || q.group_size == 0 || q.cols % q.group_size != 0) {
    throw FormatError("invalid quantization header for '" + std::string(name) + "'");
  }
  q.scales.resize(q.rows * q.groups_per_row());
  r.need(q.scales.size() * 4);
  for (float& s : q.scales) s = r.f32();
  const std::uint32_t nbytes = r.u32();
  if (nbytes != packed_code_bytes(q.rows * q.cols, q.bits)) {
    throw FormatError("code byte count mismatch for '" + std::string(name) + "'");
  }
  q.codes = r.bytes(nbytes);
  return Linear(std::move(q));
}

const char* const kConfigFields[] = {"vocab_size", "n_layers",      "d_model",   "n_heads",
                                     "d_ff",       "max_positions", "precision", "group_size"};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelWeights& weights) {
  const auto& c = weights.config;
  Writer w;
  for (char ch : kMagic) w.u8(static_cast<std::uint8_t>(ch));
  w.u32(kVersion);
  const std::uint32_t values[] = {c.vocab_size,
                                  c.n_layers,
                                  c.d_model,
                                  c.n_heads,
                                  c.d_ff,
                                  c.max_positions,
                                  static_cast<std::uint32_t>(c.precision.kind),
                                  static_cast<std::uint32_t>(c.precision.group_size)};
  w.u32(static_cast<std::uint32_t>(std::size(kConfigFields)));
  for (std::size_t i = 0; i < std::size(kConfigFields); ++i) {
    w.str(kConfigFields[i]);
    w.u32(values[i]);
  }

  write_dense(w, "token_embedding", weights.token_embedding);
  write_dense(w, "position_embedding", weights.position_embedding);
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    const auto& layer = weights.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    write_vector(w, p + "attn_norm", layer.attn_norm);
    write_linear(w, p + "wq", layer.wq);
    write_linear(w, p + "wk", layer.wk);
    write_linear(w, p + "wv", layer.wv);
    write_linear(w, p + "wo", layer.wo);
    write_vector(w, p + "mlp_norm", layer.mlp_norm);
    write_linear(w, p + "w_gate", layer.w_gate);
    write_linear(w, p + "w_up", layer.w_up);
    write_linear(w, p + "w_down", layer.w_down);
  }
  write_vector(w, "final_norm", weights.final_norm);
  write_linear(w, "lm_head", weights.lm_head);
  return w.take();
}

ModelWeights deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char ch : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(ch)) throw FormatError("bad checkpoint magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, std::uint32_t> fields;
  const std::uint32_t nfields = r.u32();
  for (std::uint32_t i = 0; i < nfields; ++i) {
    std::string name = r.str();
    fields[name] = r.u32();
  }
  auto field = [&](const char* name) {
    auto it = fields.find(name);
    if (it == fields.end()) throw FormatError(std::string("checkpoint config lacks field '") + name + "'");
    return it->second;
  };

  ModelWeights w;
  auto& c = w.config;
  c.vocab_size = field("vocab_size");
  c.n_layers = field("n_layers");
  c.d_model = field("d_model");
  c.n_heads = field("n_heads");
  c.d_ff = field("d_ff");
  c.max_positions = field("max_positions");
  const std::uint32_t kind = field("precision");
  if (kind > static_cast<std::uint32_t>(PrecisionKind::W4Rotated)) throw FormatError("unknown precision tag");
  c.precision.kind = static_cast<PrecisionKind>(kind);
  c.precision.group_size = field("group_size");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what());
  }

  const std::size_t d = c.d_model;
  w.token_embedding = read_dense(r, "token_embedding", c.vocab_size, d);
  w.position_embedding = read_dense(r, "position_embedding", c.max_positions, d);
  w.layers.resize(c.n_layers);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    auto& layer = w.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    layer.attn_norm = read_vector(r, p + "attn_norm", d);
    layer.wq = read_linear(r, p + "wq", d, d);
    layer.wk = read_linear(r, p + "wk", d, d);
    layer.wv = read_linear(r, p + "wv", d, d);
    layer.wo = read_linear(r, p + "wo", d, d);
    layer.mlp_norm = read_vector(r, p + "mlp_norm", d);
    layer.w_gate = read_linear(r, p + "w_gate", c.d_ff, d);
    layer.w_up = read_linear(r, p + "w_up", c.d_ff, d);
    layer.w_down = read_linear(r, p + "w_down", d, c.d_ff);
  }
  w.final_norm = read_vector(r, "final_norm", d);
  w.lm_head = read_linear(r, "lm_head", c.vocab_size, d);
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return w;
}

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

ModelWeights load_checkpoint(const std::filesystem::path& path, std::optional<Precision> quantize_to) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ModelWeights w = deserialize_checkpoint(bytes);
  if (quantize_to && *quantize_to != w.config.precision) return quantize_model(w, *quantize_to);
  return w;
}

}  // namespace spql
