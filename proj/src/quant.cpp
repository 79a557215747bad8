// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#include "spql/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spql/error.hpp"

namespace spql {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw InputError("matrix data length " + std::to_string(data.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0f;
  return m;
}

std::size_t packed_code_bytes(std::size_t count, int bits) {
  return bits == 4 ? (count + 1) / 2 : count;
}

int QuantizedMatrix::code(std::size_t r, std::size_t c) const {
  const std::size_t idx = r * cols + c;
  if (bits == 8) return static_cast<int>(static_cast<std::int8_t>(codes[idx]));
  const std::uint8_t byte = codes[idx / 2];
  const int nibble = (idx % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
  return nibble >= 8 ? nibble - 16 : nibble;
}

namespace {

void store_code(QuantizedMatrix& q, std::size_t idx, int code) {
  if (q.bits == 8) {
    q.codes[idx] = static_cast<std::uint8_t>(static_cast<std::int8_t>(code));
    return;
  }
  const auto nibble = static_cast<std::uint8_t>(code & 0x0F);
  std::uint8_t& byte = q.codes[idx / 2];
  if (idx % 2 == 0) {
    byte = static_cast<std::uint8_t>((byte & 0xF0) | nibble);
  } else {
    byte = static_cast<std::uint8_t>((byte & 0x0F) | (nibble << 4));
  }
}

}  // namespace

QuantizedMatrix quantize_group(const Matrix& m, int bits, std::size_t group_size) {
  if (bits != 4 && bits != 8) {
    throw ConfigError("unsupported bit width " + std::to_string(bits) + " (expected 4 or 8)");
  }
  if (group_size == 0 || m.cols % group_size != 0) {
    throw ConfigError("group size " + std::to_string(group_size) + " does not divide " +
                      std::to_string(m.cols) + " columns");
  }
  for (float v : m.data) {
    if (!std::isfinite(v)) throw InputError("quantize_group: non-finite weight");
  }

  QuantizedMatrix q;
  q.rows = m.rows;
  q.cols = m.cols;
  q.bits = bits;
  q.group_size = group_size;
  q.codes.assign(packed_code_bytes(m.rows * m.cols, bits), 0);
  q.scales.assign(m.rows * q.groups_per_row(), 0.0f);

  const int qmax = q.max_code();
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    for (std::size_t g = 0; g < q.groups_per_row(); ++g) {
      const std::size_t begin = g * group_size;
      float amax = 0.0f;
      for (std::size_t c = begin; c < begin + group_size; ++c) amax = std::max(amax, std::fabs(row[c]));
      q.scales[r * q.groups_per_row() + g] = amax / static_cast<float>(qmax);
      if (amax == 0.0f) continue;
      // w / (amax / qmax) evaluated as w * qmax / amax in double keeps exact
      // ties (e.g. 0.5 of a 1.0 max at 4 bits) on the half-way point.
      for (std::size_t c = begin; c < begin + group_size; ++c) {
        const double t = static_cast<double>(row[c]) * qmax / static_cast<double>(amax);
        int code = static_cast<int>(std::round(t));
        code = std::clamp(code, -qmax, qmax);
        store_code(q, r * m.cols + c, code);
      }
    }
  }
  return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
  Matrix m(q.rows, q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    for (std::size_t c = 0; c < q.cols; ++c) {
      m.at(r, c) = static_cast<float>(q.code(r, c)) * q.scale(r, c / q.group_size);
    }
  }
  return m;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void hadamard_transform(std::span<float> x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw ConfigError("hadamard transform width " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const float a = x[j];
        const float b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
  const float norm = static_cast<float>(1.0 / std::sqrt(static_cast<double>(n)));
  for (float& v : x) v *= norm;
}

Matrix hadamard_rotate(const Matrix& m) {
  if (!is_power_of_two(m.cols)) {
    throw ConfigError("hadamard_rotate: width " + std::to_string(m.cols) + " is not a power of two");
  }
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows; ++r) hadamard_transform(out.row(r));
  return out;
}

namespace {

// Dot product with a fixed eight-lane reduction order.
float dot(const float* w, const float* x, std::size_t n) {
  float lane[8] = {};
  std::size_t c = 0;
  for (; c + 8 <= n; c += 8) {
    for (std::size_t j = 0; j < 8; ++j) lane[j] += w[c + j] * x[c + j];
  }
  for (std::size_t j = 0; c < n; ++c, ++j) lane[j] += w[c] * x[c];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

}  // namespace

namespace {

// Dequantizes row r of q into w.
void dequantize_row(const QuantizedMatrix& q, std::size_t r, float* w) {
  const std::size_t groups = q.groups_per_row();
  const std::size_t row0 = r * q.cols;
  for (std::size_t g = 0; g < groups; ++g) {
    const float s = q.scales[r * groups + g];
    const std::size_t begin = g * q.group_size;
    for (std::size_t c = begin; c < begin + q.group_size; ++c) {
      const std::size_t idx = row0 + c;
      int code;
      if (q.bits == 8) {
        code = static_cast<std::int8_t>(q.codes[idx]);
      } else {
        const std::uint8_t byte = q.codes[idx / 2];
        const int nibble = (idx % 2 == 0) ? (byte & 0x0F) : (byte >> 4);
        code = nibble >= 8 ? nibble - 16 : nibble;
      }
      w[c] = static_cast<float>(code) * s;
    }
  }
}

void check_width(const char* op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw InputError(std::string(op) + ": input length " + std::to_string(got) + " != " + std::to_string(want));
  }
}

}  // namespace

Vector qgemv(const QuantizedMatrix& q, std::span<const float> x) {
  check_width("qgemv", x.size(), q.cols);
  Vector y(q.rows, 0.0f);
  std::vector<float> w(q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    dequantize_row(q, r, w.data());
    y[r] = dot(w.data(), x.data(), q.cols);
  }
  return y;
}

Vector gemv(const Matrix& m, std::span<const float> x) {
  check_width("gemv", x.size(), m.cols);
  Vector y(m.rows, 0.0f);
  for (std::size_t r = 0; r < m.rows; ++r) y[r] = dot(m.data.data() + r * m.cols, x.data(), m.cols);
  return y;
}

Matrix gemm(const Matrix& m, const Matrix& x) {
  check_width("gemm", x.cols, m.cols);
  Matrix y(x.rows, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const float* w = m.data.data() + r * m.cols;
    for (std::size_t i = 0; i < x.rows; ++i) y.at(i, r) = dot(w, x.data.data() + i * x.cols, m.cols);
  }
  return y;
}

Matrix qgemm(const QuantizedMatrix& q, const Matrix& x) {
  check_width("qgemm", x.cols, q.cols);
  Matrix y(x.rows, q.rows);
  std::vector<float> w(q.cols);
  for (std::size_t r = 0; r < q.rows; ++r) {
    dequantize_row(q, r, w.data());
    for (std::size_t i = 0; i < x.rows; ++i) y.at(i, r) = dot(w.data(), x.data.data() + i * x.cols, q.cols);
  }
  return y;
}

}  // namespace spql
