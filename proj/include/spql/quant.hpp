// Copyright 2026 The spql Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spql {

/// Activations are kept in full 32-bit precision everywhere.
using Vector = std::vector<float>;

/// Dense row-major matrix of 32-bit reals.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values);

  static Matrix identity(std::size_t n);

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// Symmetric low-bit weight matrix with one scale per (row, group).
///
/// Codes live in [-(2^(bits-1)-1), 2^(bits-1)-1]; for bits == 4 two codes are
/// packed per byte in row-major element order, the even element in the low
/// nibble. For bits == 8 each code is one two's-complement byte.
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int bits = 4;
  std::size_t group_size = 0;
  std::vector<std::uint8_t> codes;
  std::vector<float> scales;
  bool rotated = false;

  std::size_t groups_per_row() const { return cols / group_size; }
  int max_code() const { return (1 << (bits - 1)) - 1; }
  int code(std::size_t r, std::size_t c) const;
  float scale(std::size_t r, std::size_t group) const { return scales[r * groups_per_row() + group]; }

  bool operator==(const QuantizedMatrix&) const = default;
};

/// Bytes needed to hold `count` codes of the given width.
std::size_t packed_code_bytes(std::size_t count, int bits);

/// Round-to-nearest symmetric group quantization. scale = max|w| / (2^(bits-1)-1)
/// per group, code = round-half-away-from-zero(w / scale).
QuantizedMatrix quantize_group(const Matrix& m, int bits, std::size_t group_size);

/// Per-output-channel quantization, i.e. one group spanning the whole row.
inline QuantizedMatrix quantize_per_channel(const Matrix& m, int bits) {
  return quantize_group(m, bits, m.cols);
}

Matrix dequantize(const QuantizedMatrix& q);

/// In-place orthonormal Walsh-Hadamard transform (Sylvester ordering).
void hadamard_transform(std::span<float> x);

/// Returns m * H^T with H the orthonormal Hadamard matrix of size m.cols.
Matrix hadamard_rotate(const Matrix& m);

bool is_power_of_two(std::size_t n);

/// Dequantizing matrix-vector product. Rows use the same fixed reduction
/// order as gemv, so the result is bit-identical to gemv(dequantize(q), x).
/// When q.rotated is set the caller passes an already transformed x.
Vector qgemv(const QuantizedMatrix& q, std::span<const float> x);

/// Reference FP32 matrix-vector product. Each dot product accumulates eight
/// interleaved lanes and sums them in a fixed order.
Vector gemv(const Matrix& m, std::span<const float> x);

/// Row i of the result is gemv(m, x.row(i)), bit for bit.
Matrix gemm(const Matrix& m, const Matrix& x);
/// Row i of the result is qgemv(q, x.row(i)), bit for bit.
Matrix qgemm(const QuantizedMatrix& q, const Matrix& x);

}  // namespace spql
