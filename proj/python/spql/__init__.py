# Copyright 2026 The spql Authors
# SPDX-License-Identifier: Apache-2.0
"""Speculative decoding and weight quantization on a toy transformer."""

from ._spql import (
    ConfigError,
    FormatError,
    InputError,
    Model,
    QuantizedMatrix,
    RunError,
    compare_reports,
    cost_sweep,
    decode,
    eq1_latency_ratio,
    forward_cost,
    gemv,
    hadamard_rotate,
    hadamard_transform,
    quantize,
    run_bench,
    tau_oracle,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "InputError",
    "Model",
    "QuantizedMatrix",
    "RunError",
    "compare_reports",
    "cost_sweep",
    "decode",
    "eq1_latency_ratio",
    "forward_cost",
    "gemv",
    "hadamard_rotate",
    "hadamard_transform",
    "quantize",
    "run_bench",
    "tau_oracle",
]
