"""Two's-complement fixed-point arithmetic: saturating, round-half-even.

All quantized weights, activations and I/O samples in this package are raw
integer codes interpreted as ``raw * 2**-frac_bits``.  Narrowing operations
round half to even and saturate (never wrap); dot products accumulate exactly
in a wide integer and round/saturate once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "FxpFormat",
    "FxpValue",
    "Q2_10",
    "quantize",
    "dequantize",
    "fxp_add",
    "fxp_mul",
    "fxp_dot",
    "quantize_array",
    "dequantize_array",
    "rhe_shift",
]


@dataclass(frozen=True)
class FxpFormat:
    """Q-format descriptor: ``total_bits`` wide with ``frac_bits`` fractional."""

    total_bits: int = 12
    frac_bits: int = 10

    def __post_init__(self) -> None:
        if not 2 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits <= self.total_bits - 1:
            raise ValueError(
                f"frac_bits must be in [0, total_bits-1], got {self.frac_bits}"
            )

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min / self.scale

    @property
    def max_value(self) -> float:
        return self.raw_max / self.scale

    @property
    def lsb(self) -> float:
        return 1.0 / self.scale

    def __str__(self) -> str:
        return f"Q{self.total_bits - self.frac_bits}.{self.frac_bits}"


Q2_10 = FxpFormat(12, 10)


@dataclass(frozen=True)
class FxpValue:
    """A single fixed-point scalar: integer code plus its format."""

    raw: int
    fmt: FxpFormat

    def __post_init__(self) -> None:
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(
                f"raw code {self.raw} outside {self.fmt} range "
                f"[{self.fmt.raw_min}, {self.fmt.raw_max}]"
            )

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale


def rhe_shift(v, s: int):
    """Arithmetic right shift by ``s`` with round-half-even on the shifted bits.

    Works on Python ints, numpy integer scalars and integer arrays; this is
    the single rounding primitive shared by the scalar API and the kernels.
    """
    if s == 0:
        return v
    fl = v >> s
    rem = v - (fl << s)
    half = 1 << (s - 1)
    up = (rem > half) | ((rem == half) & ((fl & 1) == 1))
    return fl + up


def _saturate(raw, fmt: FxpFormat):
    if isinstance(raw, np.ndarray):
        return np.clip(raw, fmt.raw_min, fmt.raw_max)
    return min(max(raw, fmt.raw_min), fmt.raw_max)


def quantize(x: float, fmt: FxpFormat = Q2_10) -> FxpValue:
    """Real value to nearest code (half to even), saturating at the format range."""
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    if x >= fmt.max_value:
        return FxpValue(fmt.raw_max, fmt)
    if x <= fmt.min_value:
        return FxpValue(fmt.raw_min, fmt)
    # x * 2**frac is exact in binary floating point, so rint is a true
    # round-half-even of the real product.
    return FxpValue(int(np.rint(x * fmt.scale)), fmt)


def dequantize(v: FxpValue) -> float:
    return v.raw / v.fmt.scale


def _check_fmt(a: FxpValue, b: FxpValue) -> FxpFormat:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")
    return a.fmt


def fxp_add(a: FxpValue, b: FxpValue) -> FxpValue:
    """Saturating add of two values in the same format."""
    fmt = _check_fmt(a, b)
    return FxpValue(_saturate(a.raw + b.raw, fmt), fmt)


def fxp_mul(a: FxpValue, b: FxpValue) -> FxpValue:
    """Full-width product, round-half-even back to the shared format, saturate."""
    fmt = _check_fmt(a, b)
    return FxpValue(_saturate(rhe_shift(a.raw * b.raw, fmt.frac_bits), fmt), fmt)


def fxp_dot(
    a: Sequence[FxpValue],
    b: Sequence[FxpValue],
    acc_frac_bits: int = 20,
    acc_total_bits: int = 32,
) -> FxpValue:
    """Dot product with exact wide accumulation and a single final narrowing.

    Raw products (scale ``2**-(2*frac)``) are summed exactly, rescaled once to
    the accumulator's binary point, saturated to the accumulator width, then
    rounded/saturated back to the element format.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        return FxpValue(0, Q2_10)
    fmt = a[0].fmt
    for x, y in zip(a, b):
        if x.fmt != fmt or y.fmt != fmt:
            raise ValueError("all elements must share one format")
    if acc_frac_bits < fmt.frac_bits:
        raise ValueError("accumulator must keep at least the element precision")

    acc = 0
    for x, y in zip(a, b):
        acc += x.raw * y.raw  # exact, scale 2**-(2*frac)

    prod_frac = 2 * fmt.frac_bits
    if acc_frac_bits >= prod_frac:
        acc <<= acc_frac_bits - prod_frac
    else:
        acc = rhe_shift(acc, prod_frac - acc_frac_bits)

    acc_min = -(1 << (acc_total_bits - 1))
    acc_max = (1 << (acc_total_bits - 1)) - 1
    acc = min(max(acc, acc_min), acc_max)

    raw = rhe_shift(acc, acc_frac_bits - fmt.frac_bits)
    return FxpValue(_saturate(raw, fmt), fmt)


def quantize_array(x: np.ndarray, fmt: FxpFormat = Q2_10) -> np.ndarray:
    """Vectorized quantize to int64 raw codes."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    clipped = np.clip(x, fmt.min_value, fmt.max_value)
    raw = np.rint(clipped * fmt.scale).astype(np.int64)
    return np.clip(raw, fmt.raw_min, fmt.raw_max)


def dequantize_array(raw: np.ndarray, fmt: FxpFormat = Q2_10) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / fmt.scale
