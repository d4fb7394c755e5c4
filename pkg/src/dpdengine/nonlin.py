"""Activation functions for the DPD network.

Three families:
  * exact piecewise-linear ``hardsigmoid`` / ``hardtanh`` (the hardware path,
    reduced to comparators and shifts in the fixed-point flavor),
  * floating-point reference ``sigmoid`` / ``tanh``,
  * a look-up-table baseline (uniform grid, nearest entry, no interpolation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fxp import FxpFormat, quantize_array, dequantize_array, rhe_shift

__all__ = [
    "ACTIVATION_KINDS",
    "hardsigmoid",
    "hardtanh",
    "hardsigmoid_raw",
    "hardtanh_raw",
    "ref_sigmoid",
    "ref_tanh",
    "LutTable",
    "build_lut",
    "lut_activate",
    "lut_activate_raw",
]

# Gate/candidate activation selectors understood by the model.
ACTIVATION_KINDS = ("hard", "ref", "lut")


def hardsigmoid(x):
    """1 for x > 2, x/4 + 1/2 on [-2, 2], 0 for x < -2.

    The clip form below is branch-for-branch identical to that definition
    (boundary points fall on the linear segment either way).
    """
    return np.clip(np.asarray(x, dtype=np.float64) * 0.25 + 0.5, 0.0, 1.0)[()]


def hardtanh(x):
    """1 for x > 1, x on [-1, 1], -1 for x < -1."""
    return np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)[()]


def hardsigmoid_raw(raw, fmt: FxpFormat):
    """Fixed-point hardsigmoid on raw codes: shift right 2 (half-even), add 1/2.

    Needs frac_bits >= 1 so that the 1/2 constant is a whole code.
    """
    if fmt.frac_bits < 1:
        raise ValueError("hardsigmoid_raw requires at least one fractional bit")
    one = min(1 << fmt.frac_bits, fmt.raw_max)
    two = 2 << fmt.frac_bits
    half = 1 << (fmt.frac_bits - 1)
    mid = rhe_shift(raw, 2) + half
    if isinstance(raw, np.ndarray):
        out = np.where(raw > two, one, np.where(raw < -two, 0, mid))
        return np.clip(out, 0, one)
    if raw > two:
        return one
    if raw < -two:
        return 0
    return min(max(int(mid), 0), one)


def hardtanh_raw(raw, fmt: FxpFormat):
    """Fixed-point hardtanh: clamp raw codes at +/-1.0."""
    one = min(1 << fmt.frac_bits, fmt.raw_max)
    neg_one = max(-(1 << fmt.frac_bits), fmt.raw_min)
    if isinstance(raw, np.ndarray):
        return np.clip(raw, neg_one, one)
    return min(max(int(raw), neg_one), one)


def ref_sigmoid(x):
    """Library-precision logistic sigmoid, overflow-safe for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out[()]


def ref_tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))[()]


@dataclass(frozen=True)
class LutTable:
    """Uniform-grid activation table: entry i samples f(input_min + i*step)
    with step = (input_max - input_min) / entry_count."""

    entries: np.ndarray
    input_min: float
    input_max: float

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.float64)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 1 or entries.size < 2:
            raise ValueError("LUT needs a 1-d table with at least 2 entries")
        if not np.all(np.isfinite(entries)):
            raise ValueError("LUT entries must be finite")
        if not self.input_min < self.input_max:
            raise ValueError("LUT input range must be non-degenerate")

    @property
    def entry_count(self) -> int:
        return int(self.entries.size)

    @property
    def step(self) -> float:
        return (self.input_max - self.input_min) / self.entry_count


def build_lut(
    kind: str,
    entry_count: int = 256,
    input_min: float = -8.0,
    input_max: float = 8.0,
    fmt: FxpFormat | None = None,
) -> LutTable:
    """Sample sigmoid or tanh on a uniform grid; optionally quantize entries."""
    if kind not in ("sigmoid", "tanh"):
        raise ValueError(f"unknown LUT kind {kind!r}")
    step = (input_max - input_min) / entry_count
    grid = input_min + np.arange(entry_count) * step
    entries = ref_sigmoid(grid) if kind == "sigmoid" else ref_tanh(grid)
    if fmt is not None:
        entries = dequantize_array(quantize_array(entries, fmt), fmt)
    if np.any(np.diff(entries) < 0):
        raise ValueError("LUT entries for sigmoid/tanh must be monotone")
    return LutTable(entries, input_min, input_max)


def lut_index(x, lo: float, hi: float, n: int):
    """Nearest grid index for input x, clamped to the table."""
    step = (hi - lo) / n
    idx = np.rint((np.asarray(x, dtype=np.float64) - lo) / step)
    return np.clip(idx, 0, n - 1).astype(np.int64)


def lut_activate(x, table: LutTable):
    """Clamp to the table range and return the nearest stored sample."""
    idx = lut_index(x, table.input_min, table.input_max, table.entry_count)
    return table.entries[idx][()] if isinstance(idx, np.ndarray) else table.entries[idx]


def lut_activate_raw(raw, entries_raw: np.ndarray, fmt: FxpFormat, lo: float, hi: float):
    """Fixed-point LUT lookup: index from the dequantized code, entry is a raw code."""
    x = np.asarray(raw, dtype=np.float64) / fmt.scale
    idx = lut_index(x, lo, hi, int(entries_raw.size))
    out = entries_raw[idx]
    return out[()] if isinstance(out, np.ndarray) else int(out)
