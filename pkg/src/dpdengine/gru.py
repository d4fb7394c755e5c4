"""GRU-RNN DPD forward path.

Per sample: a four-entry feature vector (I, Q, I^2+Q^2, (I^2+Q^2)^2) feeds a
single-layer GRU (reset/update gates, candidate state with the reset gate
multiplying the full hidden pre-activation including its bias), and a 2-wide
linear output layer maps the hidden state back to predistorted I/Q.

Runs in float64 or bit-exact fixed point with pluggable activations.  The
streaming loop lives in ``dpdengine.kernels``; the per-step operations here
are the plain-numpy contract the kernels must match.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .fxp import FxpFormat, quantize_array, dequantize_array, rhe_shift
from .nonlin import (
    ACTIVATION_KINDS,
    LutTable,
    hardsigmoid,
    hardtanh,
    lut_activate,
    ref_sigmoid,
    ref_tanh,
)
from .signals import Waveform

__all__ = [
    "GruWeights",
    "FcWeights",
    "DpdModel",
    "HiddenState",
    "INPUT_FEATURES",
    "HIDDEN_UNITS",
    "OUTPUT_DIM",
    "extract_features",
    "extract_features_raw",
    "gru_step",
    "fc_output",
    "dpd_forward",
    "reset_state",
]

INPUT_FEATURES = 4
HIDDEN_UNITS = 10
OUTPUT_DIM = 2

_KIND_CODE = {"hard": 0, "ref": 1, "lut": 2}
_DUMMY_TAB = np.zeros(2, dtype=np.float64)


@dataclass
class GruWeights:
    """All GRU cell parameters. Input matrices are [hidden, 4], hidden
    matrices [hidden, hidden], biases [hidden]."""

    w_ir: np.ndarray
    w_iz: np.ndarray
    w_in: np.ndarray
    w_hr: np.ndarray
    w_hz: np.ndarray
    w_hn: np.ndarray
    b_ir: np.ndarray
    b_iz: np.ndarray
    b_in: np.ndarray
    b_hr: np.ndarray
    b_hz: np.ndarray
    b_hn: np.ndarray

    def __post_init__(self) -> None:
        h, i = self.w_ir.shape
        for name in ("w_iz", "w_in"):
            if getattr(self, name).shape != (h, i):
                raise ValueError(f"{name} shape mismatch")
        for name in ("w_hr", "w_hz", "w_hn"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"{name} shape mismatch")
        for name in ("b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} shape mismatch")

    @property
    def hidden(self) -> int:
        return self.w_ir.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_ir.shape[1]

    def stacked(self):
        """Kernel layout: (wi[3,h,i], wh[3,h,h], bi[3,h], bh[3,h]), gate order r,z,n."""
        wi = np.stack([self.w_ir, self.w_iz, self.w_in])
        wh = np.stack([self.w_hr, self.w_hz, self.w_hn])
        bi = np.stack([self.b_ir, self.b_iz, self.b_in])
        bh = np.stack([self.b_hr, self.b_hz, self.b_hn])
        return wi, wh, bi, bh


@dataclass
class FcWeights:
    w_fc: np.ndarray  # [2, hidden]
    b_fc: np.ndarray  # [2]

    def __post_init__(self) -> None:
        if self.w_fc.ndim != 2 or self.b_fc.shape != (self.w_fc.shape[0],):
            raise ValueError("FC weight shapes inconsistent")


@dataclass
class DpdModel:
    """GRU + FC model. ``flavor`` is "float" (float64 arrays) or "fixed"
    (int64 raw codes with weight_fmt/act_fmt set)."""

    gru: GruWeights
    fc: FcWeights
    gate_activation: str = "hard"
    cand_activation: str = "hard"
    flavor: str = "float"
    weight_fmt: FxpFormat | None = None
    act_fmt: FxpFormat | None = None
    gate_lut: LutTable | None = None
    cand_lut: LutTable | None = None

    def __post_init__(self) -> None:
        if self.gate_activation not in ACTIVATION_KINDS:
            raise ValueError(f"unknown gate activation {self.gate_activation!r}")
        if self.cand_activation not in ACTIVATION_KINDS:
            raise ValueError(f"unknown cand activation {self.cand_activation!r}")
        if self.flavor not in ("float", "fixed"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.flavor == "fixed" and (self.weight_fmt is None or self.act_fmt is None):
            raise ValueError("fixed flavor requires weight_fmt and act_fmt")
        if "lut" in (self.gate_activation, self.cand_activation):
            if self.gate_activation == "lut" and self.gate_lut is None:
                raise ValueError("gate LUT activation needs gate_lut")
            if self.cand_activation == "lut" and self.cand_lut is None:
                raise ValueError("cand LUT activation needs cand_lut")

    @property
    def hidden(self) -> int:
        return self.gru.hidden

    def param_count(self) -> int:
        g = self.gru
        total = 0
        for a in (g.w_ir, g.w_iz, g.w_in, g.w_hr, g.w_hz, g.w_hn,
                  g.b_ir, g.b_iz, g.b_in, g.b_hr, g.b_hz, g.b_hn,
                  self.fc.w_fc, self.fc.b_fc):
            total += a.size
        return total

    def param_arrays(self) -> dict[str, np.ndarray]:
        g = self.gru
        return {
            "w_ir": g.w_ir, "w_iz": g.w_iz, "w_in": g.w_in,
            "w_hr": g.w_hr, "w_hz": g.w_hz, "w_hn": g.w_hn,
            "b_ir": g.b_ir, "b_iz": g.b_iz, "b_in": g.b_in,
            "b_hr": g.b_hr, "b_hz": g.b_hz, "b_hn": g.b_hn,
            "w_fc": self.fc.w_fc, "b_fc": self.fc.b_fc,
        }

    def copy(self) -> "DpdModel":
        g = self.gru
        return replace(
            self,
            gru=GruWeights(*(a.copy() for a in (
                g.w_ir, g.w_iz, g.w_in, g.w_hr, g.w_hz, g.w_hn,
                g.b_ir, g.b_iz, g.b_in, g.b_hr, g.b_hz, g.b_hn))),
            fc=FcWeights(self.fc.w_fc.copy(), self.fc.b_fc.copy()),
        )


@dataclass
class HiddenState:
    """Hidden vector plus the last step's gates (kept for inspection)."""

    h: np.ndarray
    r: np.ndarray | None = None
    z: np.ndarray | None = None
    n: np.ndarray | None = None


def reset_state(model: DpdModel | None = None, hidden: int = HIDDEN_UNITS) -> HiddenState:
    """Zero state; both training and inference start here."""
    if model is not None:
        hidden = model.hidden
        if model.flavor == "fixed":
            return HiddenState(np.zeros(hidden, dtype=np.int64))
    return HiddenState(np.zeros(hidden, dtype=np.float64))


def extract_features(s: complex) -> np.ndarray:
    """[I, Q, I^2+Q^2, (I^2+Q^2)^2] for one sample."""
    i, q = float(np.real(s)), float(np.imag(s))
    p = i * i + q * q
    return np.array([i, q, p, p * p], dtype=np.float64)


def extract_features_raw(i_raw: int, q_raw: int, fmt: FxpFormat) -> np.ndarray:
    """Fixed-point feature vector: each square through the saturating multiply."""
    f = fmt.frac_bits

    def _sat(v):
        return min(max(int(v), fmt.raw_min), fmt.raw_max)

    s1 = _sat(rhe_shift(i_raw * i_raw, f))
    s2 = _sat(rhe_shift(q_raw * q_raw, f))
    f3 = _sat(s1 + s2)
    f4 = _sat(rhe_shift(f3 * f3, f))
    return np.array([i_raw, q_raw, f3, f4], dtype=np.int64)


def _apply_gate(v, kind: str, lut: LutTable | None):
    if kind == "hard":
        return hardsigmoid(v)
    if kind == "ref":
        return ref_sigmoid(v)
    return lut_activate(v, lut)


def _apply_cand(v, kind: str, lut: LutTable | None):
    if kind == "hard":
        return hardtanh(v)
    if kind == "ref":
        return ref_tanh(v)
    return lut_activate(v, lut)


def gru_step(
    x: np.ndarray,
    h_prev: HiddenState | np.ndarray,
    w: GruWeights,
    gate_activation: str = "hard",
    cand_activation: str = "hard",
    gate_lut: LutTable | None = None,
    cand_lut: LutTable | None = None,
) -> HiddenState:
    """One float GRU step.  The reset gate scales the full hidden-side
    candidate pre-activation, bias included."""
    h = h_prev.h if isinstance(h_prev, HiddenState) else np.asarray(h_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (w.input_dim,) or h.shape != (w.hidden,):
        raise ValueError(
            f"dimension mismatch: x {x.shape}, h {h.shape}, "
            f"expected ({w.input_dim},), ({w.hidden},)"
        )
    r = _apply_gate(w.w_ir @ x + w.b_ir + w.w_hr @ h + w.b_hr,
                    gate_activation, gate_lut)
    z = _apply_gate(w.w_iz @ x + w.b_iz + w.w_hz @ h + w.b_hz,
                    gate_activation, gate_lut)
    n = _apply_cand(w.w_in @ x + w.b_in + r * (w.w_hn @ h + w.b_hn),
                    cand_activation, cand_lut)
    h_new = (1.0 - z) * n + z * h
    return HiddenState(h_new, r=r, z=z, n=n)


def fc_output(h: HiddenState | np.ndarray, w: FcWeights) -> complex:
    """Linear readout to a predistorted I/Q sample."""
    hv = h.h if isinstance(h, HiddenState) else np.asarray(h, dtype=np.float64)
    if hv.shape != (w.w_fc.shape[1],):
        raise ValueError(f"hidden dim {hv.shape} does not match FC {w.w_fc.shape}")
    out = w.w_fc @ hv + w.b_fc
    return complex(out[0], out[1])


def _kernel_args(model: DpdModel):
    gate_kind = _KIND_CODE[model.gate_activation]
    cand_kind = _KIND_CODE[model.cand_activation]
    tab_lo, tab_hi = -8.0, 8.0
    gate_tab = _DUMMY_TAB
    cand_tab = _DUMMY_TAB
    if gate_kind == 2:
        gate_tab = model.gate_lut.entries
        tab_lo, tab_hi = model.gate_lut.input_min, model.gate_lut.input_max
    if cand_kind == 2:
        cand_tab = model.cand_lut.entries
        tab_lo, tab_hi = model.cand_lut.input_min, model.cand_lut.input_max
        if gate_kind == 2 and (model.gate_lut.input_min != tab_lo
                               or model.gate_lut.input_max != tab_hi):
            raise ValueError("gate and cand LUTs must share an input range")
    return gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi


def _validate_wave(wave: Waveform) -> np.ndarray:
    s = np.asarray(wave.samples, dtype=np.complex128)
    if s.size == 0:
        raise ValueError("waveform is empty")
    bad = np.flatnonzero(~np.isfinite(s))
    if bad.size:
        raise ValueError(f"non-finite sample at index {int(bad[0])}")
    return s


def dpd_forward(
    wave: Waveform,
    model: DpdModel,
    initial_h: HiddenState | None = None,
) -> tuple[Waveform, HiddenState]:
    """Stream a waveform through the DPD; returns the output waveform and the
    final hidden state (for chunked streaming).

    Input is peak-normalized to |s| <= 1 when needed (the fourth feature
    otherwise overruns the Q2.x range); the factor is reapplied at the output.
    """
    s = _validate_wave(wave)
    peak = float(np.max(np.abs(s)))
    factor = peak if peak > 1.0 else 1.0
    s = s / factor

    gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi = _kernel_args(model)
    x = np.stack([s.real, s.imag], axis=1)

    if model.flavor == "fixed":
        afmt = model.act_fmt
        xq = quantize_array(x, afmt)
        h0 = (initial_h.h.astype(np.int64) if initial_h is not None
              else np.zeros(model.hidden, dtype=np.int64))
        wi, wh, bi, bh = model.gru.stacked()
        gate_tabq = (quantize_array(gate_tab, afmt) if gate_kind == 2 else
                     np.zeros(2, dtype=np.int64))
        cand_tabq = (quantize_array(cand_tab, afmt) if cand_kind == 2 else
                     np.zeros(2, dtype=np.int64))
        yq, hq = kernels.forward_infer_fxp(
            xq, h0, wi, wh, bi, bh, model.fc.w_fc, model.fc.b_fc,
            model.weight_fmt.frac_bits, afmt.frac_bits,
            afmt.raw_min, afmt.raw_max,
            gate_kind, cand_kind, gate_tabq, cand_tabq, tab_lo, tab_hi)
        out = dequantize_array(yq[:, 0], afmt) + 1j * dequantize_array(yq[:, 1], afmt)
        final = HiddenState(hq)
    else:
        h0 = (initial_h.h.astype(np.float64) if initial_h is not None
              else np.zeros(model.hidden, dtype=np.float64))
        wi, wh, bi, bh = model.gru.stacked()
        y, hf = kernels.forward_infer_float(
            x, h0, wi, wh, bi, bh, model.fc.w_fc, model.fc.b_fc,
            gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
            0.0, 0, 0)
        out = y[:, 0] + 1j * y[:, 1]
        final = HiddenState(hf)

    return Waveform(out * factor, wave.sample_rate_hz, scale=wave.scale), final
