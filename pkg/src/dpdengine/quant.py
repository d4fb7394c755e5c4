"""Model quantization: post-training quantization, fake quantization for QAT,
and the precision-sweep helper.

``dpd_forward_fakequant`` runs the float kernel with fake quantization at
exactly the points the fixed-point kernel rounds, so its dequantized outputs
are bit-identical to true fixed-point inference (the QAT/inference matching
property).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .fxp import FxpFormat, Q2_10, quantize_array, dequantize_array
from .gru import DpdModel, FcWeights, GruWeights, HiddenState, Waveform, _kernel_args, _validate_wave
from .nonlin import LutTable

__all__ = [
    "QuantConfig",
    "fake_quantize",
    "quantize_model",
    "fake_quantize_model",
    "dpd_forward_fakequant",
    "sweep_formats",
]


@dataclass(frozen=True)
class QuantConfig:
    """Weight and activation formats (paper default: Q2.10 for both, W12A12)."""

    weight_fmt: FxpFormat = Q2_10
    activation_fmt: FxpFormat = Q2_10


def fake_quantize(x, fmt: FxpFormat):
    """Quantize-dequantize: the value a QAT forward pass sees.

    Training treats it as a straight-through estimator: unit gradient inside
    the representable range, zero in the saturated region.
    """
    if np.isscalar(x) or np.ndim(x) == 0:
        if not math.isfinite(float(x)):
            raise ValueError("fake_quantize requires finite input")
        arr = quantize_array(np.asarray([x], dtype=np.float64), fmt)
        return float(dequantize_array(arr, fmt)[0])
    return dequantize_array(quantize_array(x, fmt), fmt)


def quantize_model(model: DpdModel, cfg: QuantConfig) -> tuple[DpdModel, int]:
    """Post-training quantization to raw integer codes.

    Returns the fixed-flavor model and the number of weights that saturated.
    """
    if model.flavor != "float":
        raise ValueError("quantize_model expects a float-flavor model")
    wf = cfg.weight_fmt
    saturated = 0
    raw = {}
    for name, arr in model.param_arrays().items():
        codes = np.rint(np.clip(arr, wf.min_value, wf.max_value) * wf.scale)
        saturated += int(np.sum((arr < wf.min_value) | (arr > wf.max_value)))
        raw[name] = codes.astype(np.int64)
    gq = GruWeights(raw["w_ir"], raw["w_iz"], raw["w_in"],
                    raw["w_hr"], raw["w_hz"], raw["w_hn"],
                    raw["b_ir"], raw["b_iz"], raw["b_in"],
                    raw["b_hr"], raw["b_hz"], raw["b_hn"])
    fq = FcWeights(raw["w_fc"], raw["b_fc"])
    fixed = replace(model, gru=gq, fc=fq, flavor="fixed",
                    weight_fmt=wf, act_fmt=cfg.activation_fmt)
    return fixed, saturated


def _fq_lut(lut: LutTable | None, fmt: FxpFormat) -> LutTable | None:
    if lut is None:
        return None
    return LutTable(fake_quantize(lut.entries, fmt), lut.input_min, lut.input_max)


def fake_quantize_model(model: DpdModel, cfg: QuantConfig) -> DpdModel:
    """Float model with every weight (and LUT entry) snapped to its code value."""
    if model.flavor != "float":
        raise ValueError("fake_quantize_model expects a float-flavor model")
    wf = cfg.weight_fmt
    q = {name: fake_quantize(arr, wf) for name, arr in model.param_arrays().items()}
    gq = GruWeights(q["w_ir"], q["w_iz"], q["w_in"],
                    q["w_hr"], q["w_hz"], q["w_hn"],
                    q["b_ir"], q["b_iz"], q["b_in"],
                    q["b_hr"], q["b_hz"], q["b_hn"])
    fq = FcWeights(q["w_fc"], q["b_fc"])
    return replace(model, gru=gq, fc=fq,
                   gate_lut=_fq_lut(model.gate_lut, cfg.activation_fmt),
                   cand_lut=_fq_lut(model.cand_lut, cfg.activation_fmt))


def dpd_forward_fakequant(
    wave: Waveform,
    model: DpdModel,
    cfg: QuantConfig,
    initial_h: HiddenState | None = None,
) -> tuple[Waveform, HiddenState]:
    """Float forward with fake quantization of weights, activations and I/O."""
    s = _validate_wave(wave)
    peak = float(np.max(np.abs(s)))
    factor = peak if peak > 1.0 else 1.0
    s = s / factor

    afmt = cfg.activation_fmt
    fqm = fake_quantize_model(model, cfg)
    gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi = _kernel_args(fqm)

    x = np.stack([s.real, s.imag], axis=1)
    x = fake_quantize(x, afmt)
    h0 = (initial_h.h.astype(np.float64) if initial_h is not None
          else np.zeros(model.hidden, dtype=np.float64))
    wi, wh, bi, bh = fqm.gru.stacked()
    y, hf = kernels.forward_infer_float(
        x, h0, wi, wh, bi, bh, fqm.fc.w_fc, fqm.fc.b_fc,
        gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
        float(afmt.scale), afmt.raw_min, afmt.raw_max)
    out = (y[:, 0] + 1j * y[:, 1]) * factor
    return Waveform(out, wave.sample_rate_hz, scale=wave.scale), HiddenState(hf)


def sweep_formats(total_bits=(6, 8, 10, 12, 14, 16)) -> list[FxpFormat]:
    """The Q2.x family for the precision sweep: frac = total - 2."""
    return [FxpFormat(t, t - 2) for t in total_bits]
