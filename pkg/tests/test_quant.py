"""Quantization: fake-quantize contracts and the QAT/inference matching
property (fake-quantized float forward == true fixed-point forward)."""

import numpy as np
import pytest

from dpdengine.fxp import Q2_10
from dpdengine.gru import dpd_forward
from dpdengine.quant import (
    QuantConfig,
    dpd_forward_fakequant,
    fake_quantize,
    fake_quantize_model,
    quantize_model,
    sweep_formats,
)
from dpdengine.signals import Waveform
from dpdengine.trainer import init_model


class TestFakeQuantize:
    def test_representable_passes_through(self):
        assert fake_quantize(0.5, Q2_10) == 0.5

    def test_one_third(self):
        assert fake_quantize(1.0 / 3.0, Q2_10) == 0.3330078125

    def test_clamps(self):
        assert fake_quantize(5.0, Q2_10) == 1.9990234375

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-3, 3, 10000)
        once = fake_quantize(x, Q2_10)
        assert np.array_equal(fake_quantize(once, Q2_10), once)

    def test_error_bound_in_range(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(Q2_10.min_value, Q2_10.max_value, 10000)
        assert np.max(np.abs(fake_quantize(x, Q2_10) - x)) <= 2.0 ** -11

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            fake_quantize(float("nan"), Q2_10)


class TestQuantizeModel:
    def test_zero_model(self):
        m = init_model(seed=0)
        for arr in m.param_arrays().values():
            arr[...] = 0.0
        mq, saturated = quantize_model(m, QuantConfig())
        assert saturated == 0
        assert all(np.all(a == 0) for a in mq.param_arrays().values())
        assert mq.flavor == "fixed"

    def test_half_code(self):
        m = init_model(seed=0)
        m.gru.w_ir[0, 0] = 0.5
        mq, _ = quantize_model(m, QuantConfig())
        assert mq.gru.w_ir[0, 0] == 512

    def test_saturation_counted(self):
        m = init_model(seed=0)
        m.gru.w_ir[0, 0] = 3.0
        m.fc.b_fc[1] = -2.5
        mq, saturated = quantize_model(m, QuantConfig())
        assert mq.gru.w_ir[0, 0] == 2047
        assert saturated == 2

    def test_requires_float(self):
        mq, _ = quantize_model(init_model(seed=1), QuantConfig())
        with pytest.raises(ValueError):
            quantize_model(mq, QuantConfig())


class TestQatMatching:
    def _wave(self, n, seed):
        rng = np.random.default_rng(seed)
        s = 0.85 * (rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)) / np.sqrt(2)
        return Waveform(s, 1e8)

    def test_fakequant_equals_fixed_bitexact(self):
        # the property that makes QAT meaningful, on a batch of random models
        cfg = QuantConfig()
        for seed in range(20):
            m = init_model(seed=seed)
            mq, _ = quantize_model(m, cfg)
            w = self._wave(500, seed)
            y_fake, h_fake = dpd_forward_fakequant(w, m, cfg)
            y_fix, h_fix = dpd_forward(w, mq)
            assert np.array_equal(y_fake.samples, y_fix.samples)
            assert np.array_equal(h_fake.h,
                                  h_fix.h / cfg.activation_fmt.scale)

    def test_matching_across_sweep_formats(self):
        for fmt in sweep_formats((8, 12, 16)):
            cfg = QuantConfig(fmt, fmt)
            m = init_model(seed=3)
            mq, _ = quantize_model(m, cfg)
            w = self._wave(300, 42)
            y_fake, _ = dpd_forward_fakequant(w, m, cfg)
            y_fix, _ = dpd_forward(w, mq)
            assert np.array_equal(y_fake.samples, y_fix.samples)

    def test_matching_with_lut_activations(self):
        cfg = QuantConfig()
        m = init_model(seed=5, gate_activation="lut", cand_activation="lut")
        mq, _ = quantize_model(m, cfg)
        w = self._wave(400, 7)
        y_fake, _ = dpd_forward_fakequant(w, m, cfg)
        y_fix, _ = dpd_forward(w, mq)
        assert np.array_equal(y_fake.samples, y_fix.samples)


def test_fake_quantize_model_snaps_weights():
    m = init_model(seed=2)
    fq = fake_quantize_model(m, QuantConfig())
    for name, arr in fq.param_arrays().items():
        assert np.array_equal(arr, fake_quantize(arr, Q2_10)), name


def test_sweep_formats():
    fmts = sweep_formats()
    assert [f.total_bits for f in fmts] == [6, 8, 10, 12, 14, 16]
    assert all(f.total_bits - f.frac_bits == 2 for f in fmts)
