"""Backend contract: numba and numpy kernels agree (bit-exactly for integer
and fake-quantized paths), and the env-flag dispatch works."""

import os
import subprocess
import sys

import numpy as np
import pytest

from dpdengine.fxp import Q2_10, dequantize_array, quantize_array
from dpdengine.kernels import _gru_numpy as knp

knb = pytest.importorskip("dpdengine.kernels._gru_numba")

DUMMY_F = np.zeros(2, dtype=np.float64)
DUMMY_I = np.zeros(2, dtype=np.int64)


def random_net(seed, h=10):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-1, 1, (3, h, 4)), rng.uniform(-0.8, 0.8, (3, h, h)),
            rng.uniform(-0.5, 0.5, (3, h)), rng.uniform(-0.5, 0.5, (3, h)),
            rng.uniform(-1, 1, (2, h)), rng.uniform(-0.3, 0.3, 2))


def random_input(seed, T):
    rng = np.random.default_rng(seed + 1000)
    return rng.uniform(-0.68, 0.68, (T, 2))


@pytest.mark.parametrize("gate_kind,cand_kind", [(0, 0), (1, 1)])
def test_float_infer_backends_close(gate_kind, cand_kind):
    wi, wh, bi, bh, wfc, bfc = random_net(0)
    x = random_input(0, 300)
    h0 = np.zeros(10)
    args = (x, h0, wi, wh, bi, bh, wfc, bfc, gate_kind, cand_kind,
            DUMMY_F, DUMMY_F, -8.0, 8.0, 0.0, 0, 0)
    y1, hf1 = knp.forward_infer_float(*args)
    y2, hf2 = knb.forward_infer_float(*args)
    assert np.allclose(y1, y2, atol=1e-12, rtol=0)
    assert np.allclose(hf1, hf2, atol=1e-12, rtol=0)


def test_fakequant_infer_backends_bitexact():
    for seed in range(5):
        wi, wh, bi, bh, wfc, bfc = random_net(seed)
        fq = lambda a: dequantize_array(quantize_array(a, Q2_10), Q2_10)
        net = tuple(fq(a) for a in (wi, wh, bi, bh, wfc, bfc))
        x = fq(random_input(seed, 250))
        args = (x, np.zeros(10), *net, 0, 0, DUMMY_F, DUMMY_F, -8.0, 8.0,
                float(Q2_10.scale), Q2_10.raw_min, Q2_10.raw_max)
        y1, _ = knp.forward_infer_float(*args)
        y2, _ = knb.forward_infer_float(*args)
        assert np.array_equal(y1, y2)


def test_fxp_infer_backends_bitexact():
    for seed in range(5):
        wi, wh, bi, bh, wfc, bfc = random_net(seed)
        net = tuple(quantize_array(a, Q2_10) for a in (wi, wh, bi, bh, wfc, bfc))
        xq = quantize_array(random_input(seed, 250), Q2_10)
        args = (xq, np.zeros(10, dtype=np.int64), *net, 10, 10,
                Q2_10.raw_min, Q2_10.raw_max, 0, 0, DUMMY_I, DUMMY_I, -8.0, 8.0)
        y1, h1 = knp.forward_infer_fxp(*args)
        y2, h2 = knb.forward_infer_fxp(*args)
        assert np.array_equal(y1, y2)
        assert np.array_equal(h1, h2)


def test_train_forward_backends_match():
    wi, wh, bi, bh, wfc, bfc = random_net(3)
    rng = np.random.default_rng(3)
    x = rng.uniform(-0.7, 0.7, (4, 30, 2))
    h0 = np.zeros((4, 10))
    args = (x, h0, wi, wh, bi, bh, wfc, bfc, 1, 1, DUMMY_F, DUMMY_F,
            -8.0, 8.0, 0.0, 0, 0)
    out1 = knp.forward_train(*args)
    out2 = knb.forward_train(*args)
    for a, b in zip(out1, out2):
        assert np.allclose(a, b, atol=1e-12, rtol=0)


def test_backward_backends_match():
    wi, wh, bi, bh, wfc, bfc = random_net(4)
    rng = np.random.default_rng(4)
    x = rng.uniform(-0.7, 0.7, (3, 25, 2))
    h0 = np.zeros((3, 10))
    fwd_args = (x, h0, wi, wh, bi, bh, wfc, bfc, 0, 0, DUMMY_F, DUMMY_F,
                -8.0, 8.0, 0.0, 0, 0)
    out = knp.forward_train(*fwd_args)
    gy = rng.normal(size=(3, 25, 2))
    g1 = knp.backward_train(gy, out[1], out[2], out[3], out[4], out[5],
                            out[6], out[7], out[8], out[0],
                            wi, wh, wfc, 0, 0, 0.0, 0, 0)
    g2 = knb.backward_train(gy, out[1], out[2], out[3], out[4], out[5],
                            out[6], out[7], out[8], out[0],
                            wi, wh, wfc, 0, 0, 0.0, 0, 0)
    for a, b in zip(g1, g2):
        assert np.allclose(a, b, atol=1e-10, rtol=1e-9)


def test_backend_env_dispatch():
    code = ("import dpdengine.kernels as k; print(k.backend_name())")
    for env_val, expect in (("numpy", "numpy"), ("numba", "numba"),
                            ("auto", "numba")):
        env = dict(os.environ, DPD_ENGINE_BACKEND=env_val)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == expect

    env = dict(os.environ, DPD_ENGINE_BACKEND="bogus")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0
