"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_gru_kernels.py
(DPD_ENGINE_BACKEND only affects the package dispatch; this script imports
both backends directly.)
"""

from __future__ import annotations

import time

import numpy as np

from dpdengine.fxp import Q2_10, quantize_array
from dpdengine.kernels import _gru_numpy as knp

try:
    from dpdengine.kernels import _gru_numba as knb
except ImportError:
    knb = None

DUMMY_F = np.zeros(2, dtype=np.float64)
DUMMY_I = np.zeros(2, dtype=np.int64)


def _net(seed=0, h=10):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-1, 1, (3, h, 4)), rng.uniform(-0.8, 0.8, (3, h, h)),
            rng.uniform(-0.5, 0.5, (3, h)), rng.uniform(-0.5, 0.5, (3, h)),
            rng.uniform(-1, 1, (2, h)), rng.uniform(-0.3, 0.3, 2))


def _time(fn, *args, repeats=5):
    fn(*args)  # warmup / JIT
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    wi, wh, bi, bh, wfc, bfc = _net()
    rng = np.random.default_rng(1)

    cases = []

    T = 50_000
    x = rng.uniform(-0.7, 0.7, (T, 2))
    h0 = np.zeros(10)
    cases.append(("float inference, 50k samples",
                  (x, h0, wi, wh, bi, bh, wfc, bfc, 0, 0, DUMMY_F, DUMMY_F,
                   -8.0, 8.0, 0.0, 0, 0),
                  "forward_infer_float"))

    net_q = tuple(quantize_array(a, Q2_10) for a in (wi, wh, bi, bh, wfc, bfc))
    xq = quantize_array(x, Q2_10)
    cases.append(("fixed-point inference, 50k samples",
                  (xq, np.zeros(10, dtype=np.int64), *net_q, 10, 10,
                   Q2_10.raw_min, Q2_10.raw_max, 0, 0, DUMMY_I, DUMMY_I,
                   -8.0, 8.0),
                  "forward_infer_fxp"))

    B, Tf = 64, 50
    xb = rng.uniform(-0.7, 0.7, (B, Tf, 2))
    h0b = np.zeros((B, 10))
    fwd_args = (xb, h0b, wi, wh, bi, bh, wfc, bfc, 0, 0, DUMMY_F, DUMMY_F,
                -8.0, 8.0, 0.0, 0, 0)
    cases.append(("training forward, batch 64 x 50", fwd_args, "forward_train"))

    out = knp.forward_train(*fwd_args)
    gy = rng.normal(size=(B, Tf, 2))
    bwd_args = (gy, *out[1:], out[0], wi, wh, wfc, 0, 0, 0.0, 0, 0)
    cases.append(("training backward, batch 64 x 50", bwd_args, "backward_train"))

    print(f"{'kernel':36s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for label, args, fname in cases:
        t_np = _time(getattr(knp, fname), *args)
        if knb is None:
            print(f"{label:36s} {t_np * 1e3:8.2f}ms {'n/a':>10s}")
            continue
        t_nb = _time(getattr(knb, fname), *args)
        print(f"{label:36s} {t_np * 1e3:8.2f}ms {t_nb * 1e3:8.2f}ms "
              f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
