"""Pure-numpy GRU-DPD kernels (fallback backend).

Semantics contract shared with the numba backend:
  * fixed-point kernels are bit-identical between backends (integer math),
  * fake-quantized float kernels are bit-identical too, because every
    intermediate sum of on-grid values is exact in float64,
  * plain float kernels may differ in the last ulp (summation order).

Activation kinds: 0 = hard PWL, 1 = float reference, 2 = LUT.
``a_scale == 0`` disables fake quantization.
"""

from __future__ import annotations

import numpy as np

from ..fxp import rhe_shift


def _fq(v, a_scale, a_qmin, a_qmax):
    if a_scale == 0.0:
        return v
    return np.clip(np.rint(v * a_scale), a_qmin, a_qmax) / a_scale


def _sigmoid(v):
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def _lut(v, tab, lo, hi):
    n = tab.shape[0]
    step = (hi - lo) / n
    idx = np.clip(np.rint((v - lo) / step), 0, n - 1).astype(np.int64)
    return tab[idx]


def _act_gate(v, kind, tab, lo, hi):
    if kind == 0:
        return np.clip(v * 0.25 + 0.5, 0.0, 1.0)
    if kind == 1:
        return _sigmoid(v)
    return _lut(v, tab, lo, hi)


def _act_cand(v, kind, tab, lo, hi):
    if kind == 0:
        return np.clip(v, -1.0, 1.0)
    if kind == 1:
        return np.tanh(v)
    return _lut(v, tab, lo, hi)


def _features(i, q, a_scale, a_qmin, a_qmax):
    s1 = _fq(i * i, a_scale, a_qmin, a_qmax)
    s2 = _fq(q * q, a_scale, a_qmin, a_qmax)
    f3 = _fq(s1 + s2, a_scale, a_qmin, a_qmax)
    f4 = _fq(f3 * f3, a_scale, a_qmin, a_qmax)
    return i, q, f3, f4


def forward_infer_float(x, h0, wi, wh, bi, bh, wfc, bfc,
                        gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                        a_scale, a_qmin, a_qmax):
    """Single-stream float forward. x: [T,2], h0: [H]. Returns (y[T,2], h[H])."""
    T = x.shape[0]
    H = h0.shape[0]
    y = np.empty((T, 2), dtype=np.float64)
    h = h0.copy()
    feat = np.empty(4, dtype=np.float64)
    for t in range(T):
        feat[0], feat[1], feat[2], feat[3] = _features(
            x[t, 0], x[t, 1], a_scale, a_qmin, a_qmax)
        ix = _fq(wi @ feat + bi, a_scale, a_qmin, a_qmax)        # [3,H]
        hh = _fq(wh @ h + bh, a_scale, a_qmin, a_qmax)           # [3,H]
        pre_r = _fq(ix[0] + hh[0], a_scale, a_qmin, a_qmax)
        pre_z = _fq(ix[1] + hh[1], a_scale, a_qmin, a_qmax)
        r = _fq(_act_gate(pre_r, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        z = _fq(_act_gate(pre_z, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        hn = _fq(r * hh[2], a_scale, a_qmin, a_qmax)
        pre_n = _fq(ix[2] + hn, a_scale, a_qmin, a_qmax)
        n = _fq(_act_cand(pre_n, cand_kind, cand_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        h = _fq((1.0 - z) * n + z * h, a_scale, a_qmin, a_qmax)
        y[t] = _fq(wfc @ h + bfc, a_scale, a_qmin, a_qmax)
    return y, h


def forward_infer_fxp(xq, h0q, wiq, whq, biq, bhq, wfcq, bfcq,
                      w_frac, a_frac, a_qmin, a_qmax,
                      gate_kind, cand_kind, gate_tabq, cand_tabq, tab_lo, tab_hi):
    """Single-stream fixed-point forward on int64 raw codes."""
    T = xq.shape[0]
    H = h0q.shape[0]
    one = min(1 << a_frac, a_qmax)
    neg_one = max(-(1 << a_frac), a_qmin)
    two = 2 << a_frac
    half = 1 << (a_frac - 1)
    blend_one = 1 << a_frac
    a_sc = float(1 << a_frac)

    yq = np.empty((T, 2), dtype=np.int64)
    h = h0q.copy()
    feat = np.empty(4, dtype=np.int64)

    def clampa(v):
        return np.clip(v, a_qmin, a_qmax)

    for t in range(T):
        i = xq[t, 0]
        q = xq[t, 1]
        s1 = clampa(rhe_shift(i * i, a_frac))
        s2 = clampa(rhe_shift(q * q, a_frac))
        f3 = clampa(s1 + s2)
        f4 = clampa(rhe_shift(f3 * f3, a_frac))
        feat[0], feat[1], feat[2], feat[3] = i, q, f3, f4

        ix = clampa(rhe_shift(wiq @ feat + (biq << a_frac), w_frac))
        hh = clampa(rhe_shift(whq @ h + (bhq << a_frac), w_frac))

        pre_r = clampa(ix[0] + hh[0])
        pre_z = clampa(ix[1] + hh[1])
        if gate_kind == 0:
            r = np.clip(np.where(pre_r > two, one,
                                 np.where(pre_r < -two, 0,
                                          rhe_shift(pre_r, 2) + half)), 0, one)
            z = np.clip(np.where(pre_z > two, one,
                                 np.where(pre_z < -two, 0,
                                          rhe_shift(pre_z, 2) + half)), 0, one)
        else:
            r = _lut(pre_r / a_sc, gate_tabq, tab_lo, tab_hi)
            z = _lut(pre_z / a_sc, gate_tabq, tab_lo, tab_hi)
        hn = clampa(rhe_shift(r * hh[2], a_frac))
        pre_n = clampa(ix[2] + hn)
        if cand_kind == 0:
            n = np.clip(pre_n, neg_one, one)
        else:
            n = _lut(pre_n / a_sc, cand_tabq, tab_lo, tab_hi)
        acc = (blend_one - z) * n + z * h
        h = clampa(rhe_shift(acc, a_frac))
        yq[t] = clampa(rhe_shift(wfcq @ h + (bfcq << a_frac), w_frac))
    return yq, h


def forward_train(x, h0, wi, wh, bi, bh, wfc, bfc,
                  gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                  a_scale, a_qmin, a_qmax):
    """Batched float forward with caches for BPTT.

    x: [B,T,2], h0: [B,H].  Returns
    (y, feats, ix, hh, r, z, hn, n, hs) with hs[:, 0] == h0.
    """
    B, T, _ = x.shape
    H = h0.shape[1]
    y = np.empty((B, T, 2), dtype=np.float64)
    feats = np.empty((B, T, 4), dtype=np.float64)
    ixs = np.empty((B, T, 3, H), dtype=np.float64)
    hhs = np.empty((B, T, 3, H), dtype=np.float64)
    rs = np.empty((B, T, H), dtype=np.float64)
    zs = np.empty((B, T, H), dtype=np.float64)
    hns = np.empty((B, T, H), dtype=np.float64)
    ns = np.empty((B, T, H), dtype=np.float64)
    hs = np.empty((B, T + 1, H), dtype=np.float64)
    hs[:, 0] = h0

    for t in range(T):
        i = x[:, t, 0]
        q = x[:, t, 1]
        f1, f2, f3, f4 = _features(i, q, a_scale, a_qmin, a_qmax)
        feats[:, t, 0] = f1
        feats[:, t, 1] = f2
        feats[:, t, 2] = f3
        feats[:, t, 3] = f4

        h = hs[:, t]
        ix = _fq(np.einsum("ghk,bk->bgh", wi, feats[:, t]) + bi, a_scale, a_qmin, a_qmax)
        hh = _fq(np.einsum("ghk,bk->bgh", wh, h) + bh, a_scale, a_qmin, a_qmax)
        ixs[:, t] = ix
        hhs[:, t] = hh

        pre_r = _fq(ix[:, 0] + hh[:, 0], a_scale, a_qmin, a_qmax)
        pre_z = _fq(ix[:, 1] + hh[:, 1], a_scale, a_qmin, a_qmax)
        r = _fq(_act_gate(pre_r, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        z = _fq(_act_gate(pre_z, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        hn = _fq(r * hh[:, 2], a_scale, a_qmin, a_qmax)
        pre_n = _fq(ix[:, 2] + hn, a_scale, a_qmin, a_qmax)
        n = _fq(_act_cand(pre_n, cand_kind, cand_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        h_new = _fq((1.0 - z) * n + z * h, a_scale, a_qmin, a_qmax)

        rs[:, t] = r
        zs[:, t] = z
        hns[:, t] = hn
        ns[:, t] = n
        hs[:, t + 1] = h_new
        y[:, t] = _fq(np.einsum("oh,bh->bo", wfc, h_new) + bfc, a_scale, a_qmin, a_qmax)
    return y, feats, ixs, hhs, rs, zs, hns, ns, hs


def _ste_mask(v, a_scale, a_qmin, a_qmax):
    """1 inside the representable range, 0 at a saturated boundary code.

    Values are cached post-quantization, so a boundary code is treated as
    saturated (the half-LSB ambiguity band is irrelevant for training).
    """
    if a_scale == 0.0:
        return 1.0
    code = np.rint(v * a_scale)
    return ((code > a_qmin) & (code < a_qmax)).astype(np.float64)


def _dact_gate(pre, post, kind):
    if kind == 0:
        return 0.25 * ((pre > -2.0) & (pre < 2.0)).astype(np.float64)
    if kind == 1:
        return post * (1.0 - post)
    s = _sigmoid(pre)
    return s * (1.0 - s)


def _dact_cand(pre, post, kind):
    if kind == 0:
        return ((pre > -1.0) & (pre < 1.0)).astype(np.float64)
    if kind == 1:
        return 1.0 - post * post
    th = np.tanh(pre)
    return 1.0 - th * th


def backward_train(gy, feats, ixs, hhs, rs, zs, hns, ns, hs, y,
                   wi, wh, wfc, gate_kind, cand_kind, a_scale, a_qmin, a_qmax):
    """BPTT over the cached forward. Returns summed weight gradients."""
    B, T, _ = gy.shape
    H = hs.shape[2]
    lo = a_qmin / a_scale if a_scale else 0.0
    hi = a_qmax / a_scale if a_scale else 0.0

    dwi = np.zeros_like(wi)
    dbi = np.zeros((3, H), dtype=np.float64)
    dwh = np.zeros_like(wh)
    dbh = np.zeros((3, H), dtype=np.float64)
    dwfc = np.zeros_like(wfc)
    dbfc = np.zeros(wfc.shape[0], dtype=np.float64)

    gh = np.zeros((B, H), dtype=np.float64)
    for t in range(T - 1, -1, -1):
        h_prev = hs[:, t]
        h_new = hs[:, t + 1]
        r = rs[:, t]
        z = zs[:, t]
        hn = hns[:, t]
        n = ns[:, t]
        ix = ixs[:, t]
        hh = hhs[:, t]

        gyt = gy[:, t] * _ste_mask(y[:, t], a_scale, a_qmin, a_qmax)
        dwfc += np.einsum("bo,bh->oh", gyt, h_new)
        dbfc += gyt.sum(axis=0)
        gh = gh + gyt @ wfc

        ghm = gh * _ste_mask(h_new, a_scale, a_qmin, a_qmax)
        gz = ghm * (h_prev - n)
        gn = ghm * (1.0 - z)
        gh = ghm * z

        pre_n_raw = ix[:, 2] + hn
        pre_n = np.clip(pre_n_raw, lo, hi) if a_scale else pre_n_raw
        gpre_n = gn * _dact_cand(pre_n, n, cand_kind)
        if a_scale:
            gpre_n = gpre_n * ((pre_n_raw >= lo) & (pre_n_raw <= hi))
        g_ixn = gpre_n
        g_hn = gpre_n * _ste_mask(hn, a_scale, a_qmin, a_qmax)
        gr = g_hn * hh[:, 2]
        g_hhn = g_hn * r

        pre_r_raw = ix[:, 0] + hh[:, 0]
        pre_z_raw = ix[:, 1] + hh[:, 1]
        pre_r = np.clip(pre_r_raw, lo, hi) if a_scale else pre_r_raw
        pre_z = np.clip(pre_z_raw, lo, hi) if a_scale else pre_z_raw
        gpre_r = gr * _dact_gate(pre_r, r, gate_kind)
        gpre_z = gz * _dact_gate(pre_z, z, gate_kind)
        if a_scale:
            gpre_r = gpre_r * ((pre_r_raw >= lo) & (pre_r_raw <= hi))
            gpre_z = gpre_z * ((pre_z_raw >= lo) & (pre_z_raw <= hi))

        g_ix = np.stack([gpre_r, gpre_z, g_ixn], axis=1)   # [B,3,H]
        g_hh = np.stack([gpre_r, gpre_z, g_hhn], axis=1)
        if a_scale:
            g_ix = g_ix * _ste_mask(ix, a_scale, a_qmin, a_qmax)
            g_hh = g_hh * _ste_mask(hh, a_scale, a_qmin, a_qmax)

        dwi += np.einsum("bgh,bk->ghk", g_ix, feats[:, t])
        dbi += g_ix.sum(axis=0)
        dwh += np.einsum("bgh,bk->ghk", g_hh, h_prev)
        dbh += g_hh.sum(axis=0)
        gh = gh + np.einsum("bgh,ghk->bk", g_hh, wh)
    return dwi, dbi, dwh, dbh, dwfc, dbfc
