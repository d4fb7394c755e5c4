"""Numba-jitted GRU-DPD kernels (default backend).

Same contract as ``_gru_numpy``: integer and fake-quantized paths are
bit-identical across backends; the plain float path agrees to float64
rounding of the summation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _rhe_shift(v, s):
    # round-half-even arithmetic right shift
    if s == 0:
        return v
    fl = v >> s
    rem = v - (fl << s)
    half = 1 << (s - 1)
    if rem > half or (rem == half and (fl & 1) == 1):
        return fl + 1
    return fl


@njit(cache=True, inline="always")
def _fq(v, a_scale, a_qmin, a_qmax):
    if a_scale == 0.0:
        return v
    r = np.rint(v * a_scale)
    if r < a_qmin:
        r = float(a_qmin)
    elif r > a_qmax:
        r = float(a_qmax)
    return r / a_scale


@njit(cache=True, inline="always")
def _sigmoid(v):
    if v >= 0.0:
        return 1.0 / (1.0 + np.exp(-v))
    ev = np.exp(v)
    return ev / (1.0 + ev)


@njit(cache=True, inline="always")
def _lut_f(v, tab, lo, hi):
    n = tab.shape[0]
    step = (hi - lo) / n
    idx = int(np.rint((v - lo) / step))
    if idx < 0:
        idx = 0
    elif idx > n - 1:
        idx = n - 1
    return tab[idx]


@njit(cache=True, inline="always")
def _act_gate(v, kind, tab, lo, hi):
    if kind == 0:
        g = v * 0.25 + 0.5
        if g < 0.0:
            g = 0.0
        elif g > 1.0:
            g = 1.0
        return g
    if kind == 1:
        return _sigmoid(v)
    return _lut_f(v, tab, lo, hi)


@njit(cache=True, inline="always")
def _act_cand(v, kind, tab, lo, hi):
    if kind == 0:
        if v < -1.0:
            return -1.0
        if v > 1.0:
            return 1.0
        return v
    if kind == 1:
        return np.tanh(v)
    return _lut_f(v, tab, lo, hi)


@njit(cache=True)
def _step_float(i, q, h, wi, wh, bi, bh,
                gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                a_scale, a_qmin, a_qmax,
                feat, ix, hh, h_new):
    """One GRU step; writes feat[4], ix[3,H], hh[3,H], h_new[H].
    Returns (r, z, hn, n) written into h-new scratch by the caller loops."""
    H = h.shape[0]
    s1 = _fq(i * i, a_scale, a_qmin, a_qmax)
    s2 = _fq(q * q, a_scale, a_qmin, a_qmax)
    f3 = _fq(s1 + s2, a_scale, a_qmin, a_qmax)
    f4 = _fq(f3 * f3, a_scale, a_qmin, a_qmax)
    feat[0] = i
    feat[1] = q
    feat[2] = f3
    feat[3] = f4
    for g in range(3):
        for j in range(H):
            acc = bi[g, j]
            for k in range(4):
                acc += wi[g, j, k] * feat[k]
            ix[g, j] = _fq(acc, a_scale, a_qmin, a_qmax)
            acc = bh[g, j]
            for k in range(H):
                acc += wh[g, j, k] * h[k]
            hh[g, j] = _fq(acc, a_scale, a_qmin, a_qmax)
    for j in range(H):
        pre_r = _fq(ix[0, j] + hh[0, j], a_scale, a_qmin, a_qmax)
        pre_z = _fq(ix[1, j] + hh[1, j], a_scale, a_qmin, a_qmax)
        r = _fq(_act_gate(pre_r, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        z = _fq(_act_gate(pre_z, gate_kind, gate_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        hn = _fq(r * hh[2, j], a_scale, a_qmin, a_qmax)
        pre_n = _fq(ix[2, j] + hn, a_scale, a_qmin, a_qmax)
        n = _fq(_act_cand(pre_n, cand_kind, cand_tab, tab_lo, tab_hi),
                a_scale, a_qmin, a_qmax)
        h_new[j] = _fq((1.0 - z) * n + z * h[j], a_scale, a_qmin, a_qmax)


@njit(cache=True)
def forward_infer_float(x, h0, wi, wh, bi, bh, wfc, bfc,
                        gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                        a_scale, a_qmin, a_qmax):
    T = x.shape[0]
    H = h0.shape[0]
    O = wfc.shape[0]
    y = np.empty((T, 2), dtype=np.float64)
    h = h0.copy()
    feat = np.empty(4, dtype=np.float64)
    ix = np.empty((3, H), dtype=np.float64)
    hh = np.empty((3, H), dtype=np.float64)
    h_new = np.empty(H, dtype=np.float64)
    for t in range(T):
        _step_float(x[t, 0], x[t, 1], h, wi, wh, bi, bh,
                    gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                    a_scale, a_qmin, a_qmax, feat, ix, hh, h_new)
        for j in range(H):
            h[j] = h_new[j]
        for o in range(O):
            acc = bfc[o]
            for j in range(H):
                acc += wfc[o, j] * h[j]
            y[t, o] = _fq(acc, a_scale, a_qmin, a_qmax)
    return y, h


@njit(cache=True)
def forward_infer_fxp(xq, h0q, wiq, whq, biq, bhq, wfcq, bfcq,
                      w_frac, a_frac, a_qmin, a_qmax,
                      gate_kind, cand_kind, gate_tabq, cand_tabq, tab_lo, tab_hi):
    T = xq.shape[0]
    H = h0q.shape[0]
    O = wfcq.shape[0]
    one = 1 << a_frac
    if one > a_qmax:
        one = a_qmax
    neg_one = -(1 << a_frac)
    if neg_one < a_qmin:
        neg_one = a_qmin
    two = 2 << a_frac
    half = 1 << (a_frac - 1)
    blend_one = 1 << a_frac
    a_sc = float(1 << a_frac)

    yq = np.empty((T, 2), dtype=np.int64)
    h = h0q.copy()
    feat = np.empty(4, dtype=np.int64)
    ix = np.empty((3, H), dtype=np.int64)
    hh = np.empty((3, H), dtype=np.int64)

    for t in range(T):
        i = xq[t, 0]
        q = xq[t, 1]
        s1 = _rhe_shift(i * i, a_frac)
        if s1 < a_qmin:
            s1 = a_qmin
        elif s1 > a_qmax:
            s1 = a_qmax
        s2 = _rhe_shift(q * q, a_frac)
        if s2 < a_qmin:
            s2 = a_qmin
        elif s2 > a_qmax:
            s2 = a_qmax
        f3 = s1 + s2
        if f3 < a_qmin:
            f3 = a_qmin
        elif f3 > a_qmax:
            f3 = a_qmax
        f4 = _rhe_shift(f3 * f3, a_frac)
        if f4 < a_qmin:
            f4 = a_qmin
        elif f4 > a_qmax:
            f4 = a_qmax
        feat[0] = i
        feat[1] = q
        feat[2] = f3
        feat[3] = f4

        for g in range(3):
            for j in range(H):
                acc = biq[g, j] << a_frac
                for k in range(4):
                    acc += wiq[g, j, k] * feat[k]
                v = _rhe_shift(acc, w_frac)
                if v < a_qmin:
                    v = a_qmin
                elif v > a_qmax:
                    v = a_qmax
                ix[g, j] = v
                acc = bhq[g, j] << a_frac
                for k in range(H):
                    acc += whq[g, j, k] * h[k]
                v = _rhe_shift(acc, w_frac)
                if v < a_qmin:
                    v = a_qmin
                elif v > a_qmax:
                    v = a_qmax
                hh[g, j] = v

        for j in range(H):
            pre_r = ix[0, j] + hh[0, j]
            if pre_r < a_qmin:
                pre_r = a_qmin
            elif pre_r > a_qmax:
                pre_r = a_qmax
            pre_z = ix[1, j] + hh[1, j]
            if pre_z < a_qmin:
                pre_z = a_qmin
            elif pre_z > a_qmax:
                pre_z = a_qmax
            if gate_kind == 0:
                if pre_r > two:
                    r = one
                elif pre_r < -two:
                    r = 0
                else:
                    r = _rhe_shift(pre_r, 2) + half
                    if r > one:
                        r = one
                    elif r < 0:
                        r = 0
                if pre_z > two:
                    z = one
                elif pre_z < -two:
                    z = 0
                else:
                    z = _rhe_shift(pre_z, 2) + half
                    if z > one:
                        z = one
                    elif z < 0:
                        z = 0
            else:
                r = _lut_i(pre_r, a_sc, gate_tabq, tab_lo, tab_hi)
                z = _lut_i(pre_z, a_sc, gate_tabq, tab_lo, tab_hi)
            hn = _rhe_shift(r * hh[2, j], a_frac)
            if hn < a_qmin:
                hn = a_qmin
            elif hn > a_qmax:
                hn = a_qmax
            pre_n = ix[2, j] + hn
            if pre_n < a_qmin:
                pre_n = a_qmin
            elif pre_n > a_qmax:
                pre_n = a_qmax
            if cand_kind == 0:
                n = pre_n
                if n < neg_one:
                    n = neg_one
                elif n > one:
                    n = one
            else:
                n = _lut_i(pre_n, a_sc, cand_tabq, tab_lo, tab_hi)
            acc = (blend_one - z) * n + z * h[j]
            v = _rhe_shift(acc, a_frac)
            if v < a_qmin:
                v = a_qmin
            elif v > a_qmax:
                v = a_qmax
            h[j] = v

        for o in range(O):
            acc = bfcq[o] << a_frac
            for j in range(H):
                acc += wfcq[o, j] * h[j]
            v = _rhe_shift(acc, w_frac)
            if v < a_qmin:
                v = a_qmin
            elif v > a_qmax:
                v = a_qmax
            yq[t, o] = v
    return yq, h


@njit(cache=True, inline="always")
def _lut_i(raw, a_sc, tabq, lo, hi):
    n = tabq.shape[0]
    step = (hi - lo) / n
    idx = int(np.rint((raw / a_sc - lo) / step))
    if idx < 0:
        idx = 0
    elif idx > n - 1:
        idx = n - 1
    return tabq[idx]


@njit(cache=True)
def forward_train(x, h0, wi, wh, bi, bh, wfc, bfc,
                  gate_kind, cand_kind, gate_tab, cand_tab, tab_lo, tab_hi,
                  a_scale, a_qmin, a_qmax):
    B, T, _ = x.shape
    H = h0.shape[1]
    O = wfc.shape[0]
    y = np.empty((B, T, 2), dtype=np.float64)
    feats = np.empty((B, T, 4), dtype=np.float64)
    ixs = np.empty((B, T, 3, H), dtype=np.float64)
    hhs = np.empty((B, T, 3, H), dtype=np.float64)
    rs = np.empty((B, T, H), dtype=np.float64)
    zs = np.empty((B, T, H), dtype=np.float64)
    hns = np.empty((B, T, H), dtype=np.float64)
    ns = np.empty((B, T, H), dtype=np.float64)
    hs = np.empty((B, T + 1, H), dtype=np.float64)

    for b in range(B):
        for j in range(H):
            hs[b, 0, j] = h0[b, j]
        for t in range(T):
            i = x[b, t, 0]
            q = x[b, t, 1]
            s1 = _fq(i * i, a_scale, a_qmin, a_qmax)
            s2 = _fq(q * q, a_scale, a_qmin, a_qmax)
            f3 = _fq(s1 + s2, a_scale, a_qmin, a_qmax)
            f4 = _fq(f3 * f3, a_scale, a_qmin, a_qmax)
            feats[b, t, 0] = i
            feats[b, t, 1] = q
            feats[b, t, 2] = f3
            feats[b, t, 3] = f4
            for g in range(3):
                for j in range(H):
                    acc = bi[g, j]
                    for k in range(4):
                        acc += wi[g, j, k] * feats[b, t, k]
                    ixs[b, t, g, j] = _fq(acc, a_scale, a_qmin, a_qmax)
                    acc = bh[g, j]
                    for k in range(H):
                        acc += wh[g, j, k] * hs[b, t, k]
                    hhs[b, t, g, j] = _fq(acc, a_scale, a_qmin, a_qmax)
            for j in range(H):
                pre_r = _fq(ixs[b, t, 0, j] + hhs[b, t, 0, j], a_scale, a_qmin, a_qmax)
                pre_z = _fq(ixs[b, t, 1, j] + hhs[b, t, 1, j], a_scale, a_qmin, a_qmax)
                r = _fq(_act_gate(pre_r, gate_kind, gate_tab, tab_lo, tab_hi),
                        a_scale, a_qmin, a_qmax)
                z = _fq(_act_gate(pre_z, gate_kind, gate_tab, tab_lo, tab_hi),
                        a_scale, a_qmin, a_qmax)
                hn = _fq(r * hhs[b, t, 2, j], a_scale, a_qmin, a_qmax)
                pre_n = _fq(ixs[b, t, 2, j] + hn, a_scale, a_qmin, a_qmax)
                n = _fq(_act_cand(pre_n, cand_kind, cand_tab, tab_lo, tab_hi),
                        a_scale, a_qmin, a_qmax)
                rs[b, t, j] = r
                zs[b, t, j] = z
                hns[b, t, j] = hn
                ns[b, t, j] = n
                hs[b, t + 1, j] = _fq((1.0 - z) * n + z * hs[b, t, j],
                                      a_scale, a_qmin, a_qmax)
            for o in range(O):
                acc = bfc[o]
                for j in range(H):
                    acc += wfc[o, j] * hs[b, t + 1, j]
                y[b, t, o] = _fq(acc, a_scale, a_qmin, a_qmax)
    return y, feats, ixs, hhs, rs, zs, hns, ns, hs


@njit(cache=True, inline="always")
def _mask(v, a_scale, a_qmin, a_qmax):
    if a_scale == 0.0:
        return 1.0
    code = np.rint(v * a_scale)
    if code <= a_qmin or code >= a_qmax:
        return 0.0
    return 1.0


@njit(cache=True, inline="always")
def _dact_gate_s(pre, post, kind):
    if kind == 0:
        if -2.0 < pre < 2.0:
            return 0.25
        return 0.0
    if kind == 1:
        return post * (1.0 - post)
    s = _sigmoid(pre)
    return s * (1.0 - s)


@njit(cache=True, inline="always")
def _dact_cand_s(pre, post, kind):
    if kind == 0:
        if -1.0 < pre < 1.0:
            return 1.0
        return 0.0
    if kind == 1:
        return 1.0 - post * post
    th = np.tanh(pre)
    return 1.0 - th * th


@njit(cache=True)
def backward_train(gy, feats, ixs, hhs, rs, zs, hns, ns, hs, y,
                   wi, wh, wfc, gate_kind, cand_kind, a_scale, a_qmin, a_qmax):
    B, T, _ = gy.shape
    H = hs.shape[2]
    O = wfc.shape[0]
    lo = a_qmin / a_scale if a_scale != 0.0 else 0.0
    hi = a_qmax / a_scale if a_scale != 0.0 else 0.0

    dwi = np.zeros_like(wi)
    dbi = np.zeros((3, H), dtype=np.float64)
    dwh = np.zeros_like(wh)
    dbh = np.zeros((3, H), dtype=np.float64)
    dwfc = np.zeros_like(wfc)
    dbfc = np.zeros(O, dtype=np.float64)

    gh = np.empty(H, dtype=np.float64)
    gyt = np.empty(O, dtype=np.float64)
    g_ix = np.empty((3, H), dtype=np.float64)
    g_hh = np.empty((3, H), dtype=np.float64)

    for b in range(B):
        for j in range(H):
            gh[j] = 0.0
        for t in range(T - 1, -1, -1):
            for o in range(O):
                gyt[o] = gy[b, t, o] * _mask(y[b, t, o], a_scale, a_qmin, a_qmax)
            for o in range(O):
                for j in range(H):
                    dwfc[o, j] += gyt[o] * hs[b, t + 1, j]
                dbfc[o] += gyt[o]
            for j in range(H):
                acc = 0.0
                for o in range(O):
                    acc += gyt[o] * wfc[o, j]
                gh[j] += acc

            for j in range(H):
                h_prev = hs[b, t, j]
                h_new = hs[b, t + 1, j]
                r = rs[b, t, j]
                z = zs[b, t, j]
                hn = hns[b, t, j]
                n = ns[b, t, j]

                ghm = gh[j] * _mask(h_new, a_scale, a_qmin, a_qmax)
                gz = ghm * (h_prev - n)
                gn = ghm * (1.0 - z)
                gh[j] = ghm * z

                pre_n_raw = ixs[b, t, 2, j] + hn
                pre_n = pre_n_raw
                if a_scale != 0.0:
                    if pre_n < lo:
                        pre_n = lo
                    elif pre_n > hi:
                        pre_n = hi
                gpre_n = gn * _dact_cand_s(pre_n, n, cand_kind)
                if a_scale != 0.0 and (pre_n_raw < lo or pre_n_raw > hi):
                    gpre_n = 0.0
                g_hn = gpre_n * _mask(hn, a_scale, a_qmin, a_qmax)
                gr = g_hn * hhs[b, t, 2, j]
                g_hhn = g_hn * r

                pre_r_raw = ixs[b, t, 0, j] + hhs[b, t, 0, j]
                pre_z_raw = ixs[b, t, 1, j] + hhs[b, t, 1, j]
                pre_r = pre_r_raw
                pre_z = pre_z_raw
                if a_scale != 0.0:
                    if pre_r < lo:
                        pre_r = lo
                    elif pre_r > hi:
                        pre_r = hi
                    if pre_z < lo:
                        pre_z = lo
                    elif pre_z > hi:
                        pre_z = hi
                gpre_r = gr * _dact_gate_s(pre_r, r, gate_kind)
                gpre_z = gz * _dact_gate_s(pre_z, z, gate_kind)
                if a_scale != 0.0:
                    if pre_r_raw < lo or pre_r_raw > hi:
                        gpre_r = 0.0
                    if pre_z_raw < lo or pre_z_raw > hi:
                        gpre_z = 0.0

                g_ix[0, j] = gpre_r
                g_ix[1, j] = gpre_z
                g_ix[2, j] = gpre_n
                g_hh[0, j] = gpre_r
                g_hh[1, j] = gpre_z
                g_hh[2, j] = g_hhn
                if a_scale != 0.0:
                    for g in range(3):
                        g_ix[g, j] *= _mask(ixs[b, t, g, j], a_scale, a_qmin, a_qmax)
                        g_hh[g, j] *= _mask(hhs[b, t, g, j], a_scale, a_qmin, a_qmax)

            for g in range(3):
                for j in range(H):
                    for k in range(4):
                        dwi[g, j, k] += g_ix[g, j] * feats[b, t, k]
                    dbi[g, j] += g_ix[g, j]
                    for k in range(H):
                        dwh[g, j, k] += g_hh[g, j] * hs[b, t, k]
                    dbh[g, j] += g_hh[g, j]
            for k in range(H):
                acc = 0.0
                for g in range(3):
                    for j in range(H):
                        acc += g_hh[g, j] * wh[g, j, k]
                gh[k] += acc
    return dwi, dbi, dwh, dbh, dwfc, dbfc
