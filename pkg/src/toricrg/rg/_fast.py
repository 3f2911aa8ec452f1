"""Compiled per-block loops for the block kernel.

Same arithmetic as the vectorized path in ``block``: the owned-qubit sum is
done with axis-by-axis 2x2 transforms, and borrowed edges enter through
per-check parity factors.  Bit ``q`` of a pattern index is
``(index >> (n - 1 - q)) & 1``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _factor_table(par, g, N):
    """``F[x] = prod_c g[c, par[c, x]]``."""
    F = np.ones(N)
    for c in range(par.shape[0]):
        g0 = g[c, 0]
        g1 = g[c, 1]
        for x in range(N):
            F[x] *= g1 if par[c, x] else g0
    return F


@njit(cache=True)
def _borrowed_messages(W, par, g, brw, brw_len, syn, bmarg, out):
    """Extrinsic bit likelihoods of borrowed edges, one check left open at a time."""
    nc = par.shape[0]
    N = W.shape[0]
    for c in range(nc):
        k = brw_len[c]
        if k == 0:
            continue
        e0 = 0.0
        e1 = 0.0
        for x in range(N):
            w = W[x]
            for c2 in range(nc):
                if c2 != c:
                    w *= g[c2, par[c2, x]]
            if par[c, x]:
                e1 += w
            else:
                e0 += w
        # index by borrowed parity r: owned parity is syn ^ r
        if syn[c]:
            e0, e1 = e1, e0
        for i in range(k):
            d0 = 1.0
            d1 = 0.0
            for j in range(k):
                if j != i:
                    b = brw[c, j]
                    a0 = bmarg[b, 0]
                    a1 = bmarg[b, 1]
                    d0, d1 = d0 * a0 + d1 * a1, d0 * a1 + d1 * a0
            b = brw[c, i]
            out[b, 0] = e0 * d0 + e1 * d1
            out[b, 1] = e1 * d0 + e0 * d1


@njit(cache=True)
def single_sector(P, par, lab, g, brw, brw_len, syn, bmarg, want_labels, msg_mask, want_brw, labels, owned, bout):
    """Blocks with a two-letter alphabet.

    ``P`` is ``(M, n, 2)``; ``g`` is ``(M, n_checks, 2)`` check factors;
    outputs are written into ``labels (M, 4)``, ``owned (M, n, 2)`` and
    ``bout (M, k, 2)``.
    """
    M, n = P.shape[0], P.shape[1]
    N = 1 << n
    W = np.empty(N)
    pre = np.empty(n + 1)
    suf = np.empty(n + 1)
    any_msg = msg_mask.any()
    for m in range(M):
        F = _factor_table(par, g[m], N)
        for x in range(N):
            pre[0] = 1.0
            for q in range(n):
                pre[q + 1] = pre[q] * P[m, q, (x >> (n - 1 - q)) & 1]
            W[x] = pre[n]
            if want_labels:
                labels[m, lab[x]] += F[x] * pre[n]
            if any_msg:
                suf[n] = 1.0
                for q in range(n - 1, -1, -1):
                    suf[q] = suf[q + 1] * P[m, q, (x >> (n - 1 - q)) & 1]
                for q in range(n):
                    if msg_mask[q]:
                        owned[m, q, (x >> (n - 1 - q)) & 1] += F[x] * pre[q] * suf[q + 1]
        if want_brw:
            _borrowed_messages(W, par, g[m], brw, brw_len, syn[m], bmarg[m], bout[m])


@njit(cache=True)
def _forward(T, P, n, skip):
    """``T[z] -> U[x] = sum_z prod_q P[q, x_q, z_q] T[z]`` on every axis but ``skip``."""
    N = T.shape[0]
    for q in range(n):
        if q == skip:
            continue
        s = 1 << (n - 1 - q)
        p00 = P[q, 0, 0]
        p01 = P[q, 0, 1]
        p10 = P[q, 1, 0]
        p11 = P[q, 1, 1]
        for i in range(N):
            if i & s:
                continue
            t0 = T[i]
            t1 = T[i + s]
            T[i] = p00 * t0 + p01 * t1
            T[i + s] = p10 * t0 + p11 * t1


@njit(cache=True)
def _backward(T, P, n):
    """``T[x] -> V[z] = sum_x prod_q P[q, x_q, z_q] T[x]``."""
    N = T.shape[0]
    for q in range(n):
        s = 1 << (n - 1 - q)
        p00 = P[q, 0, 0]
        p01 = P[q, 0, 1]
        p10 = P[q, 1, 0]
        p11 = P[q, 1, 1]
        for i in range(N):
            if i & s:
                continue
            t0 = T[i]
            t1 = T[i + s]
            T[i] = p00 * t0 + p10 * t1
            T[i + s] = p01 * t0 + p11 * t1


@njit(cache=True)
def joint(
    P, xpar, zpar, xlab, zlab, gx, gz, brw, brw_len, dbrw, dbrw_len, sp, ss, xbm, zbm,
    want_labels, msg_mask, want_brw, labels, owned, bout, dout,
):
    """Correlated blocks; ``P`` is ``(M, n, 2, 2)`` indexed ``[x, z]``.

    ``labels`` is ``(M, 4, 4)`` over (X label, Z label).
    """
    M, n = P.shape[0], P.shape[1]
    N = 1 << n
    T = np.empty(N)
    G = np.empty(N)
    for m in range(M):
        Pm = P[m]
        FX = _factor_table(xpar, gx[m], N)
        FZ = _factor_table(zpar, gz[m], N)
        for x in range(N):
            G[x] = 0.0
        if want_labels:
            for kz in range(4):
                for z in range(N):
                    T[z] = FZ[z] if zlab[z] == kz else 0.0
                _forward(T, Pm, n, -1)
                for x in range(N):
                    labels[m, xlab[x], kz] += FX[x] * T[x]
                    G[x] += T[x]
        elif want_brw:
            for z in range(N):
                G[z] = FZ[z]
            _forward(G, Pm, n, -1)
        for q in range(n):
            if not msg_mask[q]:
                continue
            for z in range(N):
                T[z] = FZ[z]
            _forward(T, Pm, n, q)
            s = 1 << (n - 1 - q)
            for i in range(N):
                if i & s:
                    continue
                f0 = FX[i]
                f1 = FX[i + s]
                t0 = T[i]
                t1 = T[i + s]
                owned[m, q, 0, 0] += f0 * t0
                owned[m, q, 0, 1] += f0 * t1
                owned[m, q, 1, 0] += f1 * t0
                owned[m, q, 1, 1] += f1 * t1
        if want_brw:
            _borrowed_messages(G, xpar, gx[m], brw, brw_len, sp[m], xbm[m], bout[m])
            for x in range(N):
                T[x] = FX[x]
            _backward(T, Pm, n)
            _borrowed_messages(T, zpar, gz[m], dbrw, dbrw_len, ss[m], zbm[m], dout[m])


@njit(cache=True)
def normalize_rows(a, floor):
    """Scale rows to max one, clamp at ``floor`` and renormalize to sum one."""
    R, K = a.shape
    out = np.empty_like(a)
    for r in range(R):
        top = 0.0
        for k in range(K):
            if a[r, k] > top:
                top = a[r, k]
        if top <= 0.0:
            top = 1.0
        tot = 0.0
        for k in range(K):
            v = a[r, k] / top
            if v < floor:
                v = floor
            out[r, k] = v
            tot += v
        for k in range(K):
            out[r, k] /= tot
    return out


@njit(cache=True)
def scale_rows(a, sum_to_one):
    """Divide each row by its maximum (or by its sum)."""
    R, K = a.shape
    out = np.empty_like(a)
    for r in range(R):
        d = 0.0
        for k in range(K):
            if sum_to_one:
                d += a[r, k]
            elif a[r, k] > d:
                d = a[r, k]
        if d < 1e-300:
            d = 1e-300
        for k in range(K):
            out[r, k] = a[r, k] / d
    return out
