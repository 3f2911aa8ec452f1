"""Slow reference implementations used only by the test suite."""

from __future__ import annotations

import itertools

import numpy as np


def _bits(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), np.int64)
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def _parity(bits: np.ndarray, idx) -> np.ndarray:
    idx = list(idx)
    if not idx:
        return np.zeros(bits.shape[0], np.int64)
    return bits[:, idx].sum(axis=1) % 2


def brute_block(geo, P, xb, zb, sp, ss):
    """Enumerate every owned and borrowed configuration of one block.

    Returns ``(labels, owned, borrowed, dual_borrowed)`` laid out like the
    fast kernel: label distribution ``(ax, ax, az, az)`` (normalized), owned
    extrinsic tables ``(n, ax, az)`` and borrowed extrinsic likelihoods
    ``(k, 2)`` (unnormalized).  Loops over owned X patterns and vectorizes
    over everything else.
    """
    n, ax, az = P.shape
    kb = len(geo.borrowed) if ax == 2 else 0
    kd = len(geo.dual_borrowed) if az == 2 else 0
    X = _bits(n) if ax == 2 else np.zeros((1, n), np.int64)
    # rows of the inner table: (owned z, borrowed x, borrowed z)
    inner = _bits((n if az == 2 else 0) + kb + kd)
    Z = inner[:, :n] if az == 2 else np.zeros((len(inner), n), np.int64)
    off = n if az == 2 else 0
    BX = inner[:, off : off + kb]
    BZ = inner[:, off + kb :]

    ok_z = np.ones(len(inner), bool)
    if az == 2:
        for i, c in enumerate(geo.sites):
            ok_z &= (_parity(Z, c.owned) + _parity(BZ, c.borrowed)) % 2 == ss[i]
    wb = np.ones(len(inner))
    for b in range(kb):
        wb *= xb[b, BX[:, b]]
    for d in range(kd):
        wb *= zb[d, BZ[:, d]]
    zlab_h = _parity(Z, geo.z_label_h) if az == 2 else np.zeros(len(inner), np.int64)
    zlab_v = _parity(Z, geo.z_label_v) if az == 2 else np.zeros(len(inner), np.int64)
    zcol = Z if az == 2 else np.zeros_like(Z)

    labels = np.zeros((ax, ax, az, az))
    owned = np.zeros((n, ax, az))
    borrowed = np.zeros((kb, 2))
    dual = np.zeros((kd, 2))
    for x in X:
        ok = ok_z.copy()
        if ax == 2:
            for i, c in enumerate(geo.plaquettes):
                own = x[list(c.owned)].sum() % 2 if c.owned else 0
                ok &= (own + _parity(BX, c.borrowed)) % 2 == sp[i]
        xcol = x if ax == 2 else np.zeros(n, np.int64)
        pq = P[np.arange(n)[None, :], xcol[None, :], zcol]  # (rows, n)
        w = np.where(ok, np.prod(pq, axis=1) * wb, 0.0)
        if ax == 2:
            lxh = x[list(geo.x_label_h)].sum() % 2
            lxv = x[list(geo.x_label_v)].sum() % 2
        else:
            lxh = lxv = 0
        np.add.at(labels, (lxh, lxv, zlab_h, zlab_v), w)
        for q in range(n):
            ext = np.prod(np.delete(pq, q, axis=1), axis=1) * wb * ok
            np.add.at(owned[q], (xcol[q], zcol[:, q]), ext)
        for b in range(kb):
            np.add.at(borrowed[b], BX[:, b], w / xb[b, BX[:, b]])
        for d in range(kd):
            np.add.at(dual[d], BZ[:, d], w / zb[d, BZ[:, d]])
    return labels / labels.sum(), owned, borrowed, dual


def brute_class_probabilities(lattice, plaq_defects, site_defects, pauli_probs, reference):
    """Class probabilities on a tiny torus, straight from the definitions.

    Every Pauli string is tested against each check's qubit list; the class
    of ``reference * error`` is read off from parities on the four winding
    cuts.  ``pauli_probs`` is the single-qubit (I, X, Y, Z) distribution.
    """
    n = lattice.n_qubits
    lx, ly = lattice.shape
    plaqs = [lattice.plaquette_qubits(i, j) for i in range(lx) for j in range(ly)]
    sites = [lattice.site_qubits(i, j) for i in range(lx) for j in range(ly)]
    cut_x1 = [lattice.v(0, j) for j in range(ly)]
    cut_x2 = [lattice.h(i, 0) for i in range(lx)]
    cut_z1 = [lattice.h(0, j) for j in range(ly)]
    cut_z2 = [lattice.v(i, 0) for i in range(lx)]
    want_p = np.array(plaq_defects, bool)
    want_s = np.array(site_defects, bool)
    out = np.zeros(16)
    for codes in itertools.product(range(4), repeat=n):
        c = np.array(codes)
        x = (c == 1) | (c == 2)
        z = (c == 2) | (c == 3)
        if any(x[q].sum() % 2 != want_p[k] for k, q in enumerate(plaqs)):
            continue
        if any(z[q].sum() % 2 != want_s[k] for k, q in enumerate(sites)):
            continue
        rx = x ^ reference.x
        rz = z ^ reference.z
        k = rx[cut_x1].sum() % 2 + 2 * (rx[cut_x2].sum() % 2) + 4 * (rz[cut_z1].sum() % 2) + 8 * (rz[cut_z2].sum() % 2)
        out[k] += np.prod(np.asarray(pauli_probs)[c])
    return out / out.sum()


def brute_matching_weight(defects, shape) -> int:
    """Minimum total torus distance over all perfect pairings."""
    pts = [tuple(d) for d in defects]
    lx, ly = shape

    def dist(a, b):
        dx = abs(a[0] - b[0]) % lx
        dy = abs(a[1] - b[1]) % ly
        return min(dx, lx - dx) + min(dy, ly - dy)

    def best(rest):
        if not rest:
            return 0
        a = rest[0]
        return min(dist(a, rest[i]) + best(rest[1:i] + rest[i + 1 :]) for i in range(1, len(rest)))

    return best(pts)


def gf2_rank(rows: np.ndarray) -> int:
    """Rank over GF(2) by row reduction."""
    m = np.array(rows, dtype=np.uint8) % 2
    rank = 0
    for col in range(m.shape[1]):
        pivot = np.flatnonzero(m[rank:, col])
        if not len(pivot):
            continue
        p = rank + pivot[0]
        m[[rank, p]] = m[[p, rank]]
        below = np.flatnonzero(m[:, col])
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return rank
