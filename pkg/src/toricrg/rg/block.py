"""Exact marginalization over one block code, batched over many blocks.

A block is described by its owned qubits (full Pauli variables), the
X-parities of borrowed edges in its plaquettes and the Z-parities of
borrowed edges in its sites.  Borrowed edges enter only through the
parity distribution of each check, so the sum over block configurations
factorizes as

    sum_x sum_z FX(x) * prod_q P_q(x_q, z_q) * FZ(z)

with ``x``/``z`` ranging over owned-qubit bit patterns.  The middle factor
is a Kronecker product of 2x2 matrices and is applied axis by axis, which
keeps the cost at ``O(n 2^n)`` per block instead of ``4^n``.

Single-sector blocks use a size-1 alphabet for the unused bit, so the
same code path handles X-only, Z-only and correlated decoding.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import _fast
from .geometry import BlockGeometry

MESSAGE_FLOOR = 1e-30
# inputs are clamped to this when a block's total weight underflows
RESCUE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class KernelTables:
    n: int
    ax: int
    az: int
    xpar: np.ndarray  # (n_plaquettes, ax**n) owned X parity per check
    zpar: np.ndarray  # (n_sites, az**n)
    xlab: np.ndarray  # (ax**n,) coarse X label index, xh*ax + xv
    zlab: np.ndarray  # (az**n,) coarse Z label index, zh*az + zv
    # borrowed slots per check, padded: (n_checks, max_k) and lengths
    xbrw: np.ndarray
    xbrw_len: np.ndarray
    zbrw: np.ndarray
    zbrw_len: np.ndarray


def _pack(checks) -> tuple[np.ndarray, np.ndarray]:
    k = max((len(c.borrowed) for c in checks), default=0)
    out = np.zeros((len(checks), max(k, 1)), np.int64)
    for i, c in enumerate(checks):
        out[i, : len(c.borrowed)] = c.borrowed
    return out, np.array([len(c.borrowed) for c in checks], np.int64)


def _bits(n: int, a: int) -> np.ndarray:
    if a == 1:
        return np.zeros((1, n), np.int64)
    idx = np.arange(2**n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


@functools.lru_cache(maxsize=None)
def kernel_tables(geo: BlockGeometry, ax: int, az: int) -> KernelTables:
    n = len(geo.owned)
    xb = _bits(n, ax)
    zb = _bits(n, az)

    def par(bits, idx):
        return bits[:, list(idx)].sum(axis=1) % 2 if idx else np.zeros(len(bits), np.int64)

    xpar = np.array([par(xb, c.owned) for c in geo.plaquettes]) if ax == 2 else np.zeros((0, 1), np.int64)
    zpar = np.array([par(zb, c.owned) for c in geo.sites]) if az == 2 else np.zeros((0, 1), np.int64)
    xlab = par(xb, geo.x_label_h) * ax + par(xb, geo.x_label_v) if ax == 2 else np.zeros(1, np.int64)
    zlab = par(zb, geo.z_label_h) * az + par(zb, geo.z_label_v) if az == 2 else np.zeros(1, np.int64)
    return KernelTables(n, ax, az, xpar, zpar, xlab, zlab, *_pack(geo.plaquettes), *_pack(geo.sites))


def parity_distribution(m: np.ndarray) -> np.ndarray:
    """Distribution of the XOR of independent bits; ``m`` is ``(..., k, 2)``."""
    out = np.zeros(m.shape[:-2] + (2,))
    out[..., 0] = 1.0
    for i in range(m.shape[-2]):
        a, b = m[..., i, 0], m[..., i, 1]
        out = np.stack([out[..., 0] * a + out[..., 1] * b, out[..., 0] * b + out[..., 1] * a], axis=-1)
    return out


def _check_factors(checks, syn, marg, parity):
    """Per-check factor tables ``g[c][m, t]`` = Pr(borrowed parity = s_c xor t)."""
    M = syn.shape[0]
    out = []
    for c, chk in enumerate(checks):
        if chk.borrowed:
            d = parity_distribution(marg[:, list(chk.borrowed)])
        else:
            d = np.zeros((M, 2))
            d[:, 0] = 1.0
        s = syn[:, c]
        g = np.where(s[:, None], d[:, ::-1], d)
        out.append(g / np.maximum(g.max(axis=1, keepdims=True), 1e-300))
    return out


def _product(factors, parity, M, size, skip=None):
    F = np.ones((M, size))
    for c, g in enumerate(factors):
        if c != skip:
            F *= g[:, parity[c]]
    return F


def _apply(T: np.ndarray, q: int, n: int, P: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Contract axis ``q`` of ``T`` (shape ``(M, L, s_0..s_{n-1})``) with ``P_q``.

    Forward maps the z index of qubit ``q`` to its x index; ``transpose``
    maps x to z.
    """
    M, L = T.shape[:2]
    shape = T.shape[2:]
    pre = int(np.prod(shape[:q], dtype=np.int64))
    post = int(np.prod(shape[q + 1 :], dtype=np.int64))
    t = T.reshape(M, L, pre, shape[q], post)
    Pm = P if not transpose else np.swapaxes(P, 1, 2)  # (M, out, in)
    nout, nin = Pm.shape[1:]
    if nin == 1:
        out = t * Pm[:, None, None, :, 0, None]
    else:
        out = t[:, :, :, 0:1, :] * Pm[:, None, None, :, 0, None] + t[:, :, :, 1:2, :] * Pm[:, None, None, :, 1, None]
    new_shape = shape[:q] + (nout,) + shape[q + 1 :]
    return out.reshape((M, L) + new_shape)


def _apply_all(T, qubits, n, P, transpose=False):
    for q in qubits:
        T = _apply(T, q, n, P[:, q], transpose)
    return T


def _leave_one_out(T, qubits, n, P):
    """Yield ``(q, T_q)`` where ``T_q`` has every listed qubit but ``q`` applied."""
    if len(qubits) == 1:
        yield qubits[0], T
        return
    half = len(qubits) // 2
    left, right = qubits[:half], qubits[half:]
    yield from _leave_one_out(_apply_all(T, right, n, P), left, n, P)
    yield from _leave_one_out(_apply_all(T, left, n, P), right, n, P)


def _extrinsic_borrowed(factors, checks, parity, W_base, F_full_parts, marg, n_borrowed, M, size):
    """Messages to borrowed bits: sum over owned patterns, check ``c`` left open."""
    out = np.ones((M, n_borrowed, 2))
    for c, chk in enumerate(checks):
        if not chk.borrowed:
            continue
        Fc = _product(factors, parity, M, size, skip=c)
        W = Fc * W_base
        # E[r]: weight with the borrowed parity of check c equal to r
        t = parity[c]
        s = F_full_parts[c]
        E = np.stack([W[:, t == 0].sum(axis=1), W[:, t == 1].sum(axis=1)], axis=-1)
        E = np.where(s[:, None], E[:, ::-1], E)
        for i in chk.borrowed:
            others = [j for j in chk.borrowed if j != i]
            if others:
                d = parity_distribution(marg[:, others])
                lam = np.stack([E[:, 0] * d[:, 0] + E[:, 1] * d[:, 1], E[:, 1] * d[:, 0] + E[:, 0] * d[:, 1]], axis=-1)
            else:
                lam = E
            out[:, i] = lam
    return out


@dataclass
class BlockOutput:
    labels: np.ndarray | None = None  # (M, ax, ax, az, az) over (xh, xv, zh, zv)
    owned: np.ndarray | None = None  # (M, n, ax, az) extrinsic messages
    borrowed: np.ndarray | None = None  # (M, n_borrowed, 2)
    dual_borrowed: np.ndarray | None = None  # (M, n_dual_borrowed, 2)


def _kernel(
    geo: BlockGeometry,
    P: np.ndarray,
    xb: np.ndarray | None,
    zb: np.ndarray | None,
    sp: np.ndarray | None,
    ss: np.ndarray | None,
    labels: bool = True,
    messages: tuple[int, ...] | None = None,
) -> BlockOutput:
    """Unguarded kernel; see ``block_kernel``."""
    M, n, ax, az = P.shape
    P = P / np.maximum(P.max(axis=(2, 3), keepdims=True), 1e-300)
    tb = kernel_tables(geo, ax, az)
    sx, sz = ax**n, az**n
    if ax == 2:
        fxs = _check_factors(geo.plaquettes, sp, xb, tb.xpar)
        FX = _product(fxs, tb.xpar, M, sx)
    else:
        FX = np.ones((M, 1))
    if az == 2:
        fzs = _check_factors(geo.sites, ss, zb, tb.zpar)
        FZ = _product(fzs, tb.zpar, M, sz)
    else:
        FZ = np.ones((M, 1))
    # keep magnitudes near one; outputs are normalized anyway
    FX /= np.maximum(FX.max(axis=1, keepdims=True), 1e-300)
    FZ /= np.maximum(FZ.max(axis=1, keepdims=True), 1e-300)
    out = BlockOutput()
    xshape = (ax,) * n
    zshape = (az,) * n
    allq = list(range(n))

    if labels:
        nz = az * az
        onehot_z = (tb.zlab[None, :] == np.arange(nz)[:, None]).astype(float)  # (nz, sz)
        T = (FZ[:, None, :] * onehot_z[None]).reshape((M, nz) + zshape)
        G = _apply_all(T, allq, n, P).reshape(M, nz, sx)
        onehot_x = (tb.xlab[None, :] == np.arange(ax * ax)[:, None]).astype(float)
        R = np.einsum("mx,kx,mlx->mkl", FX, onehot_x, G)
        R = R.reshape(M, ax, ax, az, az)
        out.labels = R / R.sum(axis=(1, 2, 3, 4), keepdims=True)

    if messages is None:
        return out

    want = list(messages)
    rest = [q for q in allq if q not in want]
    T0 = _apply_all(FZ.reshape((M, 1) + zshape), rest, n, P)
    own = np.ones((M, n, ax, az))
    G = None
    FXr = FX.reshape((M,) + xshape)
    if want:
        for q, Tq in _leave_one_out(T0, want, n, P):
            pre = ax**q
            post = ax ** (n - q - 1)
            Fq = FXr.reshape(M, pre, ax, post)
            Tq2 = Tq.reshape(M, pre, az, post)
            own[:, q] = np.einsum("mpaq,mpbq->mab", Fq, Tq2)
            if G is None:
                G = _apply(Tq, q, n, P[:, q]).reshape(M, sx)
        out.owned = own
    else:
        G = T0.reshape(M, sx)

    if ax == 2 and geo.borrowed:
        out.borrowed = _extrinsic_borrowed(
            fxs, geo.plaquettes, tb.xpar, G, [sp[:, c] for c in range(sp.shape[1])], xb,
            len(geo.borrowed), M, sx,
        )
    if az == 2 and geo.dual_borrowed:
        Gt = _apply_all(FX.reshape((M, 1) + xshape), allq, n, P, transpose=True).reshape(M, sz)
        out.dual_borrowed = _extrinsic_borrowed(
            fzs, geo.sites, tb.zpar, Gt, [ss[:, c] for c in range(ss.shape[1])], zb,
            len(geo.dual_borrowed), M, sz,
        )
    return out


def _kernel_fast(geo, P, xb, zb, sp, ss, labels=True, messages=None) -> BlockOutput:
    """Compiled kernel with the same inputs and outputs as ``_kernel``."""
    M, n, ax, az = P.shape
    P = rows(P, 2, _fast.scale_rows, False)
    tb = kernel_tables(geo, ax, az)
    mask = np.zeros(n, np.bool_)
    if messages is not None:
        mask[list(messages)] = True
    want_brw = messages is not None
    out = BlockOutput()
    owned = np.zeros((M, n, ax, az))
    if ax == 2:
        gx = np.stack(_check_factors(geo.plaquettes, sp, xb, tb.xpar), axis=1)
        bout = np.zeros((M, len(geo.borrowed), 2))
    if az == 2:
        gz = np.stack(_check_factors(geo.sites, ss, zb, tb.zpar), axis=1)
        dout = np.zeros((M, len(geo.dual_borrowed), 2))
    if ax == 2 and az == 2:
        lab = np.zeros((M, 4, 4))
        _fast.joint(
            P, tb.xpar.astype(np.uint8), tb.zpar.astype(np.uint8), tb.xlab, tb.zlab, gx, gz,
            tb.xbrw, tb.xbrw_len, tb.zbrw, tb.zbrw_len, sp.astype(np.bool_), ss.astype(np.bool_),
            np.ascontiguousarray(xb), np.ascontiguousarray(zb), labels, mask, want_brw, lab, owned, bout, dout,
        )
        if want_brw:
            out.borrowed, out.dual_borrowed = bout, dout
    else:
        xs = ax == 2
        lab = np.zeros((M, 4))
        own2 = np.zeros((M, n, 2))
        _fast.single_sector(
            np.ascontiguousarray(P[:, :, :, 0] if xs else P[:, :, 0, :]),
            (tb.xpar if xs else tb.zpar).astype(np.uint8),
            tb.xlab if xs else tb.zlab,
            gx if xs else gz,
            tb.xbrw if xs else tb.zbrw,
            tb.xbrw_len if xs else tb.zbrw_len,
            (sp if xs else ss).astype(np.bool_),
            np.ascontiguousarray(xb if xs else zb),
            labels, mask, want_brw, lab, own2, bout if xs else dout,
        )
        owned = own2.reshape(M, n, ax, az)
        if want_brw:
            if xs:
                out.borrowed = bout
            else:
                out.dual_borrowed = dout
    if labels:
        lab = lab.reshape(M, ax, ax, az, az)
        out.labels = lab / lab.sum(axis=(1, 2, 3, 4), keepdims=True)
    if messages is not None:
        owned[:, ~mask] = 1.0
        out.owned = owned
    return out


def _underflowed(out: BlockOutput, M: int) -> np.ndarray:
    bad = np.zeros(M, bool)
    if out.labels is not None:
        tot = out.labels.reshape(M, -1).sum(axis=1)
        bad |= ~np.isfinite(tot) | (tot <= 0)
    for m in (out.owned, out.borrowed, out.dual_borrowed):
        if m is not None:
            t = m.reshape(M, m.shape[1], -1).sum(axis=2)
            bad |= (~np.isfinite(t) | (t <= 0)).any(axis=1)
    return bad


def _clamp(a: np.ndarray | None, axes) -> np.ndarray | None:
    if a is None:
        return None
    a = a / np.maximum(a.max(axis=axes, keepdims=True), 1e-300)
    return np.maximum(a, RESCUE_FLOOR)


def block_kernel(
    geo: BlockGeometry,
    P: np.ndarray,
    xb: np.ndarray | None,
    zb: np.ndarray | None,
    sp: np.ndarray | None,
    ss: np.ndarray | None,
    labels: bool = True,
    messages: tuple[int, ...] | None = None,
    backend: str = "compiled",
) -> BlockOutput:
    """Marginalize a batch of blocks.

    ``P`` is ``(M, n, ax, az)``: effective joint tables of the owned qubits.
    ``xb``/``zb`` are ``(M, k, 2)`` bit distributions of borrowed edges;
    ``sp``/``ss`` are ``(M, n_checks)`` syndrome bits.  With ``labels`` the
    joint distribution of the two coarse qubits is returned; ``messages``
    lists the owned slots whose extrinsic messages are wanted (borrowed
    messages are produced whenever ``messages`` is not None).

    ``backend`` is ``"compiled"`` (numba loops) or ``"numpy"`` (vectorized
    reference).  Blocks whose every consistent configuration underflows are recomputed
    with all inputs clamped at ``RESCUE_FLOOR``.
    """
    kernel = _kernel_fast if backend == "compiled" else _kernel
    with np.errstate(invalid="ignore", divide="ignore", under="ignore"):
        out = kernel(geo, P, xb, zb, sp, ss, labels, messages)
        bad = _underflowed(out, P.shape[0])
        if bad.any():
            sub = lambda a: None if a is None else a[bad]
            fix = kernel(
                geo, _clamp(P[bad], (2, 3)), _clamp(sub(xb), -1), _clamp(sub(zb), -1),
                sub(sp), sub(ss), labels, messages,
            )
            for name in ("labels", "owned", "borrowed", "dual_borrowed"):
                cur = getattr(out, name)
                if cur is not None:
                    cur[bad] = getattr(fix, name)
    return out


def rows(a: np.ndarray, k: int, fn, *args) -> np.ndarray:
    """Apply a compiled row function over the trailing ``k`` axes."""
    tail = a.shape[a.ndim - k :]
    flat = np.ascontiguousarray(a, dtype=float).reshape(-1, int(np.prod(tail)))
    return fn(flat, *args).reshape(a.shape)


def normalize_messages(m: np.ndarray, axes) -> np.ndarray:
    """Scale to max one, clamp at ``MESSAGE_FLOOR``, normalize; ``axes`` are trailing."""
    k = len(axes) if isinstance(axes, tuple) else 1
    return rows(m, k, _fast.normalize_rows, MESSAGE_FLOOR)
