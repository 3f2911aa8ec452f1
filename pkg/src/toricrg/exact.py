"""Exact maximum-likelihood and minimum-energy decoding on small tori.

Class weights are computed either by enumerating the coset
``reference * stabilizer * logical`` (never all Pauli frames) with
log-domain accumulation, or by contracting the same sum as a tensor
network whose indices are the stabilizer-generator coefficients.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import opt_einsum
from scipy.special import logsumexp

from .lattice import (
    HomologyClass,
    Lattice,
    LatticeError,
    PauliFrame,
    Syndrome,
    canonical_correction,
    logical_bits,
    plaquette_operator,
    site_operator,
)
from .noise import DEPOLARIZING, ChannelParam, QubitPrior, independent_beta, nishimori_beta

SECTORS = ("both", "x_only", "z_only")
LOG_FLOOR = 1e-300


class TooLargeError(ValueError):
    """The requested enumeration exceeds the feasibility guard."""


METHODS = ("auto", "enumerate", "contract")
# contraction cost grows like 2**(boundary width); 8x8 no longer fits in memory
CONTRACT_MAX_FACES = 16


def _check_sector(lattice: Lattice, sector: str, method: str = "enumerate"):
    if sector not in SECTORS:
        raise ValueError(f"unknown sector {sector!r}")
    if method == "contract":
        limit = CONTRACT_MAX_FACES
    else:
        limit = 4 if sector == "both" else 16
    if lattice.n_faces > limit:
        raise TooLargeError(
            f"exact {method} with sector={sector} is limited to {limit} faces; "
            f"lattice {lattice.lx}x{lattice.ly} has {lattice.n_faces}"
        )


def _resolve_method(lattice: Lattice, sector: str, method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method != "auto":
        _check_sector(lattice, sector, method)
        return method
    try:
        _check_sector(lattice, sector, "enumerate")
        return "enumerate"
    except TooLargeError:
        _check_sector(lattice, sector, "contract")
        return "contract"


def n_classes(sector: str) -> int:
    return 16 if sector == "both" else 4


def sector_class(sector: str, k: int) -> HomologyClass:
    """Full homology class for a class index in a sector's numbering."""
    if sector == "x_only":
        return HomologyClass(k & 1, (k >> 1) & 1, 0, 0)
    if sector == "z_only":
        return HomologyClass(0, 0, k & 1, (k >> 1) & 1)
    return HomologyClass.from_index(k)


ROW_BUDGET = 1 << 24  # score entries per block of trials


def _span(gens: np.ndarray) -> np.ndarray:
    k = gens.shape[0]
    coeffs = (np.arange(2**k)[:, None] >> np.arange(k)[None, :]) & 1
    return (coeffs @ gens.astype(np.int64)) % 2 == 1


@functools.lru_cache(maxsize=None)
def coset_table(lx: int, ly: int, sector: str):
    """Stabilizer-times-logical frames grouped by class.

    Returns ``(fx, fz)`` bool arrays of shape ``(K, S, n)``: entry ``[k, s]``
    is stabilizer element ``s`` times the class-``k`` representative.
    """
    lattice = Lattice(lx, ly)
    n = lattice.n_qubits
    coords = [(i, j) for i in range(lx) for j in range(ly)]
    xs = np.array([site_operator(lattice, i, j).x for i, j in coords[:-1]]).reshape(-1, n)
    zs = np.array([plaquette_operator(lattice, i, j).z for i, j in coords[:-1]]).reshape(-1, n)
    if sector == "both":
        gens_x = np.concatenate([xs, np.zeros_like(zs)])
        gens_z = np.concatenate([np.zeros_like(xs), zs])
        both = _span(np.concatenate([gens_x, gens_z], axis=1))
        sx, sz = both[:, :n], both[:, n:]
        classes = range(16)
    elif sector == "x_only":
        sx = _span(xs)
        sz = np.zeros_like(sx)
        classes = range(4)
    else:
        sz = _span(zs)
        sx = np.zeros_like(sz)
        classes = range(4)
    fx, fz = [], []
    for k in classes:
        lx_bits, lz_bits = logical_bits(lattice, sector_class(sector, k).index)
        fx.append(sx ^ lx_bits)
        fz.append(sz ^ lz_bits)
    fx = np.array(fx)
    fz = np.array(fz)
    fx.setflags(write=False)
    fz.setflags(write=False)
    return fx, fz


def class_log_weights(
    lattice: Lattice, sector: str, ref_x: np.ndarray, ref_z: np.ndarray, table: np.ndarray
) -> np.ndarray:
    """Batched unnormalized log class weights.

    ``ref_x``/``ref_z`` are ``(N, n)`` reference frames carrying the observed
    syndrome; ``table`` is the ``(N, n, 2, 2)`` joint prior indexed ``[x, z]``
    (single-sector modes may pass ``(N, n, 2, 1)`` or ``(N, n, 1, 2)``).
    Returns ``(N, K)``.
    """
    _check_sector(lattice, sector)
    fx, fz = coset_table(lattice.lx, lattice.ly, sector)
    ref_x = np.asarray(ref_x, bool)
    ref_z = np.asarray(ref_z, bool)
    table = np.asarray(table, float)
    N = ref_x.shape[0]
    K, S, n = fx.shape
    if sector == "both":
        logtab = np.log(np.maximum(table, LOG_FLOOR)).reshape(N, n, 4)
        ex = ref_x[:, None, None, :] ^ fx[None]
        ez = ref_z[:, None, None, :] ^ fz[None]
        code = 2 * ex.astype(np.int64) + ez
        lw = np.take_along_axis(
            logtab[:, None, None, :, :], code[..., None], axis=-1
        )[..., 0].sum(axis=-1)
        return logsumexp(lw, axis=-1)
    if sector == "x_only":
        marg = table.sum(axis=3)
        ref, frames = ref_x, fx
    else:
        marg = table.sum(axis=2)
        ref, frames = ref_z, fz
    lp = np.log(np.maximum(marg, LOG_FLOOR))  # (N, n, 2)
    base = np.take_along_axis(lp, ref[..., None].astype(np.int64), axis=-1)[..., 0].sum(axis=-1)
    d = lp[..., 1] - lp[..., 0]
    coef = d * (1 - 2 * ref.astype(float))  # flipping a reference bit reverses its cost
    flat = _float_frames(lattice.lx, lattice.ly, sector)  # (K*S, n)
    # no frame can score above the sum of the positive coefficients, so one
    # shifted exponential pass cannot overflow
    top = np.maximum(coef, 0).sum(axis=1)
    out = np.empty((N, K))
    step = max(1, ROW_BUDGET // flat.shape[0])  # bounds the (rows, K*S) score matrix
    for a in range(0, N, step):
        rows = slice(a, a + step)
        score = (coef[rows] @ flat.T) - top[rows, None]
        lin = np.exp(score).reshape(-1, K, S).sum(axis=-1)
        with np.errstate(divide="ignore"):
            part = np.log(lin)
        lost = (lin == 0).any(axis=1)
        if lost.any():  # extreme priors: redo those rows in the log domain
            part[lost] = logsumexp(score[lost].reshape(-1, K, S), axis=-1)
        out[rows] = part + (top[rows] + base[rows])[:, None]
    return out


@functools.lru_cache(maxsize=None)
def _float_frames(lx: int, ly: int, sector: str) -> np.ndarray:
    fx, fz = coset_table(lx, ly, sector)
    frames = fx if sector == "x_only" else fz
    return np.ascontiguousarray(frames.reshape(-1, frames.shape[-1]), dtype=float)


@functools.lru_cache(maxsize=None)
def _network(lx: int, ly: int, sector: str):
    """Compiled contraction of the class partition sum.

    Each qubit contributes a tensor over the coefficients of the generators
    that touch it: two site generators (X part) and two plaquette
    generators (Z part).  The overall factor of two from the redundant
    generators is common to all classes.
    """
    lattice = Lattice(lx, ly)
    F = lattice.n_faces
    n = lattice.n_qubits
    sites = [[] for _ in range(n)]
    plaqs = [[] for _ in range(n)]
    for f in range(F):
        i, j = divmod(f, ly)
        for q in lattice.site_qubits(i, j):
            sites[q].append(f)
        for q in lattice.plaquette_qubits(i, j):
            plaqs[q].append(f)
    use_x = sector in ("both", "x_only")
    use_z = sector in ("both", "z_only")
    terms = []
    for q in range(n):
        idx = ""
        if use_x:
            idx += "".join(opt_einsum.get_symbol(f) for f in sites[q])
        if use_z:
            idx += "".join(opt_einsum.get_symbol(F * use_x + f) for f in plaqs[q])
        terms.append(idx)
    expr = opt_einsum.contract_expression(
        # repeats are seeded by their index, so the path is reproducible
        ",".join(terms) + "->", *[(2,) * len(t) for t in terms], optimize=opt_einsum.RandomGreedy(max_repeats=128)
    )
    return expr, tuple(map(tuple, sites)), tuple(map(tuple, plaqs))


def _qubit_tensors(table, ex, ez, sites, plaqs, sector):
    """Per-qubit tensors ``T[a1, a2, (b1, b2)] = P(ex ^ a1 ^ a2, ez ^ b1 ^ b2)``."""
    bit = np.array([0, 1])
    par = bit[:, None] ^ bit[None, :]  # parity of two coefficients
    out = []
    for q in range(table.shape[0]):
        t = table[q]
        if sector == "both":
            T = t[(ex[q] ^ par)[:, :, None, None], (ez[q] ^ par)[None, None, :, :]]
        elif sector == "x_only":
            T = t.sum(axis=1)[ex[q] ^ par]
        else:
            T = t.sum(axis=0)[ez[q] ^ par]
        out.append(T)
    return out


def class_log_weights_contract(
    lattice: Lattice, sector: str, ref_x: np.ndarray, ref_z: np.ndarray, table: np.ndarray
) -> np.ndarray:
    """Same output as ``class_log_weights``, by exact tensor contraction."""
    _check_sector(lattice, sector, "contract")
    expr, sites, plaqs = _network(lattice.lx, lattice.ly, sector)
    ref_x = np.asarray(ref_x, bool).astype(np.int64)
    ref_z = np.asarray(ref_z, bool).astype(np.int64)
    table = np.broadcast_to(np.asarray(table, float), (ref_x.shape[0],) + np.shape(table)[1:])
    K = n_classes(sector)
    out = np.empty((ref_x.shape[0], K))
    for m in range(ref_x.shape[0]):
        tab = table[m]
        if tab.shape[1:] != (2, 2):
            # single-sector tables: pad the unused bit with a zero row
            full = np.zeros((tab.shape[0], 2, 2))
            full[:, : tab.shape[1], : tab.shape[2]] = tab
            tab = full
        scale = tab.reshape(len(tab), -1).max(axis=1)
        tab = tab / scale[:, None, None]
        for k in range(K):
            lxb, lzb = logical_bits(lattice, sector_class(sector, k).index)
            tensors = _qubit_tensors(tab, ref_x[m] ^ lxb, ref_z[m] ^ lzb, sites, plaqs, sector)
            z = float(expr(*tensors))
            out[m, k] = math.log(z) if z > 0 else -np.inf
        out[m] += np.log(scale).sum()
    return out


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    """Probabilities of the homology classes of ``reference * error``."""

    probs: np.ndarray
    sector: str = "both"

    def __post_init__(self):
        probs = np.asarray(self.probs, float)
        if probs.shape != (n_classes(self.sector),):
            raise ValueError("wrong number of class probabilities for sector")
        object.__setattr__(self, "probs", probs)

    def argmax(self) -> int:
        return int(np.argmax(self.probs))

    def ties(self, rtol: float = 1e-12) -> tuple[int, ...]:
        top = self.probs.max()
        return tuple(int(k) for k in np.flatnonzero(self.probs >= top * (1 - rtol)))

    def best_class(self) -> HomologyClass:
        return sector_class(self.sector, self.argmax())

    def full(self) -> np.ndarray:
        """16-entry vector; single-sector distributions are placed on their own bits."""
        if self.sector == "both":
            return self.probs.copy()
        out = np.zeros(16)
        for k, pk in enumerate(self.probs):
            out[sector_class(self.sector, k).index] = pk
        return out


def _normalize_log(lw: np.ndarray) -> np.ndarray:
    return np.exp(lw - logsumexp(lw, axis=-1, keepdims=True))


def class_probabilities_exact(
    lattice: Lattice,
    syn: Syndrome,
    prior: QubitPrior,
    sector: str = "both",
    reference=None,
    method: str = "auto",
) -> ClassDistribution:
    """Exact class probabilities relative to ``reference`` (canonical correction by default).

    ``method="auto"`` enumerates cosets where that is feasible and falls
    back to tensor contraction otherwise.
    """
    method = _resolve_method(lattice, sector, method)
    if len(prior) != lattice.n_qubits:
        raise LatticeError("prior length does not match lattice")
    ref = canonical_correction(lattice, syn) if reference is None else reference
    fn = class_log_weights if method == "enumerate" else class_log_weights_contract
    lw = fn(lattice, sector, ref.x[None], ref.z[None], prior.table()[None])
    return ClassDistribution(_normalize_log(lw)[0], sector)


def _frames_for(lattice: Lattice, syn: Syndrome, sector: str):
    _check_sector(lattice, sector)
    fx, fz = coset_table(lattice.lx, lattice.ly, sector)
    ref = canonical_correction(lattice, syn)
    # leading batch axis of one: (1, K, S, n)
    return (ref.x ^ fx)[None], (ref.z ^ fz)[None]


def _frame_weights(ex, ez, sector):
    if sector == "both":
        return np.count_nonzero(ex | ez, axis=-1)
    if sector == "x_only":
        return np.count_nonzero(ex, axis=-1)
    return np.count_nonzero(ez, axis=-1)


@dataclass(frozen=True, eq=False)
class FreeEnergyReport:
    """Per-class thermodynamic quantities of the conditional chain distribution.

    ``energy`` and ``free_energy`` are in units of J, ``entropy`` in nats.
    Classes without admissible chains have zero probability and infinite
    ``beta_free_energy``.
    """

    beta: float
    energy: np.ndarray
    entropy: np.ndarray
    beta_free_energy: np.ndarray
    log_partition: float
    sector: str = "both"

    @property
    def free_energy(self) -> np.ndarray:
        if self.beta == 0:
            return np.full_like(self.beta_free_energy, np.nan)
        return self.beta_free_energy / self.beta

    def probabilities(self) -> np.ndarray:
        return np.exp(-self.beta_free_energy - self.log_partition)

    def argmin(self) -> int:
        return int(np.argmin(self.beta_free_energy))


def free_energy_report(
    lattice: Lattice,
    syn: Syndrome,
    channel: ChannelParam,
    sector: str = "both",
    max_weight: int | None = None,
) -> FreeEnergyReport:
    """Free energy of every class at the channel's Nishimori temperature.

    Depolarizing chains cost ``J`` per non-identity qubit; independent
    bit/phase-flip chains cost ``J`` per X part plus ``J`` per Z part.
    ``max_weight`` restricts the ensemble to chains of bounded weight.
    """
    ex, ez = _frames_for(lattice, syn, sector)
    if channel.model == DEPOLARIZING:
        beta = nishimori_beta(channel.p, channel.J) if channel.p < 0.75 else 0.0
        weights = _frame_weights(ex, ez, sector)
    else:
        beta = independent_beta(channel.p, channel.J) if channel.p != 0.5 else 0.0
        weights = {
            "both": np.count_nonzero(ex, axis=-1) + np.count_nonzero(ez, axis=-1),
            "x_only": np.count_nonzero(ex, axis=-1),
            "z_only": np.count_nonzero(ez, axis=-1),
        }[sector]
    weights = weights[0]  # (K, S)
    energy = channel.J * weights.astype(float)
    logw = -beta * energy
    if max_weight is not None:
        logw = np.where(weights <= max_weight, logw, -np.inf)
    K = logw.shape[0]
    lnz_cls = np.full(K, -np.inf)
    e_cls = np.full(K, np.nan)
    s_cls = np.full(K, np.nan)
    for k in range(K):
        ok = np.isfinite(logw[k])
        if not ok.any():
            continue
        lz = logsumexp(logw[k][ok])
        cond = np.exp(logw[k][ok] - lz)
        lnz_cls[k] = lz
        e_cls[k] = float(np.dot(cond, energy[k][ok]))
        nz = cond > 0
        s_cls[k] = float(-np.dot(cond[nz], np.log(cond[nz])))
    beta_f = beta * e_cls - s_cls
    beta_f = np.where(np.isfinite(lnz_cls), beta_f, np.inf)
    return FreeEnergyReport(beta, e_cls, s_cls, beta_f, float(logsumexp(lnz_cls)), sector)


@dataclass(frozen=True, eq=False)
class MinEnergyResult:
    best: int
    min_weights: np.ndarray
    ties: tuple[int, ...]
    sector: str = "both"

    @property
    def best_class(self) -> HomologyClass:
        return sector_class(self.sector, self.best)

    @property
    def is_tie(self) -> bool:
        return len(self.ties) > 1


def min_energy_class(lattice: Lattice, syn: Syndrome, sector: str = "both") -> MinEnergyResult:
    """Class holding a minimum-weight syndrome-consistent frame; ties are listed."""
    ex, ez = _frames_for(lattice, syn, sector)
    w = _frame_weights(ex, ez, sector)[0].min(axis=-1)
    best = int(np.argmin(w))
    ties = tuple(int(k) for k in np.flatnonzero(w == w[best]))
    return MinEnergyResult(best, w, ties, sector)


def torus_distance(a, b, shape) -> int:
    lx, ly = shape
    dx = abs(a[0] - b[0]) % lx
    dy = abs(a[1] - b[1]) % ly
    return min(dx, lx - dx) + min(dy, ly - dy)


MAX_MATCHING_DEFECTS = 20


def mwpm_small(defects, shape) -> tuple[list[tuple[int, int]], int]:
    """Exact minimum-weight perfect matching of at most 20 defects on a torus.

    Returns index pairs into ``defects`` and the total torus Manhattan
    distance.  Among optimal pairings the lexicographically smallest wins.
    """
    pts = [tuple(d) for d in defects]
    k = len(pts)
    if k % 2:
        raise ValueError("odd number of defects cannot be perfectly matched")
    if k > MAX_MATCHING_DEFECTS:
        raise TooLargeError(f"mwpm_small handles at most {MAX_MATCHING_DEFECTS} defects, got {k}")
    dist = [[torus_distance(a, b, shape) for b in pts] for a in pts]
    full = (1 << k) - 1

    @functools.lru_cache(maxsize=None)
    def best(mask: int) -> tuple[int, int]:
        # mask holds the still-unmatched defects; pair the lowest one first
        if mask == 0:
            return 0, -1
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        top = (math.inf, -1)
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            cost = dist[i][j] + best(rest & ~(1 << j))[0]
            if cost < top[0]:
                top = (cost, j)
        return top

    pairs = []
    mask = full
    total = best(full)[0]
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = best(mask)[1]
        pairs.append((i, j))
        mask &= ~((1 << i) | (1 << j))
    best.cache_clear()
    return pairs, int(total)


def brute_force_class_probabilities(lattice: Lattice, syn: Syndrome, prior: QubitPrior) -> np.ndarray:
    """All ``4**n`` frames filtered by syndrome; only for ``n <= 8`` qubits.

    Kept separate from the coset enumeration as an independent check.
    """
    n = lattice.n_qubits
    if n > 8:
        raise TooLargeError("brute force is limited to the 2x2 torus")
    codes = (np.arange(4**n)[:, None] // 4 ** np.arange(n)[None, :]) % 4  # Pauli code per qubit
    x = (codes == 1) | (codes == 2)
    z = (codes == 2) | (codes == 3)
    from .lattice import class_bits, plaquette_syndrome, site_syndrome

    hx, vx = lattice.split(x)
    hz, vz = lattice.split(z)
    pl = plaquette_syndrome(hx, vx).reshape(len(codes), -1)
    st = site_syndrome(hz, vz).reshape(len(codes), -1)
    keep = (pl == syn.plaquettes).all(axis=1) & (st == syn.sites).all(axis=1)
    ref = canonical_correction(lattice, syn)
    rx, rz = lattice.split(x[keep] ^ ref.x)
    rhz, rvz = lattice.split(z[keep] ^ ref.z)
    cls = class_bits(rx, rz, rhz, rvz)
    probs = np.prod(prior.probs[np.arange(n), codes[keep]], axis=1)
    out = np.bincount(cls, weights=probs, minlength=16)
    return out / out.sum()
