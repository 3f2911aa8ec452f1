"""Recursive block decoding with belief propagation between overlapping blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..exact import ClassDistribution, class_log_weights
from ..lattice import (
    HomologyClass,
    Lattice,
    LatticeError,
    PauliFrame,
    Syndrome,
    canonical_correction,
    canonical_correction_bits,
    logical_representative,
)
from ..noise import QubitPrior
from ._fast import scale_rows
from .block import block_kernel, normalize_messages, rows
from .geometry import (
    TWO_BY_ONE,
    TWO_BY_TWO,
    VARIANTS,
    BlockGeometry,
    coarse_frame_arrays,
    coarse_syndrome_arrays,
    level_factors,
)

CORRELATED = "correlated"
INDEPENDENT = "independent_xz"
KEEP_JOINT = "keep_joint"
MARGINALIZE = "marginalize"


@dataclass(frozen=True)
class RgConfig:
    variant: str = TWO_BY_TWO
    sector: str = CORRELATED
    bp_rounds: int = 3
    pair_correlations: str = MARGINALIZE
    backend: str = "compiled"  # block kernel: "compiled" or "numpy"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.sector not in (CORRELATED, INDEPENDENT):
            raise ValueError(f"unknown sector {self.sector!r}")
        if self.bp_rounds < 0:
            raise ValueError("bp_rounds must be non-negative")
        if self.pair_correlations not in (MARGINALIZE, KEEP_JOINT):
            raise ValueError(f"unknown pair_correlations {self.pair_correlations!r}")
        if self.backend not in ("compiled", "numpy"):
            raise ValueError(f"unknown backend {self.backend!r}")


def _shifted(arr: np.ndarray, shift, slot=None) -> np.ndarray:
    """``out[:, a, b] = arr[:, a + da, b + db]`` on the periodic cell grid.

    With ``slot`` only ``arr[:, :, :, slot]`` is shifted.
    """
    if slot is not None:
        arr = arr[:, :, :, slot]
    da, db = shift
    if da == 0 and db == 0:
        return arr
    return np.roll(arr, (-da, -db), axis=(1, 2))


@dataclass
class BlockBelief:
    """Messages on shared qubits for every cell of one level.

    ``owned[:, a, b, o]`` is the message from cell ``(a, b)`` about its owned
    slot ``o``; ``borrowed``/``dual_borrowed`` are messages from the
    borrowing cell about the X (resp. Z) bit of a borrowed edge.  All are
    likelihoods normalized to sum one.
    """

    owned: np.ndarray  # (N, A, B, n, ax, az)
    borrowed: np.ndarray | None  # (N, A, B, k, 2)
    dual_borrowed: np.ndarray | None


@dataclass
class LevelState:
    """Priors and syndromes of one level, all arrays batched over trials."""

    geo: BlockGeometry
    prior_owned: np.ndarray  # (N, A, B, n, ax, az)
    sp: np.ndarray | None  # (N, A, B, n_plaquettes)
    ss: np.ndarray | None  # (N, A, B, n_sites)

    @property
    def ax(self) -> int:
        return self.prior_owned.shape[-2]

    @property
    def az(self) -> int:
        return self.prior_owned.shape[-1]


def make_level(geo: BlockGeometry, ph, pv, plaq, sites) -> LevelState:
    """Gather per-cell data from ``(N, lx, ly, ax, az)`` priors and ``(N, lx, ly)`` syndromes."""
    fx, fy = geo.fx, geo.fy
    srcs = {"h": ph, "v": pv}
    prior = np.stack([srcs[k][:, dx::fx, dy::fy] for k, dx, dy in geo.owned], axis=3)
    cells = [(dx, dy) for dx in range(fx) for dy in range(fy)]
    sp = np.stack([plaq[:, dx::fx, dy::fy] for dx, dy in cells], axis=3) if plaq is not None else None
    ss = np.stack([sites[:, dx::fx, dy::fy] for dx, dy in cells], axis=3) if sites is not None else None
    return LevelState(geo, prior, sp, ss)


def initial_belief(state: LevelState) -> BlockBelief:
    N, A, B, n, ax, az = state.prior_owned.shape
    geo = state.geo
    return BlockBelief(
        owned=np.ones((N, A, B, n, ax, az)) / (ax * az),
        borrowed=np.full((N, A, B, len(geo.borrowed), 2), 0.5) if ax == 2 else None,
        dual_borrowed=np.full((N, A, B, len(geo.dual_borrowed), 2), 0.5) if az == 2 else None,
    )


def _effective_inputs(state: LevelState, belief: BlockBelief):
    """Effective owned tables and borrowed bit marginals seen by every cell."""
    geo = state.geo
    P0 = state.prior_owned
    ax, az = state.ax, state.az
    P = P0.copy()
    for o in range(len(geo.owned)):
        nb = geo.x_borrower[o]
        if ax == 2 and nb is not None:
            P[..., o, :, :] *= _shifted(belief.borrowed, nb.shift, nb.slot)[..., :, None]
        nb = geo.z_borrower[o]
        if az == 2 and nb is not None:
            P[..., o, :, :] *= _shifted(belief.dual_borrowed, nb.shift, nb.slot)[..., None, :]

    def borrowed_marg(owners, skip_x: bool):
        out = []
        for ow in owners:
            joint = _shifted(P0, ow.shift, ow.slot) * _shifted(belief.owned, ow.shift, ow.slot)
            other = geo.z_borrower[ow.slot] if skip_x else geo.x_borrower[ow.slot]
            if other is not None:
                sh = (ow.shift[0] + other.shift[0], ow.shift[1] + other.shift[1])
                if skip_x and az == 2:
                    joint = joint * _shifted(belief.dual_borrowed, sh, other.slot)[..., None, :]
                elif not skip_x and ax == 2:
                    joint = joint * _shifted(belief.borrowed, sh, other.slot)[..., :, None]
            out.append(joint.sum(axis=-1) if skip_x else joint.sum(axis=-2))
        return rows(np.stack(out, axis=3), 1, scale_rows, True)

    xb = borrowed_marg(geo.borrowed_owner, True) if ax == 2 and geo.borrowed else None
    zb = borrowed_marg(geo.dual_borrowed_owner, False) if az == 2 and geo.dual_borrowed else None
    return rows(P, 2, scale_rows, True), xb, zb


def _flat(arr):
    if arr is None:
        return None
    N, A, B = arr.shape[:3]
    return arr.reshape((N * A * B,) + arr.shape[3:])


def _shared_slots(geo: BlockGeometry, ax: int, az: int) -> tuple[int, ...]:
    return tuple(
        o
        for o in range(len(geo.owned))
        if (ax == 2 and geo.x_borrower[o] is not None) or (az == 2 and geo.z_borrower[o] is not None)
    )


def bp_pass(state: LevelState, belief: BlockBelief, rounds: int, backend: str = "compiled") -> BlockBelief:
    """Synchronous message updates; every cell re-derives all its outgoing messages each round."""
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    geo = state.geo
    N, A, B = state.prior_owned.shape[:3]
    shared = _shared_slots(geo, state.ax, state.az)
    for _ in range(rounds):
        P, xb, zb = _effective_inputs(state, belief)
        res = block_kernel(
            geo, _flat(P), _flat(xb), _flat(zb), _flat(state.sp), _flat(state.ss),
            labels=False, messages=shared, backend=backend,
        )
        owned = normalize_messages(res.owned, axes=(-2, -1)).reshape(belief.owned.shape)
        borrowed = dual = None
        if res.borrowed is not None:
            borrowed = normalize_messages(res.borrowed, axes=-1).reshape(belief.borrowed.shape)
        if res.dual_borrowed is not None:
            dual = normalize_messages(res.dual_borrowed, axes=-1).reshape(belief.dual_borrowed.shape)
        belief = BlockBelief(owned, borrowed, dual)
    return belief


def block_likelihoods(state: LevelState, belief: BlockBelief, backend: str = "compiled") -> np.ndarray:
    """Distribution over the two coarse qubits of each cell, ``(N, A, B, ax, ax, az, az)``.

    Axes are the X parts of the coarse ``h`` and ``v`` qubits followed by
    their Z parts.
    """
    P, xb, zb = _effective_inputs(state, belief)
    res = block_kernel(
        state.geo, _flat(P), _flat(xb), _flat(zb), _flat(state.sp), _flat(state.ss), backend=backend
    )
    N, A, B = state.prior_owned.shape[:3]
    return res.labels.reshape((N, A, B) + res.labels.shape[1:])


def coarse_priors(R: np.ndarray):
    """Per-qubit coarse tables from cell label distributions."""
    ph = R.sum(axis=(4, 6))  # keep (xh, zh)
    pv = R.sum(axis=(3, 5))  # keep (xv, zv)
    # floored like messages so that no coarse Pauli is ever ruled out
    return normalize_messages(ph, (-2, -1)), normalize_messages(pv, (-2, -1))


def coarse_syndrome(geo: BlockGeometry, fine: Syndrome) -> Syndrome:
    lat = Lattice(geo.lx, geo.ly)
    cp, cs = coarse_syndrome_arrays(
        geo, fine.plaquettes.reshape(lat.shape), fine.sites.reshape(lat.shape)
    )
    return Syndrome(cp, cs)


def coarse_frame(geo: BlockGeometry, frame: PauliFrame) -> PauliFrame:
    lat = Lattice(geo.lx, geo.ly)
    hx, vx = lat.split(frame.x)
    hz, vz = lat.split(frame.z)
    chx, cvx, chz, cvz = coarse_frame_arrays(geo, hx, vx, hz, vz)
    c = geo.coarse
    return PauliFrame(c.join(chx, cvx), c.join(chz, cvz))


def _geometries(lattice: Lattice, variant: str):
    geos = []
    lx, ly = lattice.lx, lattice.ly
    for fx, fy in level_factors(variant, lx, ly):
        geos.append(BlockGeometry(variant, lx, ly, fx, fy))
        lx //= fx
        ly //= fy
    return geos


def _run_sector(lattice, geos, ph, pv, plaq, sites, ref_bits, config: RgConfig, sector: str):
    """One RG pass; returns ``(N, K)`` log class weights on the 2x2 base torus."""
    ax = 2 if sector in ("both", "x_only") else 1
    az = 2 if sector in ("both", "z_only") else 1
    rhx, rvx, rhz, rvz = ref_bits
    for geo in geos:
        state = make_level(
            geo, ph, pv, plaq if ax == 2 else None, sites if az == 2 else None
        )
        belief = initial_belief(state)
        belief = bp_pass(state, belief, config.bp_rounds, config.backend)
        R = block_likelihoods(state, belief, config.backend)
        ph, pv = coarse_priors(R)
        if ax == 2:
            plaq = coarse_syndrome_arrays(geo, plaq, plaq)[0]
        if az == 2:
            sites = coarse_syndrome_arrays(geo, sites, sites)[1]
        rhx, rvx, rhz, rvz = coarse_frame_arrays(geo, rhx, rvx, rhz, rvz)
    base = Lattice(2, 2)
    N = ph.shape[0]
    table = np.concatenate([ph.reshape(N, 4, ax, az), pv.reshape(N, 4, ax, az)], axis=1)
    return class_log_weights(
        base, sector, base.join(rhx, rvx).reshape(N, -1), base.join(rhz, rvz).reshape(N, -1), table
    )


def rg_class_log_weights(
    lattice: Lattice,
    plaq: np.ndarray,
    sites: np.ndarray,
    table: np.ndarray,
    ref_x: np.ndarray,
    ref_z: np.ndarray,
    config: RgConfig,
):
    """Batched decoder core.

    ``plaq``/``sites`` are ``(N, lx, ly)`` bool; ``table`` is the joint prior
    ``(N or 1, n, 2, 2)``; ``ref_x``/``ref_z`` are ``(N, n)`` reference frames
    with the observed syndromes.  Returns ``(N, 16)`` normalized log class
    probabilities for correlated decoding, or a pair of ``(N, 4)`` arrays
    (X sector, Z sector) for independent decoding.
    """
    if config.pair_correlations == KEEP_JOINT:
        raise NotImplementedError("keep_joint renormalization is not implemented")
    N = plaq.shape[0]
    geos = _geometries(lattice, config.variant)
    table = np.broadcast_to(np.asarray(table, float), (N,) + table.shape[1:])
    lat = lattice
    tab_h = table[:, : lat.n_faces].reshape((N,) + lat.shape + (2, 2))
    tab_v = table[:, lat.n_faces :].reshape((N,) + lat.shape + (2, 2))
    hx, vx = lat.split(ref_x)
    hz, vz = lat.split(ref_z)
    refs = (hx, vx, hz, vz)
    if config.sector == CORRELATED:
        lw = _run_sector(lat, geos, tab_h, tab_v, plaq, sites, refs, config, "both")
        return lw - logsumexp(lw, axis=1, keepdims=True)
    lwx = _run_sector(
        lat, geos, tab_h.sum(-1, keepdims=True), tab_v.sum(-1, keepdims=True), plaq, sites, refs, config, "x_only"
    )
    lwz = _run_sector(
        lat, geos, tab_h.sum(-2, keepdims=True), tab_v.sum(-2, keepdims=True), plaq, sites, refs, config, "z_only"
    )
    return (
        lwx - logsumexp(lwx, axis=1, keepdims=True),
        lwz - logsumexp(lwz, axis=1, keepdims=True),
    )


@dataclass(frozen=True, eq=False)
class RgResult:
    distribution: ClassDistribution  # 16 classes
    chosen: HomologyClass
    correction: PauliFrame
    sector_distributions: tuple[ClassDistribution, ClassDistribution] | None = None


def combine_sectors(px: np.ndarray, pz: np.ndarray) -> np.ndarray:
    """16-class vector from independent X and Z class distributions."""
    return (px[..., None, :] * pz[..., :, None]).reshape(px.shape[:-1] + (16,))


def rg_decode(lattice: Lattice, syn: Syndrome, prior: QubitPrior, config: RgConfig = RgConfig()) -> RgResult:
    """Decode one syndrome; the class distribution refers to ``canonical_correction(syn)``."""
    if lattice.lx != lattice.ly:
        raise LatticeError("rg_decode expects a square torus")
    level_factors(config.variant, lattice.lx, lattice.ly)
    ref = canonical_correction(lattice, syn)
    plaq = syn.plaquettes.reshape((1,) + lattice.shape)
    sites = syn.sites.reshape((1,) + lattice.shape)
    out = rg_class_log_weights(lattice, plaq, sites, prior.table()[None], ref.x[None], ref.z[None], config)
    sector_dists = None
    if config.sector == CORRELATED:
        probs = np.exp(out[0])
    else:
        px, pz = np.exp(out[0][0]), np.exp(out[1][0])
        sector_dists = (ClassDistribution(px, "x_only"), ClassDistribution(pz, "z_only"))
        probs = combine_sectors(px, pz)
    dist = ClassDistribution(probs / probs.sum(), "both")
    if sector_dists is not None:
        # argmax of a product distribution is the product of the sector argmaxes
        k = sector_dists[0].argmax() + 4 * sector_dists[1].argmax()
    else:
        k = dist.argmax()
    chosen = HomologyClass.from_index(k)
    correction = ref ^ logical_representative(lattice, chosen)
    return RgResult(dist, chosen, correction, sector_dists)


def rg_decode_batch(lattice: Lattice, plaq, sites, table, config: RgConfig):
    """Chosen class index per trial and the canonical reference frames."""
    ref_x, ref_z = canonical_correction_bits(lattice, plaq, sites)
    out = rg_class_log_weights(lattice, plaq, sites, table, ref_x, ref_z, config)
    if config.sector == CORRELATED:
        k = np.argmax(out, axis=1)
    else:
        k = np.argmax(out[0], axis=1) + 4 * np.argmax(out[1], axis=1)
    return k, ref_x, ref_z
