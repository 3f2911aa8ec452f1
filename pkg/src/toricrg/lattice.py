"""Toric-code geometry, Pauli frames, syndromes and homology classes.

Coordinates: sites and plaquettes are indexed ``(i, j)`` modulo the lattice
extent, ``i`` along x and ``j`` along y.  Horizontal edge ``h(i, j)`` joins
sites ``(i, j)`` and ``(i+1, j)``; vertical edge ``v(i, j)`` joins ``(i, j)``
and ``(i, j+1)``.  Plaquette ``p(i, j)`` has edges ``h(i, j), h(i, j+1),
v(i, j), v(i+1, j)``; site ``s(i, j)`` has edges ``h(i, j), h(i-1, j),
v(i, j), v(i, j-1)``.

Flat qubit order is all horizontal edges (C order over ``(i, j)``) followed
by all vertical edges.  Batched helpers operate on arrays whose trailing
axes are ``(lx, ly)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class LatticeError(ValueError):
    """Raised on geometry mismatches or contract violations."""


@dataclass(frozen=True)
class Lattice:
    """An ``lx`` by ``ly`` torus (square unless ``ly`` is given)."""

    lx: int
    ly: int | None = None

    def __post_init__(self):
        if self.ly is None:
            object.__setattr__(self, "ly", self.lx)
        if self.lx < 1 or self.ly < 1:
            raise LatticeError(f"lattice extents must be positive, got {self.lx}x{self.ly}")

    @property
    def size(self) -> int:
        if self.lx != self.ly:
            raise LatticeError("size is only defined for square lattices")
        return self.lx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.lx, self.ly)

    @property
    def n_faces(self) -> int:
        return self.lx * self.ly

    @property
    def n_qubits(self) -> int:
        return 2 * self.lx * self.ly

    def h(self, i: int, j: int) -> int:
        return (i % self.lx) * self.ly + (j % self.ly)

    def v(self, i: int, j: int) -> int:
        return self.n_faces + (i % self.lx) * self.ly + (j % self.ly)

    def face(self, i: int, j: int) -> int:
        """Flat index shared by plaquette ``p(i, j)`` and site ``s(i, j)``."""
        return (i % self.lx) * self.ly + (j % self.ly)

    def plaquette_qubits(self, i: int, j: int) -> list[int]:
        return [self.h(i, j), self.h(i, j + 1), self.v(i, j), self.v(i + 1, j)]

    def site_qubits(self, i: int, j: int) -> list[int]:
        return [self.h(i, j), self.h(i - 1, j), self.v(i, j), self.v(i, j - 1)]

    def split(self, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """View a ``(..., 2*lx*ly)`` bit array as horizontal and vertical ``(..., lx, ly)`` arrays."""
        bits = np.asarray(bits)
        if bits.shape[-1] != self.n_qubits:
            raise LatticeError(f"expected {self.n_qubits} qubits, got {bits.shape[-1]}")
        lead = bits.shape[:-1]
        h = bits[..., : self.n_faces].reshape(lead + self.shape)
        v = bits[..., self.n_faces :].reshape(lead + self.shape)
        return h, v

    def join(self, h: np.ndarray, v: np.ndarray) -> np.ndarray:
        lead = h.shape[:-2]
        return np.concatenate([h.reshape(lead + (-1,)), v.reshape(lead + (-1,))], axis=-1)


@dataclass(frozen=True, eq=False)
class PauliFrame:
    """Pauli operator up to phase, as X and Z support bit-vectors."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=bool)
        z = np.asarray(self.z, dtype=bool)
        if x.shape != z.shape or x.ndim != 1:
            raise LatticeError("x and z parts must be 1-d arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def identity(cls, n: int) -> PauliFrame:
        return cls(np.zeros(n, bool), np.zeros(n, bool))

    @classmethod
    def from_string(cls, paulis: str) -> PauliFrame:
        x = np.array([c in "XY" for c in paulis])
        z = np.array([c in "ZY" for c in paulis])
        return cls(x, z)

    def __len__(self) -> int:
        return len(self.x)

    def __xor__(self, other: PauliFrame) -> PauliFrame:
        if len(self) != len(other):
            raise LatticeError("frames act on different numbers of qubits")
        return PauliFrame(self.x ^ other.x, self.z ^ other.z)

    compose = __xor__

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliFrame):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes()))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def paulis(self) -> np.ndarray:
        """Per-qubit Pauli code: 0=I, 1=X, 2=Y, 3=Z."""
        return pauli_codes(self.x, self.z)

    def __repr__(self):
        letters = "IXYZ"
        return "PauliFrame(" + "".join(letters[k] for k in self.paulis()) + ")"


def pauli_codes(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int8)
    z = np.asarray(z, dtype=np.int8)
    # I=0, X=1, Y=2, Z=3
    return np.where(x == 1, 1 + z, 3 * z).astype(np.int8)


@dataclass(frozen=True, eq=False)
class Syndrome:
    """Violated plaquettes (from X support) and sites (from Z support)."""

    plaquettes: np.ndarray
    sites: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "plaquettes", np.asarray(self.plaquettes, dtype=bool).ravel())
        object.__setattr__(self, "sites", np.asarray(self.sites, dtype=bool).ravel())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Syndrome):
            return NotImplemented
        return np.array_equal(self.plaquettes, other.plaquettes) and np.array_equal(
            self.sites, other.sites
        )

    def __xor__(self, other: Syndrome) -> Syndrome:
        return Syndrome(self.plaquettes ^ other.plaquettes, self.sites ^ other.sites)

    @property
    def is_trivial(self) -> bool:
        return not (self.plaquettes.any() or self.sites.any())

    @property
    def parities(self) -> tuple[int, int]:
        return int(self.plaquettes.sum() % 2), int(self.sites.sum() % 2)

    @classmethod
    def from_defects(cls, lattice: Lattice, plaquettes=(), sites=()) -> Syndrome:
        """Build from ``(i, j)`` coordinate lists; repeated coordinates cancel."""
        pl = np.zeros(lattice.n_faces, bool)
        st = np.zeros(lattice.n_faces, bool)
        for i, j in plaquettes:
            pl[lattice.face(i, j)] ^= True
        for i, j in sites:
            st[lattice.face(i, j)] ^= True
        return cls(pl, st)


class HomologyClass(NamedTuple):
    """Winding parities of a closed frame.

    ``x1``/``x2`` are the parities of X support on ``v(0, .)`` and ``h(., 0)``
    (flipped by the X loops on ``v(., 0)`` and ``h(0, .)``); ``z1``/``z2``
    are the parities of Z support on ``h(0, .)`` and ``v(., 0)`` (flipped by
    the Z loops on ``h(., 0)`` and ``v(0, .)``).
    """

    x1: int = 0
    x2: int = 0
    z1: int = 0
    z2: int = 0

    @property
    def index(self) -> int:
        return self.x1 + 2 * self.x2 + 4 * self.z1 + 8 * self.z2

    @property
    def x_index(self) -> int:
        return self.x1 + 2 * self.x2

    @property
    def z_index(self) -> int:
        return self.z1 + 2 * self.z2

    @classmethod
    def from_index(cls, k: int) -> HomologyClass:
        if not 0 <= k < 16:
            raise ValueError(f"class index out of range: {k}")
        return cls(k & 1, (k >> 1) & 1, (k >> 2) & 1, (k >> 3) & 1)

    def __xor__(self, other: HomologyClass) -> HomologyClass:
        return HomologyClass.from_index(self.index ^ other.index)

    @property
    def is_trivial(self) -> bool:
        return self.index == 0


# ---------------------------------------------------------------------------
# batched array kernels


def plaquette_syndrome(hx: np.ndarray, vx: np.ndarray) -> np.ndarray:
    return hx ^ np.roll(hx, -1, axis=-1) ^ vx ^ np.roll(vx, -1, axis=-2)


def site_syndrome(hz: np.ndarray, vz: np.ndarray) -> np.ndarray:
    return hz ^ np.roll(hz, 1, axis=-2) ^ vz ^ np.roll(vz, 1, axis=-1)


def class_bits(hx, vx, hz, vz) -> np.ndarray:
    """Batched class index of closed frames given as ``(..., lx, ly)`` arrays."""
    x1 = np.bitwise_xor.reduce(vx[..., 0, :], axis=-1)
    x2 = np.bitwise_xor.reduce(hx[..., :, 0], axis=-1)
    z1 = np.bitwise_xor.reduce(hz[..., 0, :], axis=-1)
    z2 = np.bitwise_xor.reduce(vz[..., :, 0], axis=-1)
    return (x1.astype(np.int64) + 2 * x2 + 4 * z1 + 8 * z2).astype(np.int64)


def logical_bits(lattice: Lattice, index: int) -> tuple[np.ndarray, np.ndarray]:
    """X and Z bit-vectors of the reference representative of class ``index``."""
    c = HomologyClass.from_index(index)
    hx = np.zeros(lattice.shape, bool)
    vx = np.zeros(lattice.shape, bool)
    hz = np.zeros(lattice.shape, bool)
    vz = np.zeros(lattice.shape, bool)
    if c.x1:
        vx[:, 0] ^= True
    if c.x2:
        hx[0, :] ^= True
    if c.z1:
        hz[:, 0] ^= True
    if c.z2:
        vz[0, :] ^= True
    return lattice.join(hx, vx), lattice.join(hz, vz)


def logical_representative(lattice: Lattice, cls: HomologyClass | int) -> PauliFrame:
    index = cls.index if isinstance(cls, HomologyClass) else int(cls)
    return PauliFrame(*logical_bits(lattice, index))


def _check(lattice: Lattice, frame: PauliFrame):
    if len(frame) != lattice.n_qubits:
        raise LatticeError(
            f"frame has {len(frame)} qubits but the {lattice.lx}x{lattice.ly} lattice has "
            f"{lattice.n_qubits}"
        )


# ---------------------------------------------------------------------------
# operations


def syndrome(lattice: Lattice, frame: PauliFrame) -> Syndrome:
    _check(lattice, frame)
    hx, vx = lattice.split(frame.x)
    hz, vz = lattice.split(frame.z)
    return Syndrome(plaquette_syndrome(hx, vx), site_syndrome(hz, vz))


def homology_class(lattice: Lattice, closed_frame: PauliFrame) -> HomologyClass:
    if not syndrome(lattice, closed_frame).is_trivial:
        raise LatticeError("homology_class needs a closed frame (trivial syndrome)")
    hx, vx = lattice.split(closed_frame.x)
    hz, vz = lattice.split(closed_frame.z)
    return HomologyClass.from_index(int(class_bits(hx, vx, hz, vz)))


def is_stabilizer_element(lattice: Lattice, frame: PauliFrame) -> bool:
    if not syndrome(lattice, frame).is_trivial:
        return False
    return homology_class(lattice, frame).is_trivial


def plaquette_operator(lattice: Lattice, i: int, j: int) -> PauliFrame:
    f = PauliFrame.identity(lattice.n_qubits)
    f.z[lattice.plaquette_qubits(i, j)] = True
    return f


def site_operator(lattice: Lattice, i: int, j: int) -> PauliFrame:
    f = PauliFrame.identity(lattice.n_qubits)
    f.x[lattice.site_qubits(i, j)] = True
    return f


def _chain_edges(defects: np.ndarray, dual: bool) -> tuple[np.ndarray, np.ndarray]:
    """Edges of the pivot pairing for one defect sector.

    Every defect after the raster-first one (the pivot) is joined to the
    pivot by a shortest-displacement path: first along the pivot's row, then
    along the target's column.  Returns ``(h, v)`` edge masks.
    """
    lx, ly = defects.shape
    h = np.zeros((lx, ly), bool)
    v = np.zeros((lx, ly), bool)
    coords = np.argwhere(defects)
    if len(coords) < 2:
        return h, v
    pi, pj = coords[0]
    ti, tj = coords[1:, 0], coords[1:, 1]
    dx = (ti - pi + lx // 2) % lx - lx // 2
    dy = (tj - pj + ly // 2) % ly - ly // 2
    # dual chains (X errors between plaquettes) cross v on x-steps and h on
    # y-steps, both shifted by one; primal chains run along h then v
    off = 1 if dual else 0
    xedges, yedges = (v, h) if dual else (h, v)

    lo = np.minimum(pi, pi + dx) + off
    hi = np.maximum(pi, pi + dx) + off
    diff = np.zeros(3 * lx + 1, np.int64)
    np.add.at(diff, lo + lx, 1)
    np.add.at(diff, hi + lx, 1)
    row = np.cumsum(diff)[: 3 * lx].reshape(3, lx).sum(axis=0) % 2
    xedges[:, pj] ^= row.astype(bool)

    lo = np.minimum(pj, pj + dy) + off
    hi = np.maximum(pj, pj + dy) + off
    diff = np.zeros((lx, 3 * ly + 1), np.int64)
    np.add.at(diff, (ti, lo + ly), 1)
    np.add.at(diff, (ti, hi + ly), 1)
    cols = np.cumsum(diff, axis=1)[:, : 3 * ly].reshape(lx, 3, ly).sum(axis=1) % 2
    yedges ^= cols.astype(bool)
    return h, v


def canonical_correction(lattice: Lattice, syn: Syndrome) -> PauliFrame:
    """Deterministic frame whose syndrome is ``syn``."""
    if syn.plaquettes.size != lattice.n_faces or syn.sites.size != lattice.n_faces:
        raise LatticeError("syndrome size does not match lattice")
    if syn.parities != (0, 0):
        raise LatticeError("syndrome has odd defect parity")
    hx, vx = _chain_edges(syn.plaquettes.reshape(lattice.shape), dual=True)
    hz, vz = _chain_edges(syn.sites.reshape(lattice.shape), dual=False)
    return PauliFrame(lattice.join(hx, vx), lattice.join(hz, vz))


def canonical_correction_bits(lattice: Lattice, plaq: np.ndarray, sites: np.ndarray):
    """Batched canonical corrections; ``plaq``/``sites`` are ``(N, lx, ly)``.

    Returns ``(x, z)`` bit arrays of shape ``(N, 2*lx*ly)``.
    """
    n = plaq.shape[0]
    xs = np.zeros((n, lattice.n_qubits), bool)
    zs = np.zeros((n, lattice.n_qubits), bool)
    for k in range(n):
        hx, vx = _chain_edges(plaq[k], dual=True)
        hz, vz = _chain_edges(sites[k], dual=False)
        xs[k] = lattice.join(hx, vx)
        zs[k] = lattice.join(hz, vz)
    return xs, zs
