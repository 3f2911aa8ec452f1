"""Block tilings for one coarse-graining step.

A cell with merge factors ``(fx, fy)`` covers plaquettes and sites
``(fx*a + dx, fy*b + dy)`` for ``dx < fx, dy < fy`` and owns the edges
``h``/``v`` at those same offsets.  Its plaquette block adds the edges of
its plaquettes owned by the cells above and to the right (``borrowed``);
its site block adds the edges of its sites owned by the cells below and to
the left (``dual_borrowed``).

The coarse qubit ``h(a, b)`` carries the X parity of ``h(fx*a + dx, fy*b)``
over ``dx`` and the Z parity of ``h(fx*a + fx-1, fy*b + dy)`` over ``dy``;
``v(a, b)`` carries the X parity of ``v(fx*a, fy*b + dy)`` and the Z parity
of ``v(fx*a + dx, fy*b + fy-1)``.  These maps send fine syndromes to the
XOR of merged checks and preserve homology classes of closed frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lattice import Lattice, LatticeError

TWO_BY_TWO = "two_by_two"
TWO_BY_ONE = "two_by_one"
VARIANTS = (TWO_BY_TWO, TWO_BY_ONE)

Slot = tuple[str, int, int]  # (kind, dx, dy) relative to the cell origin


def level_factors(variant: str, lx: int, ly: int) -> list[tuple[int, int]]:
    """Merge factors of every level until the 2x2 base torus is reached."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown block variant {variant!r}")
    for n in (lx, ly):
        if n < 2 or n & (n - 1):
            raise LatticeError(f"RG decoding needs power-of-two extents, got {lx}x{ly}")
    out = []
    while (lx, ly) != (2, 2):
        if variant == TWO_BY_TWO:
            if lx != ly:
                raise LatticeError("two_by_two blocks need a square lattice")
            f = (2, 2)
        else:
            # halve the longer axis, x first on ties
            f = (2, 1) if lx >= ly else (1, 2)
        out.append(f)
        lx //= f[0]
        ly //= f[1]
    return out


@dataclass(frozen=True)
class Check:
    owned: tuple[int, ...]  # indices into the owned slots
    borrowed: tuple[int, ...]  # indices into borrowed (or dual_borrowed) slots


@dataclass(frozen=True)
class Neighbor:
    shift: tuple[int, int]  # cell offset (da, db)
    slot: int


@dataclass(frozen=True)
class BlockGeometry:
    """Tiling of an ``lx`` x ``ly`` torus into ``fx`` x ``fy`` cells."""

    variant: str
    lx: int
    ly: int
    fx: int
    fy: int
    owned: tuple[Slot, ...] = field(init=False)
    borrowed: tuple[Slot, ...] = field(init=False)
    dual_borrowed: tuple[Slot, ...] = field(init=False)
    plaquettes: tuple[Check, ...] = field(init=False)
    sites: tuple[Check, ...] = field(init=False)
    # owned-slot indices whose parities define the coarse qubits
    x_label_h: tuple[int, ...] = field(init=False)
    x_label_v: tuple[int, ...] = field(init=False)
    z_label_h: tuple[int, ...] = field(init=False)
    z_label_v: tuple[int, ...] = field(init=False)
    # for each owned slot: the cell borrowing it in the plaquette / site block
    x_borrower: tuple[Neighbor | None, ...] = field(init=False)
    z_borrower: tuple[Neighbor | None, ...] = field(init=False)
    # for each borrowed slot: its owner cell and owned slot
    borrowed_owner: tuple[Neighbor, ...] = field(init=False)
    dual_borrowed_owner: tuple[Neighbor, ...] = field(init=False)

    def __post_init__(self):
        fx, fy = self.fx, self.fy
        if self.lx % fx or self.ly % fy:
            raise LatticeError(f"{fx}x{fy} cells do not tile a {self.lx}x{self.ly} torus")
        if self.lx // fx < 2 or self.ly // fy < 2:
            raise LatticeError("coarse lattice would be smaller than 2x2; use exact decoding")
        owned = [(k, dx, dy) for k in "hv" for dx in range(fx) for dy in range(fy)]
        index = {s: n for n, s in enumerate(owned)}

        def plaq_edges(dx, dy):
            return [("h", dx, dy), ("h", dx, dy + 1), ("v", dx, dy), ("v", dx + 1, dy)]

        def site_edges(dx, dy):
            return [("h", dx, dy), ("h", dx - 1, dy), ("v", dx, dy), ("v", dx, dy - 1)]

        def build(edges_of):
            extra: list[Slot] = []
            checks = []
            for dx in range(fx):
                for dy in range(fy):
                    own, bor = [], []
                    for e in edges_of(dx, dy):
                        if e in index:
                            own.append(index[e])
                        else:
                            if e not in extra:
                                extra.append(e)
                            bor.append(extra.index(e))
                    checks.append(Check(tuple(own), tuple(bor)))
            return tuple(extra), tuple(checks)

        borrowed, plaquettes = build(plaq_edges)
        dual_borrowed, sites = build(site_edges)

        def owner(slot: Slot) -> Neighbor:
            k, dx, dy = slot
            return Neighbor((dx // fx, dy // fy), index[(k, dx % fx, dy % fy)])

        def borrower(slots, slot_index) -> list:
            out: list[Neighbor | None] = [None] * len(owned)
            for b, s in enumerate(slots):
                nb = owner(s)
                # owned slot nb.slot of cell c is borrowed by cell c - shift
                sh = (-nb.shift[0], -nb.shift[1])
                if out[nb.slot] is not None:
                    raise AssertionError("edge borrowed twice by one block type")
                out[nb.slot] = Neighbor(sh, b)
            return out

        set_ = object.__setattr__
        set_(self, "owned", tuple(owned))
        set_(self, "borrowed", borrowed)
        set_(self, "dual_borrowed", dual_borrowed)
        set_(self, "plaquettes", plaquettes)
        set_(self, "sites", sites)
        set_(self, "x_label_h", tuple(index[("h", dx, 0)] for dx in range(fx)))
        set_(self, "x_label_v", tuple(index[("v", 0, dy)] for dy in range(fy)))
        set_(self, "z_label_h", tuple(index[("h", fx - 1, dy)] for dy in range(fy)))
        set_(self, "z_label_v", tuple(index[("v", dx, fy - 1)] for dx in range(fx)))
        set_(self, "x_borrower", tuple(borrower(borrowed, 0)))
        set_(self, "z_borrower", tuple(borrower(dual_borrowed, 1)))
        set_(self, "borrowed_owner", tuple(owner(s) for s in borrowed))
        set_(self, "dual_borrowed_owner", tuple(owner(s) for s in dual_borrowed))

    @property
    def cells_shape(self) -> tuple[int, int]:
        return (self.lx // self.fx, self.ly // self.fy)

    @property
    def n_cells(self) -> int:
        a, b = self.cells_shape
        return a * b

    @property
    def coarse(self) -> Lattice:
        return Lattice(*self.cells_shape)

    def _qubit(self, slot: Slot, a: int, b: int) -> int:
        lat = Lattice(self.lx, self.ly)
        k, dx, dy = slot
        i, j = self.fx * a + dx, self.fy * b + dy
        return lat.h(i, j) if k == "h" else lat.v(i, j)

    def owned_qubits(self, a: int, b: int) -> list[int]:
        return [self._qubit(s, a, b) for s in self.owned]

    def borrowed_qubits(self, a: int, b: int) -> list[int]:
        return [self._qubit(s, a, b) for s in self.borrowed]

    def dual_borrowed_qubits(self, a: int, b: int) -> list[int]:
        return [self._qubit(s, a, b) for s in self.dual_borrowed]

    def block_qubits(self, a: int, b: int) -> list[int]:
        """Qubits of the plaquette block: owned plus borrowed."""
        return self.owned_qubits(a, b) + self.borrowed_qubits(a, b)

    def cell_plaquettes(self, a: int, b: int) -> list[int]:
        lat = Lattice(self.lx, self.ly)
        return [lat.face(self.fx * a + dx, self.fy * b + dy) for dx in range(self.fx) for dy in range(self.fy)]


def build_geometry(lattice: Lattice, variant: str, level: int = 0) -> BlockGeometry:
    """Geometry of coarse-graining step ``level`` for a lattice at that level."""
    if variant == TWO_BY_TWO:
        if lattice.lx % 2 or lattice.ly % 2:
            raise LatticeError("two_by_two blocks need even extents")
        f = (2, 2)
    elif variant == TWO_BY_ONE:
        f = (2, 1) if level % 2 == 0 else (1, 2)
        if (lattice.lx if f[0] == 2 else lattice.ly) % 2:
            raise LatticeError("two_by_one blocks need an even extent along the merged axis")
    else:
        raise ValueError(f"unknown block variant {variant!r}")
    return BlockGeometry(variant, lattice.lx, lattice.ly, *f)


# ---------------------------------------------------------------------------
# batched coarse maps


def coarse_syndrome_arrays(geo: BlockGeometry, plaq: np.ndarray, sites: np.ndarray):
    """XOR of the merged fine checks; inputs are ``(..., lx, ly)``."""
    a, b = geo.cells_shape
    lead = plaq.shape[:-2]
    shape = lead + (a, geo.fx, b, geo.fy)
    cp = np.bitwise_xor.reduce(np.bitwise_xor.reduce(plaq.reshape(shape), axis=-1), axis=-2)
    cs = np.bitwise_xor.reduce(np.bitwise_xor.reduce(sites.reshape(shape), axis=-1), axis=-2)
    return cp, cs


def coarse_frame_arrays(geo: BlockGeometry, hx, vx, hz, vz):
    """Coarse images of a frame given as four ``(..., lx, ly)`` bit arrays."""
    fx, fy = geo.fx, geo.fy
    chx = np.bitwise_xor.reduce([hx[..., dx::fx, ::fy] for dx in range(fx)], axis=0)
    cvx = np.bitwise_xor.reduce([vx[..., ::fx, dy::fy] for dy in range(fy)], axis=0)
    chz = np.bitwise_xor.reduce([hz[..., fx - 1 :: fx, dy::fy] for dy in range(fy)], axis=0)
    cvz = np.bitwise_xor.reduce([vz[..., dx::fx, fy - 1 :: fy] for dx in range(fx)], axis=0)
    return chx, cvx, chz, cvz
