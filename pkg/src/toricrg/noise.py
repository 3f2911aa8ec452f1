"""Pauli channels, per-qubit priors, sampling and Gibbs-weight helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, PauliFrame

DEPOLARIZING = "depolarizing"
INDEPENDENT_XZ = "independent_xz"
MODELS = (DEPOLARIZING, INDEPENDENT_XZ)

_ALIASES = {"depol": DEPOLARIZING, "xz": INDEPENDENT_XZ}

# Pauli order (I, X, Y, Z) to (x bit, z bit) table layout: TABLE_INDEX[x][z]
TABLE_INDEX = np.array([[0, 3], [1, 2]])


@dataclass(frozen=True)
class ChannelParam:
    model: str
    p: float
    J: float = 1.0

    def __post_init__(self):
        model = _ALIASES.get(self.model, self.model)
        if model not in MODELS:
            raise ValueError(f"unknown channel model {self.model!r}")
        object.__setattr__(self, "model", model)
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"p must lie in [0, 1), got {self.p}")
        if model == DEPOLARIZING and self.p > 0.75:
            raise ValueError("depolarizing p above 3/4 is not a channel (q = 4p/3 > 1)")
        if self.J <= 0:
            raise ValueError("energy unit J must be positive")

    @property
    def q(self) -> float:
        """Randomization probability of the depolarizing form."""
        return 4.0 * self.p / 3.0

    def pauli_probs(self) -> np.ndarray:
        p = self.p
        if self.model == DEPOLARIZING:
            return np.array([1 - p, p / 3, p / 3, p / 3])
        return np.array([(1 - p) ** 2, p * (1 - p), p * p, (1 - p) * p])


@dataclass(frozen=True, eq=False)
class QubitPrior:
    """Per-qubit distribution over (I, X, Y, Z), shape ``(n, 4)``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[1] != 4:
            raise ValueError("prior must have shape (n_qubits, 4)")
        if (probs < 0).any():
            raise ValueError("prior has negative entries")
        if not np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("prior rows must sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, n: int, dist) -> QubitPrior:
        return cls(np.tile(np.asarray(dist, float), (n, 1)))

    def table(self) -> np.ndarray:
        """Joint ``(n, 2, 2)`` table indexed ``[qubit, x, z]``."""
        return self.probs[:, TABLE_INDEX]

    @classmethod
    def from_table(cls, table: np.ndarray) -> QubitPrior:
        t = np.asarray(table, float)
        return cls(np.stack([t[:, 0, 0], t[:, 1, 0], t[:, 1, 1], t[:, 0, 1]], axis=1))

    def prob_of(self, frame: PauliFrame) -> float:
        return float(np.prod(self.probs[np.arange(len(self)), frame.paulis()]))


def prior_from_channel(lattice: Lattice, channel: ChannelParam) -> QubitPrior:
    return QubitPrior.uniform(lattice.n_qubits, channel.pauli_probs())


def sample_error_bits(n: int, channel: ChannelParam, rng: np.random.Generator):
    """X and Z bit-vectors of one sampled error on ``n`` qubits."""
    p = channel.p
    if channel.model == DEPOLARIZING:
        u = rng.random(n)
        x = u < 2 * p / 3
        z = (u >= p / 3) & (u < p)
        return x, z
    u = rng.random((2, n))
    return u[0] < p, u[1] < p


def sample_error(lattice: Lattice, channel: ChannelParam, rng: np.random.Generator) -> PauliFrame:
    """Depolarizing: X, Y, Z each with p/3.  Independent: X and Z flips each with p."""
    return PauliFrame(*sample_error_bits(lattice.n_qubits, channel, rng))


def nishimori_beta(p: float, J: float = 1.0) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"nishimori_beta needs 0 < p < 1, got {p}")
    return math.log(3.0 * (1.0 - p) / p) / J


def independent_beta(p: float, J: float = 1.0) -> float:
    """Inverse temperature of one sector of the independent bit/phase-flip model."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"independent_beta needs 0 < p < 1, got {p}")
    return math.log((1.0 - p) / p) / J


def chain_energy(frame: PauliFrame, J: float = 1.0) -> float:
    return J * frame.weight


def trial_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based stream for one trial, keyed by the master seed and indices."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))
