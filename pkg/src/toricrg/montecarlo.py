"""Monte Carlo trials, failure-rate sweeps and threshold crossings.

Every trial draws its error from its own counter-based stream keyed by
``(seed, l, p, trial)``, so results do not depend on how trials are grouped
into chunks or spread over worker processes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .exact import TooLargeError, class_log_weights, class_log_weights_contract, coset_table, mwpm_small
from .lattice import (
    Lattice,
    LatticeError,
    PauliFrame,
    _chain_edges,
    canonical_correction_bits,
    class_bits,
    is_stabilizer_element,
    logical_bits,
    plaquette_syndrome,
    site_syndrome,
    syndrome,
)
from .noise import DEPOLARIZING, ChannelParam, prior_from_channel, sample_error, sample_error_bits, trial_rng
from .rg import RgConfig, rg_decode_batch
from .rg.geometry import TWO_BY_TWO, level_factors

DECODERS = ("rg", "exact", "min_energy")
Z95 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class Decoder:
    """Decoder choice; ``rg`` carries the block configuration."""

    kind: str = "rg"
    rg: RgConfig = field(default_factory=RgConfig)

    def __post_init__(self):
        if self.kind not in DECODERS:
            raise ValueError(f"unknown decoder {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind != "rg":
            return self.kind
        tag = "rg2x2" if self.rg.variant == TWO_BY_TWO else "rg2x1"
        return f"{tag}-bp{self.rg.bp_rounds}-{self.rg.sector}"

    def check_size(self, l: int, model: str):
        """Raise if this decoder cannot run on an ``l`` x ``l`` torus."""
        if l < 2:
            raise LatticeError("lattice size must be at least 2")
        if self.kind == "rg":
            level_factors(self.rg.variant, l, l)
        elif self.kind == "exact" and l > 4:
            # beyond 4x4 neither coset enumeration nor contraction is practical
            raise TooLargeError("exact decoding is limited to l <= 4")


@dataclass(frozen=True)
class TrialConfig:
    sizes: tuple[int, ...]
    p_grid: tuple[float, ...]
    trials: int
    decoder: Decoder = field(default_factory=Decoder)
    model: str = "independent_xz"
    seed: int = 0
    chunk: int = 200  # trials decoded together

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(v) for v in self.sizes))
        object.__setattr__(self, "p_grid", tuple(float(v) for v in self.p_grid))
        object.__setattr__(self, "model", ChannelParam(self.model, 0.0).model)
        if self.trials < 1:
            raise ValueError("trials per point must be at least 1")
        if self.chunk < 1:
            raise ValueError("chunk must be at least 1")
        if not self.sizes or not self.p_grid:
            raise ValueError("need at least one size and one p")
        for p in self.p_grid:
            ChannelParam(self.model, p)
        for l in self.sizes:
            self.decoder.check_size(l, self.model)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["p_grid"] = list(self.p_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrialConfig:
        dec = d.get("decoder", {})
        decoder = Decoder(dec.get("kind", "rg"), RgConfig(**dec.get("rg", {})))
        keys = ("trials", "model", "seed", "chunk")
        return cls(tuple(d["sizes"]), tuple(d["p_grid"]), decoder=decoder, **{k: d[k] for k in keys if k in d})


def wilson_interval(failures: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    f = failures / trials
    den = 1 + z * z / trials
    centre = (f + z * z / (2 * trials)) / den
    half = z * math.sqrt(f * (1 - f) / trials + z * z / (4 * trials * trials)) / den
    # the bounds touch 0 and 1 exactly at the extremes; avoid rounding residue
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class PointResult:
    l: int
    p: float
    trials: int
    failures: int
    errors: int = 0
    decode_seconds: float = 0.0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.trials)

    @property
    def mean_decode_us(self) -> float:
        return 1e6 * self.decode_seconds / self.trials if self.trials else 0.0


@dataclass
class SweepResult:
    points: list[PointResult]

    @property
    def sizes(self) -> list[int]:
        return sorted({pt.l for pt in self.points})

    @property
    def p_grid(self) -> list[float]:
        return sorted({pt.p for pt in self.points})

    @property
    def errors(self) -> int:
        return sum(pt.errors for pt in self.points)

    def point(self, l: int, p: float) -> PointResult:
        for pt in self.points:
            if pt.l == l and math.isclose(pt.p, p, rel_tol=0, abs_tol=1e-12):
                return pt
        raise KeyError((l, p))

    def curve(self, l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(p, failures, trials)`` arrays of one size, sorted by ``p``."""
        pts = sorted((pt for pt in self.points if pt.l == l), key=lambda pt: pt.p)
        return (
            np.array([pt.p for pt in pts]),
            np.array([pt.failures for pt in pts]),
            np.array([pt.trials for pt in pts]),
        )


class TrialError(RuntimeError):
    """A decoder raised during a sweep; carries the partial result."""

    def __init__(self, message: str, partial: SweepResult | None = None):
        super().__init__(message)
        self.partial = partial


# ---------------------------------------------------------------------------
# decoders on batches of syndromes


def _matching_chain(lattice: Lattice, defects: np.ndarray, dual: bool):
    coords = [tuple(c) for c in np.argwhere(defects)]
    pairs, _ = mwpm_small(coords, lattice.shape)
    h = np.zeros(lattice.shape, bool)
    v = np.zeros(lattice.shape, bool)
    for a, b in pairs:
        d = np.zeros(lattice.shape, bool)
        d[coords[a]] = d[coords[b]] = True
        ph, pv = _chain_edges(d, dual)
        h ^= ph
        v ^= pv
    return lattice.join(h, v)


def _min_energy_sector(lattice, sector, ref, plaq_or_sites):
    """Per-trial class index (within the sector) of a minimum-weight frame."""
    N = ref.shape[0]
    if lattice.n_faces <= 16:
        fx, fz = coset_table(lattice.lx, lattice.ly, sector)
        frames = fx if sector == "x_only" else fz
        out = np.empty(N, np.int64)
        for m in range(N):
            w = np.count_nonzero(ref[m][None, None, :] ^ frames, axis=-1).min(axis=1)
            out[m] = int(np.argmin(w))
        return out
    out = np.empty(N, np.int64)
    dual = sector == "x_only"
    for m in range(N):
        chain = _matching_chain(lattice, plaq_or_sites[m], dual)
        res = ref[m] ^ chain
        h, v = lattice.split(res)
        z = np.zeros_like(h)
        k = int(class_bits(h, v, z, z)) if dual else int(class_bits(z, z, h, v)) >> 2
        out[m] = k
    return out


def decode_batch(decoder: Decoder, lattice: Lattice, channel: ChannelParam, plaq, sites):
    """Chosen class index per trial plus the canonical reference frames."""
    N = plaq.shape[0]
    table = prior_from_channel(lattice, channel).table()[None]
    if decoder.kind == "rg":
        return rg_decode_batch(lattice, plaq, sites, table, decoder.rg)
    ref_x, ref_z = canonical_correction_bits(lattice, plaq, sites)
    if decoder.kind == "exact":
        if channel.model == DEPOLARIZING:
            fn = class_log_weights if lattice.n_faces <= 4 else class_log_weights_contract
            lw = fn(lattice, "both", ref_x, ref_z, np.broadcast_to(table, (N,) + table.shape[1:]))
            return np.argmax(lw, axis=1), ref_x, ref_z
        tab = np.broadcast_to(table, (N,) + table.shape[1:])
        lwx = class_log_weights(lattice, "x_only", ref_x, ref_z, tab[..., :, :1])
        lwz = class_log_weights(lattice, "z_only", ref_x, ref_z, tab[..., :1, :])
        return np.argmax(lwx, axis=1) + 4 * np.argmax(lwz, axis=1), ref_x, ref_z
    kx = _min_energy_sector(lattice, "x_only", ref_x, plaq)
    kz = _min_energy_sector(lattice, "z_only", ref_z, sites)
    return kx + 4 * kz, ref_x, ref_z


def _failures(lattice: Lattice, k, ref_x, ref_z, err_x, err_z) -> np.ndarray:
    """Whether ``reference * logical(k) * error`` acts non-trivially, per trial."""
    N = len(k)
    lbits = [logical_bits(lattice, c) for c in range(16)]
    lx = np.array([b[0] for b in lbits])[k]
    lz = np.array([b[1] for b in lbits])[k]
    rx = ref_x ^ lx ^ err_x
    rz = ref_z ^ lz ^ err_z
    hx, vx = lattice.split(rx)
    hz, vz = lattice.split(rz)
    if plaquette_syndrome(hx, vx).reshape(N, -1).any() or site_syndrome(hz, vz).reshape(N, -1).any():
        raise RuntimeError("correction does not reproduce the syndrome")
    return class_bits(hx, vx, hz, vz) != 0


def p_key(p: float) -> int:
    return int(round(p * 1e9))


def sample_chunk(lattice: Lattice, channel: ChannelParam, seed: int, start: int, count: int):
    n = lattice.n_qubits
    ex = np.empty((count, n), bool)
    ez = np.empty((count, n), bool)
    for t in range(count):
        rng = trial_rng(seed, lattice.lx, p_key(channel.p), start + t)
        ex[t], ez[t] = sample_error_bits(n, channel, rng)
    return ex, ez


def run_chunk(decoder: Decoder, l: int, channel: ChannelParam, seed: int, start: int, count: int):
    """Decode trials ``start .. start+count-1``; returns ``(failures, errors, seconds, messages)``."""
    lattice = Lattice(l)
    ex, ez = sample_chunk(lattice, channel, seed, start, count)
    hx, vx = lattice.split(ex)
    hz, vz = lattice.split(ez)
    plaq = plaquette_syndrome(hx, vx)
    sites = site_syndrome(hz, vz)
    t0 = time.perf_counter()
    try:
        k, rx, rz = decode_batch(decoder, lattice, channel, plaq, sites)
        fails = _failures(lattice, k, rx, rz, ex, ez)
        return int(fails.sum()), 0, time.perf_counter() - t0, []
    except Exception:
        pass
    # isolate the failing trials
    failures = errors = 0
    msgs = []
    for t in range(count):
        try:
            k, rx, rz = decode_batch(decoder, lattice, channel, plaq[t : t + 1], sites[t : t + 1])
            failures += int(_failures(lattice, k, rx, rz, ex[t : t + 1], ez[t : t + 1])[0])
        except Exception as exc:  # recorded, never skipped silently
            errors += 1
            msgs.append(f"l={l} p={channel.p} trial={start + t}: {type(exc).__name__}: {exc}")
    return failures, errors, time.perf_counter() - t0, msgs


def run_trial(lattice: Lattice, channel: ChannelParam, decoder: Decoder, rng: np.random.Generator) -> bool:
    """One sampled error, decoded; success iff the residual is a stabilizer."""
    e = sample_error(lattice, channel, rng)
    syn = syndrome(lattice, e)
    plaq = syn.plaquettes.reshape((1,) + lattice.shape)
    sites = syn.sites.reshape((1,) + lattice.shape)
    k, rx, rz = decode_batch(decoder, lattice, channel, plaq, sites)
    lx, lz = logical_bits(lattice, int(k[0]))
    correction = PauliFrame(rx[0] ^ lx, rz[0] ^ lz)
    return is_stabilizer_element(lattice, correction ^ e)


def _chunks(trials: int, chunk: int):
    return [(s, min(chunk, trials - s)) for s in range(0, trials, chunk)]


def sweep(config: TrialConfig, threads: int = 1, on_point=None) -> SweepResult:
    """Run every ``(l, p)`` point of ``config`` in order.

    ``on_point`` is called with each finished ``PointResult``.  Raises
    ``TrialError`` (with the partial result attached) if any trial raised.
    """
    points: list[PointResult] = []
    messages: list[str] = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for l in config.sizes:
            for p in config.p_grid:
                channel = ChannelParam(config.model, p)
                jobs = _chunks(config.trials, config.chunk)
                args = [(config.decoder, l, channel, config.seed, s, c) for s, c in jobs]
                if pool is None:
                    outs = [run_chunk(*a) for a in args]
                else:
                    outs = list(pool.map(run_chunk, *zip(*args)))
                pt = PointResult(
                    l, p, config.trials,
                    sum(o[0] for o in outs), sum(o[1] for o in outs), sum(o[2] for o in outs),
                )
                for o in outs:
                    messages.extend(o[3])
                points.append(pt)
                if on_point is not None:
                    on_point(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    result = SweepResult(points)
    if result.errors:
        raise TrialError(f"{result.errors} trial(s) raised; first: {messages[0]}", result)
    return result


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class PairCrossing:
    l_small: int
    l_large: int
    p: float | None  # None: the curves do not cross in the scanned range


@dataclass(frozen=True)
class ThresholdEstimate:
    pairs: tuple[PairCrossing, ...]
    mean: float | None
    spread: float | None  # standard deviation across size pairs
    ci_low: float | None
    ci_high: float | None
    bootstrap: int
    bootstrap_found: int  # replicates in which every pair crossed

    @property
    def found(self) -> bool:
        return self.mean is not None

    def describe(self) -> str:
        lines = []
        for c in self.pairs:
            where = "no crossing" if c.p is None else f"p_th = {c.p:.5f}"
            lines.append(f"l={c.l_small} vs l={c.l_large}: {where}")
        if self.found:
            ci = "" if self.ci_low is None else f" (95% CI {self.ci_low:.5f} .. {self.ci_high:.5f})"
            lines.append(f"mean p_th = {self.mean:.5f} +/- {self.spread:.5f}{ci}")
        else:
            lines.append("no crossing")
        return "\n".join(lines)


def _log_rates(failures, trials):
    # half a count keeps empty points finite on the log scale
    return np.log(np.maximum(failures, 0.5) / trials)


def crossing(p: np.ndarray, log_small: np.ndarray, log_large: np.ndarray) -> float | None:
    """First upward crossing of the larger size's log-failure curve.

    Both curves are linearly interpolated in ``p``; the crossing is where
    the larger size stops being strictly better.
    """
    d = np.asarray(log_large, float) - np.asarray(log_small, float)
    for i in range(len(p) - 1):
        if d[i] < 0 and d[i + 1] >= 0:
            if d[i + 1] == 0:
                return float(p[i + 1])
            t = d[i] / (d[i] - d[i + 1])
            return float(p[i] + t * (p[i + 1] - p[i]))
    return None


def _pair_crossings(sizes, curves) -> list[float | None]:
    out = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        pa, fa, ta = curves[a]
        pb, fb, tb = curves[b]
        if not np.allclose(pa, pb):
            raise ValueError("sizes were swept on different p grids")
        out.append(crossing(pa, _log_rates(fa, ta), _log_rates(fb, tb)))
    return out


def estimate_threshold(
    result: SweepResult, sizes=None, bootstrap: int = 200, seed: int = 0
) -> ThresholdEstimate:
    """Crossings of consecutive sizes, their mean and spread, and a bootstrap CI.

    Bootstrap replicates redraw each point's failure count from a binomial
    with the observed rate, which is the same as resampling its trials.
    """
    sizes = sorted(sizes or result.sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    curves = {l: result.curve(l) for l in sizes}
    if any(len(curves[l][0]) < 3 for l in sizes):
        raise ValueError("need at least three p values per size")
    found = _pair_crossings(sizes, curves)
    pairs = tuple(PairCrossing(a, b, c) for (a, b), c in zip(zip(sizes[:-1], sizes[1:]), found))
    if any(c is None for c in found):
        return ThresholdEstimate(pairs, None, None, None, None, bootstrap, 0)
    mean = float(np.mean(found))
    spread = float(np.std(found))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xB007])))
    reps = []
    for _ in range(bootstrap):
        sample = {}
        for l in sizes:
            p, f, t = curves[l]
            sample[l] = (p, rng.binomial(t, f / t), t)
        got = _pair_crossings(sizes, sample)
        if all(c is not None for c in got):
            reps.append(float(np.mean(got)))
    lo = hi = None
    if reps:
        lo, hi = (float(v) for v in np.percentile(reps, [2.5, 97.5]))
    return ThresholdEstimate(pairs, mean, spread, lo, hi, bootstrap, len(reps))
