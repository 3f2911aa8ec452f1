"""Command-line front end: ``decode``, ``sweep``, ``threshold`` and ``oracle-check``.

Sweep parameters come from flags, from an INI-style config file, or both
(flags win).  The config file holds a single ``[run]`` section::

    [run]
    l = 16, 32, 64
    p_grid = 0.06:0.10:0.005     ; start:stop:step (inclusive) or a comma list
    model = xz                   ; depol | xz
    decoder = rg2x1              ; exact | minenergy | rg2x2 | rg2x1
    bp = 3
    sector = auto                ; auto | correlated | independent
    trials = 10000
    seed = 1
    threads = 4
    chunk = 200
    out = results/a2

Exit status: 0 on success, 1 for usage errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exact import TooLargeError, class_probabilities_exact, min_energy_class
from .lattice import (
    HomologyClass,
    Lattice,
    LatticeError,
    PauliFrame,
    Syndrome,
    canonical_correction,
    logical_representative,
    syndrome,
)
from .montecarlo import (
    Decoder,
    PointResult,
    SweepResult,
    TrialConfig,
    TrialError,
    decode_batch,
    estimate_threshold,
    p_key,
    sweep,
)
from .noise import DEPOLARIZING, ChannelParam, prior_from_channel, sample_error, trial_rng
from .rg import CORRELATED, INDEPENDENT, TWO_BY_ONE, TWO_BY_TWO, RgConfig, rg_decode

CSV_COLUMNS = ("l", "p", "trials", "failures", "failure_rate", "ci_low", "ci_high", "mean_decode_us")
CSV_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
TRUNCATED_MARKER = "# truncated"
DECODER_NAMES = ("exact", "minenergy", "rg2x2", "rg2x1")
MODEL_NAMES = ("depol", "xz")

CSV_NAME = "results.csv"
JSONL_NAME = "results.jsonl"
MANIFEST_NAME = "manifest.json"
CURVES_PNG = "failure_rate.png"
THRESHOLD_JSON = "threshold.json"
THRESHOLD_PNG = "threshold.png"

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# parsing helpers


def parse_ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [v for t in text for v in parse_ints(t)]
    return [int(t) for t in str(text).replace(",", " ").split()]


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [v for t in text for v in parse_floats(t)]
    return [float(t) for t in str(text).replace(",", " ").split()]


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included) or a comma/space separated list."""
    text = str(text).strip()
    if ":" not in text:
        return parse_floats(text)
    parts = [float(t) for t in text.split(":")]
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise UsageError(f"bad p grid {text!r}; expected start:stop:step")
    start, stop, step = parts
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps grid values free of float noise, so seeds key identically
    return [round(start + i * step, 12) for i in range(n)]


def parse_defects(text: str | None) -> list[tuple[int, int]]:
    """``"i,j; i,j"`` coordinate list."""
    if not text:
        return []
    out = []
    for item in text.replace(" ", "").split(";"):
        if not item:
            continue
        i, j = item.split(",")
        out.append((int(i), int(j)))
    return out


def make_decoder(name: str, model: str, bp: int, sector: str = "auto", backend: str = "compiled") -> Decoder:
    if name not in DECODER_NAMES:
        raise UsageError(f"unknown decoder {name!r}")
    if name == "exact":
        return Decoder("exact")
    if name == "minenergy":
        return Decoder("min_energy")
    if sector == "auto":
        sector = CORRELATED if ChannelParam(model, 0.0).model == DEPOLARIZING else INDEPENDENT
    elif sector == "independent":
        sector = INDEPENDENT
    variant = TWO_BY_TWO if name == "rg2x2" else TWO_BY_ONE
    return Decoder("rg", RgConfig(variant=variant, sector=sector, bp_rounds=bp, backend=backend))


def decoder_label(decoder: Decoder) -> str:
    if decoder.kind == "min_energy":
        return "minenergy"
    if decoder.kind == "exact":
        return "exact"
    return "rg2x2" if decoder.rg.variant == TWO_BY_TWO else "rg2x1"


def read_config(path) -> dict:
    """Keys of the ``[run]`` section as strings."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not cp.has_section("run"):
        raise UsageError(f"config {path} has no [run] section")
    known = {"l", "p", "p_grid", "model", "decoder", "bp", "sector", "trials", "seed",
             "threads", "chunk", "out", "backend", "no_timing", "bootstrap"}
    items = dict(cp.items("run"))
    unknown = sorted(set(items) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return items


# ---------------------------------------------------------------------------
# run settings shared by sweep and threshold

DEFAULTS = {
    "model": "xz",
    "decoder": "rg2x2",
    "bp": "3",
    "sector": "auto",
    "trials": "1000",
    "seed": "0",
    "threads": "1",
    "chunk": "200",
    "backend": "compiled",
    "bootstrap": "200",
}


def _settings(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    s = dict(DEFAULTS)
    if getattr(args, "config", None):
        s.update(read_config(args.config))
    if getattr(args, "p", None) is not None and getattr(args, "p_grid", None) is None:
        s.pop("p_grid", None)
    for key in ("l", "p", "p_grid", "model", "decoder", "bp", "sector", "trials", "seed",
                "threads", "chunk", "out", "backend", "bootstrap"):
        val = getattr(args, key, None)
        if val is not None:
            s[key] = val
    if getattr(args, "no_timing", False):
        s["no_timing"] = "true"
    return s


def _truthy(v) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def config_from_settings(s: dict) -> TrialConfig:
    try:
        if "l" not in s:
            raise UsageError("no lattice sizes given (--l)")
        sizes = parse_ints(s["l"])
        if "p_grid" in s:
            grid = parse_grid(s["p_grid"])
        elif "p" in s:
            grid = parse_floats(s["p"])
        else:
            raise UsageError("no error rates given (--p or --p-grid)")
        model = s["model"]
        if model not in MODEL_NAMES:
            raise UsageError(f"unknown model {model!r}; choose depol or xz")
        decoder = make_decoder(s["decoder"], model, int(s["bp"]), s["sector"], s["backend"])
        return TrialConfig(
            tuple(sizes), tuple(grid), int(s["trials"]), decoder, model, int(s["seed"]), int(s["chunk"])
        )
    except UsageError:
        raise
    except (ValueError, LatticeError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output files


def _fmt(x: float) -> str:
    return repr(float(x))


def csv_row(pt: PointResult, timing: bool) -> list[str]:
    lo, hi = pt.ci
    us = f"{pt.mean_decode_us:.3f}" if timing else ""
    return [str(pt.l), _fmt(pt.p), str(pt.trials), str(pt.failures), _fmt(pt.failure_rate), _fmt(lo), _fmt(hi), us]


def point_record(pt: PointResult, timing: bool) -> dict:
    lo, hi = pt.ci
    rec = {
        "l": pt.l, "p": pt.p, "trials": pt.trials, "failures": pt.failures, "errors": pt.errors,
        "failure_rate": pt.failure_rate, "ci_low": lo, "ci_high": hi,
    }
    rec["mean_decode_us"] = round(pt.mean_decode_us, 3) if timing else None
    return rec


def read_csv(path) -> SweepResult:
    """Load a results CSV (a truncation marker is allowed at the end)."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise UsageError(f"{path}: unexpected columns {reader.fieldnames}")
    pts = [PointResult(int(r["l"]), float(r["p"]), int(r["trials"]), int(r["failures"])) for r in reader]
    if not pts:
        raise UsageError(f"{path}: no data rows")
    return SweepResult(pts)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class SweepWriter:
    """Streams points to CSV and JSONL as they finish."""

    def __init__(self, out: Path, timing: bool):
        out.mkdir(parents=True, exist_ok=True)
        self.timing = timing
        self.csv_fh = open(out / CSV_NAME, "w", encoding="utf-8", newline="")
        self.jsonl_fh = open(out / JSONL_NAME, "w", encoding="utf-8")
        self.writer = csv.writer(self.csv_fh, lineterminator="\n")
        self.writer.writerow(CSV_COLUMNS)
        self.points: list[PointResult] = []

    def add(self, pt: PointResult):
        self.points.append(pt)
        self.writer.writerow(csv_row(pt, self.timing))
        self.jsonl_fh.write(json.dumps(point_record(pt, self.timing), sort_keys=True) + "\n")
        self.csv_fh.flush()
        self.jsonl_fh.flush()

    def close(self, truncated: bool):
        if truncated:
            self.csv_fh.write(TRUNCATED_MARKER + "\n")
            self.jsonl_fh.write(json.dumps({"truncated": True}) + "\n")
        self.csv_fh.close()
        self.jsonl_fh.close()


def write_manifest(out: Path, config: TrialConfig, threads: int, timing: bool, started: str,
                   points, status: str, message: str = "") -> dict:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "csv_schema": {"version": CSV_SCHEMA_VERSION, "columns": list(CSV_COLUMNS)},
        "artifact_version": __version__,
        "command": "sweep",
        "config": config.to_dict(),
        "decoder_name": decoder_label(config.decoder),
        "seed": config.seed,
        "threads": threads,
        "timing": timing,
        "started": started,
        "finished": _now(),
        "status": status,
        "truncated": status == "interrupted",
        "message": message,
        "points": [point_record(pt, timing) for pt in points],
    }
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(path) -> tuple[TrialConfig, int, bool]:
    try:
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
        if m.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise UsageError(f"{path}: unsupported manifest schema {m.get('schema_version')!r}")
        return TrialConfig.from_dict(m["config"]), int(m.get("threads", 1)), bool(m.get("timing", True))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot replay {path}: {exc}") from exc


def _title(config: TrialConfig) -> str:
    return f"{decoder_label(config.decoder)} {config.decoder.name}, {config.model}, {config.trials} trials/point"


def run_sweep(config: TrialConfig, out: Path, threads: int, timing: bool, plot: bool = True,
              log=sys.stderr) -> SweepResult:
    """Sweep with streamed outputs; always leaves a manifest behind."""
    started = _now()
    writer = SweepWriter(out, timing)

    def on_point(pt):
        writer.add(pt)
        print(f"l={pt.l:<5d} p={pt.p:.4f} failures={pt.failures}/{pt.trials}", file=log, flush=True)

    status, message, result = "ok", "", None
    try:
        result = sweep(config, threads=threads, on_point=on_point)
    except KeyboardInterrupt:
        status, message = "interrupted", "interrupted; results are partial"
        raise
    except TrialError as exc:
        status, message, result = "trial_errors", str(exc), exc.partial
        raise
    finally:
        writer.close(truncated=status == "interrupted")
        write_manifest(out, config, threads, timing, started, writer.points, status, message)
        if plot and writer.points:
            from .plotting import plot_failure_curves

            plot_failure_curves(SweepResult(list(writer.points)), out / CURVES_PNG, _title(config))
    return result


# ---------------------------------------------------------------------------
# commands


def _frame_json(lattice: Lattice, frame: PauliFrame) -> dict:
    return {"x": [int(q) for q in np.flatnonzero(frame.x)], "z": [int(q) for q in np.flatnonzero(frame.z)]}


def _coords(lattice: Lattice, bits) -> list[list[int]]:
    return [[int(i), int(j)] for i, j in np.argwhere(np.asarray(bits).reshape(lattice.shape))]


def decode_syndrome(lattice: Lattice, syn: Syndrome, channel: ChannelParam, decoder: Decoder) -> dict:
    """Decode one syndrome and describe the outcome as plain data."""
    prior = prior_from_channel(lattice, channel)
    out: dict = {"distribution": None}
    depol = channel.model == DEPOLARIZING
    if decoder.kind == "rg":
        res = rg_decode(lattice, syn, prior, decoder.rg)
        out["distribution"] = res.distribution.probs.tolist()
        if res.sector_distributions is not None:
            out["x_distribution"] = res.sector_distributions[0].probs.tolist()
            out["z_distribution"] = res.sector_distributions[1].probs.tolist()
        k = res.chosen.index
    elif decoder.kind == "exact":
        decoder.check_size(lattice.lx, channel.model)
        if depol:
            dist = class_probabilities_exact(lattice, syn, prior, "both")
            out["distribution"] = dist.probs.tolist()
            k = dist.argmax()
        else:
            dx = class_probabilities_exact(lattice, syn, prior, "x_only")
            dz = class_probabilities_exact(lattice, syn, prior, "z_only")
            out["distribution"] = (dz.probs[:, None] * dx.probs[None, :]).ravel().tolist()
            out["x_distribution"] = dx.probs.tolist()
            out["z_distribution"] = dz.probs.tolist()
            k = dx.argmax() + 4 * dz.argmax()
    else:
        if lattice.n_faces <= 16:
            mx = min_energy_class(lattice, syn, "x_only")
            mz = min_energy_class(lattice, syn, "z_only")
            out["min_weights_x"] = [int(w) for w in mx.min_weights]
            out["min_weights_z"] = [int(w) for w in mz.min_weights]
            out["ties"] = bool(mx.is_tie or mz.is_tie)
            k = mx.best + 4 * mz.best
        else:
            plaq = syn.plaquettes.reshape((1,) + lattice.shape)
            sites = syn.sites.reshape((1,) + lattice.shape)
            k = int(decode_batch(decoder, lattice, channel, plaq, sites)[0][0])
    chosen = HomologyClass.from_index(int(k))
    correction = canonical_correction(lattice, syn) ^ logical_representative(lattice, chosen)
    if syndrome(lattice, correction) != syn:
        raise RuntimeError("correction does not reproduce the syndrome")
    out.update(
        chosen_class=int(k),
        chosen=chosen._asdict(),
        correction_weight=int(correction.weight),
        correction=_frame_json(lattice, correction),
    )
    return out


def cmd_decode(args) -> int:
    try:
        s = {k: v for k, v in vars(args).items() if v is not None}
        if "l" not in s or "p" not in s:
            raise UsageError("decode needs --l and --p")
        l = parse_ints(s["l"])
        p = parse_floats(s["p"])
        if len(l) != 1 or len(p) != 1:
            raise UsageError("decode takes a single --l and a single --p")
        l, p = l[0], p[0]
        model = s.get("model", DEFAULTS["model"])
        if model not in MODEL_NAMES:
            raise UsageError(f"unknown model {model!r}")
        decoder = make_decoder(s.get("decoder", DEFAULTS["decoder"]), model, int(s.get("bp", 3)),
                               s.get("sector", "auto"), s.get("backend", "compiled"))
        decoder.check_size(l, model)
        lattice = Lattice(l)
        channel = ChannelParam(model, p)
        seed = int(s.get("seed", 0))
        explicit = args.plaquettes is not None or args.sites is not None
        if explicit:
            syn = Syndrome.from_defects(lattice, parse_defects(args.plaquettes), parse_defects(args.sites))
            if any(syn.parities):
                raise UsageError("defects of each type must come in even numbers on a torus")
            source = "explicit"
        else:
            err = sample_error(lattice, channel, trial_rng(seed, l, p_key(p), 0))
            syn = syndrome(lattice, err)
            source = "sampled"
    except UsageError as exc:
        print(f"toricrg decode: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, LatticeError) as exc:
        print(f"toricrg decode: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = decode_syndrome(lattice, syn, channel, decoder)
    except (TooLargeError, LatticeError, RuntimeError, MemoryError) as exc:
        print(f"toricrg decode: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    record = {
        "l": l, "p": p, "model": channel.model, "decoder": decoder_label(decoder),
        "decoder_config": decoder.name, "seed": seed, "syndrome_source": source,
        "plaquette_defects": _coords(lattice, syn.plaquettes), "site_defects": _coords(lattice, syn.sites),
        **result,
    }
    text = json.dumps(record, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "decode.json").write_text(text + "\n", encoding="utf-8")
    c = result["chosen"]
    print(
        f"{len(record['plaquette_defects'])} plaquette / {len(record['site_defects'])} site defects; "
        f"class x1={c['x1']} x2={c['x2']} z1={c['z1']} z2={c['z2']} "
        f"(index {result['chosen_class']}), correction weight {result['correction_weight']}",
        file=sys.stderr,
    )
    return EXIT_OK


def _sweep_setup(args):
    if getattr(args, "replay", None):
        config, threads, timing = load_manifest(args.replay)
        if args.threads is not None:
            threads = int(args.threads)
        out = args.out
        if out is None:
            raise UsageError("replay needs --out")
        return config, threads, timing, Path(out), 200
    s = _settings(args)
    config = config_from_settings(s)
    if "out" not in s:
        raise UsageError("no output directory given (--out)")
    threads = int(s["threads"])
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    return config, threads, not _truthy(s.get("no_timing", "false")), Path(s["out"]), int(s["bootstrap"])


def _run_or_report(config, out, threads, timing, name) -> tuple[int, SweepResult | None]:
    try:
        return EXIT_OK, run_sweep(config, out, threads, timing)
    except KeyboardInterrupt:
        print(f"toricrg {name}: interrupted; partial results in {out}", file=sys.stderr)
        return EXIT_RUNTIME, None
    except TrialError as exc:
        print(f"toricrg {name}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME, None
    except (OSError, MemoryError, RuntimeError) as exc:
        print(f"toricrg {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME, None


def cmd_sweep(args) -> int:
    try:
        config, threads, timing, out, _ = _sweep_setup(args)
    except UsageError as exc:
        print(f"toricrg sweep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, _ = _run_or_report(config, out, threads, timing, "sweep")
    if code == EXIT_OK:
        print(f"wrote {out / CSV_NAME}, {out / JSONL_NAME}, {out / MANIFEST_NAME}, {out / CURVES_PNG}")
    return code


def threshold_report(result: SweepResult, bootstrap: int, seed: int) -> tuple[dict, object]:
    est = estimate_threshold(result, bootstrap=bootstrap, seed=seed)
    report = {
        "pairs": [{"l_small": c.l_small, "l_large": c.l_large, "p_th": c.p} for c in est.pairs],
        "found": est.found,
        "p_th": est.mean,
        "spread": est.spread,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "bootstrap": est.bootstrap,
        "bootstrap_found": est.bootstrap_found,
    }
    return report, est


def cmd_threshold(args) -> int:
    try:
        if args.from_path:
            src = Path(args.from_path)
            csv_path = src / CSV_NAME if src.is_dir() else src
            result = read_csv(csv_path)
            out = Path(args.out) if args.out else csv_path.parent
            bootstrap = int(args.bootstrap or DEFAULTS["bootstrap"])
            seed = int(args.seed or 0)
            title = csv_path.name
        else:
            config, threads, timing, out, bootstrap = _sweep_setup(args)
            seed, title = config.seed, _title(config)
            result = None
    except UsageError as exc:
        print(f"toricrg threshold: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"toricrg threshold: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result is None:
        code, result = _run_or_report(config, out, threads, timing, "threshold")
        if code != EXIT_OK:
            return code
    try:
        report, est = threshold_report(result, bootstrap, seed)
    except ValueError as exc:
        print(f"toricrg threshold: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(est.describe())
    out.mkdir(parents=True, exist_ok=True)
    with open(out / THRESHOLD_JSON, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    from .plotting import plot_failure_curves

    plot_failure_curves(result, out / THRESHOLD_PNG, title, threshold=est)
    return EXIT_OK


def oracle_check(trials: int, p_values, seed: int = 0) -> dict:
    """Largest gap between RG base-case and exact class distributions at l = 2."""
    lattice = Lattice(2)
    worst = {}
    for variant, label in ((TWO_BY_TWO, "rg2x2"), (TWO_BY_ONE, "rg2x1")):
        cfg = RgConfig(variant=variant, sector=CORRELATED)
        gap = 0.0
        for p in p_values:
            prior = prior_from_channel(lattice, ChannelParam(DEPOLARIZING, p))
            for t in range(trials):
                # a uniformly random Pauli gives a uniformly random syndrome
                rng = trial_rng(seed, 2, p_key(p), t)
                err = PauliFrame(rng.random(lattice.n_qubits) < 0.5, rng.random(lattice.n_qubits) < 0.5)
                syn = syndrome(lattice, err)
                a = rg_decode(lattice, syn, prior, cfg).distribution.probs
                b = class_probabilities_exact(lattice, syn, prior, "both").probs
                gap = max(gap, float(np.abs(a - b).max()))
        worst[label] = gap
    return worst


def cmd_oracle_check(args) -> int:
    try:
        trials = int(args.trials) if args.trials is not None else 500
        p_values = parse_floats(args.p) if args.p is not None else [0.05, 0.1, 0.19]
        seed = int(args.seed) if args.seed is not None else 0
        tol = float(args.tol)
        for p in p_values:
            ChannelParam(DEPOLARIZING, p)
    except ValueError as exc:
        print(f"toricrg oracle-check: {exc}", file=sys.stderr)
        return EXIT_USAGE
    worst = oracle_check(trials, p_values, seed)
    ok = all(v <= tol for v in worst.values())
    report = {"l": 2, "model": "depolarizing", "syndromes_per_p": trials, "p": p_values,
              "max_abs_difference": worst, "tolerance": tol, "passed": ok}
    print(json.dumps(report, sort_keys=True))
    for name, gap in worst.items():
        print(f"{name}: max |rg - exact| = {gap:.3e} ({'ok' if gap <= tol else 'FAIL'})", file=sys.stderr)
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, sweep_like: bool):
    p.add_argument("--l", nargs="+", help="lattice size(s), e.g. --l 16 32 64")
    p.add_argument("--p", nargs="+", help="error rate(s)")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--decoder", choices=DECODER_NAMES)
    p.add_argument("--bp", type=int, help="belief-propagation rounds per level (default 3)")
    p.add_argument("--sector", choices=("auto", "correlated", "independent"),
                   help="RG sector handling (auto: correlated for depol, independent for xz)")
    p.add_argument("--backend", choices=("compiled", "numpy"), help="RG block kernel backend")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    if sweep_like:
        p.add_argument("--p-grid", dest="p_grid", help="start:stop:step (inclusive) or a comma list")
        p.add_argument("--trials", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--chunk", type=int, help="trials decoded together")
        p.add_argument("--config", help="INI file with a [run] section")
        p.add_argument("--replay", help="rerun the configuration stored in a manifest")
        p.add_argument("--no-timing", dest="no_timing", action="store_true",
                       help="leave mean_decode_us empty so outputs are byte-reproducible")
        p.add_argument("--bootstrap", type=int, help="bootstrap replicates for the threshold CI")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toricrg", description="Renormalization-group decoding of the toric code.")
    parser.add_argument("--version", action="version", version=f"toricrg {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("decode", help="decode one sampled or explicit syndrome")
    _add_common(d, sweep_like=False)
    d.add_argument("--plaquettes", help="explicit plaquette defects 'i,j; i,j'")
    d.add_argument("--sites", help="explicit site defects 'i,j; i,j'")
    d.set_defaults(func=cmd_decode)

    s = sub.add_parser("sweep", help="failure rates over sizes and error rates")
    _add_common(s, sweep_like=True)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("threshold", help="crossing point of failure curves")
    _add_common(t, sweep_like=True)
    t.add_argument("--from", dest="from_path", help="existing results CSV or sweep directory")
    t.set_defaults(func=cmd_threshold)

    o = sub.add_parser("oracle-check", help="compare RG base case with exact decoding at l = 2")
    o.add_argument("--trials", type=int, help="syndromes per error rate (default 500)")
    o.add_argument("--p", nargs="+", help="error rates (default 0.05 0.1 0.19)")
    o.add_argument("--seed", type=int)
    o.add_argument("--tol", type=float, default=1e-9)
    o.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
