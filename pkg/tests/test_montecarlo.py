import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binomtest

from toricrg.exact import TooLargeError
from toricrg.lattice import Lattice, LatticeError
from toricrg.montecarlo import (
    Decoder,
    PointResult,
    SweepResult,
    TrialConfig,
    TrialError,
    crossing,
    estimate_threshold,
    run_chunk,
    run_trial,
    sweep,
    wilson_interval,
)
from toricrg.noise import ChannelParam, trial_rng
from toricrg.rg import INDEPENDENT, TWO_BY_ONE, RgConfig

RG_XZ = Decoder("rg", RgConfig(variant=TWO_BY_ONE, sector=INDEPENDENT))


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_matches_scipy(k, extra):
    n = k + extra
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(ci.low, abs=1e-9) and hi == pytest.approx(ci.high, abs=1e-9)


def test_wilson_edges():
    assert wilson_interval(0, 0) == (0.0, 1.0)
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.95


@pytest.mark.parametrize("q,n", [(0.02, 200), (0.3, 50), (0.5, 1000)])
def test_wilson_coverage(q, n):
    rng = np.random.default_rng(17)
    k = rng.binomial(n, q, size=4000)
    covered = np.mean([lo <= q <= hi for lo, hi in (wilson_interval(int(v), n) for v in k)])
    assert covered > 0.93


def synthetic(sizes, grid, pth=0.1, trials=None, seed=0):
    """Curves with failure rate (p/pth)**(l/4) / 2, exact or binomially sampled."""
    rng = np.random.default_rng(seed)
    pts = []
    for l in sizes:
        for p in grid:
            f = min(0.5 * (p / pth) ** (l / 4), 0.99)
            if trials is None:
                pts.append(PointResult(l, p, 10**9, int(round(f * 10**9))))
            else:
                pts.append(PointResult(l, p, trials, int(rng.binomial(trials, f))))
    return SweepResult(pts)


def test_synthetic_crossing_is_recovered():
    res = synthetic([8, 16, 32], np.linspace(0.07, 0.13, 13))
    est = estimate_threshold(res, bootstrap=50)
    assert est.found
    for c in est.pairs:
        assert c.p == pytest.approx(0.1, abs=2e-3)
    assert est.ci_low <= 0.1 <= est.ci_high


def test_sampled_synthetic_crossing():
    res = synthetic([8, 16, 32], np.linspace(0.07, 0.13, 13), trials=20000, seed=3)
    est = estimate_threshold(res, bootstrap=200, seed=1)
    assert est.mean == pytest.approx(0.1, abs=0.005)
    assert est.ci_low < est.mean < est.ci_high


def test_no_crossing_is_explicit():
    res = synthetic([8, 16], np.linspace(0.02, 0.06, 5))
    est = estimate_threshold(res, bootstrap=10)
    assert not est.found
    assert est.pairs[0].p is None
    assert "no crossing" in est.describe()


def test_crossing_interpolates():
    p = np.array([0.1, 0.2, 0.3])
    assert crossing(p, np.zeros(3), np.array([-1.0, -0.5, 0.5])) == pytest.approx(0.25)
    assert crossing(p, np.zeros(3), np.array([1.0, 1.0, 1.0])) is None


def test_threshold_needs_enough_data():
    res = synthetic([8], [0.1, 0.11, 0.12])
    with pytest.raises(ValueError):
        estimate_threshold(res)
    with pytest.raises(ValueError):
        estimate_threshold(synthetic([8, 16], [0.1, 0.11]))


def test_chunking_does_not_change_results():
    ch = ChannelParam("xz", 0.09)
    whole = run_chunk(RG_XZ, 8, ch, 5, 0, 60)
    parts = [run_chunk(RG_XZ, 8, ch, 5, s, 20) for s in (0, 20, 40)]
    assert whole[0] == sum(p[0] for p in parts)


def test_sweep_is_deterministic_across_threads_and_chunks():
    cfg = TrialConfig((4, 8), (0.06, 0.1), 40, RG_XZ, "xz", seed=9, chunk=40)
    a = sweep(cfg)
    b = sweep(TrialConfig((4, 8), (0.06, 0.1), 40, RG_XZ, "xz", seed=9, chunk=7), threads=2)
    assert [(pt.l, pt.p, pt.failures) for pt in a.points] == [(pt.l, pt.p, pt.failures) for pt in b.points]
    c = sweep(TrialConfig((4, 8), (0.06, 0.1), 40, RG_XZ, "xz", seed=10, chunk=40))
    assert [pt.failures for pt in a.points] != [pt.failures for pt in c.points]


def test_batch_agrees_with_single_trial_path():
    lat = Lattice(8)
    ch = ChannelParam("depol", 0.12)
    dec = Decoder("rg")
    fails = sum(not run_trial(lat, ch, dec, trial_rng(0, 8, 120000000, t)) for t in range(30))
    assert run_chunk(dec, 8, ch, 0, 0, 30)[0] == fails


def test_exact_decoder_at_maximal_noise():
    # p = 3/4 randomizes the class; only one class in 16 succeeds
    cfg = TrialConfig((2,), (0.75,), 2000, Decoder("exact"), "depol", seed=1)
    pt = sweep(cfg).points[0]
    sigma = math.sqrt(15 / 16 * 1 / 16 / pt.trials)
    assert abs(pt.failure_rate - 15 / 16) < 5 * sigma


def test_decoders_rank_as_expected_at_4x4():
    kw = dict(model="xz", seed=3)
    exact = sweep(TrialConfig((4,), (0.1,), 150, Decoder("exact"), **kw)).points[0].failures
    energy = sweep(TrialConfig((4,), (0.1,), 150, Decoder("min_energy"), **kw)).points[0].failures
    assert exact <= energy


def test_min_energy_beyond_enumeration_uses_matching():
    cfg = TrialConfig((8,), (0.02,), 50, Decoder("min_energy"), "xz", seed=2)
    pt = sweep(cfg).points[0]
    assert pt.errors == 0 and pt.failures <= 5


def test_raising_trials_fail_the_sweep():
    # too many defects for exact matching: recorded, then reported
    cfg = TrialConfig((8,), (0.2,), 10, Decoder("min_energy"), "xz", seed=2)
    with pytest.raises(TrialError) as info:
        sweep(cfg)
    assert info.value.partial.errors > 0


def test_config_validation_and_round_trip():
    cfg = TrialConfig((8, 16), (0.05, 0.1), 10, RG_XZ, "xz", seed=4)
    assert TrialConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(LatticeError):
        TrialConfig((6,), (0.1,), 10)
    with pytest.raises(TooLargeError):
        TrialConfig((8,), (0.1,), 10, Decoder("exact"))
    with pytest.raises(ValueError):
        TrialConfig((8,), (0.1,), 0)
    with pytest.raises(ValueError):
        Decoder("magic")


@pytest.mark.parametrize(
    "decoder,l", [(Decoder("rg"), 8), (RG_XZ, 8), (Decoder("exact"), 4), (Decoder("min_energy"), 8)]
)
def test_no_noise_never_fails(decoder, l):
    model = "xz" if decoder.kind == "exact" else "depol"
    pt = sweep(TrialConfig((l,), (0.0,), 20, decoder, model, seed=1)).points[0]
    assert pt.failures == 0 and pt.errors == 0
