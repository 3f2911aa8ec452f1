import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toricrg.exact import class_probabilities_exact
from toricrg.lattice import (
    Lattice,
    LatticeError,
    PauliFrame,
    canonical_correction,
    homology_class,
    logical_representative,
    syndrome,
)
from toricrg.noise import ChannelParam, QubitPrior, prior_from_channel, sample_error, trial_rng
from toricrg.rg import CORRELATED, INDEPENDENT, TWO_BY_ONE, TWO_BY_TWO, RgConfig, rg_decode, rg_decode_batch

VARIANTS = [TWO_BY_TWO, TWO_BY_ONE]


def sampled_syndrome(lat, model, p, seed):
    return syndrome(lat, sample_error(lat, ChannelParam(model, p), trial_rng(seed, lat.lx)))


def translate(lat, frame, a, b):
    hx, vx = lat.split(frame.x)
    hz, vz = lat.split(frame.z)
    r = lambda arr: np.roll(arr, (a, b), axis=(0, 1))
    return PauliFrame(lat.join(r(hx), r(vx)), lat.join(r(hz), r(vz)))


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("p", [0.05, 0.1, 0.19])
def test_base_case_is_exact(variant, p):
    lat = Lattice(2)
    prior = prior_from_channel(lat, ChannelParam("depol", p))
    rng = np.random.default_rng(int(p * 100))
    for _ in range(10):
        e = PauliFrame(rng.random(8) < 0.5, rng.random(8) < 0.5)
        syn = syndrome(lat, e)
        got = rg_decode(lat, syn, prior, RgConfig(variant=variant)).distribution.probs
        want = class_probabilities_exact(lat, syn, prior).probs
        assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_base_case_with_site_dependent_prior():
    lat = Lattice(2)
    rng = np.random.default_rng(1)
    for _ in range(5):
        raw = rng.random((8, 4)) + 0.02
        prior = QubitPrior(raw / raw.sum(axis=1, keepdims=True))
        syn = syndrome(lat, PauliFrame(rng.random(8) < 0.5, rng.random(8) < 0.5))
        got = rg_decode(lat, syn, prior).distribution.probs
        assert np.allclose(got, class_probabilities_exact(lat, syn, prior).probs, atol=1e-12)


def test_independent_sectors_at_base_case():
    lat = Lattice(2)
    prior = prior_from_channel(lat, ChannelParam("xz", 0.1))
    syn = sampled_syndrome(lat, "xz", 0.3, 4)
    res = rg_decode(lat, syn, prior, RgConfig(sector=INDEPENDENT))
    px, pz = res.sector_distributions
    assert np.allclose(px.probs, class_probabilities_exact(lat, syn, prior, "x_only").probs, atol=1e-12)
    assert np.allclose(pz.probs, class_probabilities_exact(lat, syn, prior, "z_only").probs, atol=1e-12)
    assert res.chosen.x_index == px.argmax() and res.chosen.z_index == pz.argmax()


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("sector", [CORRELATED, INDEPENDENT])
@given(seed=st.integers(0, 10**6), p=st.floats(0.01, 0.2))
def test_output_normalized_and_consistent(variant, sector, seed, p):
    lat = Lattice(8)
    model = "depol" if sector == CORRELATED else "xz"
    syn = sampled_syndrome(lat, model, p, seed)
    res = rg_decode(lat, syn, prior_from_channel(lat, ChannelParam(model, p)), RgConfig(variant, sector))
    probs = res.distribution.probs
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (probs >= 0).all()
    assert syndrome(lat, res.correction) == syn
    ref = canonical_correction(lat, syn)
    assert homology_class(lat, ref ^ res.correction) == res.chosen


def test_deterministic():
    lat = Lattice(16)
    syn = sampled_syndrome(lat, "depol", 0.12, 1)
    prior = prior_from_channel(lat, ChannelParam("depol", 0.12))
    a = rg_decode(lat, syn, prior)
    b = rg_decode(lat, syn, prior)
    assert np.array_equal(a.distribution.probs, b.distribution.probs)
    assert a.correction == b.correction


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("shift", [(4, 0), (0, 4), (4, 4)])
def test_translation_by_half_the_lattice(variant, shift):
    # shifts by l/2 map the block hierarchy onto itself
    lat = Lattice(8)
    prior = prior_from_channel(lat, ChannelParam("depol", 0.1))
    cfg = RgConfig(variant=variant)
    for seed in range(3):
        e = sample_error(lat, ChannelParam("depol", 0.1), trial_rng(seed, 99))
        syn = syndrome(lat, e)
        moved = syndrome(lat, translate(lat, e, *shift))
        base = rg_decode(lat, syn, prior, cfg).distribution.probs
        got = rg_decode(lat, moved, prior, cfg).distribution.probs
        # express both relative to the translated reference
        c = homology_class(lat, canonical_correction(lat, moved) ^ translate(lat, canonical_correction(lat, syn), *shift))
        assert np.allclose(got[np.arange(16) ^ c.index], base, atol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_uniform_prior_gives_uniform_distribution(variant):
    lat = Lattice(8)
    syn = sampled_syndrome(lat, "depol", 0.3, 2)
    res = rg_decode(lat, syn, prior_from_channel(lat, ChannelParam("depol", 0.75)), RgConfig(variant=variant))
    assert np.allclose(res.distribution.probs, 1 / 16, atol=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_backends_agree_end_to_end(variant):
    lat = Lattice(8)
    syn = sampled_syndrome(lat, "depol", 0.12, 3)
    prior = prior_from_channel(lat, ChannelParam("depol", 0.12))
    a = rg_decode(lat, syn, prior, RgConfig(variant=variant, backend="compiled")).distribution.probs
    b = rg_decode(lat, syn, prior, RgConfig(variant=variant, backend="numpy")).distribution.probs
    assert np.allclose(a, b, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("sector", [CORRELATED, INDEPENDENT])
def test_batch_matches_single(sector):
    lat = Lattice(8)
    model = "depol" if sector == CORRELATED else "xz"
    ch = ChannelParam(model, 0.1)
    prior = prior_from_channel(lat, ch)
    cfg = RgConfig(sector=sector)
    syns = [sampled_syndrome(lat, model, 0.1, s) for s in range(6)]
    plaq = np.array([s.plaquettes.reshape(lat.shape) for s in syns])
    sites = np.array([s.sites.reshape(lat.shape) for s in syns])
    k, _, _ = rg_decode_batch(lat, plaq, sites, prior.table()[None], cfg)
    assert list(k) == [rg_decode(lat, s, prior, cfg).chosen.index for s in syns]


def test_trivial_syndrome_keeps_identity_class():
    lat = Lattice(16)
    syn = syndrome(lat, PauliFrame.identity(lat.n_qubits))
    res = rg_decode(lat, syn, prior_from_channel(lat, ChannelParam("depol", 0.05)))
    assert res.chosen.index == 0 and res.correction.weight == 0


def test_corrects_a_single_error():
    lat = Lattice(16)
    e = PauliFrame.identity(lat.n_qubits)
    e.x[lat.v(5, 9)] = True
    e.z[lat.v(5, 9)] = True
    res = rg_decode(lat, syndrome(lat, e), prior_from_channel(lat, ChannelParam("depol", 0.05)))
    assert homology_class(lat, res.correction ^ e).is_trivial


def test_bp_rounds_change_only_messages():
    lat = Lattice(8)
    syn = sampled_syndrome(lat, "depol", 0.15, 6)
    prior = prior_from_channel(lat, ChannelParam("depol", 0.15))
    for bp in (0, 1, 3):
        assert rg_decode(lat, syn, prior, RgConfig(bp_rounds=bp)).distribution.probs.sum() == pytest.approx(1.0)


def test_invalid_configurations():
    with pytest.raises(ValueError):
        RgConfig(variant="three_by_three")
    with pytest.raises(ValueError):
        RgConfig(bp_rounds=-1)
    with pytest.raises(ValueError):
        RgConfig(backend="gpu")
    lat = Lattice(6)
    syn = syndrome(lat, PauliFrame.identity(lat.n_qubits))
    with pytest.raises(LatticeError):
        rg_decode(lat, syn, prior_from_channel(lat, ChannelParam("depol", 0.1)))
    lat = Lattice(8, 4)
    with pytest.raises(LatticeError):
        rg_decode(lat, syndrome(lat, PauliFrame.identity(64)), prior_from_channel(lat, ChannelParam("depol", 0.1)))


def test_logical_error_is_detected_as_wrong_class():
    lat = Lattice(8)
    e = logical_representative(lat, 1)
    res = rg_decode(lat, syndrome(lat, e), prior_from_channel(lat, ChannelParam("depol", 0.05)))
    assert not homology_class(lat, res.correction ^ e).is_trivial
