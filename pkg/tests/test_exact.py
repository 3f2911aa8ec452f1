import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import softmax
from oracles import brute_class_probabilities, brute_matching_weight

from toricrg.exact import (
    TooLargeError,
    brute_force_class_probabilities,
    class_log_weights,
    class_log_weights_contract,
    class_probabilities_exact,
    free_energy_report,
    min_energy_class,
    mwpm_small,
    torus_distance,
)
from toricrg.lattice import Lattice, PauliFrame, Syndrome, canonical_correction, logical_representative, syndrome
from toricrg.noise import ChannelParam, QubitPrior, prior_from_channel


def random_syndrome(lattice, rng):
    n = lattice.n_qubits
    return syndrome(lattice, PauliFrame(rng.random(n) < 0.5, rng.random(n) < 0.5))


def random_prior(n, rng):
    p = rng.random((n, 4)) + 0.05
    return QubitPrior(p / p.sum(axis=1, keepdims=True))


@pytest.mark.parametrize("model,p", [("depol", 0.1), ("depol", 0.19), ("xz", 0.08)])
def test_matches_definition_oracle_on_2x2(model, p):
    lat = Lattice(2)
    ch = ChannelParam(model, p)
    prior = prior_from_channel(lat, ch)
    rng = np.random.default_rng(11)
    for _ in range(3):
        syn = random_syndrome(lat, rng)
        ref = canonical_correction(lat, syn)
        want = brute_class_probabilities(lat, syn.plaquettes, syn.sites, ch.pauli_probs(), ref)
        got = class_probabilities_exact(lat, syn, prior).probs
        assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_matches_builtin_brute_force_with_site_dependent_prior():
    lat = Lattice(2)
    rng = np.random.default_rng(2)
    for _ in range(10):
        syn = random_syndrome(lat, rng)
        prior = random_prior(lat.n_qubits, rng)
        got = class_probabilities_exact(lat, syn, prior).probs
        assert np.allclose(got, brute_force_class_probabilities(lat, syn, prior), atol=1e-12)


@pytest.mark.parametrize(
    "l,sector", [(2, "both"), (2, "x_only"), (3, "x_only"), (3, "z_only"), (4, "x_only"), (4, "z_only")]
)
def test_enumeration_and_contraction_agree(l, sector):
    lat = Lattice(l)
    rng = np.random.default_rng(l)
    syns = [random_syndrome(lat, rng) for _ in range(3)]
    refs = [canonical_correction(lat, s) for s in syns]
    rx = np.array([r.x for r in refs])
    rz = np.array([r.z for r in refs])
    tab = np.array([random_prior(lat.n_qubits, rng).table() for _ in syns])
    a = softmax(class_log_weights(lat, sector, rx, rz, tab), axis=1)
    b = softmax(class_log_weights_contract(lat, sector, rx, rz, tab), axis=1)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_single_sector_is_marginal_of_joint_for_independent_noise():
    # with correlated noise the site syndrome also informs the X sector, so
    # this identity only holds when X and Z flips are independent
    lat = Lattice(4)
    rng = np.random.default_rng(7)
    syn = random_syndrome(lat, rng)
    prior = prior_from_channel(lat, ChannelParam("xz", 0.12))
    joint = class_probabilities_exact(lat, syn, prior, "both").probs.reshape(4, 4)  # (z, x)
    x_only = class_probabilities_exact(lat, syn, prior, "x_only").probs
    z_only = class_probabilities_exact(lat, syn, prior, "z_only").probs
    assert np.allclose(joint.sum(axis=0), x_only, atol=1e-10)
    assert np.allclose(joint.sum(axis=1), z_only, atol=1e-10)


@given(st.integers(0, 10**6), st.sampled_from(["both", "x_only", "z_only"]), st.floats(0.01, 0.74))
def test_normalized(seed, sector, p):
    lat = Lattice(2)
    syn = random_syndrome(lat, np.random.default_rng(seed))
    d = class_probabilities_exact(lat, syn, prior_from_channel(lat, ChannelParam("depol", p)), sector)
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert (d.probs >= 0).all()
    assert d.full().sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("l", [2, 4])
def test_uniform_prior_gives_uniform_classes(l):
    lat = Lattice(l)
    syn = random_syndrome(lat, np.random.default_rng(l))
    d = class_probabilities_exact(lat, syn, prior_from_channel(lat, ChannelParam("depol", 0.75)))
    assert np.allclose(d.probs, 1 / 16, atol=1e-12)


def test_reference_change_permutes_classes():
    lat = Lattice(2)
    rng = np.random.default_rng(4)
    syn = random_syndrome(lat, rng)
    prior = random_prior(lat.n_qubits, rng)
    ref = canonical_correction(lat, syn)
    base = class_probabilities_exact(lat, syn, prior).probs
    for k in range(16):
        moved = class_probabilities_exact(lat, syn, prior, reference=ref ^ logical_representative(lat, k)).probs
        assert np.allclose(moved, base[np.arange(16) ^ k], atol=1e-14)


def test_feasibility_guards():
    prior3 = prior_from_channel(Lattice(3), ChannelParam("depol", 0.1))
    syn3 = Syndrome(np.zeros(9, bool), np.zeros(9, bool))
    with pytest.raises(TooLargeError):
        class_probabilities_exact(Lattice(3), syn3, prior3, "both", method="enumerate")
    syn5 = Syndrome(np.zeros(25, bool), np.zeros(25, bool))
    prior5 = prior_from_channel(Lattice(5), ChannelParam("depol", 0.1))
    with pytest.raises(TooLargeError):
        class_probabilities_exact(Lattice(5), syn5, prior5, "x_only")
    with pytest.raises(ValueError):
        class_probabilities_exact(Lattice(2), Syndrome(np.zeros(4), np.zeros(4)), prior3, "both")


@pytest.mark.parametrize("model,p", [("depol", 0.1), ("xz", 0.1), ("depol", 0.3)])
def test_free_energy_probabilities_match_exact(model, p):
    lat = Lattice(2)
    ch = ChannelParam(model, p)
    rng = np.random.default_rng(5)
    for _ in range(3):
        syn = random_syndrome(lat, rng)
        rep = free_energy_report(lat, syn, ch)
        exact = class_probabilities_exact(lat, syn, prior_from_channel(lat, ch)).probs
        assert np.allclose(rep.probabilities(), exact, atol=1e-12)
        assert exact[rep.argmin()] == pytest.approx(exact.max(), rel=1e-12)
        assert np.allclose(rep.free_energy, rep.energy - rep.entropy / rep.beta)


def test_min_energy_trivial_syndrome():
    lat = Lattice(3)
    syn = Syndrome(np.zeros(9, bool), np.zeros(9, bool))
    res = min_energy_class(lat, syn, "x_only")
    assert res.best == 0 and res.min_weights[0] == 0 and not res.is_tie
    assert list(res.min_weights[1:]) == [3, 3, 6]


def test_min_energy_reports_ties():
    # two plaquette defects half way round a 4x4 torus: both routes weigh 2
    lat = Lattice(4)
    syn = Syndrome.from_defects(lat, [(0, 0), (2, 0)])
    res = min_energy_class(lat, syn, "x_only")
    assert res.is_tie and len(res.ties) == 2
    assert res.min_weights.min() == 2


def test_torus_distance():
    assert torus_distance((0, 0), (3, 3), (4, 4)) == 2
    assert torus_distance((1, 2), (1, 2), (5, 7)) == 0


@pytest.mark.parametrize("shape,k", [((4, 4), 4), ((5, 6), 6), ((8, 8), 8)])
def test_matching_is_minimal(shape, k):
    rng = np.random.default_rng(k)
    for _ in range(5):
        cells = rng.choice(shape[0] * shape[1], size=k, replace=False)
        defects = [divmod(int(c), shape[1]) for c in cells]
        pairs, total = mwpm_small(defects, shape)
        assert sorted(i for p in pairs for i in p) == list(range(k))
        assert total == sum(torus_distance(defects[a], defects[b], shape) for a, b in pairs)
        assert total == brute_matching_weight(defects, shape)


def test_matching_limits():
    with pytest.raises(ValueError):
        mwpm_small([(0, 0)], (4, 4))
    with pytest.raises(TooLargeError):
        mwpm_small([(0, i) for i in range(22)], (4, 22))


def test_free_energy_weight_cap_leaves_one_chain():
    # with chains capped at weight 0 only the identity survives, in class 0
    lat = Lattice(2)
    syn = Syndrome(np.zeros(4, bool), np.zeros(4, bool))
    rep = free_energy_report(lat, syn, ChannelParam("depol", 0.05), max_weight=0)
    assert rep.entropy[0] == 0 and rep.energy[0] == 0
    assert np.isinf(rep.free_energy[1:]).all() and rep.argmin() == 0
