import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otoclab.errors import ContractViolation
from otoclab.hilbert import SY, SZ, is_unitary, kron_sites
from otoclab.models import BoseHubbard
from otoclab.randomness import (
    FixedUnitary,
    GlobalCue,
    LocalProduct,
    RandomQuench,
    RngStream,
    frame_potential_2,
    perturb_local_unitary,
    random_quench_state,
    random_quench_unitary,
    rotation,
    sample_cue,
    sample_haar_state,
    sample_local_product,
)
from otoclab.hilbert import ProductState


def weingarten_two(d, m1, n1, m1p, n1p, m2, n2, m2p, n2p):
    """Closed-form second moment of CUE(d) matrix elements."""
    dl = lambda a, b: float(a == b)  # noqa: E731
    plus = dl(m1, m1p) * dl(m2, m2p) * dl(n1, n1p) * dl(n2, n2p) + dl(m1, m2p) * dl(m2, m1p) * dl(n1, n2p) * dl(n2, n1p)
    minus = dl(m1, m1p) * dl(m2, m2p) * dl(n1, n2p) * dl(n2, n1p) + dl(m1, m2p) * dl(m2, m1p) * dl(n1, n1p) * dl(n2, n2p)
    return plus / (d * d - 1) - minus / (d * (d * d - 1))


@pytest.fixture(scope="module")
def cue4():
    rng = np.random.default_rng(11)
    return np.stack([sample_cue(4, rng) for _ in range(10000)])


def test_cue_d1_is_phase():
    u = sample_cue(1, np.random.default_rng(0))
    assert u.shape == (1, 1) and abs(abs(u[0, 0]) - 1) < 1e-12


def test_cue_rejects_bad_dim():
    with pytest.raises(ContractViolation):
        sample_cue(0, 0)


@settings(max_examples=20)
@given(st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_cue_unitary(d, seed):
    assert is_unitary(sample_cue(d, seed))


def test_cue_first_moment(cue4):
    x = np.abs(cue4[:, 0, 0]) ** 2
    assert abs(x.mean() - 0.25) < 3 * x.std(ddof=1) / np.sqrt(len(x))


@pytest.mark.parametrize(
    "idx",
    [
        (0, 0, 0, 0, 0, 0, 0, 0),
        (0, 0, 0, 0, 1, 1, 1, 1),
        (0, 0, 0, 1, 1, 1, 1, 0),
        (0, 1, 2, 1, 2, 3, 0, 3),
    ],
)
def test_cue_two_design_identity(cue4, idx):
    m1, n1, m1p, n1p, m2, n2, m2p, n2p = idx
    x = cue4[:, m1, n1] * cue4[:, m1p, n1p].conj() * cue4[:, m2, n2] * cue4[:, m2p, n2p].conj()
    ref = weingarten_two(4, *idx)
    se = np.sqrt(np.var(x.real, ddof=1) / len(x)) + 1e-15
    assert abs(x.real.mean() - ref) < 3 * se + 1e-12
    assert abs(x.imag.mean()) < 3 * np.sqrt(np.var(x.imag, ddof=1) / len(x)) + 1e-12


def test_weingarten_oracle_values():
    assert weingarten_two(4, *(0,) * 8) == pytest.approx(2 / (4 * 5))
    assert weingarten_two(4, 0, 0, 0, 0, 1, 1, 1, 1) == pytest.approx(1 / 15)
    assert weingarten_two(4, 0, 0, 0, 1, 1, 1, 1, 0) == pytest.approx(-1 / 60)


def test_porter_thomas_moments(cue4):
    rng = np.random.default_rng(5)
    phi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    phi, psi = phi / np.linalg.norm(phi), psi / np.linalg.norm(psi)
    p = np.abs(np.einsum("i,kij,j->k", phi.conj(), cue4, psi)) ** 2
    se1 = p.std(ddof=1) / np.sqrt(len(p))
    se2 = (p**2).std(ddof=1) / np.sqrt(len(p))
    assert abs(p.mean() - 0.25) < 3 * se1
    assert abs((p**2).mean() - 2 / 20) < 3 * se2


def test_haar_state_matches_cue_column_law():
    rng = np.random.default_rng(3)
    x = np.array([abs(sample_haar_state(4, rng)[0]) ** 2 for _ in range(10000)])
    assert abs(x.mean() - 0.25) < 3 * x.std(ddof=1) / 100
    # |psi_0|^2 ~ Beta(1, d-1): second moment 2 / (d (d+1))
    assert abs((x**2).mean() - 0.1) < 3 * (x**2).std(ddof=1) / 100


def test_local_product():
    us = sample_local_product(1, 0)
    assert us.shape == (1, 2, 2) and is_unitary(us[0])
    us = sample_local_product(4, 1)
    assert is_unitary(kron_sites(us))
    rng = np.random.default_rng(2)
    x = np.array([abs(sample_local_product(3, rng)[1][0, 0]) ** 2 for _ in range(10000)])
    assert abs(x.mean() - 0.5) < 3 * x.std(ddof=1) / 100


def test_rng_stream_reproducible():
    a = RngStream(7, 3).generator(0).standard_normal(5)
    b = RngStream(7, 3).generator(0).standard_normal(5)
    c = RngStream(7, 4).generator(0).standard_normal(5)
    d = RngStream(7, 3).generator(1).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert np.array_equal(sample_cue(8, RngStream(1, 2)), sample_cue(8, RngStream(1, 2)))


# ------------------------------------------------------------------- mismatch


def test_perturb_zero_angle_is_identity_map():
    u = sample_cue(2, 0)
    assert np.array_equal(perturb_local_unitary(u, 0.0, 1), u)


def test_perturb_unitary_and_definition():
    u = sample_cue(2, 0)
    out = perturb_local_unitary(u, 0.2, np.random.default_rng(9))
    assert is_unitary(out)
    a, b, c = np.random.default_rng(9).uniform(-0.2, 0.2, size=3)
    np.testing.assert_allclose(out, rotation(SZ, a) @ rotation(SY, b) @ rotation(SZ, c) @ u, atol=1e-14)
    with pytest.raises(ContractViolation):
        perturb_local_unitary(u, -0.1, 0)


def test_perturb_first_order_vanishes():
    # mean deviation is second order: halving theta cuts it by ~4
    u = sample_cue(2, 0)
    rng = np.random.default_rng(4)

    def mean_dev(theta):
        return np.linalg.norm(np.mean([perturb_local_unitary(u, theta, rng) - u for _ in range(10000)], axis=0), 2)

    d1, d2 = mean_dev(0.2), mean_dev(0.1)
    assert d1 < 0.2**2
    assert 2.5 < d1 / d2 < 6.0


# -------------------------------------------------------------------- quench


def test_quench_eta_zero_identity():
    model = BoseHubbard(3, 2)
    np.testing.assert_allclose(random_quench_unitary(model, 0, 1.0, 2.0, 0).mat, np.eye(6))


def test_quench_unitary_in_sector():
    model = BoseHubbard(4, 2)
    u = random_quench_unitary(model, 3, 1.0, 2.0, np.random.default_rng(0)).mat
    assert u.shape == (10, 10) and is_unitary(u)
    with pytest.raises(ContractViolation):
        random_quench_unitary(model, 1, 0.0, 2.0, 0)


def test_quench_state_matches_unitary():
    model = BoseHubbard(4, 2)
    k0 = ProductState(model.basis, (1, 0, 1, 0))
    u = random_quench_unitary(model, 4, 1.0, 2.0, RngStream(3, 1).generator(0)).mat
    psi = random_quench_state(model, k0, 4, 1.0, 2.0, RngStream(3, 1).generator(0))
    np.testing.assert_allclose(psi, u @ k0.vector(), atol=1e-10)


def test_quench_disorder_width():
    from otoclab.randomness import _quench_disorder

    d = _quench_disorder(BoseHubbard(4, 2), 2000, 2.0, np.random.default_rng(0))
    assert d.min() >= -1 and d.max() <= 1
    assert d.min() < -0.99 and d.max() > 0.99


# ------------------------------------------------------------ frame potential


def test_frame_potential_fixed_unitary():
    u = sample_cue(3, 0)
    assert frame_potential_2(FixedUnitary(u), 3, 0) == pytest.approx(81.0)


def test_frame_potential_cue():
    f, se = frame_potential_2(GlobalCue(4), 10000, np.random.default_rng(8), return_stderr=True)
    assert abs(f - 2) < 3 * se


def test_frame_potential_local_product():
    f, se = frame_potential_2(LocalProduct(2), 10000, np.random.default_rng(8), return_stderr=True)
    assert abs(f - 4) < 3 * se


def test_frame_potential_quench_approaches_cue_from_above():
    # reduced sector keeps this fast; the full frame potential needs more
    # quenches than the protocol statistics do (eta ~ 16 here)
    model = BoseHubbard(5, 2)
    rng = np.random.default_rng(10)
    f = [frame_potential_2(RandomQuench(model, eta), 300, rng, return_stderr=True) for eta in (1, 4, 32)]
    assert f[0][0] > f[1][0] > f[2][0]
    assert abs(f[2][0] - 2) < 3 * f[2][1]


def test_frame_potential_needs_two_samples():
    with pytest.raises(ContractViolation):
        frame_potential_2(GlobalCue(2), 1, 0)
