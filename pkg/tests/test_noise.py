import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otoclab.errors import ContractViolation
from otoclab.hilbert import SX, SZ, SpinChain, embed_local, spin_operator, spin_product_state
from otoclab.models import KickedIsing
from otoclab.noise import (
    NoiseModel,
    _KickedGenerator,
    apply_depolarization,
    apply_readout_error,
    decoherence_study,
    dense_generator,
    fit_mismatch,
    lindblad_evolve,
    lindblad_heisenberg,
    mismatch_study,
    readout_scale_distribution,
)
from otoclab.protocol import ProtocolConfig, pauli_z, run_protocol


def random_density(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------- measurement noise


def test_depolarization_example():
    np.testing.assert_allclose(apply_depolarization([1.0, 0.0], 0.5), [0.75, 0.25])
    np.testing.assert_allclose(apply_depolarization([0.2, 0.3, 0.5, 0.0], 1.0), [0.25] * 4)
    with pytest.raises(ContractViolation):
        apply_depolarization([1.0, 0.0], 1.5)


def test_depolarization_rescales_traceless_expectations():
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(8))
    z = 1 - 2 * ((np.arange(8) >> 1) & 1)
    assert apply_depolarization(p, 0.3) @ z == pytest.approx(0.7 * (p @ z))


def test_readout_examples():
    np.testing.assert_allclose(readout_scale_distribution([0.0, 1.0], 0.1), [0.1, 0.9])
    shots = np.array([1, -1, 1, 1])
    assert np.array_equal(apply_readout_error(shots, 0.0, 0), shots)
    assert np.array_equal(apply_readout_error(shots, 0.5, 0) ** 2, np.ones(4, dtype=int))
    with pytest.raises(ContractViolation):
        apply_readout_error([0, 1], 0.1, 0)
    with pytest.raises(ContractViolation):
        apply_readout_error(shots, 0.6, 0)


def test_readout_flip_rate():
    shots = np.ones(200000, dtype=int)
    out = apply_readout_error(shots, 0.1, np.random.default_rng(1))
    # <W> is scaled by 1 - 2x
    assert abs(out.mean() - 0.8) < 4 * np.sqrt(0.36 / shots.size)


def test_noise_model_validation():
    for kw in ({"p": -0.1}, {"p": 1.1}, {"x": 0.7}, {"theta": -1}, {"gamma": -0.5}):
        with pytest.raises(ContractViolation):
            NoiseModel(**kw)
    assert NoiseModel().is_trivial and not NoiseModel(x=0.1).is_trivial


def _kicked_cfg(noise, variant, n=0):
    m = KickedIsing(4)
    return ProtocolConfig(
        variant=variant,
        n=n,
        model=m,
        W=pauli_z(4, 2),
        V=embed_local(SpinChain(4), 0, SZ),
        k0=spin_product_state(4, [0] * 4),
        times=[k * m.T for k in range(6)],
        N_u=50,
        noise=noise,
        master_seed=11,
    )


@pytest.mark.parametrize("variant,n", [("global", 0), ("local", 1), ("local", 3)])
@pytest.mark.parametrize("noise", [NoiseModel(p=0.1), NoiseModel(p=0.3), NoiseModel(x=0.05), NoiseModel(x=0.1)])
def test_infinite_shot_invariance(noise, variant, n):
    clean = run_protocol(_kicked_cfg(NoiseModel(), variant, n))
    noisy = run_protocol(_kicked_cfg(noise, variant, n))
    assert np.max(np.abs(clean.estimate - noisy.estimate)) < 1e-10


# ------------------------------------------------------------------ mismatch


def test_fit_mismatch_recovers_quadratic():
    thetas = np.array([0.0, 0.05, 0.1, 0.15, 0.2])
    d = 0.8 * thetas**2
    a, b, sa, sb = fit_mismatch(thetas, d, np.where(thetas > 0, 1e-3, 0.0))
    assert a == pytest.approx(0.0, abs=1e-10) and b == pytest.approx(0.8)
    assert sa > 0 and sb > 0


def test_mismatch_zero_angle_exact():
    est, sig = mismatch_study(2, [0.0, 0.2], 100, master_seed=3)
    assert est[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(est[1] - 1) < 0.2**2 * 2 * 4 + 4 * sig[1]


# ------------------------------------------------------------------ Lindblad


def test_single_qubit_decay():
    m = KickedIsing(1, J=0.0, h_x=0.0, h_z=0.0, T=1.0)
    gamma = 0.3
    times = [0.0, 0.5, 1.0, 2.0, 3.7]
    rho = lindblad_evolve(np.diag([1.0, 0.0]), m, gamma, times)
    z = np.real(np.einsum("ij,tji->t", SZ, rho))
    np.testing.assert_allclose(z, 2 * np.exp(-gamma * np.array(times)) - 1, atol=1e-7)


def test_trace_and_hermiticity_preserved():
    m = KickedIsing(3)
    rho0 = random_density(8, np.random.default_rng(0))
    rho = lindblad_evolve(rho0, m, 0.05, [k * m.T for k in range(5)])
    assert np.max(np.abs(np.einsum("tii->t", rho) - 1)) < 1e-7
    assert np.max(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2)))) < 1e-10
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-8


def test_gamma_zero_matches_floquet():
    m = KickedIsing(3)
    rho0 = random_density(8, np.random.default_rng(1))
    rho = lindblad_evolve(rho0, m, 0.0, [3 * m.T])[0]
    F = np.linalg.matrix_power(m.floquet, 3)
    np.testing.assert_allclose(rho, F @ rho0 @ F.conj().T, atol=1e-7)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.floats(0.0, 2.0), st.floats(0.0, 0.5), st.integers(0, 2**32 - 1))
def test_structured_generator_matches_dense(N, h_x, gamma, seed):
    rng = np.random.default_rng(seed)
    diag = rng.standard_normal(2**N)
    H = np.diag(diag).astype(complex) + h_x * sum(spin_operator(N, {i: SX}) for i in range(N))
    A = rng.standard_normal((2**N, 2**N)) + 1j * rng.standard_normal((2**N, 2**N))
    for adjoint in (False, True):
        fast = _KickedGenerator(N, diag, h_x, gamma, adjoint)(A)
        ref = dense_generator(H, gamma, N, adjoint)(A)
        np.testing.assert_allclose(fast, ref, atol=1e-10)


def test_heisenberg_matches_schrodinger():
    m = KickedIsing(3)
    gamma = 0.08
    W = spin_operator(3, {1: SZ})
    rho0 = random_density(8, np.random.default_rng(2))
    periods = [0, 1, 4]
    rho = lindblad_evolve(rho0, m, gamma, [k * m.T for k in periods])
    WH = lindblad_heisenberg(W, m, gamma, periods)
    for k in range(len(periods)):
        assert np.trace(W @ rho[k]) == pytest.approx(np.trace(WH[k] @ rho0), abs=1e-7)


def test_lindblad_rejections():
    with pytest.raises(ContractViolation):
        lindblad_evolve(np.eye(2) / 2, KickedIsing(1), -0.1, [1.6])
    with pytest.raises(ContractViolation):
        lindblad_evolve(np.eye(2) / 2, object(), 0.1, [1.0])
    with pytest.raises(ContractViolation):
        lindblad_heisenberg(SZ, KickedIsing(1), 0.1, [-1])


def test_decoherence_study_gamma_zero_matches_protocol():
    # with gamma = 0 the Heisenberg backend reproduces the unitary local protocol
    m = KickedIsing(4)
    res = decoherence_study(m, 2, [0.0], [0, 2, 5], 30, master_seed=4, n=1)
    cfg = ProtocolConfig(
        variant="local",
        n=1,
        model=m,
        W=pauli_z(4, 2),
        V=embed_local(SpinChain(4), 0, SZ),
        k0=spin_product_state(4, [0] * 4),
        times=[k * m.T for k in (0, 2, 5)],
        N_u=30,
        master_seed=4,
    )
    s = run_protocol(cfg)
    np.testing.assert_allclose(res[0.0][0], s.estimate, atol=1e-6)
