import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from otoclab.errors import ContractViolation
from otoclab.hilbert import SX, SY, SZ, SpinChain, embed_local, is_hermitian, is_unitary, spin_operator
from otoclab.models import (
    BoseHubbard,
    DisorderedXXZ,
    HaarBlock,
    KickedIsing,
    LBit,
    LongRangeXY,
    build_hamiltonian,
    evolve_states,
    haar_block_propagator,
    heisenberg_operator,
    heisenberg_series,
    propagator,
    sample_haar_blocks,
)
from otoclab.otoc_exact import haar_block_otoc, haar_block_otoc_leading, otoc_infinite_T
from otoclab.randomness import RngStream


def pauli_sum(N, terms):
    """Independent builder: sum of c * P_i Q_j over (c, {site: op})."""
    out = np.zeros((2**N, 2**N), dtype=complex)
    for c, ops in terms:
        out += c * spin_operator(N, ops)
    return out


def _models():
    rng = np.random.default_rng(0)
    return [
        KickedIsing(4),
        DisorderedXXZ.sample(4, 1.0, 0.7, 2.0, rng),
        LongRangeXY(4, 1.0, 1.5),
        BoseHubbard(4, 2),
        LBit.sample(4, 1.0, 2.0, rng),
    ]


# -------------------------------------------------------------- hamiltonians


def test_xxz_against_pauli_construction():
    rng = np.random.default_rng(1)
    N, J, Jz = 4, 0.8, 1.3
    m = DisorderedXXZ.sample(N, J, Jz, 3.0, rng)
    terms = []
    for i in range(N - 1):
        terms += [(J / 2, {i: SX, i + 1: SX}), (J / 2, {i: SY, i + 1: SY}), (Jz, {i: SZ, i + 1: SZ})]
    terms += [(h, {i: SZ}) for i, h in enumerate(m.fields)]
    np.testing.assert_allclose(build_hamiltonian(m).mat, pauli_sum(N, terms), atol=1e-12)
    assert all(-3 <= h <= 3 for h in m.fields)


def test_xxz_disorder_reproducible():
    a = DisorderedXXZ.sample(6, 1, 1, 10, RngStream(5, 2).generator(0))
    b = DisorderedXXZ.sample(6, 1, 1, 10, RngStream(5, 2).generator(0))
    assert a.fields == b.fields


def test_long_range_two_sites():
    h = build_hamiltonian(LongRangeXY(2, 0.7, 3.3)).mat
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(h)), [-0.7, 0, 0, 0.7], atol=1e-12)


def test_long_range_against_pauli_construction():
    N, J, a = 4, 1.0, 0.5
    terms = []
    for i in range(N):
        for j in range(i + 1, N):
            c = J / (j - i) ** a / 2
            terms += [(c, {i: SX, j: SX}), (c, {i: SY, j: SY})]
    np.testing.assert_allclose(build_hamiltonian(LongRangeXY(N, J, a)).mat, pauli_sum(N, terms), atol=1e-12)


def test_lbit_anderson_limit_diagonal():
    m = LBit.sample(4, 0.0, 2.0, np.random.default_rng(3))
    expected = pauli_sum(4, [(h, {i: SZ}) for i, h in enumerate(m.fields)])
    np.testing.assert_allclose(build_hamiltonian(m).mat, expected, atol=1e-12)


def test_lbit_couplings_decay():
    m = LBit.sample(5, 1.0, 2.0, np.random.default_rng(4))
    c = m.couplings
    for i in range(5):
        for j in range(i + 1, 5):
            assert c[i, j] == pytest.approx(m.J_R[i, j] * np.exp(-(j - i) / 2.0))
            assert abs(m.J_R[i, j]) <= 1.0
    terms = [(h, {i: SZ}) for i, h in enumerate(m.fields)]
    terms += [(c[i, j], {i: SZ, j: SZ}) for i in range(5) for j in range(i + 1, 5)]
    np.testing.assert_allclose(build_hamiltonian(m).mat, pauli_sum(5, terms), atol=1e-12)


def test_lbit_stratified_marginals():
    ens = LBit.sample_ensemble(1000, 3, 1.0, 2.0, np.random.default_rng(0), stratified=True)
    amps = np.sort([m.J_R[0, 1] for m in ens])
    # one draw per stratum of width 2/1000
    edges = -1 + 2 * np.arange(1000) / 1000
    assert np.all(amps >= edges) and np.all(amps <= edges + 2 / 1000)


def test_bose_hubbard_two_sites_by_hand():
    J, U = 0.6, 2.0
    h = build_hamiltonian(BoseHubbard(2, 2, J, U)).mat
    # basis (0,2), (1,1), (2,0)
    s2 = np.sqrt(2)
    expected = np.array([[U, -J * s2, 0], [-J * s2, 0, -J * s2], [0, -J * s2, U]])
    np.testing.assert_allclose(h, expected, atol=1e-12)


def test_bose_hubbard_half_filled_sector():
    m = BoseHubbard(8, 4, 1.0, 2.0)
    h = build_hamiltonian(m).mat
    assert h.shape == (330, 330) and is_hermitian(h)
    occ = m.parts[1]
    assert np.trace(h).real == pytest.approx(np.sum(0.5 * 2.0 * occ * (occ - 1)))


def test_kicked_needs_integer_periods():
    m = KickedIsing(3)
    with pytest.raises(ContractViolation):
        propagator(m, 0.5 * m.T)
    with pytest.raises(ContractViolation):
        build_hamiltonian(m)


def test_kicked_floquet_against_expm():
    m = KickedIsing(3, 1.0, 0.9, 0.809, 1.6)
    kick, ising = m.half_period_hamiltonians()
    expected = (expm(-1j * m.T / 2 * ising) @ expm(-1j * m.T / 2 * kick))
    np.testing.assert_allclose(m.floquet, expected, atol=1e-12)
    terms = [(1.0, {i: SZ, i + 1: SZ}) for i in range(2)] + [(0.809, {i: SZ}) for i in range(3)]
    np.testing.assert_allclose(ising, pauli_sum(3, terms), atol=1e-12)


# --------------------------------------------------------------- propagation


@pytest.mark.parametrize("model", _models(), ids=lambda m: type(m).__name__)
def test_propagator_identity_and_unitarity(model):
    d = model.basis.dim
    np.testing.assert_allclose(propagator(model, 0.0).mat, np.eye(d), atol=1e-12)
    t = 35.2 if not isinstance(model, KickedIsing) else 22 * model.T
    assert is_unitary(propagator(model, t).mat)


@pytest.mark.parametrize("model", _models()[1:], ids=lambda m: type(m).__name__)
def test_group_property(model):
    u1, u2, u12 = propagator(model, 0.7).mat, propagator(model, 1.9).mat, propagator(model, 2.6).mat
    assert np.max(np.abs(u12 - u1 @ u2)) < 1e-9


@pytest.mark.parametrize("model", _models()[1:], ids=lambda m: type(m).__name__)
def test_energy_conservation(model):
    rng = np.random.default_rng(2)
    psi = rng.standard_normal(model.basis.dim) + 1j * rng.standard_normal(model.basis.dim)
    psi /= np.linalg.norm(psi)
    H = build_hamiltonian(model).mat
    times = np.linspace(0, 10, 11)
    states = evolve_states(model, psi[None, :], times)[:, 0]
    energies = [np.vdot(s, H @ s).real for s in states]
    assert np.ptp(energies) < 1e-8


def test_evolve_states_matches_propagator():
    for model in _models():
        T = model.T if isinstance(model, KickedIsing) else 0.37
        times = [3 * T, 0.0, T]
        psi = np.random.default_rng(1).standard_normal((2, model.basis.dim)).astype(complex)
        out = evolve_states(model, psi, times)
        for k, t in enumerate(times):
            np.testing.assert_allclose(out[k], psi @ propagator(model, t).mat.T, atol=1e-10)


def test_heisenberg_properties():
    model = KickedIsing(4)
    W = embed_local(SpinChain(4), 2, SZ).mat
    np.testing.assert_allclose(heisenberg_operator(model, W, 0.0).mat, W)
    for W_t in heisenberg_series(model, W, [model.T * m for m in range(6)]):
        assert abs(np.trace(W_t)) < 1e-9
        assert abs(np.trace(W_t @ W_t) - np.trace(W @ W)) < 1e-8
        assert is_hermitian(W_t)


def test_heisenberg_series_matches_operator():
    model = _models()[1]
    W = embed_local(SpinChain(4), 1, SX).mat
    times = [0.0, 0.5, 3.0]
    for t, W_t in zip(times, heisenberg_series(model, W, times)):
        np.testing.assert_allclose(W_t, heisenberg_operator(model, W, t).mat, atol=1e-10)


# ------------------------------------------------------------------ Haar block


def test_haar_block_sizes():
    m = HaarBlock(8, 1.0)
    assert m.block_sizes(0.0) == [1] * 8
    assert HaarBlock(8, 1.5).block_sizes(1.0) == [2, 2, 2, 2]
    assert m.block_sizes(2.0) == [3, 3, 2]
    assert m.block_of(6, 2.0) == (6, 2)
    assert m.block_length(100.0) == 8


def test_haar_block_propagator_structure():
    m = HaarBlock(4, 1.0)
    rng = RngStream(3, 0)
    u = haar_block_propagator(m, 1.0, rng.generator(0)).mat
    blocks = sample_haar_blocks(m, 1.0, rng.generator(0))
    np.testing.assert_allclose(u, np.kron(blocks[1][2], blocks[0][2]), atol=1e-12)
    assert is_unitary(u)


@pytest.mark.parametrize("L", [2, 3])
def test_haar_block_average_otoc(L):
    N = 4
    m = HaarBlock(N, 1.0)
    W = embed_local(SpinChain(N), 1, SZ).mat
    V = embed_local(SpinChain(N), 0, SZ).mat
    rng = np.random.default_rng(L)
    vals = []
    for _ in range(1000):
        u = haar_block_propagator(m, L - 1, rng).mat
        vals.append(otoc_infinite_T(u.conj().T @ W @ u, V))
    vals = np.array(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - haar_block_otoc(L)) < 3 * se
    # leading order -1/4^L is within the same statistical resolution here
    assert abs(vals.mean() - haar_block_otoc_leading(L)) < 3 * se + abs(haar_block_otoc(L) - haar_block_otoc_leading(L))


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.floats(0, 10))
def test_haar_block_covering(N, t):
    sizes = HaarBlock(N, 1.0).block_sizes(t)
    assert sum(sizes) == N and all(s == sizes[0] for s in sizes[:-1])
