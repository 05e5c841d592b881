"""Evolution models and exact time evolution.

Static models (XXZ, long-range XY, Bose-Hubbard, l-bit) are propagated through
a dense Hermitian eigendecomposition cached on the model instance. The kicked
Ising chain is propagated by powers of its one-period Floquet operator. The
Haar-block scrambling model draws a fresh block-diagonal CUE unitary per call.
Open boundary conditions throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import floor
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ContractViolation
from .hilbert import (
    SM,
    SP,
    SX,
    BosonSector,
    DenseOperator,
    SpinChain,
    apply_block,
    as_matrix,
    boson_configurations,
    boson_hopping,
    check_capacity,
    kron_sites,
    spin_bits,
    spin_operator,
)
from .randomness import RngLike, as_generator, sample_cue

PERIOD_TOL = 1e-9


def _zz_diagonal(N: int, couplings: dict) -> np.ndarray:
    """Diagonal of ``sum_{(i,j)} c_ij sigma^z_i sigma^z_j`` in the computational basis."""
    z = 1 - 2 * spin_bits(N)
    out = np.zeros(2**N)
    for (i, j), c in couplings.items():
        out += c * z[:, i] * z[:, j]
    return out


def _z_diagonal(N: int, fields: Sequence[float]) -> np.ndarray:
    z = 1 - 2 * spin_bits(N)
    return z @ np.asarray(fields, dtype=float)


def _flip_flop(N: int, i: int, j: int) -> np.ndarray:
    a = spin_operator(N, {i: SP, j: SM})
    return a + a.conj().T


class _StaticModel:
    """Shared propagation for time-independent Hamiltonians."""

    @cached_property
    def _spectrum(self):
        h = self.hamiltonian_matrix()
        w, v = np.linalg.eigh(h)
        return w, v

    def hamiltonian_matrix(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class KickedIsing:
    N: int
    J: float = 1.0
    h_x: float = 1.0
    h_z: float = 0.809
    T: float = 1.6

    @property
    def basis(self) -> SpinChain:
        return SpinChain(self.N)

    def ising_diagonal(self) -> np.ndarray:
        bonds = {(i, i + 1): self.J for i in range(self.N - 1)}
        return _zz_diagonal(self.N, bonds) + _z_diagonal(self.N, [self.h_z] * self.N)

    def half_period_hamiltonians(self) -> tuple[np.ndarray, np.ndarray]:
        """``(H_kick, H_ising)``: transverse field on the first half-period, Ising + longitudinal on the second."""
        kick = sum(spin_operator(self.N, {i: SX}) for i in range(self.N)) * self.h_x
        return kick, np.diag(self.ising_diagonal()).astype(complex)

    @cached_property
    def floquet(self) -> np.ndarray:
        half = self.T / 2
        kick1 = np.cos(half * self.h_x) * np.eye(2) - 1j * np.sin(half * self.h_x) * SX
        kick = kron_sites([kick1] * self.N)
        return np.exp(-1j * half * self.ising_diagonal())[:, None] * kick

    def periods(self, t: float) -> int:
        m = t / self.T
        if abs(m - round(m)) > PERIOD_TOL or m < -PERIOD_TOL:
            raise ContractViolation(f"kicked Ising time {t} is not a non-negative multiple of T={self.T}")
        return int(round(m))


@dataclass(frozen=True, eq=False)
class DisorderedXXZ(_StaticModel):
    N: int
    J: float
    J_z: float
    fields: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        if len(self.fields) != self.N:
            raise ContractViolation("need one field per site")

    @classmethod
    def sample(cls, N: int, J: float, J_z: float, disorder: float, rng: RngLike) -> "DisorderedXXZ":
        """Fields uniform in ``[-disorder, disorder]``."""
        fields = as_generator(rng).uniform(-disorder, disorder, size=N)
        return cls(N, J, J_z, tuple(fields))

    @property
    def basis(self) -> SpinChain:
        return SpinChain(self.N)

    def hamiltonian_matrix(self) -> np.ndarray:
        N = self.N
        h = np.zeros((2**N, 2**N), dtype=complex)
        for i in range(N - 1):
            h += self.J * _flip_flop(N, i, i + 1)
        diag = _zz_diagonal(N, {(i, i + 1): self.J_z for i in range(N - 1)}) + _z_diagonal(N, self.fields)
        return h + np.diag(diag)


@dataclass(frozen=True, eq=False)
class LongRangeXY(_StaticModel):
    N: int
    J: float = 1.0
    alpha: float = 1.5

    @property
    def basis(self) -> SpinChain:
        return SpinChain(self.N)

    def hamiltonian_matrix(self) -> np.ndarray:
        N = self.N
        h = np.zeros((2**N, 2**N), dtype=complex)
        for i in range(N):
            for j in range(i + 1, N):
                h += self.J / (j - i) ** self.alpha * _flip_flop(N, i, j)
        return h


@dataclass(frozen=True, eq=False)
class BoseHubbard(_StaticModel):
    M: int
    Nb: int
    J: float = 1.0
    U_int: float = 2.0

    @property
    def basis(self) -> BosonSector:
        return BosonSector(self.M, self.Nb)

    @cached_property
    def parts(self):
        spec = self.basis
        check_capacity(spec)
        occ = boson_configurations(self.M, self.Nb).astype(float)
        hop = np.zeros((spec.dim, spec.dim), dtype=complex)
        for i in range(self.M - 1):
            hop += boson_hopping(spec, i + 1, i)
        h = -self.J * (hop + hop.conj().T)
        h += np.diag(0.5 * self.U_int * np.sum(occ * (occ - 1), axis=1))
        return h, occ

    def hamiltonian_matrix(self) -> np.ndarray:
        return self.parts[0]


def bose_hubbard_parts(model: BoseHubbard):
    """``(H_BH, occupations)`` with occupations as a float ``(dim, M)`` array."""
    return model.parts


@dataclass(frozen=True, eq=False)
class LBit(_StaticModel):
    """Diagonal l-bit Hamiltonian; ``J_R[i, j]`` (i < j) are the bare random amplitudes."""

    N: int
    fields: tuple
    J_R: np.ndarray
    xi: float

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        J_R = np.array(self.J_R, dtype=float)
        if J_R.shape != (self.N, self.N):
            raise ContractViolation("J_R must be N x N")
        J_R.setflags(write=False)
        object.__setattr__(self, "J_R", J_R)

    @classmethod
    def sample(cls, N: int, J_z: float, xi: float, rng: RngLike, field_width: float = 1.0) -> "LBit":
        return cls.sample_ensemble(1, N, J_z, xi, rng, field_width=field_width, stratified=False)[0]

    @classmethod
    def sample_ensemble(
        cls,
        count: int,
        N: int,
        J_z: float,
        xi: float,
        rng: RngLike,
        field_width: float = 1.0,
        stratified: bool = False,
    ) -> list["LBit"]:
        """Draw ``count`` disorder realizations.

        Every ``J_R[i, j]`` is marginally uniform in ``[-J_z, J_z]``. With
        ``stratified=True`` the draws of each pair are Latin-hypercube
        stratified across the ensemble (one draw per equal-width stratum, in
        an independent random order per pair).
        """
        rng = as_generator(rng)
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
        amps = np.zeros((count, N, N))
        for i, j in pairs:
            if stratified:
                q = (rng.permutation(count) + rng.uniform(size=count)) / count
            else:
                q = rng.uniform(size=count)
            amps[:, i, j] = J_z * (2 * q - 1)
        fields = rng.uniform(-field_width, field_width, size=(count, N))
        return [cls(N, tuple(fields[k]), amps[k], xi) for k in range(count)]

    @property
    def basis(self) -> SpinChain:
        return SpinChain(self.N)

    @property
    def couplings(self) -> np.ndarray:
        """Effective ``J_ij = J_R,ij exp(-|j - i| / xi)``, upper triangle."""
        i, j = np.triu_indices(self.N, k=1)
        out = np.zeros((self.N, self.N))
        out[i, j] = self.J_R[i, j] * np.exp(-np.abs(j - i) / self.xi)
        return out

    def hamiltonian_diagonal(self) -> np.ndarray:
        c = self.couplings
        bonds = {(i, j): c[i, j] for i in range(self.N) for j in range(i + 1, self.N)}
        return _z_diagonal(self.N, self.fields) + _zz_diagonal(self.N, bonds)

    def hamiltonian_matrix(self) -> np.ndarray:
        return np.diag(self.hamiltonian_diagonal()).astype(complex)

    @cached_property
    def _spectrum(self):
        # already diagonal; keep the computational basis order
        return self.hamiltonian_diagonal(), np.eye(2**self.N, dtype=complex)


@dataclass(frozen=True)
class HaarBlock:
    """Phenomenological scrambling: independent CUE unitaries on blocks of ``L(t) = 1 + floor(v_B t)`` sites."""

    N: int
    v_B: float = 1.0

    @property
    def basis(self) -> SpinChain:
        return SpinChain(self.N)

    def block_length(self, t: float) -> int:
        return min(self.N, 1 + floor(self.v_B * t + 1e-12))

    def block_sizes(self, t: float) -> list[int]:
        """``[L, L, ..., remainder]`` covering sites 0..N-1 left to right."""
        L = self.block_length(t)
        sizes = [L] * (self.N // L)
        if self.N % L:
            sizes.append(self.N % L)
        return sizes

    def block_of(self, site: int, t: float) -> tuple[int, int]:
        """``(start, size)`` of the block containing ``site``."""
        start = 0
        for size in self.block_sizes(t):
            if start <= site < start + size:
                return start, size
            start += size
        raise ContractViolation(f"site {site} outside chain of {self.N}")


EvolutionModel = Union[KickedIsing, DisorderedXXZ, LongRangeXY, BoseHubbard, LBit, HaarBlock]
STATIC_MODELS = (DisorderedXXZ, LongRangeXY, BoseHubbard, LBit)


def build_hamiltonian(model) -> DenseOperator:
    if not isinstance(model, STATIC_MODELS):
        raise ContractViolation(f"{type(model).__name__} has no static Hamiltonian")
    check_capacity(model.basis)
    return DenseOperator(model.basis, model.hamiltonian_matrix())


def propagator(model, t: float) -> DenseOperator:
    """``U(t)``; for the kicked Ising chain ``t`` must be a multiple of the period."""
    if isinstance(model, HaarBlock):
        raise ContractViolation("HaarBlock propagators are random; use haar_block_propagator")
    if isinstance(model, KickedIsing):
        return DenseOperator(model.basis, np.linalg.matrix_power(model.floquet, model.periods(t)))
    w, v = model._spectrum
    return DenseOperator(model.basis, (v * np.exp(-1j * w * t)) @ v.conj().T)


def sample_haar_blocks(model: HaarBlock, t: float, rng: RngLike) -> list[tuple[int, int, np.ndarray]]:
    """Fresh ``(start, size, U_block)`` triples for ``U(t)``."""
    rng = as_generator(rng)
    out, start = [], 0
    for size in model.block_sizes(t):
        out.append((start, size, sample_cue(2**size, rng)))
        start += size
    return out


def apply_haar_blocks(psi: np.ndarray, blocks, N: int) -> np.ndarray:
    for start, size, u in blocks:
        psi = apply_block(psi, u, start, size, N)
    return psi


def haar_block_propagator(model: HaarBlock, t: float, rng: RngLike) -> DenseOperator:
    blocks = sample_haar_blocks(model, t, rng)
    # site order 0..N-1 maps to kron factors from the right
    mat = np.array([[1.0 + 0j]])
    for _, _, u in blocks:
        mat = np.kron(u, mat)
    return DenseOperator(model.basis, mat)


def evolve_states(model, states: np.ndarray, times: Iterable[float]) -> np.ndarray:
    """Evolve a stack of state vectors (last axis = basis); returns ``(len(times),) + states.shape``."""
    times = list(times)
    states = np.asarray(states, dtype=complex)
    if isinstance(model, HaarBlock):
        raise ContractViolation("HaarBlock evolution is random; sample blocks per realization")
    if isinstance(model, KickedIsing):
        m = [model.periods(t) for t in times]
        order = np.argsort(m, kind="stable")
        out = np.empty((len(times),) + states.shape, dtype=complex)
        cur, cur_m = states.copy(), 0
        ft = model.floquet.T
        for idx in order:
            while cur_m < m[idx]:
                cur = cur @ ft
                cur_m += 1
            out[idx] = cur
        return out
    w, v = model._spectrum
    coeffs = states @ v.conj()
    phases = np.exp(-1j * np.outer(times, w))
    return np.einsum("tk,...k,jk->t...j", phases, coeffs, v)


def heisenberg_operator(model, W, t: float) -> DenseOperator:
    """``U(t)^dagger W U(t)``."""
    u = propagator(model, t).mat
    return DenseOperator(model.basis, u.conj().T @ as_matrix(W) @ u)


def heisenberg_series(model, W, times: Iterable[float]):
    """Yield ``W(t)`` for each time; reuses the cached spectrum or Floquet operator."""
    W = as_matrix(W)
    if isinstance(model, KickedIsing):
        for t in times:
            yield heisenberg_operator(model, W, t).mat
        return
    w, v = model._spectrum
    w_eig = v.conj().T @ W @ v
    for t in times:
        ph = np.exp(1j * w * t)
        yield v @ (ph[:, None] * w_eig * ph.conj()[None, :]) @ v.conj().T
