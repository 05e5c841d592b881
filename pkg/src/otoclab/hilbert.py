"""Basis bookkeeping, state vectors and dense operators.

Two kinds of Hilbert space are supported:

* ``SpinChain(N)``: N spin-1/2 sites, dimension ``2**N``. Basis states are
  little-endian bitstrings: site 0 is the least significant bit, bit value 0
  is spin up (sigma^z = +1) and 1 is spin down.
* ``BosonSector(M, Nb)``: M bosonic modes holding exactly Nb particles,
  dimension ``C(Nb + M - 1, Nb)``. Basis states are occupation vectors in
  ascending lexicographic order.

All site indices in this package are 0-based.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, reduce
from math import comb
from typing import Sequence, Union

import numpy as np

from .errors import CapacityError, ContractViolation, UnsupportedOperatorError

MAX_DIM = 2**14
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10

ID2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma^+ = |up><down| raises sigma^z; sigma^- = |down><up|
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = (ID2, SX, SY, SZ)

UP, DOWN = 0, 1


@dataclass(frozen=True)
class SpinChain:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ContractViolation(f"SpinChain needs N >= 1, got {self.N}")

    @property
    def dim(self) -> int:
        return 2**self.N

    @property
    def n_sites(self) -> int:
        return self.N

    @property
    def local_dim(self) -> int:
        return 2


@dataclass(frozen=True)
class BosonSector:
    M: int
    Nb: int

    def __post_init__(self):
        if self.M < 1 or self.Nb < 0:
            raise ContractViolation(f"BosonSector needs M >= 1 and Nb >= 0, got M={self.M}, Nb={self.Nb}")

    @property
    def dim(self) -> int:
        return comb(self.Nb + self.M - 1, self.Nb)

    @property
    def n_sites(self) -> int:
        return self.M

    @property
    def local_dim(self) -> int:
        return self.Nb + 1


BasisSpec = Union[SpinChain, BosonSector]


def check_capacity(spec: BasisSpec, max_dim: int = MAX_DIM) -> None:
    if spec.dim > max_dim:
        raise CapacityError(f"dimension {spec.dim} of {spec} exceeds cap {max_dim}")


@lru_cache(maxsize=32)
def boson_configurations(M: int, Nb: int) -> np.ndarray:
    """Occupation vectors of the (M, Nb) sector as a ``(dim, M)`` int array, lexicographic."""
    rows = []

    def rec(prefix, left, sites_left):
        if sites_left == 1:
            rows.append(prefix + (left,))
            return
        for k in range(left + 1):
            rec(prefix + (k,), left - k, sites_left - 1)

    rec((), Nb, M)
    out = np.array(rows, dtype=np.int64).reshape(-1, M)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _boson_index(M: int, Nb: int) -> dict:
    return {tuple(int(x) for x in row): i for i, row in enumerate(boson_configurations(M, Nb))}


def spin_bits(N: int) -> np.ndarray:
    """``(2**N, N)`` array; entry ``[k, s]`` is the bit of site ``s`` in basis state ``k``."""
    k = np.arange(2**N)[:, None]
    return (k >> np.arange(N)[None, :]) & 1


@dataclass(frozen=True)
class ProductState:
    """A computational-basis product state; ``labels[s]`` is the local label of site ``s``."""

    basis: BasisSpec
    labels: tuple

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != self.basis.n_sites:
            raise ContractViolation(f"expected {self.basis.n_sites} labels, got {len(labels)}")
        if isinstance(self.basis, SpinChain):
            if any(x not in (UP, DOWN) for x in labels):
                raise ContractViolation(f"spin labels must be 0 (up) or 1 (down): {labels}")
        else:
            if any(x < 0 for x in labels) or sum(labels) != self.basis.Nb:
                raise ContractViolation(f"occupations {labels} do not sum to Nb={self.basis.Nb}")

    @property
    def index(self) -> int:
        if isinstance(self.basis, SpinChain):
            return sum(b << s for s, b in enumerate(self.labels))
        return _boson_index(self.basis.M, self.basis.Nb)[self.labels]

    @classmethod
    def from_index(cls, basis: BasisSpec, index: int) -> "ProductState":
        if not 0 <= index < basis.dim:
            raise ContractViolation(f"index {index} out of range for {basis}")
        if isinstance(basis, SpinChain):
            return cls(basis, tuple((index >> s) & 1 for s in range(basis.N)))
        return cls(basis, tuple(boson_configurations(basis.M, basis.Nb)[index]))

    def flipped(self, sites: Sequence[int]) -> "ProductState":
        """Spin state with the given sites flipped (the action of prod sigma^x)."""
        if not isinstance(self.basis, SpinChain):
            raise UnsupportedOperatorError("spin flips are defined for spin chains only")
        labels = list(self.labels)
        for s in sites:
            labels[s] ^= 1
        return ProductState(self.basis, tuple(labels))

    def vector(self) -> np.ndarray:
        v = np.zeros(self.basis.dim, dtype=complex)
        v[self.index] = 1.0
        return v

    def __str__(self):
        if isinstance(self.basis, SpinChain):
            # most significant site first, like the binary index
            return "".join("↑↓"[b] for b in reversed(self.labels))
        return "|" + "".join(str(n) for n in self.labels) + ">"


def enumerate_basis(spec: BasisSpec, max_dim: int = MAX_DIM) -> list[ProductState]:
    """All basis states of ``spec`` in index order."""
    check_capacity(spec, max_dim)
    return [ProductState.from_index(spec, k) for k in range(spec.dim)]


def spin_product_state(N: int, labels: Sequence[int]) -> ProductState:
    return ProductState(SpinChain(N), tuple(labels))


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: BasisSpec
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ContractViolation(f"amplitude shape {amps.shape} does not match dim {self.basis.dim}")
        object.__setattr__(self, "amps", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def apply(self, op) -> "StateVector":
        return StateVector(self.basis, as_matrix(op) @ self.amps)

    @classmethod
    def from_product(cls, state: ProductState) -> "StateVector":
        return cls(state.basis, state.vector())


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Square complex matrix acting on ``basis``."""

    basis: BasisSpec
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        d = self.basis.dim
        if mat.shape != (d, d):
            raise ContractViolation(f"operator shape {mat.shape} does not match dim {d}")
        object.__setattr__(self, "mat", mat)

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            return DenseOperator(self.basis, self.mat @ other.mat)
        if isinstance(other, StateVector):
            return other.apply(self)
        return self.mat @ other

    @property
    def dag(self) -> "DenseOperator":
        return DenseOperator(self.basis, self.mat.conj().T)

    @property
    def is_hermitian(self) -> bool:
        return is_hermitian(self.mat)

    @property
    def is_unitary(self) -> bool:
        return is_unitary(self.mat)

    @property
    def is_traceless(self) -> bool:
        return abs(np.trace(self.mat)) < HERMITIAN_TOL * self.basis.dim

    @property
    def is_diagonal(self) -> bool:
        off = self.mat - np.diag(np.diag(self.mat))
        return bool(np.max(np.abs(off), initial=0.0) < HERMITIAN_TOL)

    @property
    def flags(self) -> dict:
        return {
            "hermitian": self.is_hermitian,
            "unitary": self.is_unitary,
            "traceless": self.is_traceless,
            "diagonal_in_basis": self.is_diagonal,
        }


def as_matrix(op) -> np.ndarray:
    if isinstance(op, DenseOperator):
        return op.mat
    return np.asarray(op)


def is_hermitian(mat, tol: float = HERMITIAN_TOL) -> bool:
    mat = as_matrix(mat)
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) < tol)


def is_unitary(mat, tol: float = UNITARY_TOL) -> bool:
    mat = as_matrix(mat)
    return bool(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])), initial=0.0) < tol)


def kron_sites(ops_by_site: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of per-site factors given in site order 0..N-1."""
    return reduce(np.kron, list(ops_by_site)[::-1])


def spin_operator(N: int, local_ops: dict) -> np.ndarray:
    """Product operator with ``local_ops[site]`` on the listed sites and identity elsewhere."""
    return kron_sites([local_ops.get(s, ID2) for s in range(N)])


def embed_local(spec: BasisSpec, site: int, local_op) -> DenseOperator:
    """Lift a single-site operator to the full space of ``spec``.

    For a boson sector only number-conserving (diagonal in occupation) local
    operators can act inside the sector.
    """
    local_op = np.asarray(local_op, dtype=complex)
    if not 0 <= site < spec.n_sites:
        raise ContractViolation(f"site {site} out of range for {spec}")
    check_capacity(spec)
    if isinstance(spec, SpinChain):
        if local_op.shape != (2, 2):
            raise ContractViolation(f"spin local operator must be 2x2, got {local_op.shape}")
        return DenseOperator(spec, spin_operator(spec.N, {site: local_op}))
    d = spec.local_dim
    if local_op.shape != (d, d):
        raise ContractViolation(f"boson local operator must be {d}x{d} for Nb={spec.Nb}, got {local_op.shape}")
    if np.max(np.abs(local_op - np.diag(np.diag(local_op))), initial=0.0) > HERMITIAN_TOL:
        raise UnsupportedOperatorError("local boson operator changes particle number; it cannot act within a sector")
    occ = boson_configurations(spec.M, spec.Nb)[:, site]
    return DenseOperator(spec, np.diag(np.diag(local_op)[occ]))


def number_operator(spec: BosonSector, site: int) -> DenseOperator:
    return embed_local(spec, site, np.diag(np.arange(spec.Nb + 1)).astype(complex))


def boson_hopping(spec: BosonSector, i: int, j: int) -> np.ndarray:
    """Matrix of a_i^dagger a_j within the sector (i != j)."""
    configs = boson_configurations(spec.M, spec.Nb)
    index = _boson_index(spec.M, spec.Nb)
    out = np.zeros((spec.dim, spec.dim), dtype=complex)
    for k, occ in enumerate(configs):
        if occ[j] == 0:
            continue
        new = occ.copy()
        amp = np.sqrt(new[j])
        new[j] -= 1
        amp *= np.sqrt(new[i] + 1)
        new[i] += 1
        out[index[tuple(int(x) for x in new)], k] = amp
    return out


def partial_trace(op, keep: Sequence[int], n_sites: int | None = None) -> DenseOperator:
    """Trace out every spin not in ``keep``; returns ``Tr_{S-A}(op)`` on ``SpinChain(|A|)``.

    The kept sites are relabelled 0..|A|-1 in ascending order.
    """
    if isinstance(op, DenseOperator):
        if not isinstance(op.basis, SpinChain):
            raise UnsupportedOperatorError("partial traces are implemented for spin chains only")
        N = op.basis.N
    else:
        if n_sites is None:
            raise ContractViolation("n_sites is required for a bare matrix")
        N = n_sites
    mat = as_matrix(op)
    keep = sorted(set(int(s) for s in keep))
    if not keep or keep[0] < 0 or keep[-1] >= N:
        raise ContractViolation(f"keep={keep} must be a nonempty subset of range({N})")
    return DenseOperator(SpinChain(len(keep)), partial_trace_matrix(mat, keep, N))


def partial_trace_matrix(mat: np.ndarray, keep: Sequence[int], N: int) -> np.ndarray:
    # tensor axis a <-> site N-1-a, ket axes first
    tensor = mat.reshape((2,) * (2 * N))
    ket = list(range(N))
    bra = list(range(N, 2 * N))
    for s in range(N):
        if s not in keep:
            bra[N - 1 - s] = ket[N - 1 - s]
    kept_desc = sorted(keep, reverse=True)
    out = [ket[N - 1 - s] for s in kept_desc] + [bra[N - 1 - s] for s in kept_desc]
    k = len(keep)
    return np.einsum(tensor, ket + bra, out).reshape(2**k, 2**k)


def expectation(state, op) -> float:
    """``<psi|op|psi>`` for Hermitian ``op``."""
    mat = as_matrix(op)
    if not is_hermitian(mat):
        raise ContractViolation("expectation requires a Hermitian operator")
    if isinstance(state, StateVector):
        if isinstance(op, DenseOperator) and op.basis != state.basis:
            raise ContractViolation("state and operator live on different bases")
        amps = state.amps
    else:
        amps = np.asarray(state)
    return float(np.real(np.vdot(amps, mat @ amps)))


def apply_site_op(psi: np.ndarray, op: np.ndarray, site: int, N: int) -> np.ndarray:
    """Apply a 2x2 operator to one site of a spin-chain vector (or a stack, last axis = basis)."""
    lead = psi.shape[:-1]
    t = psi.reshape(lead + (2 ** (N - site - 1), 2, 2**site))
    t = np.einsum("ab,...xby->...xay", op, t)
    return t.reshape(lead + (2**N,))


def apply_block(psi: np.ndarray, block: np.ndarray, start: int, size: int, N: int) -> np.ndarray:
    """Apply a ``2**size`` unitary on the contiguous sites ``start..start+size-1``."""
    lead = psi.shape[:-1]
    t = psi.reshape(lead + (2 ** (N - start - size), 2**size, 2**start))
    t = np.einsum("ab,...xby->...xay", block, t)
    return t.reshape(lead + (2**N,))


def product_vector(local_vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of per-site state vectors in site order 0..N-1."""
    return reduce(np.kron, list(local_vectors)[::-1])


def all_subsets_containing(N: int, required: Sequence[int]):
    """Nonempty subsets of ``range(N)`` that contain ``required``, in a fixed order."""
    required = set(required)
    rest = [s for s in range(N) if s not in required]
    for k in range(len(rest) + 1):
        for extra in itertools.combinations(rest, k):
            subset = tuple(sorted(required | set(extra)))
            if subset:
                yield subset
