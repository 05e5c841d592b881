"""Random unitaries: CUE, local products, mismatched local factors, random quenches.

Reproducibility is organised around :class:`RngStream`. A stream is the pair
``(master_seed, stream_id)``; every generator handed out by a stream is a
counter-based Philox generator keyed by the seed sequence
``SeedSequence(master_seed, spawn_key=(stream_id, *purpose))``, so results do
not depend on which worker consumed which realization, or in what order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import ContractViolation
from .hilbert import SY, SZ, ID2, DenseOperator, ProductState


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def generator(self, *purpose: int) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id), *map(int, purpose)))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.master_seed, stream_id)


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def ginibre(d: int, rng: RngLike, cols: int | None = None) -> np.ndarray:
    rng = as_generator(rng)
    shape = (d, d if cols is None else cols)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_cue(d: int, rng: RngLike) -> np.ndarray:
    """Haar-random ``d x d`` unitary (QR of a Ginibre matrix with the R-phase fix)."""
    if d < 1:
        raise ContractViolation(f"dimension must be >= 1, got {d}")
    q, r = np.linalg.qr(ginibre(d, rng))
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_haar_state(d: int, rng: RngLike) -> np.ndarray:
    """Haar-random unit vector; distributed like any fixed column of a CUE(d) matrix."""
    rng = as_generator(rng)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def sample_local_product(N: int, rng: RngLike) -> np.ndarray:
    """``N`` independent CUE(2) factors as an ``(N, 2, 2)`` array."""
    if N < 1:
        raise ContractViolation(f"N must be >= 1, got {N}")
    rng = as_generator(rng)
    return np.stack([sample_cue(2, rng) for _ in range(N)])


def rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i angle axis / 2)`` for a Pauli ``axis``."""
    return np.cos(angle / 2) * ID2 - 1j * np.sin(angle / 2) * axis


def perturb_local_unitary(u: np.ndarray, theta: float, rng: RngLike) -> np.ndarray:
    """``R_z(a) R_y(b) R_z(c) u`` with ``a, b, c`` uniform in ``[-theta, theta]``."""
    if theta < 0:
        raise ContractViolation(f"theta must be >= 0, got {theta}")
    if theta == 0:
        return np.array(u, dtype=complex)
    a, b, c = as_generator(rng).uniform(-theta, theta, size=3)
    return rotation(SZ, a) @ rotation(SY, b) @ rotation(SZ, c) @ u


def perturb_local_product(us: np.ndarray, theta: float, rng: RngLike) -> np.ndarray:
    rng = as_generator(rng)
    return np.stack([perturb_local_unitary(u, theta, rng) for u in us])


def _quench_disorder(model, eta: int, width: float, rng: RngLike) -> np.ndarray:
    if eta < 0:
        raise ContractViolation(f"eta must be >= 0, got {eta}")
    return as_generator(rng).uniform(-width / 2, width / 2, size=(eta, model.M))


def random_quench_unitary(model, eta: int, T: float, width: float, rng: RngLike) -> DenseOperator:
    """Product of ``eta`` quenches ``exp(-i T [H_BH + sum_j Delta_j n_j])``.

    Each ``Delta_j`` is redrawn per quench, uniform on an interval of total
    ``width`` centred at zero. ``eta = 0`` gives the identity.
    """
    from .models import bose_hubbard_parts

    if T <= 0:
        raise ContractViolation(f"quench time must be positive, got {T}")
    spec = model.basis
    disorder = _quench_disorder(model, eta, width, rng)
    h0, occ = bose_hubbard_parts(model)
    u = np.eye(spec.dim, dtype=complex)
    for delta in disorder:
        h = h0 + np.diag(occ @ delta)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * T * w)) @ v.conj().T @ u
    return DenseOperator(spec, u)


def random_quench_state(model, k0: ProductState, eta: int, T: float, width: float, rng: RngLike) -> np.ndarray:
    """``u |k0>`` for the quench unitary drawn from the same randomness as :func:`random_quench_unitary`.

    Only the state is propagated (sparse Krylov action of each quench exponential).
    """
    from .models import bose_hubbard_parts

    if T <= 0:
        raise ContractViolation(f"quench time must be positive, got {T}")
    disorder = _quench_disorder(model, eta, width, rng)
    h0, occ = bose_hubbard_parts(model)
    h0 = sp.csr_matrix(h0)
    psi = k0.vector()
    for delta in disorder:
        h = h0 + sp.diags(occ @ delta)
        psi = expm_multiply(-1j * T * h, psi)
    return psi


@dataclass(frozen=True)
class GlobalCue:
    dim: int

    def sample(self, rng: RngLike) -> np.ndarray:
        return sample_cue(self.dim, rng)


@dataclass(frozen=True)
class LocalProduct:
    N: int

    def sample(self, rng: RngLike) -> np.ndarray:
        from .hilbert import kron_sites

        return kron_sites(sample_local_product(self.N, rng))


@dataclass(frozen=True, eq=False)
class RandomQuench:
    model: object
    eta: int
    T: float = 1.0
    width: float = 2.0

    def sample(self, rng: RngLike) -> np.ndarray:
        return random_quench_unitary(self.model, self.eta, self.T, self.width, rng).mat


@dataclass(frozen=True, eq=False)
class FixedUnitary:
    u: np.ndarray

    def sample(self, rng: RngLike) -> np.ndarray:
        return np.asarray(self.u)


UnitarySource = Union[GlobalCue, LocalProduct, RandomQuench, FixedUnitary]


def frame_potential_terms(source, samples: int, rng: RngLike) -> np.ndarray:
    """``|Tr(u^dagger v)|^4`` for ``samples`` independent pairs ``(u, v)``."""
    if samples < 1:
        raise ContractViolation("need at least one pair")
    rng = as_generator(rng)
    out = np.empty(samples)
    for k in range(samples):
        u = source.sample(rng)
        v = source.sample(rng)
        out[k] = abs(np.vdot(u, v)) ** 4
    return out


def frame_potential_2(source, samples: int, rng: RngLike, return_stderr: bool = False):
    """Monte Carlo estimate of the second frame potential; equals 2 for the CUE (d >= 2)."""
    if samples < 2:
        raise ContractViolation(f"samples must be >= 2, got {samples}")
    terms = frame_potential_terms(source, samples, rng)
    value = float(terms.mean())
    if return_stderr:
        return value, float(terms.std(ddof=1) / np.sqrt(samples))
    return value
