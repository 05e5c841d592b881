"""Randomized-measurement protocols for OTOCs.

Each realization draws a random unitary ``u`` (and, for the Haar-block model,
a fresh scrambling unitary ``U``), prepares the randomized initial states,
evolves them in two branches (plain, and with ``V`` applied after ``u``) and
measures ``W`` with ``N_M`` projective shots per state. The OTOC estimate is
the ratio of the realization-averaged cross correlations to the
realization-averaged unbiased normalization, with delete-one jackknife errors
over realizations.

Realization ``r`` owns ``RngStream(master_seed, r)``; the generators it uses
are keyed by purpose:

====  ==========================================
0     random unitary ``u``
1     shots of branch (a)
2     shots of branch (b)
3     scrambling unitaries ``U`` (Haar-block model), one per time index
4     mismatch rotations of branch (b)
====  ==========================================
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, DegenerateNormalizationError, UnsupportedOperatorError
from .hilbert import (
    HADAMARD,
    BosonSector,
    ProductState,
    SpinChain,
    apply_site_op,
    as_matrix,
    boson_configurations,
    is_hermitian,
    product_vector,
)
from .models import HaarBlock, apply_haar_blocks, build_hamiltonian, evolve_states, heisenberg_series, sample_haar_blocks
from .noise import NoiseModel, apply_depolarization, readout_scale_distribution
from .otoc_exact import haar_block_modified, haar_block_otoc, modified_otoc_all, otoc_infinite_T, thermal_otoc_first_order
from .randomness import (
    GlobalCue,
    LocalProduct,
    RandomQuench,
    RngLike,
    RngStream,
    as_generator,
    perturb_local_product,
    random_quench_state,
    sample_haar_state,
    sample_local_product,
)

DIAG_TOL = 1e-10

U_PURPOSE, SHOTS_A, SHOTS_B, SCRAMBLER, MISMATCH = range(5)


# ---------------------------------------------------------------- observables


@dataclass(frozen=True, eq=False)
class Observable:
    """A measurable ``W = R^dag diag(eigenvalues) R``.

    ``rotations`` lists ``(site, 2x2)`` single-site readout rotations applied
    before a computational-basis measurement (spin chains only).
    """

    basis: object
    eigenvalues: np.ndarray
    rotations: tuple = ()
    label: str = "W"
    site: Optional[int] = None

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.shape != (self.basis.dim,):
            raise ContractViolation("one eigenvalue per basis state expected")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        if self.rotations and not isinstance(self.basis, SpinChain):
            raise UnsupportedOperatorError("readout rotations are only available on spin chains")
        # distinct outcomes and the basis -> outcome map
        values, inverse = np.unique(np.round(ev, 12), return_inverse=True)
        object.__setattr__(self, "_values", values)
        object.__setattr__(self, "_inverse", inverse)

    @property
    def outcomes(self) -> np.ndarray:
        return self._values

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self._values)))

    @property
    def is_binary_pauli(self) -> bool:
        return self._values.shape == (2,) and np.allclose(self._values, [-1.0, 1.0])

    def rotate(self, states: np.ndarray) -> np.ndarray:
        for site, rot in self.rotations:
            states = apply_site_op(states, rot, site, self.basis.N)
        return states

    @property
    def matrix(self) -> np.ndarray:
        dim = self.basis.dim
        r = self.rotate(np.eye(dim, dtype=complex)).T  # columns R|k>, so r = R
        return r.conj().T @ np.diag(self.eigenvalues) @ r

    def outcome_distribution(self, states: np.ndarray, noise: NoiseModel | None = None) -> np.ndarray:
        """Probabilities of the distinct outcomes, shape ``states.shape[:-1] + (K,)``."""
        probs = np.abs(self.rotate(np.asarray(states))) ** 2
        if noise is not None and noise.p > 0:
            probs = apply_depolarization(probs, noise.p)
        lead = probs.shape[:-1]
        flat = probs.reshape(-1, probs.shape[-1])
        K = len(self._values)
        out = np.zeros((flat.shape[0], K))
        for k in range(K):
            out[:, k] = flat[:, self._inverse == k].sum(axis=1)
        out = out.reshape(lead + (K,))
        if noise is not None and noise.x > 0:
            if not self.is_binary_pauli:
                raise UnsupportedOperatorError("readout errors are modelled for binary +-1 outcomes only")
            out = readout_scale_distribution(out, noise.x)
        return out


def pauli_z(N: int, site: int) -> Observable:
    if not 0 <= site < N:
        raise ContractViolation(f"site {site} out of range for N={N}")
    z = 1 - 2 * ((np.arange(2**N) >> site) & 1)
    return Observable(SpinChain(N), z, (), f"Z{site}", site)


def pauli_x(N: int, site: int) -> Observable:
    """``sigma^x`` read out through a Hadamard rotation on ``site``."""
    obs = pauli_z(N, site)
    return Observable(obs.basis, obs.eigenvalues, ((site, HADAMARD),), f"X{site}", site)


def number_difference(M: int, Nb: int, j: int) -> Observable:
    """``W = n_{j+1} - n_j`` in the boson sector."""
    if not 0 <= j < M - 1:
        raise ContractViolation(f"need 0 <= j < M-1, got j={j}")
    occ = boson_configurations(M, Nb)
    return Observable(BosonSector(M, Nb), occ[:, j + 1] - occ[:, j], (), f"n{j+1}-n{j}")


def observable_from_matrix(basis, W) -> Observable:
    """Wrap an operator that is diagonal in the computational basis."""
    W = as_matrix(W)
    if not is_hermitian(W) or np.max(np.abs(W - np.diag(np.diag(W)))) > DIAG_TOL:
        raise UnsupportedOperatorError("W must be Hermitian and diagonal in the measurement basis")
    return Observable(basis, np.real(np.diag(W)))


# ------------------------------------------------------------------- sampling


def pair_statistic(shots) -> float:
    """Unbiased estimator of ``<W>^2`` from one shot set: ``sum_{i != j} x_i x_j / (N(N-1))``."""
    x = np.asarray(shots, dtype=float)
    n = x.size
    if n < 2:
        raise ContractViolation("pair statistic needs at least two shots")
    s = x.sum()
    return float((s * s - np.dot(x, x)) / (n * (n - 1)))


def _finite(N_M) -> bool:
    return N_M is not None and not (isinstance(N_M, float) and math.isinf(N_M))


def sample_statistics(dist: np.ndarray, values: np.ndarray, N_M, rng: RngLike):
    """``(m, q)`` arrays from outcome distributions ``dist[..., K]``.

    ``m`` is the shot mean and ``q`` the unbiased pair statistic. ``N_M=None``
    (or ``inf``) returns the exact expectation and its square.
    """
    if not _finite(N_M):
        m = dist @ values
        return m, m * m
    N_M = int(N_M)
    if N_M < 2:
        raise ContractViolation(f"N_M must be >= 2, got {N_M}")
    rng = as_generator(rng)
    p = np.clip(dist, 0.0, None)
    p = p / p.sum(axis=-1, keepdims=True)
    counts = rng.multinomial(N_M, p)
    s = counts @ values
    s2 = counts @ (values * values)
    return s / N_M, (s * s - s2) / (N_M * (N_M - 1))


def simulate_shots(state, W: Observable, N_M, rng: RngLike, noise: NoiseModel | None = None):
    """Measure ``W`` ``N_M`` times on ``state``; returns ``(mean, unbiased pair statistic)``."""
    amps = np.asarray(state.amps if hasattr(state, "amps") else state)
    if isinstance(state, ProductState):
        amps = state.vector()
    dist = W.outcome_distribution(amps, noise)
    m, q = sample_statistics(dist, W.outcomes, N_M, rng)
    return float(m), float(q)


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True)
class EnsembleEn:
    n: int
    states: tuple
    weights: np.ndarray

    def __len__(self):
        return len(self.states)


def build_ensemble(n: int, k0: ProductState, v_site: int = 0) -> EnsembleEn:
    """The ``2^n`` states that differ from ``k0`` on sites ``0..n-1``, weighted by ``(-1/2)^Hamming``.

    ``k0`` comes first; states are ordered by flip count, then lexicographically.
    """
    if not isinstance(k0.basis, SpinChain):
        raise UnsupportedOperatorError("local ensembles are defined for spin chains")
    N = k0.basis.N
    if v_site != 0:
        raise ContractViolation("only V on site 0 (resolved block 0..n-1) is implemented")
    if not 0 <= n <= N:
        raise ContractViolation(f"n={n} must lie in [0, {N}]")
    states, weights = [], []
    for d in range(n + 1):
        for flips in combinations(range(n), d):
            states.append(k0.flipped(flips))
            weights.append((-0.5) ** d)
    w = np.array(weights)
    w.setflags(write=False)
    return EnsembleEn(n, tuple(states), w)


# ------------------------------------------------------------------ jackknife


def jackknife_ratio(num, den, return_flags: bool = False):
    """Ratio of sums with delete-one jackknife error over the leading axis.

    ``num`` and ``den`` have shape ``(N_u, ...)``. The estimate is
    ``sum(num) / sum(den)``; ``sigma^2 = (N_u-1)/N_u sum_i (R_i - R_bar)^2``
    with ``R_i`` the ratio with realization ``i`` removed. Points where the
    full or any delete-one denominator is not positive are flagged and
    returned as NaN.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    if num.shape != den.shape:
        raise ContractViolation("numerator and denominator samples must be aligned")
    n = num.shape[0]
    if n < 2:
        raise ContractViolation("jackknife needs at least two realizations")
    S, D = num.sum(axis=0), den.sum(axis=0)
    loo_den = D - den
    flags = (D <= 0) | np.any(loo_den <= 0, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = S / D
        loo = (S - num) / loo_den
        var = (n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0)
    est = np.where(flags, np.nan, est)
    sigma = np.where(flags, np.nan, np.sqrt(var))
    if np.ndim(est) == 0:
        est, sigma, flags = float(est), float(sigma), bool(flags)
    if return_flags:
        return est, sigma, flags
    return est, sigma


# -------------------------------------------------------------------- configs


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Everything a protocol run needs.

    ``variant`` is ``"global"`` or ``"local"`` (with resolution ``n``).
    ``N_M=None`` means an infinite number of shots. ``source`` selects the
    global unitary ensemble (default CUE on the full space); the local variant
    always uses products of single-site CUE(2) factors.
    """

    variant: str
    model: object
    W: Observable
    V: object
    k0: ProductState
    times: tuple
    N_u: int
    N_M: Optional[int] = None
    n: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)
    master_seed: int = 0
    source: object = None
    beta: Optional[float] = None
    H: object = None
    strict: bool = True
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.variant not in ("global", "local"):
            raise ContractViolation(f"unknown variant {self.variant!r}")
        if self.N_u < 2:
            raise ContractViolation("N_u must be >= 2 for jackknife errors")
        if _finite(self.N_M) and int(self.N_M) < 2:
            raise ContractViolation("N_M must be >= 2 when finite")
        if self.W.basis != self.k0.basis:
            raise ContractViolation("W and k0 live on different bases")
        if self.variant == "local" and not isinstance(self.k0.basis, SpinChain):
            raise ContractViolation("the local protocol needs a spin chain")
        if self.noise.theta > 0 and self.variant != "local":
            raise ContractViolation("unitary mismatch is modelled for local unitaries only")
        if self.noise.gamma > 0:
            raise ContractViolation("spontaneous emission needs the Lindblad backend (noise.decoherence_study)")
        if self.beta is not None and self.variant != "global":
            raise ContractViolation("thermal corrections need global unitaries")
        if not self.times:
            raise ContractViolation("empty time grid")


@dataclass
class OtocSeries:
    times: np.ndarray
    estimate: np.ndarray
    sigma: np.ndarray
    exact: Optional[np.ndarray]
    degenerate: np.ndarray
    num_terms: np.ndarray
    den_terms: np.ndarray
    stream_ids: np.ndarray
    label: str = ""

    @property
    def two_sigma(self) -> np.ndarray:
        return 2 * self.sigma

    def within(self, k: float = 2.0) -> np.ndarray:
        if self.exact is None:
            raise ContractViolation("no exact reference attached")
        return np.abs(self.estimate - self.exact) <= k * self.sigma


# ---------------------------------------------------------------- realization


def _initial_states(cfg: ProtocolConfig, stream: RngStream):
    """Branch (a) states (stacked) and the branch (b) state before ``V``."""
    g = stream.generator(U_PURPOSE)
    basis = cfg.k0.basis
    if cfg.variant == "global":
        src = cfg.source
        if src is None or isinstance(src, GlobalCue):
            psi = sample_haar_state(basis.dim, g)
        elif isinstance(src, RandomQuench):
            psi = random_quench_state(src.model, cfg.k0, src.eta, src.T, src.width, g)
        else:
            psi = src.sample(g) @ cfg.k0.vector()
        return psi[None, :], psi
    us = sample_local_product(basis.N, g)
    ens = build_ensemble(cfg.n, cfg.k0)
    a = np.stack([product_vector([us[s][:, k.labels[s]] for s in range(basis.N)]) for k in ens.states])
    ub = us if cfg.noise.theta == 0 else perturb_local_product(us, cfg.noise.theta, stream.generator(MISMATCH))
    b = product_vector([ub[s][:, cfg.k0.labels[s]] for s in range(basis.N)])
    return a, b


def _evolve(cfg: ProtocolConfig, states: np.ndarray, stream: RngStream) -> np.ndarray:
    if isinstance(cfg.model, HaarBlock):
        N = cfg.model.N
        out = np.empty((len(cfg.times),) + states.shape, dtype=complex)
        for i, t in enumerate(cfg.times):
            blocks = sample_haar_blocks(cfg.model, t, stream.generator(SCRAMBLER, i))
            out[i] = apply_haar_blocks(states, blocks, N)
        return out
    return evolve_states(cfg.model, states, cfg.times)


def realization_terms(cfg: ProtocolConfig, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator contributions of realization ``r`` for every time."""
    stream = RngStream(cfg.master_seed, r)
    a, b0 = _initial_states(cfg, stream)
    V = as_matrix(cfg.V)
    b = V @ b0
    evolved = _evolve(cfg, np.concatenate([a, b[None, :]]), stream)  # (T, S+1, dim)
    dist = cfg.W.outcome_distribution(evolved, cfg.noise)
    vals = cfg.W.outcomes
    m_a, q_a = sample_statistics(dist[:, :-1], vals, cfg.N_M, stream.generator(SHOTS_A))
    m_b, _ = sample_statistics(dist[:, -1], vals, cfg.N_M, stream.generator(SHOTS_B))
    if cfg.variant == "global":
        num = m_a[:, 0] * m_b
        if cfg.beta is not None:
            H = as_matrix(build_hamiltonian(cfg.model) if cfg.H is None else cfg.H)
            energy = float(np.real(np.vdot(b0, H @ b0)))
            num = num * (1 - 0.5 * cfg.beta * (len(b0) + 2) * energy)
        return num, q_a[:, 0]
    c = build_ensemble(cfg.n, cfg.k0).weights
    num = (m_a * c).sum(axis=1) * m_b
    cross = m_a * m_a[:, :1]
    cross[:, 0] = q_a[:, 0]
    den = (cross * c).sum(axis=1)
    return num, den


def _chunk_terms(args):
    cfg, ids = args
    out = [realization_terms(cfg, r) for r in ids]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def collect_terms(cfg: ProtocolConfig, workers: int = 1, stream_ids: Sequence[int] | None = None):
    """``(num, den)`` of shape ``(N_u, T)``; order follows ``stream_ids`` regardless of ``workers``."""
    ids = list(range(cfg.N_u)) if stream_ids is None else [int(i) for i in stream_ids]
    if workers <= 1 or len(ids) < 2 * workers:
        return _chunk_terms((cfg, ids))
    chunks = [ids[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk_terms, [(cfg, c) for c in chunks]))
    num = np.empty((len(ids), len(cfg.times)))
    den = np.empty_like(num)
    for k, (pn, pd) in enumerate(parts):
        num[k::workers] = pn
        den[k::workers] = pd
    return num, den


# ------------------------------------------------------------------- exact refs


def haar_block_reference(model: HaarBlock, j: int, t: float, variant: str, n: int = 0) -> float | None:
    """U-averaged OTOC of the Haar-block model for ``W`` on site ``j`` and ``V`` on site 0."""
    start, size = model.block_of(0, t)
    if not start <= j < start + size:
        return 1.0
    if j == 0:
        return None
    if variant == "global" or n >= model.N:
        return haar_block_otoc(size)
    if n in (0, 1):
        return haar_block_modified(size, n)
    return None


def exact_reference(cfg: ProtocolConfig) -> np.ndarray | None:
    W = cfg.W.matrix
    V = as_matrix(cfg.V)
    if isinstance(cfg.model, HaarBlock):
        if cfg.W.site is None:
            return None
        vals = [haar_block_reference(cfg.model, cfg.W.site, t, cfg.variant, cfg.n) for t in cfg.times]
        return None if any(v is None for v in vals) else np.array(vals)
    if cfg.beta is not None:
        return np.array([thermal_otoc_first_order(cfg.model, W, V, cfg.H, cfg.beta, t) for t in cfg.times])
    out = []
    for W_t in heisenberg_series(cfg.model, W, cfg.times):
        if cfg.variant == "global":
            out.append(otoc_infinite_T(W_t, V))
        else:
            out.append(modified_otoc_all(W_t, V)[cfg.n])
    return np.array(out)


# ------------------------------------------------------------------ runners


def run_protocol(cfg: ProtocolConfig, workers: int = 1) -> OtocSeries:
    num, den = collect_terms(cfg, workers)
    est, sig, flags = jackknife_ratio(num, den, return_flags=True)
    est, sig, flags = np.atleast_1d(est), np.atleast_1d(sig), np.atleast_1d(flags)
    if cfg.strict and np.any(flags):
        k = int(np.argmax(flags))
        raise DegenerateNormalizationError(
            f"normalization estimate not positive at t={cfg.times[k]}", raw_value=float(den[:, k].mean())
        )
    exact = exact_reference(cfg) if cfg.exact else None
    label = cfg.variant if cfg.variant == "global" else f"local n={cfg.n}"
    return OtocSeries(np.array(cfg.times), est, sig, exact, flags, num, den, np.arange(cfg.N_u), label)


def run_global_protocol(cfg: ProtocolConfig, workers: int = 1) -> OtocSeries:
    if cfg.variant != "global":
        raise ContractViolation("expected a global configuration")
    if isinstance(cfg.source, LocalProduct):
        raise ContractViolation("global protocol needs GlobalCue or RandomQuench unitaries")
    return run_protocol(cfg, workers)


def run_local_protocol(cfg: ProtocolConfig, workers: int = 1) -> OtocSeries:
    if cfg.variant != "local":
        raise ContractViolation("expected a local configuration")
    if not isinstance(cfg.model.basis, SpinChain):
        raise ContractViolation("local protocol needs a spin model")
    return run_protocol(cfg, workers)


def run_haar_model_protocol(cfg: ProtocolConfig, workers: int = 1) -> OtocSeries:
    """Protocol on the Haar-block scrambling model; fresh ``U`` and ``u`` per realization."""
    if not isinstance(cfg.model, HaarBlock):
        raise ContractViolation("expected a HaarBlock model")
    return run_protocol(cfg, workers)


def run_thermal_protocol(cfg: ProtocolConfig, beta: float, workers: int = 1) -> OtocSeries:
    """First-order high-temperature estimate of the symmetrized OTOC.

    Each realization's cross correlation is weighted by
    ``1 - (beta / 2) (N_H + 2) <H>_u`` where ``<H>_u`` is the energy of the
    random initial state (taken exactly).
    """
    return run_protocol(replace(cfg, beta=float(beta)), workers)
