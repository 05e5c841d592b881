"""Imperfections and decoherence.

Depolarization and readout errors act on outcome distributions, so they
combine with finite-shot sampling in the protocol. Unitary mismatch perturbs
the local unitaries of the second measurement branch. Spontaneous emission
switches the evolution to a Lindblad master equation integrated with fixed
step RK4, checked by step halving.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, IntegratorError
from .hilbert import SM, as_matrix, spin_operator
from .randomness import RngLike, as_generator

TRACE_TOL = 1e-7
POSITIVITY_TOL = -1e-8
HALVING_TOL = 1e-6
MAX_HALVINGS = 8


@dataclass(frozen=True)
class NoiseModel:
    """Depolarization ``p``, readout flip probability ``x``, mismatch angle ``theta``, emission rate ``gamma``."""

    p: float = 0.0
    x: float = 0.0
    theta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ContractViolation(f"depolarization p={self.p} outside [0, 1]")
        if not 0.0 <= self.x <= 0.5:
            raise ContractViolation(f"readout error x={self.x} outside [0, 1/2]")
        if self.theta < 0:
            raise ContractViolation(f"mismatch theta={self.theta} must be >= 0")
        if self.gamma < 0:
            raise ContractViolation(f"emission rate gamma={self.gamma} must be >= 0")

    @property
    def is_trivial(self) -> bool:
        return self.p == 0 and self.x == 0 and self.theta == 0 and self.gamma == 0


def apply_depolarization(probs, p: float) -> np.ndarray:
    """Mix basis-state probabilities (last axis) with the maximally mixed distribution.

    Equivalent to measuring ``(1-p) rho + p I/d``; traceless expectation values
    are rescaled by ``1-p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ContractViolation(f"depolarization p={p} outside [0, 1]")
    probs = np.asarray(probs, dtype=float)
    return (1 - p) * probs + p / probs.shape[-1]


def readout_scale_distribution(dist, x: float) -> np.ndarray:
    """Binary outcome distribution ``[P(-1), P(+1)]`` after independent flips with probability ``x``."""
    dist = np.asarray(dist, dtype=float)
    if dist.shape[-1] != 2:
        raise ContractViolation("readout errors need binary outcomes")
    return (1 - x) * dist + x * dist[..., ::-1]


def apply_readout_error(shots, x: float, rng: RngLike) -> np.ndarray:
    """Flip each ``+-1`` outcome independently with probability ``x``."""
    shots = np.asarray(shots)
    if not 0.0 <= x <= 0.5:
        raise ContractViolation(f"readout error x={x} outside [0, 1/2]")
    if not np.all(np.isin(shots, (-1, 1))):
        raise ContractViolation("readout errors are defined for +-1 outcomes")
    if x == 0:
        return shots.copy()
    flips = as_generator(rng).random(shots.shape) < x
    return np.where(flips, -shots, shots)


# ------------------------------------------------------------------ mismatch


def mismatch_study(L: int, thetas: Sequence[float], N_u: int, master_seed: int = 0, site: int = 0, workers: int = 1):
    """Estimate ``O_0`` for ``W`` outside the block of ``V`` with mismatched second-branch unitaries.

    The exact value is 1. Because ``W(t)`` acts only on its own block of
    ``L`` sites and ``u`` is a product, only that block enters both
    measurement branches, so it is simulated alone (``V`` acts outside it).
    Each ``theta`` uses its own seed offset. Returns ``(estimate, sigma)``
    arrays; the error curve is ``|estimate - 1|``.
    """
    from .hilbert import spin_product_state
    from .models import HaarBlock
    from .protocol import ProtocolConfig, pauli_z, run_haar_model_protocol

    model = HaarBlock(L, v_B=1.0)
    t = float(L - 1)
    k0 = spin_product_state(L, [0] * L)
    est, sig = [], []
    for i, theta in enumerate(thetas):
        cfg = ProtocolConfig(
            variant="local",
            n=0,
            model=model,
            W=pauli_z(L, site),
            V=np.eye(2**L, dtype=complex),
            k0=k0,
            times=(t,),
            N_u=N_u,
            N_M=None,
            noise=NoiseModel(theta=float(theta)),
            master_seed=int(master_seed) + 7919 * i,
            exact=False,
        )
        series = run_haar_model_protocol(cfg, workers)
        est.append(series.estimate[0])
        sig.append(series.sigma[0])
    return np.array(est), np.array(sig)


def fit_mismatch(thetas, deviations, sigmas):
    """Weighted least squares ``delta = a theta + b theta^2``; returns ``(a, b, sigma_a, sigma_b)``.

    Points with zero error bar (``theta = 0``, where the estimate is exact)
    carry no information about the curvature and are dropped.
    """
    th = np.asarray(thetas, dtype=float)
    d = np.asarray(deviations, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    keep = s > 0
    th, d, s = th[keep], d[keep], s[keep]
    A = np.stack([th, th**2], axis=1) / s[:, None]
    coef, *_ = np.linalg.lstsq(A, d / s, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    return coef[0], coef[1], float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))


# ------------------------------------------------------------------ Lindblad


def _jump_operators(N: int):
    lowering = [spin_operator(N, {i: SM}) for i in range(N)]
    n_up = sum(l.conj().T @ l for l in lowering)
    return lowering, n_up


def dense_generator(H: np.ndarray, gamma: float, N: int, adjoint: bool = False):
    """Reference Lindblad generator (or its adjoint) from dense matrices."""
    lowering, n_up = _jump_operators(N)
    Heff = H - 0.5j * gamma * n_up

    def f(rho):
        out = -1j * (Heff @ rho - rho @ Heff.conj().T)
        for s in lowering:
            out += gamma * (s @ rho @ s.conj().T)
        return out

    def f_adj(A):
        out = 1j * (Heff.conj().T @ A - A @ Heff)
        for s in lowering:
            out += gamma * (s.conj().T @ A @ s)
        return out

    return f_adj if adjoint else f


class _KickedGenerator:
    """Lindblad generator for ``H = diag(e) + h_x sum_i sigma^x_i`` with emission on every site.

    The kick is a sparse bit-flip matrix and the jump term a sparse map on the
    row-major vectorized operator, so one evaluation costs a few sparse
    products instead of ``O(N)`` dense ones.
    """

    def __init__(self, N: int, diag: np.ndarray, h_x: float, gamma: float, adjoint: bool = False):
        self.N = N
        d = 2**N
        k = np.arange(d)
        up = [((k >> i) & 1) == 0 for i in range(N)]
        n_up = sum(u.astype(float) for u in up)
        self.h_x = h_x
        self.gamma = gamma
        self.adjoint = adjoint
        # H_eff = diag(e) - i gamma/2 n_up is diagonal apart from the kick
        self.eff = np.asarray(diag, dtype=float) - 0.5j * gamma * n_up
        rows = np.concatenate([k] * N)
        cols = np.concatenate([k ^ (1 << i) for i in range(N)])
        self.flip = sp.csr_matrix((np.ones(N * d), (rows, cols)), shape=(d, d))
        # forward: (s rho s^+)[k, l] = rho[k^b, l^b] on down-down entries; adjoint: on up-up entries
        r, c = [], []
        for i in range(N):
            b = 1 << i
            sel = ~up[i] if not adjoint else up[i]
            kk = k[sel]
            rr = (kk[:, None] * d + kk[None, :]).ravel()
            cc = ((kk ^ b)[:, None] * d + (kk ^ b)[None, :]).ravel()
            r.append(rr)
            c.append(cc)
        r, c = np.concatenate(r), np.concatenate(c)
        self.jump = sp.csr_matrix((np.full(r.size, gamma), (r, c)), shape=(d * d, d * d))

    def __call__(self, A):
        if self.adjoint:
            # i (H_eff^dag A - A H_eff) + gamma sum sigma^+ A sigma^-
            out = 1j * (self.eff.conj()[:, None] * A - A * self.eff[None, :])
            sign = 1j
        else:
            out = -1j * (self.eff[:, None] * A - A * self.eff.conj()[None, :])
            sign = -1j
        if self.h_x:
            out += sign * self.h_x * (self.flip @ A - (self.flip @ A.T).T)
        if self.gamma:
            out += (self.jump @ A.ravel()).reshape(A.shape)
        return out


def _half_generators(model, gamma: float, adjoint: bool):
    N = model.N
    kick = _KickedGenerator(N, np.zeros(2**N), model.h_x, gamma, adjoint)
    ising = _KickedGenerator(N, model.ising_diagonal(), 0.0, gamma, adjoint)
    return kick, ising


def _rk4(f, y, dt: float, steps: int):
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _check_kicked(model):
    if not hasattr(model, "ising_diagonal"):
        raise ContractViolation("Lindblad evolution is implemented for the kicked Ising chain")
    if model.N > 8:
        raise ContractViolation("density-matrix evolution limited to N <= 8")


def _segments(T: float, times: Sequence[float]):
    """Split ``[0, max(times)]`` at half-period boundaries and output times.

    Yields ``(start, end, which)`` with ``which`` 0 for the transverse kick
    half and 1 for the Ising half.
    """
    half = T / 2
    t_end = max(times)
    marks = {round(k * half, 12) for k in range(int(np.floor(t_end / half + 1e-9)) + 1)}
    marks |= {round(t, 12) for t in times}
    marks = sorted(m for m in marks if m <= t_end + 1e-12)
    for a, b in zip(marks[:-1], marks[1:]):
        which = int(np.floor((a + 1e-9) / half)) % 2
        yield a, b, which


def _integrate_schrodinger(rho0, gens, T, times, steps_per_half):
    out = {}
    rho = rho0.astype(complex)
    if 0.0 in {round(t, 12) for t in times}:
        out[0.0] = rho.copy()
    for a, b, which in _segments(T, times):
        steps = max(1, int(np.ceil((b - a) / (T / 2) * steps_per_half - 1e-9)))
        rho = _rk4(gens[which], rho, (b - a) / steps, steps)
        out[round(b, 12)] = rho.copy()
    return np.stack([out[round(t, 12)] for t in times])


def lindblad_evolve(rho0, model, gamma: float, times: Sequence[float], steps_per_half: int = 16,
                    tol: float = HALVING_TOL, max_halvings: int = MAX_HALVINGS) -> np.ndarray:
    """Density-matrix trajectory of the kicked Ising chain with spontaneous emission on every site.

    Each period applies the transverse kick for ``T/2`` and then the Ising and
    longitudinal terms for ``T/2``. The RK4 step is halved until all output
    density matrices change by less than ``tol``. Returns ``(len(times), d, d)``.

    Raises
    ------
    IntegratorError
        If halving does not converge, or the trace or positivity checks fail.
    """
    _check_kicked(model)
    if gamma < 0:
        raise ContractViolation("gamma must be >= 0")
    times = [float(t) for t in times]
    if min(times) < 0:
        raise ContractViolation("times must be non-negative")
    rho0 = as_matrix(rho0)
    gens = _half_generators(model, gamma, adjoint=False)
    n = steps_per_half
    coarse = _integrate_schrodinger(rho0, gens, model.T, times, n)
    diag = {}
    for _ in range(max_halvings):
        fine = _integrate_schrodinger(rho0, gens, model.T, times, 2 * n)
        diag = _trajectory_diagnostics(fine, coarse)
        diag["steps_per_half"] = 2 * n
        # halve until converged and physical; RK4 keeps the trace exactly,
        # but truncation error can push the smallest eigenvalue below zero
        if diag["change"] < tol and diag["trace_drift"] < TRACE_TOL and diag["min_eigenvalue"] > POSITIVITY_TOL:
            return fine
        coarse, n = fine, 2 * n
    if diag["trace_drift"] >= TRACE_TOL:
        raise IntegratorError("trace drift beyond tolerance", diag)
    if diag["min_eigenvalue"] <= POSITIVITY_TOL:
        raise IntegratorError("density matrix lost positivity", diag)
    raise IntegratorError("step halving did not converge", diag)


def _trajectory_diagnostics(fine, coarse) -> dict:
    traces = np.real(np.einsum("tii->t", fine))
    herm = 0.5 * (fine + np.conj(np.swapaxes(fine, 1, 2)))
    return {
        "change": float(np.max(np.abs(fine - coarse))),
        "trace_drift": float(np.max(np.abs(traces - 1))),
        "min_eigenvalue": float(np.min(np.linalg.eigvalsh(herm))),
    }


def _integrate_heisenberg(W, gens, T, periods, steps_per_half):
    kick_adj, ising_adj = gens
    dt = T / 2 / steps_per_half
    out = np.empty((len(periods),) + W.shape, dtype=complex)
    order = np.argsort(periods, kind="stable")
    A, m = W.astype(complex), 0
    for idx in order:
        while m < periods[idx]:
            # adjoint of one period: Ising half first, then the kick half
            A = _rk4(ising_adj, A, dt, steps_per_half)
            A = _rk4(kick_adj, A, dt, steps_per_half)
            m += 1
        out[idx] = A
    return out


def lindblad_heisenberg(W, model, gamma: float, periods: Sequence[int], steps_per_half: int = 16,
                        tol: float = HALVING_TOL, max_halvings: int = MAX_HALVINGS) -> np.ndarray:
    """Heisenberg-picture observable ``W_H(mT)`` with ``Tr(W rho(mT)) = Tr(W_H(mT) rho0)``.

    Uses the adjoint master equation, so one integration serves every initial
    state. Same step-halving control as :func:`lindblad_evolve`.
    """
    _check_kicked(model)
    periods = [int(m) for m in periods]
    if min(periods) < 0:
        raise ContractViolation("periods must be non-negative")
    W = as_matrix(W)
    gens = _half_generators(model, gamma, adjoint=True)
    n = steps_per_half
    coarse = _integrate_heisenberg(W, gens, model.T, periods, n)
    for _ in range(max_halvings):
        fine = _integrate_heisenberg(W, gens, model.T, periods, 2 * n)
        change = float(np.max(np.abs(fine - coarse)))
        if change < tol:
            return fine
        coarse, n = fine, 2 * n
    raise IntegratorError("step halving did not converge", {"steps_per_half": n, "change": change})


def decoherence_study(model, j: int, gammas: Sequence[float], periods: Sequence[int], N_u: int,
                      master_seed: int = 0, n: int = 0):
    """Local-protocol ``O_n`` estimates (``N_M = inf``) under spontaneous emission.

    ``W = sigma^z_j``, ``V = sigma^z_0``; ``k0`` is all up. The same local
    unitaries are used for every ``gamma``. Returns a dict ``gamma ->
    (estimate, sigma)`` with arrays over ``periods``.
    """
    from .hilbert import SZ, product_vector, spin_product_state
    from .protocol import build_ensemble, jackknife_ratio
    from .randomness import RngStream, sample_local_product

    N = model.N
    W = spin_operator(N, {j: SZ})
    V = spin_operator(N, {0: SZ})
    k0 = spin_product_state(N, [0] * N)
    ens = build_ensemble(n, k0)
    psi_a, psi_b = [], []
    for r in range(N_u):
        us = sample_local_product(N, RngStream(master_seed, r).generator(0))
        psi_a.append([product_vector([us[s][:, k.labels[s]] for s in range(N)]) for k in ens.states])
        psi_b.append(V @ product_vector([us[s][:, 0] for s in range(N)]))
    psi_a = np.array(psi_a)  # (N_u, S, d)
    psi_b = np.array(psi_b)  # (N_u, d)
    results = {}
    for gamma in gammas:
        WH = lindblad_heisenberg(W, model, gamma, periods)
        # <psi|W_H|psi> for every period, realization and ensemble state
        m_a = np.real(np.einsum("rsi,tij,rsj->trs", psi_a.conj(), WH, psi_a))
        m_b = np.real(np.einsum("ri,tij,rj->tr", psi_b.conj(), WH, psi_b))
        num = (m_a * ens.weights).sum(axis=2) * m_b
        den = (m_a * m_a[:, :, :1] * ens.weights).sum(axis=2)
        est, sig = jackknife_ratio(num.T, den.T)
        results[float(gamma)] = (np.asarray(est), np.asarray(sig))
    return results
