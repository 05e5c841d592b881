"""Exact OTOCs from trace formulas.

The modified OTOC at resolution ``n`` sums out-of-time-ordered traces of
reduced operators over every subsystem ``A`` that contains the first ``n``
sites. It is available through three independent routes:

* :func:`modified_otoc` - explicit partial traces over all subsets,
* :func:`modified_otoc_permutation_form` - contraction of ``W(t) (x) V^dag W(t) V``
  against products of local identity/swap operators,
* :func:`modified_otoc_spectrum` - Pauli-string expansion, where a string
  with support ``P`` contributes with weight ``2^{-|C|} (3/2)^{N - |C|}`` and
  ``C = {0..n-1} | supp(P)``. This is the fast path used by the studies.

V sits on site 0 throughout, so the resolved block is ``{0, ..., n-1}``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ContractViolation, DegenerateOperatorError
from .hilbert import PAULIS, all_subsets_containing, as_matrix, is_hermitian, is_unitary, partial_trace_matrix
from .models import build_hamiltonian, heisenberg_operator

TRACE_TOL = 1e-12


def _n_sites(mat: np.ndarray) -> int:
    N = int(round(np.log2(mat.shape[0])))
    if 2**N != mat.shape[0]:
        raise ContractViolation("modified OTOCs need a spin-chain operator")
    return N


def conjugated(W_t, V) -> np.ndarray:
    """``V^dagger W(t) V``."""
    W_t, V = as_matrix(W_t), as_matrix(V)
    return V.conj().T @ W_t @ V


def otoc_terms(W_t, V) -> tuple[float, float]:
    """Numerator ``Tr(W V^dag W V)`` and denominator ``Tr(W^2 V^dag V)``."""
    W_t, V = as_matrix(W_t), as_matrix(V)
    num = np.real(np.sum(W_t.T * conjugated(W_t, V)))
    den = np.real(np.trace(W_t @ W_t @ V.conj().T @ V))
    return float(num), float(den)


def otoc_infinite_T(W_t, V) -> float:
    """Infinite-temperature OTOC ``Tr(W(t) V^dag W(t) V) / Tr(W(t)^2 V^dag V)``."""
    num, den = otoc_terms(W_t, V)
    if abs(den) < TRACE_TOL:
        raise DegenerateOperatorError("Tr(W(t)^2 V^dag V) vanishes")
    return num / den


def _check_resolution(n: int, N: int) -> None:
    if not 0 <= n <= N:
        raise ContractViolation(f"resolution n={n} must lie in [0, {N}]")


def modified_otoc_terms(W_t, V, n: int, N: int | None = None) -> tuple[float, float]:
    """Subset sums of ``Tr_A(W_A Y_A)`` and ``Tr_A(W_A W_A)`` with ``Y = V^dag W V``."""
    X = as_matrix(W_t)
    N = _n_sites(X) if N is None else N
    _check_resolution(n, N)
    Y = conjugated(X, V)
    num = den = 0.0
    for A in all_subsets_containing(N, range(n)):
        XA = partial_trace_matrix(X, A, N)
        YA = partial_trace_matrix(Y, A, N)
        num += np.real(np.sum(XA.T * YA))
        den += np.real(np.sum(XA.T * XA))
    return float(num), float(den)


def modified_otoc(W_t, V, n: int, N: int | None = None) -> float:
    num, den = modified_otoc_terms(W_t, V, n, N)
    if abs(den) < TRACE_TOL:
        raise DegenerateOperatorError("modified OTOC normalization vanishes")
    return num / den


@lru_cache(maxsize=4)
def _site_factors():
    d = np.eye(2)
    identity = np.einsum("xy,pq->xypq", d, d)
    swap = np.einsum("yp,qx->xypq", d, d)
    return identity, swap


def permutation_form_terms(W_t, V, n: int, N: int | None = None) -> tuple[float, float]:
    """Sums of ``Tr[tau (X (x) Y)]`` over ``tau`` = swaps on sites < n, identity-or-swap elsewhere."""
    X = as_matrix(W_t)
    N = _n_sites(X) if N is None else N
    _check_resolution(n, N)
    Y = conjugated(X, V)
    identity, swap = _site_factors()
    # labels per site s: x (X ket), y (X bra), p (Y ket), q (Y bra)
    lab = {k: [4 * s + i for s in range(N)] for i, k in enumerate("xypq")}
    x_axes = [lab["x"][N - 1 - a] for a in range(N)] + [lab["y"][N - 1 - a] for a in range(N)]
    y_axes = [lab["p"][N - 1 - a] for a in range(N)] + [lab["q"][N - 1 - a] for a in range(N)]

    def contract(A, B):
        ops = [A.reshape((2,) * (2 * N)), x_axes, B.reshape((2,) * (2 * N)), y_axes]
        for s in range(N):
            factor = swap if s < n else identity + swap
            ops += [factor, [lab["x"][s], lab["y"][s], lab["p"][s], lab["q"][s]]]
        return float(np.real(np.einsum(*ops, [], optimize="greedy")))

    return contract(X, Y), contract(X, X)


def modified_otoc_permutation_form(W_t, V, n: int, N: int | None = None) -> float:
    num, den = permutation_form_terms(W_t, V, n, N)
    if abs(den) < TRACE_TOL:
        raise DegenerateOperatorError("modified OTOC normalization vanishes")
    return num / den


def pauli_coefficients(X: np.ndarray, N: int) -> np.ndarray:
    """``x_P = Tr(P X) / 2^N`` as an array of shape ``(4,) * N``; axis ``a`` is site ``N-1-a``."""
    basis = np.stack(PAULIS)  # (4, 2, 2)
    t = np.asarray(X).reshape((2,) * (2 * N))
    # contract ket and bra of one site at a time; finished Pauli axes accumulate at the end
    for a in range(N):
        # current layout: (ket rest..., bra rest..., paulis done...)
        rem = N - a
        t = np.tensordot(t, basis, axes=([0, rem], [2, 1]))
    return t / 2**N


@lru_cache(maxsize=16)
def _pauli_weights(N: int) -> np.ndarray:
    """``weights[n, P] = 4^N 2^{-|C|} (3/2)^{N-|C|}`` with ``C = {0..n-1} | supp(P)``."""
    idx = np.indices((4,) * N).reshape(N, -1)  # idx[a] is the Pauli label on site N-1-a
    supp = (idx[::-1] != 0)  # supp[s] for site s
    weights = np.empty((N + 1, 4**N))
    for n in range(N + 1):
        size = n + supp[n:].sum(axis=0)
        weights[n] = 4.0**N * 2.0 ** (-size) * 1.5 ** (N - size)
    weights.setflags(write=False)
    return weights


def modified_otoc_spectrum(W_t, V, N: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Numerators and denominators of the modified OTOC for every ``n = 0..N``."""
    X = as_matrix(W_t)
    N = _n_sites(X) if N is None else N
    Y = conjugated(X, V)
    x = pauli_coefficients(X, N).ravel()
    y = pauli_coefficients(Y, N).ravel()
    w = _pauli_weights(N)
    return w @ np.real(x * y), w @ np.real(x * x)


def modified_otoc_all(W_t, V, N: int | None = None) -> np.ndarray:
    num, den = modified_otoc_spectrum(W_t, V, N)
    return num / den


def _thermal_inputs(model, W, V, H, t):
    V = as_matrix(V)
    if not (is_hermitian(V) and is_unitary(V)):
        raise ContractViolation("thermal OTOCs need V Hermitian and unitary")
    H = as_matrix(build_hamiltonian(model) if H is None else H)
    dim = H.shape[0]
    if abs(np.trace(H)) > 1e-8 * dim:
        raise ContractViolation("thermal expansion assumes a traceless Hamiltonian")
    W_t = heisenberg_operator(model, W, t).mat
    return W_t, V, H


def thermal_otoc_first_order(model, W, V, H, beta: float, t: float) -> float:
    """First-order high-temperature symmetrized OTOC, normalized like the infinite-T OTOC.

    ``O(t) - (beta / 2) [Tr(H W V W V) + Tr(H V W V W)] / Tr(W(t)^2)``.
    ``H=None`` uses the model Hamiltonian.
    """
    W_t, V, H = _thermal_inputs(model, W, V, H, t)
    WV = W_t @ V
    norm = np.real(np.trace(W_t @ W_t))
    if abs(norm) < TRACE_TOL:
        raise DegenerateOperatorError("Tr(W(t)^2) vanishes")
    o = np.real(np.trace(WV @ WV)) / norm
    corr = np.real(np.trace(H @ WV @ WV) + np.trace(H @ V @ W_t @ V @ W_t))
    return float(o - 0.5 * beta * corr / norm)


def thermal_otoc_symmetrized(model, W, V, H, beta: float, t: float) -> float:
    """Brute-force ``N_H Tr(r W r V r W r V) / Tr(W(t)^2)`` with ``r = rho_beta^{1/4}``."""
    W_t, V, H = _thermal_inputs(model, W, V, H, t)
    w, v = np.linalg.eigh(H)
    boltz = np.exp(-beta * (w - w.min()))
    boltz /= boltz.sum()
    r = (v * boltz**0.25) @ v.conj().T
    a = r @ W_t @ r @ V
    val = np.real(np.trace(a @ a))
    return float(H.shape[0] * val / np.real(np.trace(W_t @ W_t)))


# closed forms used as oracles


def sinc(x):
    """Unnormalized ``sin(x) / x``."""
    return np.sinc(np.asarray(x) / np.pi)


def haar_block_otoc(L: int) -> float:
    """Exact Haar average of the OTOC for W, V traceless Paulis inside one CUE(2^L) block."""
    return -1.0 / (4.0**L - 1.0)


def haar_block_otoc_leading(L: int) -> float:
    return -1.0 / 4.0**L


def haar_block_modified(L: int, n: int) -> float:
    """U-averaged modified OTOC for j inside the block; known for n = 0, 1."""
    if n == 0:
        return (2.0**L / 3 - 1) / (2.0**L - 1)
    if n == 1:
        return -1.0 / (2.0 ** (L + 1) - 1)
    raise ValueError("closed form only for n in {0, 1}")


def lbit_otoc(J1j: float, t):
    return np.cos(4 * J1j * np.asarray(t))


def lbit_modified_zero(J1j: float, t):
    c = np.cos(4 * J1j * np.asarray(t))
    return (2 * c + 1) / (c + 2)


def lbit_averaged_otoc(J_z: float, r: int, xi: float, t):
    return sinc(4 * J_z * np.exp(-r / xi) * np.asarray(t))


def lbit_o0_from_o(o):
    o = np.asarray(o)
    return (1 + 2 * o) / (2 + o)
