"""Studies behind the presets.

Every study is a parameter dataclass plus a runner returning a
:class:`~otoclab.results.ResultTable`. Site indices in parameters are
1-based (``j = 1`` is the site carrying ``V``); they are converted to the
0-based library convention here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import SX, SZ, BosonSector, boson_configurations, SpinChain, ProductState, embed_local, spin_product_state
from .models import BoseHubbard, DisorderedXXZ, HaarBlock, KickedIsing, LongRangeXY, heisenberg_series
from .noise import NoiseModel, decoherence_study, mismatch_study
from .otoc_exact import lbit_o0_from_o, modified_otoc_all, modified_otoc_spectrum, sinc, thermal_otoc_symmetrized
from .protocol import (
    ProtocolConfig,
    collect_terms,
    exact_reference,
    jackknife_ratio,
    number_difference,
    pauli_z,
    run_protocol,
)
from .randomness import GlobalCue, RandomQuench, RngStream
from .results import ResultTable, stream_range

INF = math.inf


def _nm(N_M):
    """Parameter value for the shot count: ``inf`` (or 0) means exact expectations."""
    return None if N_M in (0, None) or math.isinf(N_M) else int(N_M)


def _up(N):
    return spin_product_state(N, [0] * N)


def _series_rows(table, name, xs, series, oracle=None):
    table.add_series(name, xs, series.estimate, series.sigma, series.exact, oracle, series.degenerate,
                     stream_range(series.stream_ids))


# ------------------------------------------------------------------ kicked Ising


@dataclass
class KickedParams:
    N: int = 8
    j: int = 3
    J: float = 1.0
    h_x: float = 1.0
    h_z: float = 0.809
    T: float = 1.6
    periods: int = 22
    N_u: int = 500
    N_M: float = 500.0
    ns: list = field(default_factory=list)
    p: float = 0.0
    x: float = 0.0

    def validate(self):
        if not 2 <= self.j <= self.N:
            raise ValueError("j: must satisfy 2 <= j <= N")
        if any(not 0 <= n <= self.N for n in self.ns):
            raise ValueError("ns: resolutions must lie in [0, N]")


def _kicked_config(P: KickedParams, seed: int, variant: str, n: int = 0, exact: bool = True) -> ProtocolConfig:
    model = KickedIsing(P.N, P.J, P.h_x, P.h_z, P.T)
    return ProtocolConfig(
        variant=variant,
        n=n,
        model=model,
        W=pauli_z(P.N, P.j - 1),
        V=embed_local(SpinChain(P.N), 0, SZ),
        k0=_up(P.N),
        times=[m * P.T for m in range(P.periods + 1)],
        N_u=P.N_u,
        N_M=_nm(P.N_M),
        noise=NoiseModel(p=P.p, x=P.x),
        master_seed=seed,
        strict=False,
        exact=exact,
    )


def run_kicked(P: KickedParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    """Global protocol when ``ns`` is empty, local protocol for every ``n`` in ``ns`` otherwise."""
    P.validate()
    table = ResultTable(x_name="Jt")
    xs = [m * P.T * P.J for m in range(P.periods + 1)]
    variants = [("global", 0, "O")] if not P.ns else [("local", n, f"O_{n}") for n in P.ns]
    for variant, n, name in variants:
        cfg = _kicked_config(P, seed, variant, n)
        if exact_only:
            table.add_series(name, xs, exact=exact_reference(cfg))
        else:
            _series_rows(table, name, xs, run_protocol(cfg, workers))
    if P.ns:
        table.add_series("O", xs, exact=exact_reference(_kicked_config(P, seed, "global")))
    return table


# --------------------------------------------------------------- Bose-Hubbard


@dataclass
class BoseHubbardParams:
    M: int = 8
    Nb: int = 4
    J: float = 1.0
    U_int: float = 2.0
    k0: list = field(default_factory=lambda: [1, 0, 1, 0, 1, 0, 1, 0])
    js: list = field(default_factory=lambda: [4])
    t_max: float = 10.0
    points: int = 21
    source: str = "cue"
    etas: list = field(default_factory=lambda: [8])
    quench_T: float = 1.0
    quench_width: float = 2.0
    N_u: int = 1000
    N_M: float = INF

    def validate(self):
        if self.source not in ("none", "cue", "quench"):
            raise ValueError("source: expected 'none', 'cue' or 'quench'")
        if len(self.k0) != self.M or sum(self.k0) != self.Nb:
            raise ValueError("k0: must list M occupations summing to Nb")
        if any(not 1 <= j <= self.M - 1 for j in self.js):
            raise ValueError("js: need 1 <= j <= M-1 for W = n_{j+1} - n_j")


def parity_operator(spec: BosonSector, site: int = 0) -> np.ndarray:
    """``exp(-i pi n_site)`` in the sector."""
    occ = boson_configurations(spec.M, spec.Nb)[:, site]
    return np.diag((-1.0) ** occ).astype(complex)


def bose_hubbard_config(P: BoseHubbardParams, j: int, seed: int, source=None) -> ProtocolConfig:
    model = BoseHubbard(P.M, P.Nb, P.J, P.U_int)
    spec = model.basis
    return ProtocolConfig(
        variant="global",
        model=model,
        W=number_difference(P.M, P.Nb, j - 1),
        V=parity_operator(spec, 0),
        k0=ProductState(spec, tuple(P.k0)),
        times=np.linspace(0, P.t_max, P.points),
        N_u=P.N_u,
        N_M=_nm(P.N_M),
        master_seed=seed,
        source=source,
        strict=False,
    )


def run_bose_hubbard(P: BoseHubbardParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    P.validate()
    table = ResultTable(x_name="Jt")
    xs = list(P.J * np.linspace(0, P.t_max, P.points))
    for j in P.js:
        base = bose_hubbard_config(P, j, seed)
        if P.source == "none" or exact_only:
            table.add_series(f"O j={j}", xs, exact=exact_reference(base))
            continue
        if P.source == "cue":
            _series_rows(table, f"cue j={j}", xs, run_protocol(bose_hubbard_config(P, j, seed, GlobalCue(base.k0.basis.dim)), workers))
        else:
            for eta in P.etas:
                src = RandomQuench(base.model, int(eta), P.quench_T, P.quench_width)
                _series_rows(table, f"eta={eta} j={j}", xs, run_protocol(bose_hubbard_config(P, j, seed, src), workers))
    return table


# ------------------------------------------------------------------ MBL (XXZ)


@dataclass
class XXZParams:
    N: int = 8
    J: float = 1.0
    Jz_values: list = field(default_factory=lambda: [1.0, 0.0])
    disorder: float = 10.0
    realizations: int = 20
    js: list = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8])
    xi: float = 2.0
    x_min: float = 0.1
    x_max: float = 3000.0
    points: int = 41

    def validate(self):
        if any(not 2 <= j <= self.N for j in self.js):
            raise ValueError("js: need 2 <= j <= N")
        if self.realizations < 2:
            raise ValueError("realizations: need at least 2")


def xxz_disorder_average(N, J, Jz, disorder, realizations, j, times, seed):
    """Disorder-averaged exact ``O``, ``O_0``, ``O_1`` for ``W = sigma^x_j`` (1-based), ``V = sigma^x_1``.

    Each value is a ratio of disorder-averaged numerator and normalization
    traces, with a delete-one jackknife error over realizations. Disorder
    realization ``r`` is drawn from ``RngStream(seed, r)``, shared across
    ``j`` and ``Jz``. Returns ``(values, sigma)`` with shape ``(3, len(times))``.
    """
    spec = SpinChain(N)
    V = embed_local(spec, 0, SX).mat
    W = embed_local(spec, j - 1, SX).mat
    num = np.empty((realizations, 3, len(times)))
    den = np.empty_like(num)
    for r in range(realizations):
        model = DisorderedXXZ.sample(N, J, Jz, disorder, RngStream(seed, r).generator(0))
        for k, W_t in enumerate(heisenberg_series(model, W, times)):
            a, b = modified_otoc_spectrum(W_t, V)
            num[r, :, k] = a[-1], a[0], a[1]
            den[r, :, k] = b[-1], b[0], b[1]
    est, sig = jackknife_ratio(num, den)
    return est, sig


def run_xxz(P: XXZParams, seed: int, workers: int = 1, exact_only: bool = True, oracle: bool = True):
    """Exact disorder averages against a rescaled time ``x = J t exp(-r / xi)``, ``r = j - 1``."""
    P.validate()
    table = ResultTable(x_name="Jt*exp(-r/xi)")
    xs = np.geomspace(P.x_min, P.x_max, P.points)
    for Jz in P.Jz_values:
        for j in P.js:
            r = j - 1
            times = xs * np.exp(r / P.xi) / P.J
            mean, se = xxz_disorder_average(P.N, P.J, Jz, P.disorder, P.realizations, j, times, seed)
            label = f"Jz={Jz:g} j={j}"
            o_lbit = sinc(4 * Jz * xs / P.J) if oracle else None
            streams = stream_range(range(P.realizations))
            for q, name in enumerate(("O", "O_0", "O_1")):
                orc = None
                if oracle:
                    orc = lbit_o0_from_o(o_lbit) if name == "O_0" else o_lbit
                table.add_series(f"{label} {name}", list(xs), exact=mean[q], sigma=se[q], oracle=orc, streams=streams)
    return table


# ------------------------------------------------------------ long-range XY


@dataclass
class LongRangeParams:
    N: int = 8
    J: float = 1.0
    alphas: list = field(default_factory=lambda: [1.5, 0.5])
    js: list = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8])
    n: int = 3
    t_max: float = 6.0
    points: int = 31

    def validate(self):
        if any(not 2 <= j <= self.N for j in self.js):
            raise ValueError("js: need 2 <= j <= N")
        if not 0 <= self.n <= self.N:
            raise ValueError("n: must lie in [0, N]")


def run_long_range(P: LongRangeParams, seed: int, workers: int = 1, exact_only: bool = True, oracle: bool = True):
    """Exact ``O`` and ``O_n`` on the ``(j, t)`` grid, ``W = sigma^z_j``, ``V = sigma^z_1``."""
    P.validate()
    table = ResultTable(x_name="Jt")
    times = np.linspace(0, P.t_max, P.points)
    spec = SpinChain(P.N)
    V = embed_local(spec, 0, SZ).mat
    for alpha in P.alphas:
        model = LongRangeXY(P.N, P.J, alpha)
        for j in P.js:
            W = embed_local(spec, j - 1, SZ).mat
            vals = np.array([modified_otoc_all(W_t, V) for W_t in heisenberg_series(model, W, times)])
            table.add_series(f"alpha={alpha:g} j={j} O", list(P.J * times), exact=vals[:, -1])
            table.add_series(f"alpha={alpha:g} j={j} O_{P.n}", list(P.J * times), exact=vals[:, P.n])
    return table


# --------------------------------------------------------- statistical errors


@dataclass
class HaarErrorsParams:
    variant: str = "global"
    n: int = 0
    Ns: list = field(default_factory=lambda: [4, 8])
    Ls: list = field(default_factory=lambda: [4])
    j: int = 2
    sweep: str = "N_u"
    N_u_values: list = field(default_factory=lambda: [10, 30, 100, 300, 1000])
    N_M_values: list = field(default_factory=lambda: [4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0])
    N_u: int = 100
    N_M: float = INF
    repetitions: int = 20
    ps: list = field(default_factory=lambda: [0.0])

    def validate(self):
        if self.variant not in ("global", "local"):
            raise ValueError("variant: expected 'global' or 'local'")
        if self.sweep not in ("N_u", "N_M"):
            raise ValueError("sweep: expected 'N_u' or 'N_M'")
        if any(L > N for L in self.Ls for N in self.Ns):
            raise ValueError("Ls: block length cannot exceed N")
        if self.j < 2 or any(self.j > L for L in self.Ls):
            raise ValueError("j: must sit in the first block (2 <= j <= L)")
        if self.repetitions < 2:
            raise ValueError("repetitions: need at least 2")


def haar_config(N, L, j, variant, n, N_u, N_M, p, seed) -> ProtocolConfig:
    """Haar-block protocol at the time where the block length is ``L`` (``v_B = 1``)."""
    return ProtocolConfig(
        variant=variant,
        n=n,
        model=HaarBlock(N, 1.0),
        W=pauli_z(N, j - 1),
        V=embed_local(SpinChain(N), 0, SZ),
        k0=_up(N),
        times=(float(L - 1),),
        N_u=N_u,
        N_M=N_M,
        noise=NoiseModel(p=p),
        master_seed=seed,
        strict=False,
    )


def haar_error_curve(N, L, j, variant, n, sweep, values, N_u, N_M, repetitions, p, seed):
    """RMS error of the estimator over independent repetitions, for each swept value.

    Repetition ``k`` uses stream ids ``k * N_u_max + i``. For an ``N_u`` sweep
    the smaller ensembles are prefixes of the largest one. Returns
    ``(rms, rms_stderr, exact)``.
    """
    values = list(values)
    nu_max = max(values) if sweep == "N_u" else N_u
    probe = haar_config(N, L, j, variant, n, max(nu_max, 2), _nm(N_M), p, seed)
    exact = float(exact_reference(probe)[0])
    sq = np.empty((repetitions, len(values)))
    for k in range(repetitions):
        ids = range(k * nu_max, (k + 1) * nu_max)
        if sweep == "N_u":
            num, den = collect_terms(probe, stream_ids=ids)
            for i, nu in enumerate(values):
                est, _ = jackknife_ratio(num[:nu], den[:nu])
                sq[k, i] = (est[0] - exact) ** 2
        else:
            for i, nm in enumerate(values):
                cfg = haar_config(N, L, j, variant, n, nu_max, _nm(nm), p, seed)
                num, den = collect_terms(cfg, stream_ids=ids)
                est, _ = jackknife_ratio(num, den)
                sq[k, i] = (est[0] - exact) ** 2
    msq = np.nanmean(sq, axis=0)
    rms = np.sqrt(msq)
    se = np.nanstd(sq, axis=0, ddof=1) / np.sqrt(repetitions) / (2 * np.maximum(rms, 1e-300))
    return rms, se, exact


def run_haar_errors(P: HaarErrorsParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    P.validate()
    values = P.N_u_values if P.sweep == "N_u" else P.N_M_values
    table = ResultTable(x_name=P.sweep)
    for N in P.Ns:
        for L in P.Ls:
            for p in P.ps:
                name = f"{P.variant} n={P.n} N={N} L={L} p={p:g}"
                if exact_only:
                    exact = float(exact_reference(haar_config(N, L, P.j, P.variant, P.n, 2, None, p, seed))[0])
                    table.add_series(name, values, exact=[exact] * len(values))
                    continue
                rms, se, exact = haar_error_curve(N, L, P.j, P.variant, P.n, P.sweep, values, P.N_u, P.N_M,
                                                  P.repetitions, p, seed)
                nus = values if P.sweep == "N_u" else [P.N_u] * len(values)
                orc = [1 / math.sqrt(v) for v in nus] if oracle else None
                nu_max = max(nus)
                table.add_series(name, values, rms, se, [0.0] * len(values), orc,
                                 streams=stream_range(range(P.repetitions * nu_max)))
    return table


# ---------------------------------------------------------------- decoherence


@dataclass
class LindbladParams:
    N: int = 6
    j: int = 4
    J: float = 1.0
    h_x: float = 1.0
    h_z: float = 0.809
    T: float = 1.6
    gammas: list = field(default_factory=lambda: [0.0, 0.01, 0.05])
    periods: int = 30
    N_u: int = 100
    n: int = 0

    def validate(self):
        if self.N > 8:
            raise ValueError("N: density-matrix evolution limited to N <= 8")
        if not 2 <= self.j <= self.N:
            raise ValueError("j: need 2 <= j <= N")


def run_lindblad(P: LindbladParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    P.validate()
    model = KickedIsing(P.N, P.J, P.h_x, P.h_z, P.T)
    periods = list(range(P.periods + 1))
    xs = [m * P.T * P.J for m in periods]
    table = ResultTable(x_name="Jt")
    spec = SpinChain(P.N)
    W = embed_local(spec, P.j - 1, SZ).mat
    V = embed_local(spec, 0, SZ).mat
    exact0 = np.array([modified_otoc_all(W_t, V)[P.n] for W_t in heisenberg_series(model, W, [m * P.T for m in periods])])
    if exact_only:
        table.add_series(f"O_{P.n} gamma=0", xs, exact=exact0)
        return table
    res = decoherence_study(model, P.j - 1, P.gammas, periods, P.N_u, master_seed=seed, n=P.n)
    for gamma in P.gammas:
        est, sig = res[float(gamma)]
        exact = exact0 if gamma == 0 else None
        table.add_series(f"O_{P.n} gamma={gamma:g}", xs, est, sig, exact, streams=stream_range(range(P.N_u)))
    return table


# ------------------------------------------------------------------- mismatch


@dataclass
class MismatchParams:
    Ls: list = field(default_factory=lambda: [4, 6, 8])
    thetas: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.15, 0.2])
    N_u: int = 1000

    def validate(self):
        if any(t < 0 for t in self.thetas):
            raise ValueError("thetas: angles must be >= 0")
        if any(L < 1 or L > 10 for L in self.Ls):
            raise ValueError("Ls: block lengths in [1, 10]")


def run_mismatch(P: MismatchParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    """``O_0`` with mismatched second-branch unitaries against ``theta^2 L``; the exact value is 1."""
    P.validate()
    table = ResultTable(x_name="theta^2*L")
    for L in P.Ls:
        xs = [t * t * L for t in P.thetas]
        if exact_only:
            table.add_series(f"L={L}", xs, exact=[1.0] * len(xs))
            continue
        est, sig = mismatch_study(L, P.thetas, P.N_u, master_seed=seed + 104729 * L, workers=workers)
        table.add_series(f"L={L}", xs, est, sig, [1.0] * len(xs), streams=stream_range(range(P.N_u)))
    return table


# -------------------------------------------------------------------- thermal


@dataclass
class ThermalParams:
    N: int = 4
    J: float = 1.0
    Jz: float = 1.0
    disorder: float = 1.0
    j: int = 3
    betas: list = field(default_factory=lambda: [0.05, 0.1])
    t_max: float = 4.0
    points: int = 9
    N_u: int = 2000

    def validate(self):
        if not 2 <= self.j <= self.N:
            raise ValueError("j: need 2 <= j <= N")


def run_thermal(P: ThermalParams, seed: int, workers: int = 1, exact_only: bool = False, oracle: bool = True):
    """First-order thermal OTOC: protocol estimate, first-order trace formula, brute-force ``O_S``."""
    P.validate()
    model = DisorderedXXZ.sample(P.N, P.J, P.Jz, P.disorder, RngStream(seed, 0).generator(99))
    spec = SpinChain(P.N)
    times = np.linspace(0, P.t_max, P.points)
    W = embed_local(spec, P.j - 1, SZ).mat
    V = embed_local(spec, 0, SZ).mat
    table = ResultTable(x_name="Jt")
    for beta in P.betas:
        cfg = ProtocolConfig(variant="global", model=model, W=pauli_z(P.N, P.j - 1), V=V, k0=_up(P.N), times=times,
                             N_u=P.N_u, beta=float(beta), master_seed=seed, strict=False)
        orc = [thermal_otoc_symmetrized(model, W, V, None, beta, t) for t in times] if oracle else None
        name = f"O_S beta={beta:g}"
        if exact_only:
            table.add_series(name, list(P.J * times), exact=exact_reference(cfg), oracle=orc)
        else:
            s = run_protocol(cfg, workers)
            table.add_series(name, list(P.J * times), s.estimate, s.sigma, s.exact, orc, s.degenerate,
                             stream_range(s.stream_ids))
    return table


STUDIES = {
    "kicked": (KickedParams, run_kicked),
    "bose_hubbard": (BoseHubbardParams, run_bose_hubbard),
    "xxz": (XXZParams, run_xxz),
    "long_range": (LongRangeParams, run_long_range),
    "haar_errors": (HaarErrorsParams, run_haar_errors),
    "lindblad": (LindbladParams, run_lindblad),
    "mismatch": (MismatchParams, run_mismatch),
    "thermal": (ThermalParams, run_thermal),
}
