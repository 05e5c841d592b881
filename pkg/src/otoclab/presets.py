"""Named experiment presets, one per reproduced figure panel."""
from __future__ import annotations

import difflib

from .config import ExperimentConfig, config_from_dict

DEFAULT_SEED = 1234

_PRESETS = {
    "fig1b": (
        "kicked Ising, global protocol: N=8, j=3, h_x=J, h_z=0.809J, JT=1.6, N_u=500, N_M=500 vs exact O(t)",
        "kicked",
        {},
    ),
    "fig1d": (
        "kicked Ising, local protocol: modified OTOCs O_n for n=0..4 (N_u=500, N_M=500) and the exact O(t)",
        "kicked",
        {"ns": [0, 1, 2, 3, 4]},
    ),
    "fig3a": (
        "Bose-Hubbard chain M=8, Nb=4, U=2J, k0=|10101010>: exact O(t) for W at j=2..7",
        "bose_hubbard",
        {"source": "none", "js": [2, 3, 4, 5, 6, 7]},
    ),
    "fig3b": (
        "Bose-Hubbard chain: O(t) estimated with N_u=1000 CUE unitaries in the particle-number sector, N_M=inf",
        "bose_hubbard",
        {"source": "cue", "js": [4, 7]},
    ),
    "fig3c": (
        "Bose-Hubbard chain, j=7: unitaries prepared via eta random quenches (T=1/J, disorder width 2J), N_u=1000",
        "bose_hubbard",
        {"source": "quench", "js": [7], "etas": [2, 4, 8, 12]},
    ),
    "fig3d": (
        "Bose-Hubbard chain, j=4: unitaries prepared via eta random quenches (T=1/J, disorder width 2J), N_u=1000",
        "bose_hubbard",
        {"source": "quench", "js": [4], "etas": [2, 4, 8, 12]},
    ),
    "fig4": (
        "disordered XXZ, N=8, disorder 10J, 20 realizations: O, O_0, O_1 vs Jt exp(-r/xi), xi=2, for J_z=J and J_z=0",
        "xxz",
        {},
    ),
    "fig5": (
        "long-range XY, alpha in {1.5, 0.5}: exact O_3 and O on the (j, t) grid",
        "long_range",
        {},
    ),
    "fig7a": (
        "Haar-block model, global protocol: statistical error vs N_M at N_u=100 for N=4, 8",
        "haar_errors",
        {"variant": "global", "sweep": "N_M", "Ns": [4, 8], "Ls": [4]},
    ),
    "fig7b": (
        "Haar-block model, local protocol n=1: statistical error vs N_M at N_u=100, N=8, L=2 and 4",
        "haar_errors",
        {"variant": "local", "n": 1, "sweep": "N_M", "Ns": [8], "Ls": [2, 4]},
    ),
    "fig7c": (
        "Haar-block model, local protocol n=1 with depolarization p in {0, 0.1, 0.3}: error vs N_M",
        "haar_errors",
        {"variant": "local", "n": 1, "sweep": "N_M", "Ns": [8], "Ls": [4], "ps": [0.0, 0.1, 0.3]},
    ),
    "fig7d": (
        "kicked Ising with spontaneous emission: O_0 estimate for N=6, j=4, N_u=100, N_M=inf, gamma in {0, 0.01, 0.05}",
        "lindblad",
        {},
    ),
    "fig8": (
        "Haar-block model, global protocol: statistical error vs N_u at N_M=inf for N=4, 8 with the 1/sqrt(N_u) reference",
        "haar_errors",
        {"variant": "global", "sweep": "N_u", "Ns": [4, 8], "Ls": [4]},
    ),
    "fig9": (
        "unitary mismatch in the second branch: O_0 error vs theta^2 L for L=4, 6, 8 and theta <= 0.2",
        "mismatch",
        {},
    ),
    "thermal-demo": (
        "first-order thermal OTOC on N=4 disordered XXZ at beta=0.05, 0.1 against the brute-force symmetrized trace",
        "thermal",
        {},
    ),
}


class UnknownPreset(KeyError):
    def __init__(self, name, suggestions):
        super().__init__(name)
        self.name = name
        self.suggestions = suggestions

    def __str__(self):
        hint = ", ".join(self.suggestions) if self.suggestions else ", ".join(sorted(_PRESETS))
        return f"unknown preset {self.name!r}; did you mean: {hint}"


def list_presets() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _, _) in _PRESETS.items()]


def preset_names() -> list[str]:
    return list(_PRESETS)


def suggest(name: str, n: int = 3) -> list[str]:
    return difflib.get_close_matches(name, list(_PRESETS), n=n, cutoff=0.4)


def preset_config(name: str, seed: int = DEFAULT_SEED) -> ExperimentConfig:
    if name not in _PRESETS:
        raise UnknownPreset(name, suggest(name))
    desc, study, params = _PRESETS[name]
    data = {
        "experiment": {"name": name, "study": study, "seed": int(seed), "description": desc},
        "params": dict(params),
    }
    return config_from_dict(data)
