"""Command-line runner.

::

    otoclab run CONFIG.toml [--seed S] [--workers K] [--out DIR] [--exact-only] [--no-oracle]
    otoclab reproduce PRESET [same flags]
    otoclab list-presets
    otoclab verify CONFIG.toml|all

Exit codes: 0 success, 1 failed verification, 2 invalid config or unknown
preset.
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import MAX_SEED, ConfigError, ExperimentConfig, load
from .errors import OtocLabError
from .experiments import STUDIES
from .presets import UnknownPreset, list_presets, preset_config
from .results import write_table
from .verify import CHECKS, STUDY_CHECKS, run_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed: expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError("--seed: must be an unsigned 64-bit integer")
    return seed


def _workers(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--workers: expected a positive integer, got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("--workers: must be >= 1")
    return k


def _add_run_flags(p):
    p.add_argument("--seed", type=_seed, default=None, help="override the master seed (u64)")
    p.add_argument("--workers", type=_workers, default=os.cpu_count() or 1, help="worker processes for realizations")
    p.add_argument("--out", default=None, help="output directory (default: the config's `out`)")
    p.add_argument("--exact-only", action="store_true", help="skip the protocol simulation, emit exact values")
    p.add_argument("--no-oracle", action="store_true", help="skip closed-form oracle columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otoclab", description="Randomized-measurement OTOC numerics.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config file")
    p.add_argument("config")
    _add_run_flags(p)
    p = sub.add_parser("reproduce", help="run a named preset")
    p.add_argument("preset")
    _add_run_flags(p)
    sub.add_parser("list-presets", help="list preset names and descriptions")
    p = sub.add_parser("verify", help="run invariant checks for a config, or `all`")
    p.add_argument("target")
    return parser


def execute(cfg: ExperimentConfig, out=None, workers: int = 1, exact_only: bool = False, oracle: bool = True,
            preset: str | None = None):
    """Run ``cfg`` and write its CSV and sidecar; returns the two paths."""
    _, runner = STUDIES[cfg.study]
    table = runner(cfg.params, cfg.seed, workers=workers, exact_only=exact_only, oracle=oracle)
    extra = {"study": cfg.study, "preset": preset, "exact_only": exact_only, "oracle": oracle,
             "description": cfg.description}
    return write_table(table, out or cfg.out, cfg.name, cfg.to_toml(), cfg.seed, extra)


def _run(cfg: ExperimentConfig, args, preset=None) -> int:
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    csv_path, meta_path = execute(cfg, args.out, args.workers, args.exact_only, not args.no_oracle, preset)
    print(csv_path)
    print(meta_path)
    return EXIT_OK


def _verify(target: str) -> int:
    if target == "all":
        names = list(CHECKS)
    else:
        cfg = load(target)
        names = cfg.checks or STUDY_CHECKS.get(cfg.study, list(CHECKS))
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ConfigError(f"experiment.checks: unknown check {unknown[0]!r}; expected one of {sorted(CHECKS)}")
    results = run_checks(names)
    for r in results:
        print(r.to_json())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, desc in list_presets():
                print(f"{name}\t{desc}")
            return EXIT_OK
        if args.command == "reproduce":
            return _run(preset_config(args.preset), args, preset=args.preset)
        if args.command == "run":
            return _run(load(args.config), args)
        return _verify(args.target)
    except UnknownPreset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OtocLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
