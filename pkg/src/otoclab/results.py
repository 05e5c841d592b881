"""Result tables: fixed-column CSV plus a JSON provenance sidecar."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

COLUMNS = ("series", "x", "estimate", "sigma", "two_sigma", "exact", "oracle", "flag", "streams")
NULL = "null"


def _fmt(v) -> str:
    if v is None:
        return NULL
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return NULL
    return "%.17e" % v


def stream_range(ids) -> str:
    ids = list(ids)
    if not ids:
        return ""
    if ids == list(range(ids[0], ids[-1] + 1)):
        return f"{ids[0]}-{ids[-1]}"
    return ";".join(str(i) for i in ids)


@dataclass
class ResultTable:
    x_name: str = "t"
    rows: list = field(default_factory=list)

    def add(self, series, x, estimate=None, sigma=None, exact=None, oracle=None, flag="ok", streams=""):
        two = None if sigma is None or (isinstance(sigma, float) and math.isnan(sigma)) else 2 * float(sigma)
        self.rows.append((str(series), x, estimate, sigma, two, exact, oracle, flag, streams))

    def add_series(self, series, xs, estimate=None, sigma=None, exact=None, oracle=None, flags=None, streams=""):
        n = len(xs)

        def col(a):
            return [None] * n if a is None else list(a)

        for x, e, s, ex, o, f in zip(xs, col(estimate), col(sigma), col(exact), col(oracle), col(flags)):
            self.add(series, x, e, s, ex, o, "degenerate" if f else "ok", streams)

    def series(self, name) -> list:
        return [r for r in self.rows if r[0] == name]

    def series_names(self) -> list:
        seen = []
        for r in self.rows:
            if r[0] not in seen:
                seen.append(r[0])
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r[0], _fmt(r[1])] + [_fmt(v) for v in r[2:7]] + [r[7], r[8]])
        return buf.getvalue()


def config_hash(config_text: str) -> str:
    return hashlib.sha256(config_text.encode()).hexdigest()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("x", "estimate", "sigma", "two_sigma", "exact", "oracle"):
            r[k] = None if r[k] == NULL else float(r[k])
    return rows


def write_table(table: ResultTable, out_dir, name: str, config_text: str, seed: int, extra: dict | None = None):
    """Write ``<name>.csv`` and ``<name>.meta.json``; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.meta.json"
    csv_path.write_text(table.to_csv())
    meta = {
        "name": name,
        "version": __version__,
        "seed": int(seed),
        "config_sha256": config_hash(config_text),
        "config": config_text,
        "x_name": table.x_name,
        "columns": list(COLUMNS),
        "rows": len(table.rows),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        meta.update(extra)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path
