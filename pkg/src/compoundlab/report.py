"""CSV/JSON writers and the plain-text run summary."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .capacity import CAPACITY_COLUMNS
from .coding import CODING_COLUMNS
from .converse import CONVERSE_COLUMNS
from .spectrum import SPECTRUM_COLUMNS

COLUMNS = {
    "spectrum": SPECTRUM_COLUMNS,
    "capacity": CAPACITY_COLUMNS,
    "converse": CONVERSE_COLUMNS,
    "coding": CODING_COLUMNS,
    "modes": ["preset", "state", "n", "mode", "mass"],
    "entropy_decay": ["i", "s", "h_p_i"],
    "props": ["sequence", "check", "passed", "lhs", "rhs", "tol"],
    "checks": ["preset", "check", "value", "reference", "tolerance", "passed"],
}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(_jsonable(v))
    return v


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """Write rows with a fixed column order; an empty row set yields the header only."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in columns})
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: str | Path, payload: dict, timestamp: bool = True) -> Path:
    """JSON summary; the timestamp is the only non-reproducible field of a run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if timestamp:
        body["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    return path


def write_tables(out_dir: str | Path, tables: dict[str, list[dict]]) -> list[Path]:
    """One CSV per table name, in the registered column order."""
    out_dir = Path(out_dir)
    written = []
    for name, rows in tables.items():
        cols = COLUMNS.get(name) or (list(rows[0]) if rows else [])
        written.append(write_csv(out_dir / f"{name}.csv", cols, rows))
    return written


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4f}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


def emit_report(outcomes: Sequence, tables: dict[str, list[dict]] | None = None) -> str:
    """Human-readable summary: one block per preset, one line per check (4 decimals)."""
    lines = []
    for o in outcomes:
        lines.append(f"[{'PASS' if o.passed else 'FAIL'}] {o.name}")
        for c in o.checks:
            ref = "" if c["reference"] is None else f"  (reference {_fmt(c['reference'])}"
            if ref and c.get("tolerance") is not None:
                ref += f", tol {_fmt(c['tolerance'])}"
            ref += ")" if ref else ""
            lines.append(f"    {'ok ' if c['passed'] else 'BAD'} {c['check']}: {_fmt(c['value'])}{ref}")
    tables = tables or {}
    if tables.get("entropy_decay"):
        lines.append("")
        lines.append("per-symbol entropy h(p_i) of the decaying noise (first rows per state)")
        lines.append(f"{'s':>6} {'i':>5} {'h(p_i)':>8}")
        seen: dict = {}
        for r in tables["entropy_decay"]:
            seen[r["s"]] = seen.get(r["s"], 0) + 1
            if seen[r["s"]] <= 5 or r["i"] in (50, 100, 200):
                lines.append(f"{r['s']:>6} {r['i']:>5} {r['h_p_i']:>8.4f}")
    if tables.get("modes"):
        lines.append("")
        lines.append("modes of the noise entropy density at the largest n")
        for r in tables["modes"]:
            lines.append(f"    {r['preset']} {r['state']}: {r['mode']:.4f} (mass {r['mass']:.4f})")
    n_pass = sum(o.passed for o in outcomes)
    lines.append("")
    lines.append(f"{n_pass}/{len(outcomes)} presets passed")
    return "\n".join(lines)


__all__ = ["COLUMNS", "write_csv", "write_json", "write_tables", "emit_report"]
