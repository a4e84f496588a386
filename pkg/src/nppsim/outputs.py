"""Bit-stable file formats: diagnostics CSV, snapshot NDJSON, summaries.

Floats are written with 17 significant digits so that values round-trip
exactly through text.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import yaml

from .diagnostics import CSV_SCHEMA_VERSION

SCHEMA_LINE = f"# nppsim-csv v{CSV_SCHEMA_VERSION}"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows) -> None:
    """Write a versioned CSV: schema line, header row, then formatted rows."""
    lines = [SCHEMA_LINE, ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Return ``(header, rows)`` with numeric cells parsed as float."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        row = []
        for cell in ln.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return header, rows


def snapshot_records(t, c, phi, species_names):
    recs = [{"time": float(t), "species_or_phi": name, "values": [float(v) for v in ci]}
            for name, ci in zip(species_names, c)]
    recs.append({"time": float(t), "species_or_phi": "phi", "values": [float(v) for v in phi]})
    return recs


def _dump_record(rec) -> str:
    # json emits shortest round-trip reprs, which are exact
    return json.dumps(rec, separators=(",", ":"), allow_nan=False)


def write_ndjson(path, records) -> None:
    Path(path).write_text("".join(_dump_record(r) + "\n" for r in records))


def read_ndjson(path) -> list:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{n}: invalid JSON ({exc})") from exc
        if not isinstance(rec, dict) or not {"time", "species_or_phi", "values"} <= set(rec):
            raise ValueError(f"{path}:{n}: record lacks time/species_or_phi/values")
        out.append(rec)
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(yaml.safe_dump(_plain(summary), sort_keys=False))
