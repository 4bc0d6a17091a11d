"""Dataset emission: CSV tables and JSON documents, 12 significant digits."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SIG_DIGITS = 12


class OutputPathError(ValueError):
    pass


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{SIG_DIGITS}g")


def round_for_json(obj):
    if isinstance(obj, dict):
        return {str(k): round_for_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_for_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [round_for_json(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, f".{SIG_DIGITS}g"))
    return obj


def output_path(out_dir, name: str) -> Path:
    """Path for ``name`` inside ``out_dir``; anything resolving elsewhere is refused."""
    root = Path(out_dir).resolve()
    target = (root / name).resolve()
    if target.parent != root:
        raise OutputPathError(f"refusing to write {name!r} outside {root}")
    root.mkdir(parents=True, exist_ok=True)
    return target


def write_csv(out_dir, name: str, columns: dict) -> Path:
    """Column-oriented table: header row, then one row per index."""
    names = list(columns)
    arrays = [np.asarray(columns[c]) for c in names]
    n = {a.shape[0] for a in arrays}
    if len(n) != 1:
        raise ValueError(f"columns of {name} have unequal lengths {sorted(n)}")
    path = output_path(out_dir, name)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(names)
        for row in zip(*(a.tolist() for a in arrays)):
            w.writerow([format_number(v) for v in row])
    return path


def write_json(out_dir, name: str, obj) -> Path:
    path = output_path(out_dir, name)
    path.write_text(json.dumps(round_for_json(obj), indent=2, sort_keys=False) + "\n")
    return path


def write_table(out_dir, stem: str, columns: dict, fmt: str = "csv") -> Path:
    if fmt == "csv":
        return write_csv(out_dir, f"{stem}.csv", columns)
    if fmt == "json":
        return write_json(out_dir, f"{stem}.json", {k: np.asarray(v) for k, v in columns.items()})
    raise ValueError(f"unknown format {fmt!r}")


def read_csv(path) -> dict:
    """Columns of a CSV written by :func:`write_csv`, as float arrays."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
