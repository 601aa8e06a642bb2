"""Deterministic CSV/JSON writers with metadata sidecars."""
from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

__all__ = ["fmt", "csv_text", "json_text", "write_text", "write_csv", "sidecar_path",
           "write_sidecar", "jsonable"]


def fmt(x) -> str:
    """Shortest round-trip text for a number; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0.0:
        return "0.0"  # folds -0.0
    return repr(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return 0.0 if x == 0.0 else x
    return obj


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_csv(path, header, rows) -> None:
    write_text(path, csv_text(header, rows))


def sidecar_path(path) -> str:
    return os.fspath(path) + ".meta.json"


def write_sidecar(path, meta: dict) -> str:
    out = sidecar_path(path)
    write_text(out, json_text(meta))
    return out
