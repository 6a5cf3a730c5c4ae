"""Deterministic CSV/JSON writers.

Floats are written in shortest round-trip form (``repr``), so equal values give
equal bytes on every platform Python supports. NaN and infinities become JSON
null and empty CSV cells.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def _plain(v: Any) -> Any:
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def cell(v: Any) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([cell(v) for v in r])


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_records(path_stem: Path, fmt: str, header: Sequence[str], rows: list[Sequence[Any]]) -> Path:
    """Per-replicate table as CSV or as a JSON list of objects."""
    if fmt == "csv":
        p = path_stem.with_suffix(".csv")
        write_csv(p, header, rows)
    else:
        p = path_stem.with_suffix(".json")
        write_json(p, [dict(zip(header, r)) for r in rows])
    return p
