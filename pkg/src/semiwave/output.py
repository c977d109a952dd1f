"""Deterministic JSON and CSV writers.

Floats are printed with 17 significant digits; infinities become the strings
"inf" and "-inf" so the files stay valid JSON.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _encode(obj, indent: int) -> str:
    pad, inner = " " * indent, " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 2) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (inner + json.dumps(k) + ": " + _encode(v, indent + 2) for k, v in obj.items())
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    return json.dumps(str(obj))


def dumps(obj) -> str:
    return _encode(_plain(obj), 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return path


def write_csv(path, header: list[str], *columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(format(float(v), ".17g") for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv_columns(path) -> tuple[np.ndarray, np.ndarray]:
    """First two numeric columns of a CSV file; a header row is skipped."""
    xs, us = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split(",")
        try:
            x, u = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            continue
        xs.append(x)
        us.append(u)
    return np.array(xs), np.array(us)
