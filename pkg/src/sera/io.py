"""CSV and JSON readers and writers with full double precision."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .exceptions import DomainError


class ParseError(DomainError):
    """Malformed input file; ``lineno`` is 1-based."""

    def __init__(self, message, path=None, lineno=None):
        where = f"{path}:{lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


def fmt(x):
    return "%.17g" % x


def write_table(path, points, values, coord="y", value_name="value"):
    """Write columns ``{coord}_1..{coord}_q, value_name`` with LF endings."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=float).ravel()
    if pts.shape[0] != vals.size:
        raise DomainError("row count mismatch between points and values")
    header = ",".join([f"{coord}_{i + 1}" for i in range(pts.shape[1])] + [value_name])
    lines = [header]
    for row, v in zip(pts, vals):
        lines.append(",".join(fmt(c) for c in row) + "," + fmt(v))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_table(path, coord="y", value_name="value"):
    """Read a table written by :func:`write_table`.

    Returns
    -------
    points : ndarray of shape (m, q)
    values : ndarray of shape (m,)

    Raises
    ------
    ParseError
        On a bad header, a wrong field count or a non-numeric field.
    """
    path = str(path)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("missing header row", path, 1)
    header = [h.strip() for h in lines[0].rstrip("\r").split(",")]
    q = len(header) - 1
    expected = [f"{coord}_{i + 1}" for i in range(q)] + [value_name]
    if q < 1 or header != expected:
        raise ParseError(f"header must be {','.join(expected) if q >= 1 else coord + '_1,...,' + value_name}, "
                         f"got {lines[0]!r}", path, 1)
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != q + 1:
            raise ParseError(f"expected {q + 1} fields, found {len(parts)}", path, k)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", path, k) from None
    arr = np.array(rows, dtype=float).reshape(-1, q + 1)
    return arr[:, :q], arr[:, q]


def write_weights(path, qm):
    write_table(path, qm.points, qm.weights, coord="y", value_name="w")


def read_weights(path):
    return read_table(path, coord="y", value_name="w")


def write_field(path, grid_points, values):
    write_table(path, grid_points, values, coord="x", value_name="value")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits and null for non-finite values."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from None
