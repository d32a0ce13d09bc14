"""Plain-text ``HMFIELD 1`` field files and deterministic JSON output.

Layout::

    HMFIELD 1 <C|R> <nx> <ny> <x0> <y0> <s>
    <i> <j> <re> [<im>] <mask>        # nx*ny lines, i outer, j inner

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import ComplexField, Field, Grid, RealField

MAGIC = "HMFIELD"
VERSION = "1"


class FieldFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


def format_field(f: Field) -> str:
    g = f.grid
    kind = "C" if isinstance(f, ComplexField) else "R"
    lines = [f"{MAGIC} {VERSION} {kind} {g.nx} {g.ny} {fmt(g.x0)} {fmt(g.y0)} {fmt(g.s)}"]
    vals, mask = f.values, f.mask
    for i in range(g.nx):
        for j in range(g.ny):
            v = vals[i, j]
            m = "1" if mask[i, j] else "0"
            if kind == "C":
                lines.append(f"{i} {j} {fmt(v.real)} {fmt(v.imag)} {m}")
            else:
                lines.append(f"{i} {j} {fmt(v)} {m}")
    return "\n".join(lines) + "\n"


def parse_field(text: str) -> Field:
    rows = text.splitlines()
    if not rows:
        raise FieldFormatError("empty field file")
    head = rows[0].split()
    if len(head) != 8 or head[0] != MAGIC or head[1] != VERSION or head[2] not in ("C", "R"):
        raise FieldFormatError(f"bad header: {rows[0]!r}")
    kind = head[2]
    try:
        nx, ny = int(head[3]), int(head[4])
        x0, y0, s = float(head[5]), float(head[6]), float(head[7])
    except ValueError as e:
        raise FieldFormatError(f"bad header: {rows[0]!r}") from e
    grid = Grid(x0, y0, nx, ny, s)
    body = [r for r in rows[1:] if r.strip()]
    if len(body) != nx * ny:
        raise FieldFormatError(f"expected {nx * ny} node lines, found {len(body)}")
    ncol = 5 if kind == "C" else 4
    vals = np.empty((nx, ny), dtype=complex if kind == "C" else float)
    mask = np.empty((nx, ny), dtype=bool)
    for k, row in enumerate(body):
        parts = row.split()
        if len(parts) != ncol:
            raise FieldFormatError(f"line {k + 2}: expected {ncol} columns")
        i, j = int(parts[0]), int(parts[1])
        if (i, j) != divmod(k, ny):
            raise FieldFormatError(f"line {k + 2}: node ({i}, {j}) out of row-major order")
        if kind == "C":
            vals[i, j] = complex(float(parts[2]), float(parts[3]))
        else:
            vals[i, j] = float(parts[2])
        if parts[-1] not in ("0", "1"):
            raise FieldFormatError(f"line {k + 2}: mask must be 0 or 1")
        mask[i, j] = parts[-1] == "1"
    cls = ComplexField if kind == "C" else RealField
    return cls(grid, vals, mask)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_field(path, f: Field) -> None:
    atomic_write(path, format_field(f))


def read_field(path) -> Field:
    return parse_field(Path(path).read_text())


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return "null"
        return fmt(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_json(str(k), indent, level)}: {_json(v, indent, level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits (byte-stable output)."""
    return _json(obj, indent, 0) + "\n"
