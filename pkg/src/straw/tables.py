"""CSV/JSON readers and writers for lattice fields and result tables.

Floats are written with 17 significant digits so that values read back
compare equal to the ones written.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import Lattice


class InputError(ValueError):
    """Malformed or inconsistent user input."""


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


@dataclass(frozen=True)
class LatticeTable:
    """A full regular lattice read from CSV.

    ``origin`` is the smallest coordinate on each axis, so file coordinates
    need not start at 1. ``values`` holds one column per value name in
    lattice (row-major) order.
    """

    lattice: Lattice
    origin: tuple[int, ...]
    columns: dict

    def file_coords(self) -> np.ndarray:
        return self.lattice.coords() - 1 + np.asarray(self.origin)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    except FileNotFoundError as exc:
        raise InputError(f"input file not found: {path}") from exc
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration as exc:
        raise InputError(f"{path}: empty file") from exc
    return header, [row for row in reader]


def read_lattice_csv(path, value_names: tuple[str, ...] = ("p",)) -> LatticeTable:
    """Read ``coord1[,coord2[,coord3]],<values>`` covering every lattice cell once."""
    header, rows = _read_rows(path)
    n_values = len(value_names)
    dim = len(header) - n_values
    expected = [f"coord{i + 1}" for i in range(dim)] + list(value_names)
    if not 1 <= dim <= 3 or header != expected:
        raise InputError(
            f"{path}: header must be coord1[,coord2[,coord3]],{','.join(value_names)}; got {','.join(header)}"
        )
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        coords = np.array([[int(v) for v in row[:dim]] for row in rows], dtype=np.int64)
        values = np.array([[float(v) for v in row[dim:]] for row in rows], dtype=float)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed row ({exc})") from exc
    if any(len(row) != dim + n_values for row in rows):
        raise InputError(f"{path}: every row needs {dim + n_values} fields")

    origin = coords.min(axis=0)
    extents = tuple(int(e) for e in coords.max(axis=0) - origin + 1)
    lat = Lattice(extents)
    idx = np.ravel_multi_index(tuple((coords - origin).T), extents)
    if np.unique(idx).size != idx.size:
        raise InputError(f"{path}: duplicate lattice cells")
    if idx.size != lat.size:
        raise InputError(f"{path}: incomplete lattice ({idx.size} of {lat.size} cells present)")
    columns = {}
    for j, name in enumerate(value_names):
        col = np.empty(lat.size)
        col[idx] = values[:, j]
        columns[name] = col
    return LatticeTable(lat, tuple(int(o) for o in origin), columns)


def lattice_rows(table: LatticeTable, columns: dict):
    coords = table.file_coords()
    names = list(columns)
    header = [f"coord{i + 1}" for i in range(table.lattice.dimension)] + names
    rows = (
        [*map(int, coords[i])] + [columns[n][i] for n in names] for i in range(table.lattice.size)
    )
    return header, rows
