"""File formats: numeric CSV, TSV edge lists, ground-truth archives and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.12g"


def fmt(x) -> str:
    return FLOAT_FMT % x


def _is_number(token) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_matrix_csv(path, delimiter=",", header=None):
    """Read a numeric matrix; returns ``(values, column_names or None)``.

    ``header=None`` detects a header row by the first row containing a
    non-numeric token.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError(f"{path}: no data")
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    names = [c.strip() for c in rows[0]] if header else None
    body = rows[1:] if header else rows
    width = len(body[0]) if body else 0
    if width == 0 or any(len(r) != width for r in body):
        raise ValueError(f"{path}: ragged or empty rows")
    try:
        values = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite entry")
    return values, names


def write_matrix_csv(path, matrix, names=None, delimiter=","):
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        if names is not None:
            fh.write(delimiter.join(names) + "\n")
        for row in m:
            fh.write(delimiter.join(fmt(v) for v in row) + "\n")


def edge_rows(omega):
    """1-based ``(i, j, value)`` for the diagonal and the nonzero upper triangle."""
    omega = np.asarray(omega, dtype=float)
    p = omega.shape[0]
    return [(i + 1, j + 1, float(omega[i, j])) for i in range(p) for j in range(i, p) if i == j or omega[i, j] != 0]


def write_edge_list(path, omega):
    with open(path, "w") as fh:
        for i, j, v in edge_rows(omega):
            fh.write(f"{i}\t{j}\t{fmt(v)}\n")


def read_edge_list(path, p=None) -> np.ndarray:
    """Rebuild a symmetric matrix from a 1-based upper-triangle edge list."""
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected i<TAB>j<TAB>value")
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            if i < 1 or j < i:
                raise ValueError(f"{path}:{lineno}: indices must satisfy 1 <= i <= j")
            entries.append((i - 1, j - 1, v))
    size = max((j + 1 for _, j, _ in entries), default=0) if p is None else p
    omega = np.zeros((size, size))
    for i, j, v in entries:
        omega[i, j] = omega[j, i] = v
    return omega


def off_diagonal_edges(omega):
    return [(i, j, v) for i, j, v in edge_rows(omega) if i != j]


def save_truth(directory, truth):
    """Write ``truth_edges.tsv`` and ``truth_diag.csv`` for a GroundTruth."""
    directory = Path(directory)
    write_edge_list(directory / "truth_edges.tsv", truth.omega)
    write_matrix_csv(directory / "truth_diag.csv", np.diag(truth.omega)[:, None])
    return directory / "truth_edges.tsv", directory / "truth_diag.csv"


def load_truth(edges_path, diag_path=None):
    from .simulate import GroundTruth

    omega = read_edge_list(edges_path)
    if diag_path is not None:
        diag, _ = read_matrix_csv(diag_path, header=False)
        diag = diag.ravel()
        if diag.size > omega.shape[0]:
            grown = np.zeros((diag.size, diag.size))
            grown[: omega.shape[0], : omega.shape[0]] = omega
            omega = grown
        np.fill_diagonal(omega, diag)
    return GroundTruth.from_matrix(omega)


def read_returns_csv(path, delimiter=","):
    """Returns CSV with a header row, a date column and one column per ticker."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header and at least one row")
    header, body = rows[0], rows[1:]
    if any(len(r) != len(header) for r in body):
        raise ValueError(f"{path}: ragged rows")
    try:
        returns = np.array([[float(c) for c in r[1:]] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric return ({exc})") from None
    return returns, [r[0] for r in body], header[1:]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(fmt(float(obj))) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_manifest(subcommand, config, seeds=None, inputs=()):
    from . import __version__

    return {
        "subcommand": subcommand,
        "config": config,
        "seeds": seeds if seeds is not None else [],
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "version": __version__,
    }


def fixture_path(name="space_nonconvergence.csv"):
    return resources.files("pyconcord") / "data" / name
