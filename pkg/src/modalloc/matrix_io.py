"""Plain-text matrix files (``.mtx.txt``) and plant triples.

Layout: first line ``rows cols``, then one row per line with values written
at 17 significant digits.
"""

from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .lti import StateSpaceModel

SUFFIX = ".mtx.txt"


def fmt(x):
    return "%.17g" % x


def write_matrix(path, matrix):
    arr = np.array(matrix, dtype=float, ndmin=2)
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    lines += [" ".join(fmt(x) for x in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise DimensionMismatch(f"{path}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise DimensionMismatch(f"{path}: first line must be integer 'rows cols'") from None
    values = tokens[2:]
    if len(values) != rows * cols:
        raise DimensionMismatch(f"{path}: header says {rows}x{cols} but found {len(values)} values")
    try:
        return np.array([float(v) for v in values], dtype=float).reshape(rows, cols)
    except ValueError as exc:
        raise DimensionMismatch(f"{path}: {exc}") from None


def triple_paths(prefix):
    prefix = str(prefix)
    return {k: Path(f"{prefix}_{k}{SUFFIX}") for k in ("A", "B", "C", "D")}


def write_plant(prefix, model):
    paths = triple_paths(prefix)
    Path(paths["A"]).parent.mkdir(parents=True, exist_ok=True)
    write_matrix(paths["A"], model.a_matrix)
    write_matrix(paths["B"], model.b_matrix)
    write_matrix(paths["C"], model.c_matrix)
    return paths


def read_plant(prefix):
    """Load ``<prefix>_A/_B/_C.mtx.txt``; a ``_D`` file is rejected."""
    paths = triple_paths(prefix)
    if paths["D"].exists():
        raise ConfigError(f"{paths['D']}: plants with a feedthrough (D) term are not supported")
    for key in ("A", "B", "C"):
        if not paths[key].exists():
            raise ConfigError(f"plant matrix file not found: {paths[key]}")
    return StateSpaceModel(read_matrix(paths["A"]), read_matrix(paths["B"]),
                           read_matrix(paths["C"]))
