"""CSV readers and writers with atomic replacement of the target file."""

from __future__ import annotations

import csv
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .hjb import Grid, SolveReport, ValueGrid

VALUE_HEADER = ["y", "x", "psi", "u_star", "dividend_flag"]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


@contextmanager
def atomic_writer(path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_value_grid(path, vg: ValueGrid) -> None:
    write_rows(path, VALUE_HEADER,
               zip(vg.y, vg.x, vg.psi, vg.u_star, vg.dividend_flag.astype(bool)))


def read_value_grid(path, controls: np.ndarray, jump_formula: str) -> ValueGrid:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != VALUE_HEADER:
            raise ValueError(f"{path}: expected header {VALUE_HEADER}, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows)
    n = len(data)
    grid = Grid(n)
    if not np.allclose(data[:, 0], grid.y, rtol=0, atol=1e-15):
        raise ValueError(f"{path}: y column is not the uniform grid j/{n}")
    return ValueGrid(grid=grid, psi=data[:, 2], u_star=data[:, 3], dividend_flag=data[:, 4] != 0,
                     controls=np.asarray(controls), jump_formula=jump_formula)


def write_solve_report(path, rep: SolveReport, barrier: float) -> None:
    write_rows(path, ["iterations", "sup_residual", "converged", "policy_changes_last_iter", "mmatrix_ok",
                      "elapsed_seconds", "barrier"],
               [(rep.iterations, rep.sup_residual, rep.converged, rep.policy_changes_last_iter,
                 rep.mmatrix_ok, rep.elapsed, barrier)])
