"""CSV serialisation of run logs.

One row per control step, fixed column order: time, vehicle-major states,
navigator output and derivatives, references, trim switches, inputs, attack
magnitudes, solve residual, then the derived metrics. Values are written with
17 significant digits so a parse reproduces every float exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .sim import RunLog
from .vehicle import STATE_NAMES

_NAV_ORDERS = ("y0", "y0d", "y0dd", "y0ddd")
FMT = "%.17g"


def header(m: int) -> list[str]:
    cols = ["t"]
    cols += [f"{name}_{i}" for i in range(1, m + 1) for name in STATE_NAMES]
    cols += [f"{o}_{ax}" for o in _NAV_ORDERS for ax in "xy"]
    cols += [f"z_{i}_{ax}" for i in range(1, m + 1) for ax in "xy"]
    cols += [f"switches_{i}" for i in range(1, m + 1)]
    cols += [f"u_{i}_{k}" for i in range(1, m + 1) for k in (1, 2)]
    cols += [f"attack_{i}" for i in range(1, m + 1)]
    cols += ["residual", "eta_norm", "e_tilde", "eps_tilde"]
    return cols


def to_table(run: RunLog) -> np.ndarray:
    n = len(run.t)
    return np.column_stack([
        run.t,
        run.states.reshape(n, -1),
        run.nav.reshape(n, -1),
        run.z.reshape(n, -1),
        run.switches,
        run.u.reshape(n, -1),
        run.attack,
        run.residual,
        run.eta_norm,
        run.e_tilde,
        run.eps_tilde,
    ])


def write_csv(run: RunLog, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header(run.m)) + "\n")
        np.savetxt(fh, to_table(run), fmt=FMT, delimiter=",")
    return path


def _m_from_columns(ncol: int) -> int:
    # 1 + 6m + 8 + 2m + m + 2m + m + 4 columns
    m, rem = divmod(ncol - 13, 12)
    if rem or m < 1:
        raise ValueError(f"{ncol} columns do not match the run-log layout")
    return m


def read_csv(path) -> RunLog:
    """Parse a log written by :func:`write_csv` (metric columns are recomputed)."""
    with open(path) as fh:
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    m = _m_from_columns(len(cols))
    if cols != header(m):
        raise ValueError("unexpected CSV header")
    n = data.shape[0]
    pos = 0

    def take(width):
        nonlocal pos
        block = data[:, pos:pos + width]
        pos += width
        return block

    return RunLog(
        t=take(1)[:, 0].copy(),
        states=take(6 * m).reshape(n, m, 6),
        nav=take(8).reshape(n, 4, 2),
        z=take(2 * m).reshape(n, m, 2),
        switches=take(m).copy(),
        u=take(2 * m).reshape(n, m, 2),
        attack=take(m).copy(),
        residual=take(1)[:, 0].copy(),
        eta_norm=take(1)[:, 0].copy(),
    )
