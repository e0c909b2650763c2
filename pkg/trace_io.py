#!/usr/bin/env python3
"""
Trace persistence: closed-loop logs and alpha tables as CSV.

Floats are written with 17 significant digits and read back with
round-trip precision, so totals recomputed from a file match the run
exactly. All writes go to a temporary file that is renamed into place.
"""

import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import pandas as pd

from errors import InputError
from mpc_loop import WARNING_DIVERGE, WARNING_VIOLATION, ExecutionLog

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TAIL_COLUMNS = ["stage_cost", "event", "m_n", "alpha_local", "warning", "update_j"]


def trace_columns(state_dim: int, control_dim: int) -> List[str]:
    return (["step", "time"]
            + [f"x{i + 1}" for i in range(state_dim)]
            + [f"u{i + 1}" for i in range(control_dim)]
            + TAIL_COLUMNS)


def trace_frame(log: ExecutionLog) -> pd.DataFrame:
    """One row per applied control."""
    state_dim = len(log.initial_state)
    control_dim = len(log.samples[0].control) if log.samples else 1
    columns = trace_columns(state_dim, control_dim)

    rows = []
    for sample in log.samples:
        rows.append([sample.step, sample.time, *sample.state, *sample.control,
                     sample.stage_cost, sample.event, sample.m, sample.alpha_local,
                     sample.warning, sample.update_j])
    frame = pd.DataFrame(rows, columns=columns)
    for name in ("step", "event", "m_n", "warning"):
        frame[name] = frame[name].astype("int64")
    frame["update_j"] = pd.array([s.update_j for s in log.samples], dtype="Int64")
    return frame


def atomic_write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"wrote {len(frame)} rows to {path}")
    return path


def write_trace(log: ExecutionLog, path: Union[str, Path]) -> Path:
    return atomic_write_csv(trace_frame(log), path)


def write_alpha_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    return atomic_write_csv(frame, path)


@dataclass
class TraceTotals:
    """Totals recovered from a CSV trace."""
    frame: pd.DataFrame
    closed_loop_cost: float
    schedule: List[int]
    event_count: int
    warning_count: int
    violation_count: int
    splice_count: int


def read_trace(path: Union[str, Path]) -> TraceTotals:
    path = Path(path)
    if not path.exists():
        raise InputError(f"trace file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"update_j": "Int64"})
    missing = [name for name in ["step", "time", *TAIL_COLUMNS] if name not in frame.columns]
    if missing:
        raise InputError(f"{path}: not a trace file, missing columns {missing}")

    if frame.empty:
        return TraceTotals(frame, 0.0, [0], 0, 0, 0, 0)

    steps = frame["step"].to_numpy()
    starts = frame.loc[frame["event"].ne(frame["event"].shift()), "step"].tolist()
    spliced = frame.loc[frame["update_j"].notna(), "step"].tolist()
    schedule = sorted(set(starts) | set(spliced) | {int(steps[-1]) + 1})

    warnings = frame["warning"]
    return TraceTotals(
        frame=frame,
        closed_loop_cost=math.fsum(frame["stage_cost"].tolist()),
        schedule=[int(s) for s in schedule],
        event_count=int(frame["event"].nunique()),
        warning_count=int((warnings == WARNING_DIVERGE).sum()),
        violation_count=int((warnings == WARNING_VIOLATION).sum()),
        splice_count=len(spliced),
    )
