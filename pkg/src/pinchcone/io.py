"""Plain-text tensor files and line-delimited trajectory dumps.

Tensor files start with ``curvature n=<n> bianchi=<0|1>`` followed by one
``i j k l value`` line per generating component (1-based, ``i<j``, ``k<l``,
``(i,j) <= (k,l)``).  Missing generators are zero; blank lines and lines
starting with ``#`` are ignored.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .curvature import CurvatureTensor, from_pair_matrix, pair_indices
from .transversality import Trajectory, TrajectoryPoint

_HEADER = re.compile(r"^curvature\s+n=(\d+)\s+bianchi=([01])\s*$")
TRAJECTORY_KEYS = ("t", "scal", "margin1", "margin2", "margin3", "margin4", "norm")


class TensorFileError(ValueError):
    """The tensor file is malformed or violates the required symmetries."""


def _pair_position(n: int) -> dict[tuple[int, int], int]:
    r, c = pair_indices(n)
    return {(int(i), int(j)): p for p, (i, j) in enumerate(zip(r, c))}


def parse_tensor(text: str) -> CurvatureTensor:
    """Parse the tensor file format, raising TensorFileError on any problem."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise TensorFileError("empty tensor file")
    m = _HEADER.match(lines[0])
    if m is None:
        raise TensorFileError(f"bad header line: {lines[0]!r}")
    n, bianchi = int(m.group(1)), m.group(2) == "1"
    pos = _pair_position(n) if n >= 2 else {}
    M = np.zeros((len(pos), len(pos)))
    seen = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 5:
            raise TensorFileError(f"expected 'i j k l value', got {ln!r}")
        try:
            i, j, k, l = (int(x) - 1 for x in parts[:4])
            v = float(parts[4])
        except ValueError as exc:
            raise TensorFileError(f"unreadable line {ln!r}") from exc
        if not math.isfinite(v):
            raise TensorFileError(f"non-finite value in {ln!r}")
        if min(i, j, k, l) < 0 or max(i, j, k, l) >= n:
            raise TensorFileError(f"index out of range in {ln!r}")
        if not (i < j and k < l and (i, j) <= (k, l)):
            raise TensorFileError(f"not a canonical generator: {ln!r}")
        if (i, j, k, l) in seen:
            raise TensorFileError(f"duplicate generator: {ln!r}")
        seen.add((i, j, k, l))
        p, q = pos[(i, j)], pos[(k, l)]
        M[p, q] = M[q, p] = v
    try:
        return from_pair_matrix(M, n, bianchi=bianchi)
    except ValueError as exc:
        raise TensorFileError(str(exc)) from exc


def read_tensor(path: str | Path) -> CurvatureTensor:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TensorFileError(f"cannot read {path}: {exc}") from exc
    return parse_tensor(text)


def format_tensor(R: CurvatureTensor, zero_tol: float = 0.0) -> str:
    """Canonical text form; generators with ``|value| <= zero_tol`` are omitted."""
    n = R.n
    M = R.pair_matrix()
    r, c = pair_indices(n)
    out = [f"curvature n={n} bianchi={int(R.bianchi)}"]
    for p in range(len(r)):
        for q in range(p, len(r)):
            v = M[p, q]
            if abs(v) > zero_tol:
                out.append(f"{r[p] + 1} {c[p] + 1} {r[q] + 1} {c[q] + 1} {float(v)!r}")
    return "\n".join(out) + "\n"


def write_tensor(R: CurvatureTensor, path: str | Path) -> None:
    Path(path).write_text(format_tensor(R))


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def trajectory_record(p: TrajectoryPoint) -> str:
    margins = p.margins if p.margins is not None else (None,) * 4
    values = (p.t, p.scal, *margins, p.norm)
    return json.dumps({k: _finite_or_none(v) for k, v in zip(TRAJECTORY_KEYS, values)})


def format_trajectory(traj: Trajectory) -> str:
    """One JSON record per point, then ``#`` lines with the run summary."""
    lines = [trajectory_record(p) for p in traj.points]
    lines.append(f"# steps = {traj.steps_taken}")
    lines.append(f"# truncated = {int(traj.truncated)}")
    return "\n".join(lines) + "\n"


def read_trajectory(path: str | Path) -> list[dict]:
    """Records of a trajectory dump, skipping ``#`` lines."""
    rows = []
    for ln in Path(path).read_text().splitlines():
        if ln.strip() and not ln.startswith("#"):
            rows.append(json.loads(ln))
    return rows
