"""Command-line front end: parameters, verification suites, sweeps and trajectories."""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .curvature import Mode, cylinder, identity_tensor, scalar, zero
from .family import (
    b_max_first,
    b_max_second,
    first_cone_params,
    glue_family,
    params_report,
    second_cone_functional,
    second_cone_params,
)
from .io import TensorFileError, format_trajectory, read_tensor
from .lemmas import (
    RHO_SLOPE_BOUND,
    CheckRecord,
    family_inequality_sides,
    verify_family_inequalities,
    verify_family_endpoints,
    verify_glue_inequalities,
    verify_second_family_inequalities,
    verify_ricci_quadratic_bound,
    verify_zero_set_inequality,
    verify_monotonicity,
    verify_ric0_gap,
    verify_rho_slope,
)
from .membership import IsotropicFunctional, OptimizerBudget, minimize_functional
from .transversality import (
    EvolutionState,
    boundary_sweep,
    cached_epsilon,
    check_prop_sharp_tangent,
    check_ric_wedge_positive,
    check_secondcone_dZ,
    cond3_shift,
    constructed_tangency,
    ode_integrate,
    z_shift,
)

DEFAULT_SEED = 20240613
DEFAULT_N = (9, 10, 11)
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    """Bad flags, config file or input file."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs; built from defaults, config file and flags."""

    n: tuple[int, ...] = DEFAULT_N
    b: tuple[float, ...] | None = None
    beta_grid: str = "200"
    samples: int = 10
    seed: int = DEFAULT_SEED
    tol: float = 1e-12
    gamma_factor: str = "both"
    out: str | None = None
    workers: int = 1
    rho_threshold: float = RHO_SLOPE_BOUND
    grid: int = 10_000
    dt: float = 1e-4
    steps: int = 100

    def __post_init__(self) -> None:
        if not self.n:
            raise UsageError("the list of dimensions is empty")
        if self.b is not None and not self.b:
            raise UsageError("the list of b values is empty")
        if self.samples < 1 or self.grid < 2 or self.workers < 1 or self.steps < 1:
            raise UsageError("samples, grid, workers and steps must be positive")
        if not (self.tol >= 0 and self.dt > 0):
            raise UsageError("tol must be nonnegative and dt positive")
        if self.gamma_factor not in ("on", "off", "both"):
            raise UsageError("gamma-factor must be on, off or both")

    @property
    def toggles(self) -> tuple[bool, ...]:
        return {"on": (True,), "off": (False,), "both": (False, True)}[self.gamma_factor]


# -- parsing helpers ------------------------------------------------------------


def parse_n_list(text: str) -> tuple[int, ...]:
    """``9,10,11`` or ``9..11``; an empty string gives an empty tuple."""
    text = text.strip()
    if not text:
        return ()
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            return tuple(range(lo, hi + 1))
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"cannot read dimension list {text!r}") from exc


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"cannot read number list {text!r}") from exc


def beta_values(text: str, B: float) -> np.ndarray:
    """Beta grid inside (0, B): a count, ``lo:hi:count`` or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, k = text.split(":")
            vals = np.linspace(float(lo), float(hi), int(k))
        elif "," in text or "." in text or "e" in text.lower():
            vals = np.array(parse_float_list(text))
        else:
            k = int(text)
            if k < 1:
                raise UsageError("beta grid count must be positive")
            vals = B * (np.arange(1, k + 1) - 0.5) / k
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"cannot read beta grid {text!r}") from exc
    if vals.size == 0 or np.any(vals <= 0) or np.any(vals >= B):
        raise UsageError(f"beta grid must be nonempty and inside (0, {B:.17g})")
    return vals


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Keys use flag names."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line without '=': {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_CONVERTERS = {
    "n": parse_n_list,
    "b": parse_float_list,
    "beta_grid": str,
    "samples": int,
    "seed": int,
    "tol": float,
    "gamma_factor": str,
    "out": str,
    "workers": int,
    "rho_threshold": float,
    "grid": int,
    "dt": float,
    "steps": int,
}


def build_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Defaults, then PINCH_SEED, then the config file, then explicit flags."""
    values: dict = {}
    if environ.get("PINCH_SEED"):
        values["seed"] = environ["PINCH_SEED"]
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        unknown = set(file_values) - set(_CONVERTERS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    for key in _CONVERTERS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    kw = {}
    for key, v in values.items():
        try:
            kw[key] = _CONVERTERS[key](v) if isinstance(v, str) else v
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {v!r}") from exc
    return RunConfig(**kw)


# -- verify -----------------------------------------------------------------------


def _run_task(task) -> list[CheckRecord]:
    fn, args = task
    out = fn(*args)
    return out if isinstance(out, list) else [out]


def _suite_second_family(n, flag, grid):
    recs = verify_second_family_inequalities(n, flag, grid)
    tag = "on" if flag else "off"
    return [replace(r, note=(r.note + ";" if r.note else "") + f"gamma_factor={tag}") for r in recs]


def _suite_ricci_quadratic(n, samples, seed, tol):
    q = second_cone_params(n, b_max_second(n))
    return verify_ricci_quadratic_bound(n, q.zeta, q.b / q.a, samples, seed, tol)


def _suite_boundary(n, b, samples, seed):
    p = first_cone_params(n, b)
    return boundary_sweep(p, samples, seed, cached_epsilon(n, b, samples=8, seed=seed))


def _suite_second(n, b, flag, samples, seed):
    rec = check_secondcone_dZ(second_cone_params(n, b, include_gamma_factor=flag), samples, seed)
    return replace(rec, note=rec.note + f";gamma_factor={'on' if flag else 'off'}")


def _suite_tangent(n, samples, seed):
    out = []
    for i in range(samples):
        S, T, F = constructed_tangency(n, seed + i)
        out.append(check_prop_sharp_tangent(S, T, frames=F[None]))
    return out


def _suite_wedge(n, seed):
    return check_ric_wedge_positive(cylinder(n) + identity_tensor(n) * 0.1)


def verify_tasks(cfg: RunConfig) -> list:
    """Ordered list of (function, args); the report follows this order."""
    tasks = []
    for n in cfg.n:
        if n not in (9, 10, 11):
            raise UsageError(f"the verification suites cover n in 9..11, got {n}")
        s = cfg.seed
        bs = cfg.b if cfg.b is not None else (b_max_first(n) / 2, b_max_first(n))
        for b in bs:
            if not 0 < b <= b_max_first(n):
                raise UsageError(f"b={b} outside (0, {b_max_first(n):.17g}] for n={n}")
        tasks += [
            (verify_glue_inequalities, (n,)),
            *[(_suite_second_family, (n, f, cfg.grid)) for f in cfg.toggles],
            (verify_monotonicity, (n, cfg.grid)),
            (verify_rho_slope, (n, cfg.grid, cfg.rho_threshold)),
            (verify_family_inequalities, (n, cfg.grid)),
            (verify_family_endpoints, (n, cfg.grid)),
            (verify_ric0_gap, (n, 100 * cfg.samples, s, cfg.tol)),
            (_suite_ricci_quadratic, (n, 100 * cfg.samples, s, cfg.tol)),
            (verify_zero_set_inequality, (n, max(1, cfg.samples // 5), s)),
            *[(_suite_boundary, (n, b, cfg.samples, s)) for b in bs],
            *[(_suite_second, (n, bt, f, max(1, cfg.samples // 5), s))
              for bt in (b_max_second(n) / 2, b_max_second(n)) for f in cfg.toggles],
            (_suite_tangent, (n, max(1, cfg.samples // 5), s)),
            (_suite_wedge, (n, s)),
        ]
    return tasks


def run_tasks(tasks: list, workers: int) -> list[CheckRecord]:
    if workers <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    return [r for group in results for r in group]


def format_report(records: list[CheckRecord]) -> str:
    """JSON lines in task order, then ``#`` summary lines."""
    lines = [r.to_json() for r in records]
    active = [r for r in records if not r.skipped]
    lines.append(f"# records = {len(records)}")
    lines.append(f"# passed = {sum(r.passed for r in active)}")
    lines.append(f"# failed = {sum(not r.passed for r in active)}")
    lines.append(f"# skipped = {len(records) - len(active)}")
    lines.append(f"# flagged = {sum(r.flagged for r in records)}")
    mins: dict[str, float] = {}
    for r in active:
        if math.isfinite(r.margin):
            mins[r.lemma_id] = min(mins.get(r.lemma_id, math.inf), r.margin)
    for key, v in mins.items():
        lines.append(f"# min_margin[{key}] = {v:.17g}")
    return "\n".join(lines) + "\n"


def report_exit(records: list[CheckRecord]) -> int:
    return EXIT_OK if all(r.passed for r in records if not r.skipped) else EXIT_FAIL


# -- sweep ------------------------------------------------------------------------

SWEEP_COLUMNS = (
    "beta", "family", "b", "zeta", "gap_s1", "gap_s2", "gap_s3",
    "zmin_cylinder", "zmin_round", "eps_pic1",
)
_SWEEP_BUDGET = OptimizerBudget(starts=8, iters=150, polish_iters=200, polish_starts=2)


def pic1_shift_epsilon(R, budget: OptimizerBudget = _SWEEP_BUDGET) -> float:
    """Smallest eps >= 0 with ``R + eps scal(R) id^id`` weakly PIC1."""
    fun = IsotropicFunctional(R.pair_matrix(), Mode.PIC1, weight=(4.0, 4.0), name="pic1_ratio")
    m = minimize_functional(fun, budget, None).min_value
    return max(0.0, -m) / scalar(R)


def _z_boundary_cylinder(q):
    """Cylinder shifted along id^id onto the zero set of Z."""
    S, _, _ = z_shift(cylinder(q.n), q, _SWEEP_BUDGET)
    return S


def sweep_row(n: int, beta: float, flag: bool) -> list:
    g = glue_family(n, beta)
    nan = float("nan")
    row = [beta, g.family, g.local_b]
    cyl = cylinder(n) * (1.0 / scalar(cylinder(n)))
    if g.family == "first":
        p = first_cone_params(n, g.local_b)
        sides = family_inequality_sides(n, np.array([g.local_b]))
        gaps = [float((sides[k][1] - sides[k][0])[0]) for k in sorted(sides)]
        row += [nan, *gaps, nan, nan]
        probe = cyl + identity_tensor(n) * cond3_shift(cyl, p.gamma)
    else:
        q = second_cone_params(n, g.local_b, include_gamma_factor=flag)
        zc = minimize_functional(second_cone_functional(cyl, q), _SWEEP_BUDGET, None).min_value
        rnd = identity_tensor(n) * (1.0 / (2 * n * (n - 1)))
        zr = minimize_functional(second_cone_functional(rnd, q), _SWEEP_BUDGET, None).min_value
        row += [q.zeta, nan, nan, nan, zc, zr]
        probe = _z_boundary_cylinder(q)
    row.append(pic1_shift_epsilon(probe))
    return row


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return "nan" if not math.isfinite(v) else f"{v:.12g}"


def format_sweep(rows: list[list]) -> str:
    lines = ["# " + " ".join(SWEEP_COLUMNS)]
    lines += [" ".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- output -----------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_params(cfg: RunConfig) -> int:
    if len(cfg.n) != 1 or cfg.b is None or len(cfg.b) != 1:
        raise UsageError("params needs exactly one --n and one --b")
    n, b = cfg.n[0], cfg.b[0]
    try:
        text = params_report(n, b)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(text, cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    start = time.perf_counter()
    records = run_tasks(verify_tasks(cfg), cfg.workers)
    _emit(format_report(records), cfg.out)
    print(f"wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return report_exit(records)


def cmd_sweep(cfg: RunConfig) -> int:
    start = time.perf_counter()
    flag = cfg.gamma_factor != "off"
    tasks = []
    for n in cfg.n:
        if n not in (9, 10, 11):
            raise UsageError(f"the sweep covers n in 9..11, got {n}")
        B = b_max_first(n) + b_max_second(n)
        tasks += [(n, float(beta), flag) for beta in beta_values(cfg.beta_grid, B)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(sweep_row, *zip(*tasks)))
    else:
        rows = [sweep_row(*t) for t in tasks]
    if len(cfg.n) > 1:
        rows = [[t[0], *r] for t, r in zip(tasks, rows)]
        text = format_sweep(rows).replace("# beta", "# n beta", 1)
    else:
        text = format_sweep(rows)
    _emit(text, cfg.out)
    print(f"wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, tensor_path: str) -> int:
    S = read_tensor(tensor_path)
    if len(cfg.n) == 1 and cfg.n != DEFAULT_N and cfg.n[0] != S.n:
        raise UsageError(f"--n {cfg.n[0]} does not match the tensor dimension {S.n}")
    params = None
    if cfg.b is not None:
        if len(cfg.b) != 1:
            raise UsageError("evolve takes a single --b")
        try:
            params = first_cone_params(S.n, cfg.b[0])
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    eps = cached_epsilon(S.n, cfg.b[0]) if params is not None else 1e-3
    state = EvolutionState(S, zero(S.n), 0.0, params, eps)
    traj = ode_integrate(state, cfg.dt, cfg.steps, record_every=1)
    _emit(format_trajectory(traj), cfg.out)
    last = traj.points[-1]
    margins = "none" if last.margins is None else " ".join(f"{m:.17g}" for m in last.margins)
    print(f"final t = {last.t:.17g} scal = {last.scal:.17g} margins = {margins}", file=sys.stderr)
    if traj.truncated:
        print("trajectory truncated by blow-up", file=sys.stderr)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file mirroring the flags")
    common.add_argument("--n", help="dimensions, e.g. 9,10,11 or 9..11")
    common.add_argument("--b", help="comma list of b values")
    common.add_argument("--beta-grid", dest="beta_grid", help="count, lo:hi:count, or comma list")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--gamma-factor", dest="gamma_factor", choices=("on", "off", "both"))
    common.add_argument("--out")
    common.add_argument("--workers", type=int)
    common.add_argument("--rho-threshold", dest="rho_threshold", type=float)
    common.add_argument("--grid", type=int, help="grid size for the b-grid checks")
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)

    parser = argparse.ArgumentParser(prog="pinchcone", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("params", parents=[common], help="print derived family parameters")
    sub.add_parser("verify", parents=[common], help="run the verification suites")
    sub.add_parser("sweep", parents=[common], help="per-beta margins across the joined family")
    ev = sub.add_parser("evolve", parents=[common], help="integrate the reaction ODE from a tensor file")
    ev.add_argument("tensor", help="tensor file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        if args.command == "params":
            return cmd_params(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_evolve(cfg, args.tensor)
    except (UsageError, TensorFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
