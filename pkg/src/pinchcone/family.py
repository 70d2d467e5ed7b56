"""Parameter data and membership certificates for the two pinching-cone families."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .bohm_wilking import LabParams
from .curvature import CurvatureTensor, Mode, check_dimension, ricci, scalar, wedge_pairs
from .membership import IsotropicFunctional, _antisym, MembershipReport, OptimizerBudget, minimize_functional
from .stiefel import descend, random_frames

SUPPORTED_DIMS = (9, 10, 11)
_RANGE_SLACK = 1e-12


def b_max_first(n: int) -> float:
    return 1.0 / (2 * n + 2)


def b_max_second(n: int) -> float:
    return 1.0 / (5 * n)


def first_cone_data(n: int, b) -> dict[str, np.ndarray]:
    """The derived quantities a, gamma, rho, omega, A, P, Q (vectorized in b)."""
    b = np.asarray(b, dtype=float)
    a = (2 + (n - 2) * b) ** 2 * b / (2 * (2 + (n - 3) * b))
    gamma = b / (2 + (n - 3) * b)
    sf = 1 + 2 * (n - 1) * a
    rf = 1 + (n - 2) * b
    rho = (
        b
        - 2 * (n - 1) * gamma * (1 - 2 * b) / n**2
        - 2 * (n - 1) * (1 + gamma) * (n**2 * b**2 - 2 * (n - 1) * (a - b) * (1 - 2 * b)) / (n**2 * sf)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.sqrt(27 * (2 + (n - 2) * b) / 8 * b * rf**2 / (n**2 * rho**3 * (2 + (n - 3) * b) ** 2))
    A = (2 + 8 * b) / ((n - 1) * (n - 4)) + 4 / n * (2 * b + (n - 2) * a)
    P = 2 * rf**2 / sf
    Q = 2 * (sf**2 - rf**2) / (n * sf)
    return {"a": a, "gamma": gamma, "rho": rho, "omega": omega, "A_coef": A, "P_coef": P, "Q_coef": Q}


@dataclass(frozen=True)
class FirstConeParams:
    n: int
    b: float
    a: float
    gamma: float
    rho: float
    omega: float
    A_coef: float
    P_coef: float
    Q_coef: float
    b_max: float
    outside_supported_dims: bool = False

    @property
    def lab(self) -> LabParams:
        return LabParams(self.a, self.b, self.n)


def first_cone_params(n: int, b: float) -> FirstConeParams:
    n = check_dimension(n)
    if n < 5:
        raise ValueError(f"the first family needs n >= 5, got n={n}")
    bm = b_max_first(n)
    if not (0.0 < b <= bm * (1 + _RANGE_SLACK)):
        raise ValueError(f"b must lie in (0, {bm:.17g}] for n={n}, got {b!r}")
    d = {k: float(v) for k, v in first_cone_data(n, b).items()}
    return FirstConeParams(n=n, b=float(b), b_max=bm, outside_supported_dims=n not in SUPPORTED_DIMS, **d)


def g_func(n: int, b):
    a = first_cone_data(n, b)["a"]
    b = np.asarray(b, dtype=float)
    return (1 + 2 * (n - 2) * a) ** 2 / (1 + 2 * (n - 1) * a) * (2 + (n - 3) * b) / (1 + (n - 2) * b)


def h_func(n: int, b):
    a = first_cone_data(n, b)["a"]
    b = np.asarray(b, dtype=float)
    return (1 + 2 * (n - 1) * a) ** 2 / ((1 + 2 * (n - 2) * a) * (1 + (n - 2) * b) ** 2)


def f_quadratic(x, y, params: FirstConeParams):
    """Quadratic form controlling the PIC-positivity of D_{a,b} on the quadrant."""
    n, a, b = params.n, params.a, params.b
    return (2 * b + (n - 2) * b**2 - 2 * a) * x * y + 2 * a * (x + 2) * (y + 2) + b**2 * (x**2 + y**2)


# -- second family --------------------------------------------------------------


def second_cone_a(n: int, b):
    return b + (n - 2) / 2 * np.asarray(b, dtype=float) ** 2


@dataclass(frozen=True)
class SecondConeParams:
    n: int
    b: float
    a: float
    zeta: float
    a_max: float
    gamma_max: float
    b_tilde_max: float
    include_gamma_factor: bool = True

    @property
    def lab(self) -> LabParams:
        return LabParams(self.a, self.b, self.n)

    @property
    def first_max(self) -> FirstConeParams:
        return first_cone_params(self.n, b_max_first(self.n))


def zeta_value(n: int, b, include_gamma_factor: bool = True):
    bm = b_max_first(n)
    d = first_cone_data(n, bm)
    a_max, g_max = float(d["a"]), float(d["gamma"])
    a = second_cone_a(n, b)
    b = np.asarray(b, dtype=float)
    z = (1 + 2 * (n - 1) * a) / (1 + 2 * (n - 1) * a_max) * (1 + (n - 2) * bm) / (1 + (n - 2) * b)
    return z * (1 + g_max) if include_gamma_factor else z


def second_cone_params(n: int, b: float, include_gamma_factor: bool = True) -> SecondConeParams:
    n = check_dimension(n)
    bt = b_max_second(n)
    if not (0.0 < b <= bt * (1 + _RANGE_SLACK)):
        raise ValueError(f"b must lie in (0, {bt:.17g}] for the second family, got {b!r}")
    d = first_cone_data(n, b_max_first(n))
    return SecondConeParams(
        n=n,
        b=float(b),
        a=float(second_cone_a(n, b)),
        zeta=float(zeta_value(n, b, include_gamma_factor)),
        a_max=float(d["a"]),
        gamma_max=float(d["gamma"]),
        b_tilde_max=bt,
        include_gamma_factor=include_gamma_factor,
    )


def zeta(params: SecondConeParams) -> float:
    return params.zeta


def zeta_quadratic_margin(n: int, z):
    """``1 + (n-2)(1-z) - 2 z^2 (n^2-2n+2)/(n-2)^2``."""
    return 1 + (n - 2) * (1 - z) - 2 * z**2 * (n**2 - 2 * n + 2) / (n - 2) ** 2


@dataclass(frozen=True)
class GlueResult:
    family: str
    local_b: float
    B: float


def glue_family(n: int, beta: float) -> GlueResult:
    """Which family parametrizes the joined cone at ``beta`` and at what local b."""
    bm, bt = b_max_first(n), b_max_second(n)
    B = bm + bt
    if not 0.0 < beta < B:
        raise ValueError(f"beta must lie in (0, {B:.17g}), got {beta!r}")
    if beta <= bm:
        return GlueResult("first", float(beta), B)
    return GlueResult("second", float(B - beta), B)


def format17(v: float) -> str:
    """17 significant digits in scientific notation with an unpadded exponent."""
    mant, exp = f"{v:.16e}".split("e")
    return f"{mant}e{int(exp)}"


def params_report(n: int, b: float) -> str:
    """Plain ``key = value`` listing of every derived parameter."""
    p = first_cone_params(n, b)
    lines = [f"# first family n={n}"]
    for f in fields(p):
        v = getattr(p, f.name)
        lines.append(f"{f.name} = {format17(v)}" if isinstance(v, float) else f"{f.name} = {v}")
    if b <= b_max_second(n) * (1 + _RANGE_SLACK):
        for flag in (False, True):
            q = second_cone_params(n, b, include_gamma_factor=flag)
            tag = "on" if flag else "off"
            lines.append(f"# second family gamma-factor {tag}")
            for key in ("a", "zeta", "a_max", "gamma_max", "b_tilde_max"):
                lines.append(f"second.{key}[{tag}] = {format17(getattr(q, key))}")
    return "\n".join(lines) + "\n"


# -- certificates ---------------------------------------------------------------


@dataclass(frozen=True)
class FirstConeCertificate:
    """A tensor ``S`` with its witness ``T``.

    Samplers also attach certified lower bounds on the four condition margins
    and, for boundary samples, the orthonormal pair where a condition is active.
    """

    S: CurvatureTensor
    T: CurvatureTensor
    lower_bounds: tuple[float, float, float, float] | None = None
    active_pair: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.S.n != self.T.n:
            raise ValueError("certificate tensors have different dimensions")


@dataclass(frozen=True)
class ConditionReport:
    """Margins of the four certificate conditions (>= 0 means satisfied)."""

    t_min_eig: float
    pic_margin: float
    ricci_pair_margin: float
    gap_margin: float
    pic_probe: object = None
    gap_pair: np.ndarray | None = None

    @property
    def margins(self) -> tuple[float, float, float, float]:
        return (self.t_min_eig, self.pic_margin, self.ricci_pair_margin, self.gap_margin)

    def holds(self, tol: float = 1e-9) -> bool:
        return all(m >= -tol for m in self.margins)


def ricci_pair_margin(S: CurvatureTensor, gamma: float) -> float:
    """Min over orthonormal pairs of Ric11 + Ric22 + (2 gamma / n) scal."""
    ev = np.linalg.eigvalsh(ricci(S))
    return float(ev[0] + ev[1] + 2 * gamma / S.n * ev.sum())


def pair_sum(T: CurvatureTensor, e1: np.ndarray, e2: np.ndarray) -> float:
    """``sum_{p>=3} (T_1p1p + T_2p2p)`` for the orthonormal pair (e1, e2)."""
    RT = ricci(T)
    w = wedge_pairs(e1, e2)
    return float(e1 @ RT @ e1 + e2 @ RT @ e2 - 2 * w @ T.pair_matrix() @ w)


class _GapFunctional:
    """``c sqrt(Sigma(e1, e2)) - (Ric22 - Ric11)`` on orthonormal pairs."""

    def __init__(self, S: CurvatureTensor, T: CurvatureTensor, coef: float) -> None:
        self.ric = ricci(S)
        self.RT = ricci(T)
        self.MT = T.pair_matrix()
        self.coef = coef
        self.n = S.n

    def value(self, F: np.ndarray) -> np.ndarray:
        e1, e2 = F[..., 0], F[..., 1]
        w = wedge_pairs(e1, e2)
        sig = (
            np.einsum("mi,ij,mj->m", e1, self.RT, e1)
            + np.einsum("mi,ij,mj->m", e2, self.RT, e2)
            - 2 * np.einsum("mi,ij,mj->m", w, self.MT, w)
        )
        gap = np.einsum("mi,ij,mj->m", e2, self.ric, e2) - np.einsum("mi,ij,mj->m", e1, self.ric, e1)
        return self.coef * np.sqrt(np.maximum(sig, 0.0)) - gap, sig

    def value_and_grad(self, F: np.ndarray):
        e1, e2 = F[..., 0], F[..., 1]
        val, sig = self.value(F)
        Y = _antisym(wedge_pairs(e1, e2) @ self.MT, self.n)
        ds1 = 2 * e1 @ self.RT - 2 * np.einsum("mij,mj->mi", Y, e2)
        ds2 = 2 * e2 @ self.RT + 2 * np.einsum("mij,mj->mi", Y, e1)
        fac = self.coef / (2 * np.sqrt(np.maximum(sig, 1e-300)))
        g1 = fac[:, None] * ds1 + 2 * e1 @ self.ric
        g2 = fac[:, None] * ds2 - 2 * e2 @ self.ric
        return val, np.stack([g1, g2], axis=-1)


def gap_margin(
    S: CurvatureTensor,
    T: CurvatureTensor,
    omega: float,
    refine_starts: int = 8,
    iters: int = 300,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Min over orthonormal pairs of the fourth certificate condition.

    Ricci eigenvector pairs are enumerated first, then the best few (plus a
    few random pairs) are refined by projected descent.
    """
    scal = scalar(S)
    if scal < 0:
        raise ValueError("the gap condition is undefined for negative scalar curvature")
    n = S.n
    fun = _GapFunctional(S, T, np.sqrt(omega * scal))
    V = np.linalg.eigh(fun.ric)[1]
    i, j = np.where(~np.eye(n, dtype=bool))
    F = np.stack([V[:, i].T, V[:, j].T], axis=-1)
    val, _ = fun.value(F)
    order = np.argsort(val)[:refine_starts]
    rng = np.random.default_rng(seed)
    F0 = np.concatenate([F[order], random_frames(refine_starts, n, 2, rng)])
    scale = float(np.abs(fun.ric).max() + np.abs(fun.MT).max() + fun.coef) + 1e-300
    Fr, vr = descend(fun.value_and_grad, F0, iters=iters, step=0.1 / scale)
    allF = np.concatenate([F, Fr])
    allv = np.concatenate([val, vr])
    k = int(np.argmin(allv))
    return float(allv[k]), allF[k]


def check_first_cone_cert(
    cert: FirstConeCertificate,
    params: FirstConeParams,
    budget: OptimizerBudget = OptimizerBudget(starts=16, iters=150, polish_iters=300),
) -> ConditionReport:
    S, T = cert.S, cert.T
    if S.n != params.n:
        raise ValueError("certificate and parameter dimensions differ")
    t_min = float(np.linalg.eigvalsh(T.pair_matrix())[0])
    diff = IsotropicFunctional(S.pair_matrix() - T.pair_matrix(), Mode.PIC)
    pic = minimize_functional(diff, budget, ricci(S))
    gm, pair = gap_margin(S, T, params.omega, seed=budget.seed)
    return ConditionReport(t_min, pic.min_value, ricci_pair_margin(S, params.gamma), gm, pic.argmin_probe, pair)


def second_cone_functional(
    S: CurvatureTensor, params: SecondConeParams, literal_display: bool = False
) -> IsotropicFunctional:
    H = np.sqrt(2 * params.a) * ricci(S)
    return IsotropicFunctional(S.pair_matrix(), Mode.PIC1, H=H, include_2424=not literal_display, name="Z")


def second_cone_z_min(
    S: CurvatureTensor,
    params: SecondConeParams,
    budget: OptimizerBudget = OptimizerBudget(),
    literal_display: bool = False,
) -> MembershipReport:
    """Minimum over frames and lam of the second-family functional Z."""
    return minimize_functional(second_cone_functional(S, params, literal_display), budget, ricci(S))
