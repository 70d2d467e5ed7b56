"""Boundary sampling of the cone families and the strict-derivative checks.

Samples are built from nonnegative base operators so that the witness tensor
``T`` comes with explicit, certified lower bounds on every condition margin.
Active conditions are produced by exact shifts along ``id ^ id``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .bohm_wilking import LabParams, d_ab_closed_form, evolution_rhs, l_ab, l_ab_inverse
from .curvature import (
    CurvatureTensor,
    Mode,
    cylinder,
    identity_tensor,
    kulkarni_nomizu,
    orthonormalize,
    random_algebraic,
    ricci,
    scalar,
    sharp,
    square,
)
from .family import (
    FirstConeCertificate,
    FirstConeParams,
    SecondConeParams,
    check_first_cone_cert,
    first_cone_params,
    pair_sum,
    second_cone_functional,
)
from .lemmas import CheckRecord, make_record
from .membership import IsotropicFunctional, OptimizerBudget, min_isotropic, minimize_functional
from .stiefel import random_frames

SEPARATION = 1e-6
ACTIVE_TOL = 1e-10
BLOWUP_NORM = 1e12
MAX_TRIES = 500


class ConstructionError(RuntimeError):
    """A sampler ran out of its rejection budget."""


# -- base operators ---------------------------------------------------------------


@dataclass(frozen=True)
class BaseOperator:
    """A nonnegative operator with scal = 1 and a certified PIC lower bound."""

    S0: CurvatureTensor
    pic_lower: float
    pair_min: float


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    return orthonormalize(rng.standard_normal((1, n, n)))[0]


def draw_base_operator(n: int, rng: np.random.Generator) -> BaseOperator:
    """A cylinder-dominated nonnegative operator with scal = 1.

    Mixes the cylinder, ``A ^ A`` for a diagonal A >= 0 whose smallest entry
    sits on the cylinder axis, ``id ^ id`` and a small Bianchi perturbation X.
    PIC lower bounds add up termwise: 2 for the cylinder, 8 for ``id ^ id``,
    ``2 (l1 + l2)(l3 + l4)`` for ``A ^ A`` and ``-4 |X|_op`` for the perturbation
    (the isotropic two-forms have squared norm 4).
    """
    w_cyl = rng.uniform(0.8, 1.0)
    w_a, w_id = (1 - w_cyl) * rng.dirichlet([1.0, 1.0])
    cyl = cylinder(n, axis=0)
    eye = identity_tensor(n)
    lam = np.concatenate([[rng.uniform(0.0, 0.2)], 1 + rng.uniform(-0.2, 0.2, size=n - 1)])
    AA = kulkarni_nomizu(np.diag(lam), np.diag(lam))
    ls = np.sort(lam)
    parts = [(w_cyl, cyl, 2.0), (w_a, AA, 2 * (ls[0] + ls[1]) * (ls[2] + ls[3])), (w_id, eye, 8.0)]
    comp = np.zeros_like(cyl.components)
    lower = 0.0
    for wi, X, pic in parts:
        sc = scalar(X)
        comp += wi / sc * X.components
        lower += wi * pic / sc
    X = random_algebraic(n, rng)
    X = X * (1.0 / np.abs(np.linalg.eigvalsh(X.pair_matrix())).max())
    delta = rng.uniform(0.0, 0.03) * lower / 4
    comp = comp + delta * X.components
    lower -= 4 * delta
    sc = scalar(CurvatureTensor(comp))
    S0 = CurvatureTensor(comp / sc).rotated(random_rotation(n, rng))
    return BaseOperator(S0, lower / sc, float(np.linalg.eigvalsh(S0.pair_matrix())[0]))


def cond3_value(S: CurvatureTensor, gamma: float) -> float:
    ev = np.linalg.eigvalsh(ricci(S))
    return float(ev[0] + ev[1] + 2 * gamma / S.n * ev.sum())


def cond3_shift(S: CurvatureTensor, gamma: float) -> float:
    """The c making condition 3 exactly active for ``S + c id ^ id``.

    Ric shifts by 2(n-1)c id and scal by 2n(n-1)c, so the condition is affine in c.
    """
    return -cond3_value(S, gamma) / (4 * (S.n - 1) * (1 + gamma))


def _spectrum_separated(ev: np.ndarray, scale: float) -> bool:
    gaps = np.diff(ev)
    return bool(gaps[0] > SEPARATION * scale and gaps[-1] > SEPARATION * scale)


def _shifted_sample(params: FirstConeParams, rng: np.random.Generator, fraction: float | None):
    """S = S0 + c id^id and T = theta id^id + eta S0 with certified margins.

    ``fraction`` = 1 makes condition 3 active; None draws it from [0, 0.9].
    """
    n = params.n
    for _ in range(MAX_TRIES):
        base = draw_base_operator(n, rng)
        c3 = cond3_shift(base.S0, params.gamma)
        u = rng.uniform(0.0, 0.9) if fraction is None else fraction
        c = u * c3
        S = base.S0 + c * identity_tensor(n)
        scal = scalar(S)
        if scal <= SEPARATION:
            continue
        ev, V = np.linalg.eigh(ricci(S))
        gap = ev[-1] - ev[0]
        eta = rng.uniform(0.0, 0.2)
        sig_needed = (gap + SEPARATION) ** 2 / (params.omega * scal)
        theta_lo = max(0.0, (sig_needed - 2 * (n - 2) * eta * base.pair_min) / (4 * (n - 2)))
        theta_hi = ((1 - eta) * base.pic_lower + 8 * c - SEPARATION) / 8
        if theta_lo >= theta_hi:
            continue
        theta = rng.uniform(theta_lo, theta_hi)
        T = CurvatureTensor(theta * identity_tensor(n).components + eta * base.S0.components, bianchi=False)
        t_min = float(np.linalg.eigvalsh(T.pair_matrix())[0])
        pic_low = (1 - eta) * base.pic_lower + 8 * (c - theta)
        sig_low = 2 * (n - 2) * t_min  # each T_1p1p, T_2p2p is at least the smallest eigenvalue
        gap_low = float(np.sqrt(params.omega * scal * sig_low) - gap)
        m3 = cond3_value(S, params.gamma)
        bounds = (t_min, pic_low, m3, gap_low)
        need = [0, 1, 3] if fraction == 1 else [0, 1, 2, 3]
        if all(bounds[i] > SEPARATION for i in need):
            return FirstConeCertificate(S, T, bounds, V[:, :2].copy()), sig_low
    raise ConstructionError("rejection budget exhausted")


def sample_interior(params: FirstConeParams, seed: int) -> FirstConeCertificate:
    """A certificate with every condition strictly satisfied."""
    return _shifted_sample(params, np.random.default_rng(seed), None)[0]


def sample_boundary_cond3(params: FirstConeParams, seed: int) -> FirstConeCertificate:
    """A certificate with condition 3 exactly active and the others strict."""
    cert = _shifted_sample(params, np.random.default_rng(seed), 1.0)[0]
    if abs(cert.lower_bounds[2]) > ACTIVE_TOL:
        raise ConstructionError("condition 3 shift failed to activate")
    return cert


def sample_boundary_cond4(params: FirstConeParams, seed: int) -> FirstConeCertificate:
    """A certificate with condition 4 exactly active and the others strict.

    With ``T = theta id^id + kappa B^B``, B >= 0 supported off the span of the
    extreme Ricci eigenvectors, the pair sum equals ``4(n-2) theta`` on that
    pair and is no smaller elsewhere, so choosing theta from the Ricci gap
    makes the pair an exact minimizer with zero margin.
    """
    rng = np.random.default_rng(seed)
    n = params.n
    for _ in range(MAX_TRIES):
        base = draw_base_operator(n, rng)
        c = rng.uniform(0.0, 0.9) * cond3_shift(base.S0, params.gamma)
        S = base.S0 + c * identity_tensor(n)
        scal = scalar(S)
        if scal <= SEPARATION:
            continue
        ev, V = np.linalg.eigh(ricci(S))
        if not _spectrum_separated(ev, scal):
            continue
        e1, e2 = V[:, 0], V[:, -1]
        gap = ev[-1] - ev[0]
        theta = gap**2 / (4 * (n - 2) * params.omega * scal)
        U = V[:, 1:-1] @ random_rotation(n - 2, rng)
        r = rng.exponential(size=n - 2)
        B = (U * r) @ U.T
        slack = base.pic_lower + 8 * (c - theta) - SEPARATION
        if slack <= 0:
            continue
        kappa = rng.uniform(0.0, 0.5) * slack / (16 * r.max() ** 2)
        T = CurvatureTensor(
            theta * identity_tensor(n).components + kappa * kulkarni_nomizu(B, B).components, bianchi=False
        )
        t_min = float(np.linalg.eigvalsh(T.pair_matrix())[0])
        pic_low = base.pic_lower + 8 * (c - theta) - 16 * kappa * r.max() ** 2
        m3 = cond3_value(S, params.gamma)
        active = float(np.sqrt(params.omega * scal * pair_sum(T, e1, e2)) - gap)
        bounds = (t_min, pic_low, m3, active)
        if min(t_min, pic_low, m3) > SEPARATION and abs(active) < ACTIVE_TOL * max(1.0, gap):
            return FirstConeCertificate(S, T, bounds, np.stack([e1, e2], axis=1))
    raise ConstructionError("rejection budget exhausted")


# -- epsilon ----------------------------------------------------------------------


def estimate_epsilon(
    params: FirstConeParams,
    samples: int,
    seed: int,
    budget: OptimizerBudget = OptimizerBudget(starts=8, iters=120, polish_iters=200, polish_starts=2),
) -> float:
    """Half the smallest sampled ratio ``PIC-min(D(S)) / (8 scal(S)^2)``, at least 1e-12."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(samples):
        cert = _shifted_sample(params, rng, None)[0]
        D = d_ab_closed_form(cert.S, params.lab)
        m = min_isotropic(D, Mode.PIC, budget).min_value
        scal = scalar(cert.S)
        if m < -1e-12 * max(1.0, D.norm()):
            raise ArithmeticError(f"correction term left the PIC cone (min {m:.3e})")
        best = min(best, m / (8 * scal**2))
    return max(0.5 * best, 1e-12)


@lru_cache(maxsize=64)
def cached_epsilon(n: int, b: float, samples: int = 32, seed: int = 0) -> float:
    return estimate_epsilon(first_cone_params(n, b), samples, seed)


# -- derivative checks --------------------------------------------------------------


def two_smallest_sum_derivative(ev: np.ndarray, V: np.ndarray, dM: np.ndarray, k: int = 2) -> float:
    """Directional derivative of the sum of the k smallest eigenvalues.

    Eigenvalue clusters straddling the cutoff contribute the smallest
    eigenvalues of ``dM`` restricted to the cluster.
    """
    scale = max(1.0, float(np.abs(ev).max()))
    out, i, left = 0.0, 0, k
    while left > 0:
        j = i + 1
        while j < len(ev) and ev[j] - ev[i] <= 1e-9 * scale:
            j += 1
        block = V[:, i:j].T @ dM @ V[:, i:j]
        w = np.linalg.eigvalsh(0.5 * (block + block.T))
        take = min(left, j - i)
        out += float(np.sum(w[:take]))
        left -= take
        i = j
    return out


def cond3_derivative(S: CurvatureTensor, params: FirstConeParams) -> float:
    """``d/dt (Ric11 + Ric22 + 2 gamma/n scal)`` minimized over the active pairs."""
    ev, V = np.linalg.eigh(ricci(S))
    dric = ricci(evolution_rhs(S, params.lab))
    return two_smallest_sum_derivative(ev, V, dric) + 2 * params.gamma / S.n * float(np.trace(dric))


def cond3_identity(n: int, b) -> tuple:
    """Both sides of ``2(a-b) + gamma(1-2b) = b(1+(n-2)b)^2/(2+(n-3)b)``."""
    a = (2 + (n - 2) * b) ** 2 * b / (2 * (2 + (n - 3) * b))
    gamma = b / (2 + (n - 3) * b)
    return 2 * (a - b) + gamma * (1 - 2 * b), b * (1 + (n - 2) * b) ** 2 / (2 + (n - 3) * b)


def check_prop_cond3_derivative(cert: FirstConeCertificate, params: FirstConeParams) -> CheckRecord:
    S = cert.S
    scal = scalar(S)
    m3 = cond3_value(S, params.gamma)
    if abs(m3) > ACTIVE_TOL * max(1.0, abs(scal)):
        raise ValueError(f"condition 3 is not active (margin {m3:.3e})")
    lhs, rhs = cond3_identity(params.n, params.b)
    rel = abs(lhs - rhs) / abs(rhs)
    el, er = cond3_identity(params.n, Fraction(params.b))
    exact_ok = el == er
    d = cond3_derivative(S, params)
    rec = make_record(
        "cond3_derivative", params.n, f"b={params.b:.17g}", 0.0, d, d, 0.0,
        "sampled boundary certificate", strict=True,
        note=f"identity_rel_dev={rel:.2e};identity_exact={exact_ok};scal={scal:.6g}",
    )
    if rel > 1e-13 or not exact_ok:
        rec.passed = False
    return rec


def cond4_derivative_sides(
    cert: FirstConeCertificate, params: FirstConeParams, epsilon: float
) -> tuple[float, float, float]:
    """(d/dt gap, d/dt bound, claim bound) at the certificate's active pair."""
    S, T = cert.S, cert.T
    e1, e2 = cert.active_pair[:, 0], cert.active_pair[:, 1]
    scal = scalar(S)
    sig = pair_sum(T, e1, e2)
    ric = ricci(S)
    dric = ricci(evolution_rhs(S, params.lab))
    lhs = float(e2 @ dric @ e2 - e1 @ dric @ e1)
    dscal = float(np.trace(dric))
    S2 = square(S)
    dT = CurvatureTensor(S2.components + epsilon * scal**2 * identity_tensor(S.n).components, bianchi=False)
    dsig = pair_sum(dT, e1, e2)
    rw = np.sqrt(params.omega)
    rhs = 0.5 * rw * (np.sqrt(scal / sig) * dsig + np.sqrt(sig / scal) * dscal)
    sigma = np.sqrt(scal / sig)
    claim = 0.5 * rw * sigma * pair_sum(S2, e1, e2) + 0.5 * rw / sigma * (
        params.P_coef * float(np.sum(ric**2)) + params.Q_coef * scal**2
    )
    return lhs, float(rhs), float(claim)


def check_prop_cond4_derivative(
    cert: FirstConeCertificate, params: FirstConeParams, epsilon: float
) -> CheckRecord:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    e1, e2 = cert.active_pair[:, 0], cert.active_pair[:, 1]
    sig = pair_sum(cert.T, e1, e2)
    if sig <= 0:
        return make_record("cond4_derivative", params.n, f"b={params.b:.17g}", None, None, float("nan"), 0.0,
                           "sampled boundary certificate", skipped=True, note="pair sum vanishes")
    lhs, rhs, claim = cond4_derivative_sides(cert, params, epsilon)
    rec = make_record(
        "cond4_derivative", params.n, f"b={params.b:.17g}", lhs, rhs, rhs - lhs, 0.0,
        "sampled boundary certificate", strict=True,
        note=f"claim_margin={claim - lhs:.6e};epsilon={epsilon:.6e}",
    )
    if claim - lhs <= 0:
        rec.passed = False
    return rec


def check_prop_sharp_tangent(
    S: CurvatureTensor,
    T: CurvatureTensor,
    budget: OptimizerBudget = OptimizerBudget(starts=24),
    frames: np.ndarray | None = None,
) -> CheckRecord:
    """S-sharp must be nonnegative wherever S - T touches the PIC boundary.

    ``frames`` (shape ``(m, n, 4)``) are extra candidate frames, such as a
    known touching frame, evaluated alongside the optimizer's result.
    """
    n = S.n
    diff = S.components - T.components
    dnorm = float(np.sqrt(np.sum(diff**2)))
    M = CurvatureTensor(diff, bianchi=False).pair_matrix()
    sharp_fun = IsotropicFunctional(sharp(S).pair_matrix(), Mode.PIC)
    tol = 1e-7 * max(S.norm() ** 2, 1e-300)
    if dnorm == 0.0:
        F = random_frames(budget.starts, n, 4, np.random.default_rng(budget.seed))
        vals = sharp_fun.evaluate(F)[0]
        worst, touch, tangent = float(vals.min()), 0.0, True
    else:
        diff_fun = IsotropicFunctional(M, Mode.PIC)
        rep = minimize_functional(diff_fun, budget)
        touch, frame = rep.min_value, rep.argmin_probe.frame.vectors
        for F in frames if frames is not None else ():
            v = diff_fun.value_at(F, 1.0, 1.0)
            if v < touch:
                touch, frame = v, F
        worst = sharp_fun.value_at(frame, 1.0, 1.0)
        tangent = touch < 1e-8 * dnorm
    margin = worst + tol if tangent else max(worst + tol, 0.0)
    return make_record(
        "sharp_tangent", n, "probe", touch, worst, margin, 0.0, f"seed={budget.seed}",
        note=f"tangent={tangent}",
    )


def constructed_tangency(n: int, seed: int, budget: OptimizerBudget = OptimizerBudget(starts=24)):
    """(S, T, frame) with T >= 0 and S - T weakly PIC, vanishing at ``frame``."""
    rng = np.random.default_rng(seed)
    base = draw_base_operator(n, rng)
    eta = rng.uniform(0.0, 0.5)
    rep = min_isotropic(base.S0, Mode.PIC, budget)
    F = rep.argmin_probe.frame.vectors
    m = IsotropicFunctional.of(base.S0, Mode.PIC).value_at(F, 1.0, 1.0)
    theta = (1 - eta) * m / 8
    T = CurvatureTensor(theta * identity_tensor(n).components + eta * base.S0.components, bianchi=False)
    return base.S0, T, F


# -- second family ----------------------------------------------------------------


@dataclass
class SecondConeSample:
    """A second-family tensor with Z = 0 at ``(frame, lam)``.

    ``certified`` is True when first-family membership of the image is backed
    by the witness in ``first_cert``; otherwise only the hypotheses the
    derivative argument uses (Z >= 0, PIC, the Ricci pair bound) were checked.
    """

    S: CurvatureTensor
    frame: np.ndarray
    lam: float
    recheck_min: float
    certified: bool
    first_cert: FirstConeCertificate | None = None


def z_shift_weight(params: SecondConeParams) -> tuple[float, float]:
    """Z(S + c id^id) - Z(S) = c (k0 + k2 lam^2)."""
    r = (params.n - 1) * np.sqrt(2 * params.a)
    return 4.0 + 4.0 * r, 4.0 - 4.0 * r


def _recertify(cert: FirstConeCertificate, sig_low: float, c_first: float, first: FirstConeParams):
    """Certified margins of ``cert.S + c_first id^id`` with the old witness, or None."""
    S1 = cert.S + c_first * identity_tensor(cert.S.n)
    pic_low = cert.lower_bounds[1] + 8 * c_first
    scal1 = scalar(S1)
    if scal1 <= 0 or pic_low < 0:
        return None
    m3 = cond3_value(S1, first.gamma)
    ev = np.linalg.eigvalsh(ricci(S1))
    m4 = float(np.sqrt(first.omega * scal1 * sig_low) - (ev[-1] - ev[0]))
    if m3 < 0 or m4 < 0:
        return None
    return FirstConeCertificate(S1, cert.T, (cert.lower_bounds[0], pic_low, m3, m4))


def z_shift(S: CurvatureTensor, params: SecondConeParams, budget: OptimizerBudget):
    """Shift S along ``id ^ id`` so that the minimum of Z becomes zero.

    Z changes by ``c (k0 + k2 lam^2)``, so the minimum of the weighted ratio
    gives the exact shift.  Returns the shifted tensor and the minimizing probe.
    """
    k0, k2 = z_shift_weight(params)
    H = np.sqrt(2 * params.a) * ricci(S)
    ratio = IsotropicFunctional(S.pair_matrix(), Mode.PIC1, H=H, weight=(k0, k2), name="Z")
    rep = minimize_functional(ratio, budget, ricci(S))
    c = -rep.min_value
    return S + c * identity_tensor(S.n), c, rep.argmin_probe


def construct_second_cone_boundary(
    params: SecondConeParams, rng: np.random.Generator, budget: OptimizerBudget, certified: bool = True
) -> SecondConeSample | None:
    """A tensor with Z >= 0 and Z = 0 at a found probe.

    With ``certified`` the start is an interior first-family certificate mapped
    into the second family, and the shifted image must keep a witness.  Otherwise
    the start is ``id ^ id`` plus a random Bianchi perturbation, and the shifted
    tensor must satisfy the hypotheses the derivative argument relies on:
    the PIC bound on the largest Ricci eigenvalue and the Ricci pair bound.
    Returns None when these checks fail.
    """
    n = params.n
    alt = OptimizerBudget(budget.starts, budget.iters, budget.polish_iters, budget.polish_starts, budget.seed + 7919)
    shifted = None
    if certified:
        first = params.first_max
        cert, sig_low = _shifted_sample(first, rng, None)
        S0 = l_ab_inverse(l_ab(cert.S, first.lab), params.lab)
        S, c, probe = z_shift(S0, params, budget)
        shifted = _recertify(cert, sig_low, c * params.lab.scal_factor / first.lab.scal_factor, first)
        if shifted is None:
            return None
    else:
        X = random_algebraic(n, rng)
        X = X * (1.0 / np.abs(np.linalg.eigvalsh(X.pair_matrix())).max())
        S0 = identity_tensor(n) * (1.0 / (2 * n * (n - 1))) + X * (rng.uniform(0.02, 0.5) / (n * (n - 1)))
        S, c, probe = z_shift(S0, params, budget)
        ev = np.linalg.eigvalsh(ricci(S))
        if ricci_pair_lower(S, params.zeta) < 0 or ev[-1] > 0.5 * ev.sum():
            return None
    check = minimize_functional(second_cone_functional(S, params), alt, ricci(S))
    return SecondConeSample(S, probe.frame.vectors, probe.lam, check.min_value, certified, shifted)


def second_cone_dZ(S: CurvatureTensor, frame: np.ndarray, lam: float, params: SecondConeParams) -> float:
    """Time derivative of Z at a fixed probe along ``dS/dt = Q(S) + D(S)``."""
    Sdot = evolution_rhs(S, params.lab)
    H = np.sqrt(2 * params.a) * ricci(Sdot)
    fun = IsotropicFunctional(Sdot.pair_matrix(), Mode.PIC1, H=H)
    return fun.value_at(frame, lam, 1.0)


def second_cone_interior_bound(S: CurvatureTensor, lam: float, params: SecondConeParams) -> float:
    n, a, b, z = params.n, params.a, params.b, params.zeta
    inner = a * (1 + (n - 2) * (1 - z)) - 2 * b * z**2 * (n**2 - 2 * n + 2) / (n - 2) ** 2
    return 8 * np.sqrt(2 * a) * (1 - lam**2) / n**2 * inner * scalar(S) ** 2


def ricci_pair_lower(S: CurvatureTensor, zeta: float) -> float:
    """``Ric11 + Ric22 - 2(1-zeta)/n scal`` minimized over pairs."""
    ev = np.linalg.eigvalsh(ricci(S))
    return float(ev[0] + ev[1] - 2 * (1 - zeta) / S.n * ev.sum())


def check_ric_wedge_positive(S: CurvatureTensor, budget: OptimizerBudget = OptimizerBudget(starts=16)) -> CheckRecord:
    ric = ricci(S)
    ev = np.linalg.eigvalsh(ric)
    m = min_isotropic(kulkarni_nomizu(ric, ric), Mode.PIC, budget).min_value
    lower = 2 * (ev[0] + ev[1]) * (ev[2] + ev[3])
    rec = make_record("ric_wedge_pic", S.n, "probe", lower, m, m, 0.0, f"seed={budget.seed}", strict=True,
                      note=f"pair_sum={ev[0] + ev[1]:.6e}")
    if ev[0] + ev[1] <= 0:
        rec.skipped = True
        rec.passed = False
    return rec


def check_secondcone_dZ(
    params: SecondConeParams,
    samples: int,
    seed: int,
    budget: OptimizerBudget = OptimizerBudget(starts=24, iters=200, polish_iters=600),
    max_retries: int = 5,
    try_certified: bool = True,
) -> CheckRecord:
    """Time derivative of Z at constructed zeros of Z.

    Each sample first tries a certified second-family tensor and falls back to
    tensors that satisfy the hypotheses of the derivative argument.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    worst = None
    built = skipped = ricci_fail = bound_fail = certified = 0
    lams = []
    for i in range(samples):
        sample = None
        for r in range(max_retries):
            b = OptimizerBudget(budget.starts, budget.iters, budget.polish_iters, budget.polish_starts,
                                seed * 1000 + i * max_retries + r)
            sample = construct_second_cone_boundary(params, rng, b, certified=r == 0 and try_certified)
            if sample is not None and sample.recheck_min > -1e-9 * max(1.0, scalar(sample.S)):
                break
            sample = None
        if sample is None:
            skipped += 1
            continue
        built += 1
        certified += sample.certified
        lams.append(sample.lam)
        S = sample.S
        dz = second_cone_dZ(S, sample.frame, sample.lam, params)
        scale = scalar(S) ** 2
        if ricci_pair_lower(S, params.zeta) < -1e-12 * scalar(S):
            ricci_fail += 1
        if sample.lam < 1 - 1e-9:
            if dz < second_cone_interior_bound(S, sample.lam, params) - 1e-9 * scale:
                bound_fail += 1
            rel = dz / scale
        else:
            rel = dz / scale + 1e-9
        if worst is None or rel < worst[1]:
            worst = (dz, rel, sample.lam)
    if worst is None:
        return make_record("second_cone_dZ", params.n, f"b={params.b:.17g}", None, None, float("nan"), 0.0,
                           f"seed={seed}", skipped=True, note="no boundary tensor could be constructed")
    rec = make_record(
        "second_cone_dZ", params.n, f"b={params.b:.17g}", 0.0, worst[0], worst[1], 0.0,
        f"seed={seed},built={built},certified={certified},skipped={skipped}", strict=True,
        note=f"lam_at_worst={worst[2]:.6f};lam_range=[{min(lams):.4f},{max(lams):.4f}];"
        f"ricci_lower_failures={ricci_fail};interior_bound_failures={bound_fail}",
    )
    if ricci_fail or bound_fail:
        rec.passed = False
    return rec


# -- integration ------------------------------------------------------------------


@dataclass
class EvolutionState:
    """Coupled state of the reaction ODE for S and its witness T.

    ``params`` may be None for the bare ODE with a = b = 0.
    """

    S: CurvatureTensor
    T: CurvatureTensor
    t: float
    params: FirstConeParams | None
    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.S.n != self.T.n or (self.params is not None and self.params.n != self.S.n):
            raise ValueError("dimensions do not match")

    @property
    def lab(self) -> LabParams:
        return self.params.lab if self.params is not None else LabParams(0.0, 0.0, self.S.n)


@dataclass
class TrajectoryPoint:
    t: float
    scal: float
    margins: tuple[float, float, float, float] | None
    norm: float


@dataclass
class Trajectory:
    points: list[TrajectoryPoint]
    final: EvolutionState
    truncated: bool = False
    steps_taken: int = 0
    states: list[EvolutionState] = field(default_factory=list)


def _rhs(S: np.ndarray, T: np.ndarray, lab: LabParams, eps: float):
    St = CurvatureTensor(S)
    dS = evolution_rhs(St, lab).components
    dT = square(St).components + eps * scalar(St) ** 2 * identity_tensor(St.n).components
    return dS, dT


def rk4_step(S: np.ndarray, T: np.ndarray, dt: float, lab: LabParams, eps: float):
    k1 = _rhs(S, T, lab, eps)
    k2 = _rhs(S + 0.5 * dt * k1[0], T + 0.5 * dt * k1[1], lab, eps)
    k3 = _rhs(S + 0.5 * dt * k2[0], T + 0.5 * dt * k2[1], lab, eps)
    k4 = _rhs(S + dt * k3[0], T + dt * k3[1], lab, eps)
    S = S + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    T = T + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return S, T


def state_margins(state: EvolutionState, budget: OptimizerBudget) -> tuple[float, float, float, float] | None:
    if state.params is None or scalar(state.S) < 0:
        return None
    return check_first_cone_cert(FirstConeCertificate(state.S, state.T), state.params, budget).margins


def ode_integrate(
    state: EvolutionState,
    dt: float,
    steps: int,
    record_every: int | None = None,
    margins: bool = True,
    budget: OptimizerBudget = OptimizerBudget(starts=8, iters=100, polish_iters=200, polish_starts=2),
) -> Trajectory:
    """Classical RK4 on the coupled (S, T) system, re-symmetrizing every step."""
    if not dt > 0 or steps < 1:
        raise ValueError("need dt > 0 and steps >= 1")
    every = record_every or max(1, steps // 10)
    lab = state.lab

    def record(st):
        return TrajectoryPoint(
            st.t, scalar(st.S), state_margins(st, budget) if margins else None, st.S.norm()
        )

    points = [record(state)]
    S, T, t = state.S.components, state.T.components, state.t
    cur = state
    truncated = False
    taken = 0
    for k in range(1, steps + 1):
        S, T = rk4_step(S, T, dt, lab, state.epsilon)
        if not np.all(np.isfinite(S)) or np.sqrt(np.sum(S**2)) > BLOWUP_NORM:
            truncated = True
            break
        t = state.t + k * dt
        cur = EvolutionState(CurvatureTensor(S), CurvatureTensor(T, bianchi=False), t, state.params, state.epsilon)
        S, T = cur.S.components, cur.T.components
        taken = k
        if k % every == 0 or k == steps:
            points.append(record(cur))
    return Trajectory(points, cur, truncated, taken)


def id_ray_solution(k0: float, n: int, t):
    """Exact ``k(t)`` for ``S = k id^id`` under ``dS/dt = Q(S)``."""
    return k0 / (1 - 4 * (n - 1) * k0 * np.asarray(t))


def boundary_sweep(params: FirstConeParams, count: int, seed: int, epsilon: float) -> list[CheckRecord]:
    """Condition-3 and condition-4 boundary samples with their derivative checks."""
    out = []
    for i in range(count):
        out.append(check_prop_cond3_derivative(sample_boundary_cond3(params, seed + i), params))
        out.append(check_prop_cond4_derivative(sample_boundary_cond4(params, seed + i), params, epsilon))
    return out
