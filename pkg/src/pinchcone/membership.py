"""Minimization of isotropic-curvature functionals over frames and (lambda, mu).

All cone tests reduce to the family

    V = c1313 + lam^2 c1414 + mu^2 c2323 + w lam^2 mu^2 c2424
        - 2 lam mu (c1324 - c1423) + (1 - lam^2)(H11 + H22)

optionally divided by a positive weight ``k0 + k2 lam^2``.  For a fixed frame
the inner minimization over (lam, mu) is done in closed form and the frame is
then improved by projected gradient descent on the Stiefel manifold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .curvature import (
    CurvatureTensor,
    FourFrame,
    IsotropicProbe,
    Mode,
    as_form,
    frame_components,
    identity_tensor,
    orthonormalize,
    pair_indices,
    ricci,
    scalar,
    wedge_pairs,
)
from .stiefel import descend, random_frames

DENSE_SCAN_MAX_DIM = 6
_CHUNK = 4096


@dataclass(frozen=True)
class OptimizerBudget:
    starts: int = 64
    iters: int = 200
    polish_iters: int = 1000
    polish_starts: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise ValueError("optimizer budget needs at least one start")
        if self.iters < 0 or self.polish_iters < 0:
            raise ValueError("iteration counts must be nonnegative")


@dataclass(frozen=True)
class MembershipReport:
    mode: Mode
    min_value: float
    argmin_probe: IsotropicProbe
    method: str
    samples_used: int
    seed: int | None = None
    tol: float = 1e-9
    functional: str = "isotropic"

    @property
    def is_member(self) -> bool:
        return self.min_value >= -self.tol


def _antisym(Y: np.ndarray, n: int) -> np.ndarray:
    r, c = pair_indices(n)
    out = np.zeros(Y.shape[:-1] + (n, n))
    out[..., r, c] = Y
    out[..., c, r] = -Y
    return out


def _quad_candidates(A2, K, hi=1.0):
    """Minimizer candidates of ``A2 x^2 - 2 K x`` on [0, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(A2 > 0, np.clip(K / A2, 0.0, hi), 0.0)
    return np.stack([np.zeros_like(K), np.full_like(K, hi), inner], axis=-1)


@dataclass(frozen=True)
class IsotropicFunctional:
    """Frame functional for a tensor given by its pair matrix.

    ``H`` adds the ``(1 - lam^2)(H11 + H22)`` term (PIC1 mode only),
    ``include_2424`` toggles the ``lam^2 mu^2 c2424`` term, and ``weight``
    ``(k0, k2)`` turns the functional into the ratio ``V / (k0 + k2 lam^2)``.
    """

    M: np.ndarray
    mode: Mode
    H: np.ndarray | None = None
    include_2424: bool = True
    weight: tuple[float, float] | None = None
    name: str = "isotropic"
    n: int = field(init=False)

    def __post_init__(self) -> None:
        M = np.asarray(self.M, dtype=float)
        N = M.shape[0]
        n = int(round((1 + np.sqrt(1 + 8 * N)) / 2))
        object.__setattr__(self, "M", 0.5 * (M + M.T))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "n", n)
        if self.H is not None:
            if self.mode is not Mode.PIC1:
                raise ValueError("the H term is only defined for the PIC1-type functional")
            object.__setattr__(self, "H", as_form(self.H, n))
        if self.weight is not None:
            k0, k2 = self.weight
            if k0 <= 0 or k0 + k2 <= 0:
                raise ValueError("weight must be positive on [0, 1]")

    @classmethod
    def of(cls, R: CurvatureTensor, mode: Mode | str, **kw) -> IsotropicFunctional:
        return cls(R.pair_matrix(), Mode(mode), **kw)

    # -- evaluation -----------------------------------------------------------

    def _hsum(self, F: np.ndarray) -> np.ndarray:
        if self.H is None:
            return np.zeros(F.shape[0])
        e1, e2 = F[..., 0], F[..., 1]
        return np.einsum("mi,ij,mj->m", e1, self.H, e1) + np.einsum("mi,ij,mj->m", e2, self.H, e2)

    def _value(self, c, h, lam, mu):
        w = 1.0 if self.include_2424 else 0.0
        v = (
            c["1313"]
            + lam**2 * c["1414"]
            + mu**2 * c["2323"]
            + w * lam**2 * mu**2 * c["2424"]
            - 2.0 * lam * mu * (c["1324"] - c["1423"])
            + (1.0 - lam**2) * h
        )
        if self.weight is not None:
            v = v / (self.weight[0] + self.weight[1] * lam**2)
        return v

    def inner_minimize(self, c: dict, h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closed-form minimum over (lam, mu) for each frame of a batch."""
        m = h.shape[0]
        one = np.ones(m)
        if self.mode is Mode.PIC:
            return self._value(c, h, one, one), one, one
        w = 1.0 if self.include_2424 else 0.0
        K = c["1324"] - c["1423"]
        if self.mode is Mode.PIC1:
            A0 = c["1313"] + c["2323"] + h
            A2 = c["1414"] + w * c["2424"] - h
            if self.weight is None:
                lams = _quad_candidates(A2, K)
            else:
                k0, k2 = self.weight
                # stationary points of (A0 + A2 x^2 - 2 K x) / (k0 + k2 x^2)
                qa, qb, qc = K * k2, A2 * k0 - A0 * k2, -K * k0
                disc = np.sqrt(np.maximum(qb**2 - 4 * qa * qc, 0.0))
                with np.errstate(divide="ignore", invalid="ignore"):
                    r1 = np.where(qa != 0, (-qb + disc) / (2 * qa), np.where(qb != 0, -qc / qb, 0.0))
                    r2 = np.where(qa != 0, (-qb - disc) / (2 * qa), 0.0)
                r1 = np.clip(np.nan_to_num(r1), 0.0, 1.0)
                r2 = np.clip(np.nan_to_num(r2), 0.0, 1.0)
                lams = np.stack([np.zeros(m), one, r1, r2], axis=-1)
            vals = self._value({k: v[:, None] for k, v in c.items()}, h[:, None], lams, 1.0)
            j = np.argmin(vals, axis=-1)
            pick = np.arange(m)
            return vals[pick, j], lams[pick, j], one
        # PIC2: grid over mu with exact lam, then alternating exact updates
        mus = np.linspace(0.0, 1.0, 33)
        cc = {k: v[:, None] for k, v in c.items()}
        a_lam = cc["1414"] + w * mus**2 * cc["2424"]
        lam_c = _quad_candidates(a_lam, mus * K[:, None])
        vals = self._value({k: v[..., None] for k, v in cc.items()}, 0.0, lam_c, mus[None, :, None])
        flat = vals.reshape(m, -1)
        j = np.argmin(flat, axis=1)
        pick = np.arange(m)
        mu = mus[j // 3]
        lam = lam_c.reshape(m, -1)[pick, j]
        for _ in range(30):
            cand = _quad_candidates(c["1414"] + w * mu**2 * c["2424"], mu * K)
            v = self._value(cc, 0.0, cand, mu[:, None])
            lam = cand[pick, np.argmin(v, axis=1)]
            cand = _quad_candidates(c["2323"] + w * lam**2 * c["2424"], lam * K)
            v = self._value(cc, 0.0, lam[:, None], cand)
            mu = cand[pick, np.argmin(v, axis=1)]
        return self._value(c, np.zeros(m), lam, mu), lam, mu

    def evaluate(self, F: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Minimum over (lam, mu) for a batch of frames ``(m, n, 4)``."""
        F = np.asarray(F, dtype=float)
        if F.ndim == 2:
            F = F[None]
        return self.inner_minimize(frame_components(self.M, F), self._hsum(F))

    def value_at(self, frame: np.ndarray, lam: float, mu: float) -> float:
        F = np.asarray(frame, dtype=float)[None]
        c = frame_components(self.M, F)
        return float(self._value(c, self._hsum(F), np.array([lam]), np.array([mu]))[0])

    def value_and_grad(self, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Envelope gradient: derivative in the frame at the optimal (lam, mu)."""
        n = self.n
        e1, e2, e3, e4 = (F[..., k] for k in range(4))
        c = frame_components(self.M, F)
        h = self._hsum(F)
        val, lam, mu = self.inner_minimize(c, h)
        Y = {}
        for key, (u, v) in {"13": (e1, e3), "14": (e1, e4), "23": (e2, e3), "24": (e2, e4)}.items():
            Y[key] = _antisym(wedge_pairs(u, v) @ self.M, n)
        w = 1.0 if self.include_2424 else 0.0
        a13, a14, a23, a24 = 1.0, lam**2, mu**2, w * lam**2 * mu**2
        ax = -2.0 * lam * mu
        ah = 1.0 - lam**2

        def mv(A, x):
            return np.einsum("mij,mj->mi", A, x)

        def s(x):
            return np.asarray(x)[:, None] if np.ndim(x) else x

        g1 = 2 * a13 * mv(Y["13"], e3) + 2 * s(a14) * mv(Y["14"], e4) + s(ax) * (mv(Y["24"], e3) - mv(Y["23"], e4))
        g2 = 2 * s(a23) * mv(Y["23"], e3) + 2 * s(a24) * mv(Y["24"], e4) + s(ax) * (mv(Y["13"], e4) - mv(Y["14"], e3))
        g3 = -2 * a13 * mv(Y["13"], e1) - 2 * s(a23) * mv(Y["23"], e2) + s(ax) * (mv(Y["14"], e2) - mv(Y["24"], e1))
        g4 = -2 * s(a14) * mv(Y["14"], e1) - 2 * s(a24) * mv(Y["24"], e2) + s(ax) * (mv(Y["23"], e1) - mv(Y["13"], e2))
        if self.H is not None:
            g1 = g1 + 2 * s(ah) * (e1 @ self.H)
            g2 = g2 + 2 * s(ah) * (e2 @ self.H)
        G = np.stack([g1, g2, g3, g4], axis=-1)
        if self.weight is not None:
            G = G / (self.weight[0] + self.weight[1] * lam**2)[:, None, None]
        return val, G


# -- start frames ---------------------------------------------------------------


def _structured_starts(fun: IsotropicFunctional, ric: np.ndarray | None) -> np.ndarray:
    n = fun.n
    bases = [np.eye(n)]
    if ric is not None:
        bases.append(np.linalg.eigh(ric)[1])
    if fun.H is not None:
        bases.append(np.linalg.eigh(fun.H)[1])
    order_sets = [(0, 1, 2, 3), (0, 2, 1, 3), (0, 1, n - 2, n - 1), (0, n - 1, 1, n - 2), (n - 4, n - 3, n - 2, n - 1)]
    starts = []
    for B in bases:
        for idx in order_sets:
            starts.append(B[:, list(idx)])
    return np.array(starts)


def _report_from(fun, F, val, lam, mu, method, samples, seed, tol) -> MembershipReport:
    probe = IsotropicProbe(FourFrame(orthonormalize(F[None])[0]), float(lam), float(mu))
    return MembershipReport(fun.mode, float(val), probe, method, int(samples), seed, tol, fun.name)


def minimize_functional(
    fun: IsotropicFunctional,
    budget: OptimizerBudget = OptimizerBudget(),
    ric: np.ndarray | None = None,
    tol: float = 1e-9,
) -> MembershipReport:
    """Multi-start projected descent; returns the best probe found."""
    rng = np.random.default_rng(budget.seed)
    n = fun.n
    F0 = np.concatenate([_structured_starts(fun, ric), random_frames(budget.starts, n, 4, rng)])
    scale = float(np.abs(fun.M).max()) + (float(np.abs(fun.H).max()) if fun.H is not None else 0.0)
    step = 0.25 / max(scale, 1e-300)
    F, val = descend(fun.value_and_grad, F0, iters=budget.iters, step=step)
    if budget.polish_iters:
        best = np.argsort(val)[: budget.polish_starts]
        Fp, vp = descend(fun.value_and_grad, F[best], iters=budget.polish_iters, step=step)
        F[best], val[best] = Fp, vp
    k = int(np.argmin(val))
    v, lam, mu = fun.evaluate(F[k])
    return _report_from(fun, F[k], v[0], lam[0], mu[0], "optimized", F0.shape[0], budget.seed, tol)


def min_isotropic(
    R: CurvatureTensor,
    mode: Mode | str,
    budget: OptimizerBudget = OptimizerBudget(),
    tol: float = 1e-9,
) -> MembershipReport:
    """Best-found minimum of the isotropic functional of ``mode`` (an upper
    bound on the true infimum)."""
    fun = IsotropicFunctional.of(R, mode)
    return minimize_functional(fun, budget, ricci(R), tol)


def shifted_membership(
    R: CurvatureTensor,
    mode: Mode | str,
    theta: float,
    N: float,
    budget: OptimizerBudget = OptimizerBudget(),
    tol: float = 1e-9,
) -> MembershipReport:
    """Membership of ``R - theta scal(R) id^id + N id^id``."""
    if not (np.isfinite(theta) and np.isfinite(N)):
        raise ValueError("theta and N must be finite")
    shifted = R + (N - theta * scalar(R)) * identity_tensor(R.n)
    return min_isotropic(shifted, mode, budget, tol)


def coordinate_frames(n: int) -> np.ndarray:
    """All ordered coordinate four-frames, each with e4 in both orientations."""
    perms = np.array(list(itertools.permutations(range(n), 4)))
    F = np.zeros((2 * len(perms), n, 4))
    rows = np.arange(len(perms))
    for k in range(4):
        F[rows, perms[:, k], k] = 1.0
        F[rows + len(perms), perms[:, k], k] = 1.0 if k < 3 else -1.0
    return F


def scan_functional(
    fun: IsotropicFunctional,
    resolution: int,
    dense: bool = True,
    seed: int = 0,
    tol: float = 1e-9,
) -> MembershipReport:
    if resolution < 1:
        raise ValueError("scan resolution must be positive")
    n = fun.n
    if dense and n > DENSE_SCAN_MAX_DIM:
        raise ValueError(f"dense frame scans are limited to n <= {DENSE_SCAN_MAX_DIM}")
    best = (np.inf, None, 0.0, 0.0)
    count = 0
    blocks = [coordinate_frames(n)]
    if dense:
        sob = qmc.Sobol(d=4 * n, scramble=True, seed=seed).random(resolution)
        gauss = norm.ppf(np.clip(sob, 1e-12, 1 - 1e-12)).reshape(resolution, n, 4)
        blocks.append(orthonormalize(gauss))
    for block in blocks:
        for start in range(0, len(block), _CHUNK):
            F = block[start : start + _CHUNK]
            val, lam, mu = fun.evaluate(F)
            k = int(np.argmin(val))
            if val[k] < best[0]:
                best = (float(val[k]), F[k], float(lam[k]), float(mu[k]))
            count += len(F)
    return _report_from(fun, best[1], best[0], best[2], best[3], "scan", count, seed, tol)


def brute_force_frame_scan(
    R: CurvatureTensor,
    mode: Mode | str,
    resolution: int,
    dense: bool = True,
    seed: int = 0,
) -> MembershipReport:
    """Exhaustive coordinate-frame scan plus a scrambled Sobol frame grid."""
    return scan_functional(IsotropicFunctional.of(R, mode), resolution, dense, seed)
