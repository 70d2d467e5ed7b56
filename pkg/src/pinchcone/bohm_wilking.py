"""The linear map l_{a,b} and the correction term D_{a,b} it induces on Q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import (
    CurvatureTensor,
    check_dimension,
    identity_tensor,
    kulkarni_nomizu,
    q_quadratic,
    ricci,
    ricci_tracefree,
    scalar,
    star_contract,
)

SINGULAR_TOL = 1e-14


class SingularParametersError(ValueError):
    """Raised when l_{a,b} is not invertible."""


@dataclass(frozen=True)
class LabParams:
    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        check_dimension(self.n)
        if abs(self.scal_factor) < SINGULAR_TOL or abs(self.ric0_factor) < SINGULAR_TOL:
            raise SingularParametersError(
                f"l_ab is singular for a={self.a}, b={self.b}, n={self.n}"
            )

    @property
    def scal_factor(self) -> float:
        """Factor multiplying scal under l_{a,b}."""
        return 1.0 + 2.0 * (self.n - 1) * self.a

    @property
    def ric0_factor(self) -> float:
        """Factor multiplying the trace-free Ricci tensor under l_{a,b}."""
        return 1.0 + (self.n - 2) * self.b

    def inverse(self) -> LabParams:
        """Parameters (a', b') with l_{a',b'} = l_{a,b}^{-1}."""
        return LabParams(-self.a / self.scal_factor, -self.b / self.ric0_factor, self.n)


def _check(R: CurvatureTensor, p: LabParams) -> None:
    if R.n != p.n:
        raise ValueError(f"tensor dimension {R.n} does not match parameter dimension {p.n}")


def l_ab(R: CurvatureTensor, p: LabParams) -> CurvatureTensor:
    """``R + b Ric(R) ^ id + (a - b)/n scal(R) id ^ id``."""
    _check(R, p)
    n = p.n
    out = R.components + p.b * kulkarni_nomizu(ricci(R), np.eye(n)).components
    out = out + (p.a - p.b) / n * scalar(R) * identity_tensor(n).components
    return CurvatureTensor(out, bianchi=R.bianchi)


def l_ab_inverse(R: CurvatureTensor, p: LabParams) -> CurvatureTensor:
    # l_{a,b} scales the Weyl, trace-free Ricci and scalar parts by 1,
    # 1 + (n-2)b and 1 + 2(n-1)a; the inverse is again of the same form.
    _check(R, p)
    return l_ab(R, p.inverse())


def _dab_coefficients(p: LabParams) -> tuple[float, float, float, float]:
    n, a, b = p.n, p.a, p.b
    c_ric0 = 2 * b + (n - 2) * b**2 - 2 * a
    c_ric = 2 * a
    c_sq = 2 * b**2
    c_id = (n * b**2 * (1 - 2 * b) - 2 * (a - b) * (1 - 2 * b + n * b**2)) / (n * p.scal_factor)
    return c_ric0, c_ric, c_sq, c_id


def d_ab_closed_form(S: CurvatureTensor, p: LabParams) -> CurvatureTensor:
    """Closed form of ``l^{-1} Q l (S) - Q(S)``."""
    _check(S, p)
    n = p.n
    c_ric0, c_ric, c_sq, c_id = _dab_coefficients(p)
    ric = ricci(S)
    ric0 = ricci_tracefree(S)
    eye = np.eye(n)
    out = (
        c_ric0 * kulkarni_nomizu(ric0, ric0).components
        + c_ric * kulkarni_nomizu(ric, ric).components
        + c_sq * kulkarni_nomizu(ric0 @ ric0, eye).components
        + c_id * float(np.sum(ric0**2)) * identity_tensor(n).components
    )
    return CurvatureTensor(out)


def d_ab_conjugation_oracle(S: CurvatureTensor, p: LabParams) -> CurvatureTensor:
    """``D_{a,b}`` straight from its definition as a conjugated Q."""
    _check(S, p)
    lhs = l_ab_inverse(q_quadratic(l_ab(S, p)), p)
    return CurvatureTensor(lhs.components - q_quadratic(S).components)


def _ric0_coefficient(p: LabParams) -> float:
    n, a, b = p.n, p.a, p.b
    return 2 * (n**2 * b**2 - 2 * (n - 1) * (a - b) * (1 - 2 * b)) / p.scal_factor


def ricci_of_dab(S: CurvatureTensor, p: LabParams) -> np.ndarray:
    _check(S, p)
    n, a, b = p.n, p.a, p.b
    ric = ricci(S)
    scal = float(np.trace(ric))
    ric0_sq = float(np.sum(ricci_tracefree(S) ** 2))
    out = -4 * b * ric @ ric + 4 / n * (2 * b + (n - 2) * a) * scal * ric
    out = out + (_ric0_coefficient(p) / n * ric0_sq + 4 / n**2 * (a - b) * scal**2) * np.eye(n)
    return 0.5 * (out + out.T)


def scal_of_dab(S: CurvatureTensor, p: LabParams) -> float:
    _check(S, p)
    n, a, b = p.n, p.a, p.b
    ric = ricci(S)
    scal = float(np.trace(ric))
    return float(
        -4 * b * np.sum(ric**2)
        + 4 / n * (b + (n - 1) * a) * scal**2
        + _ric0_coefficient(p) * np.sum(ricci_tracefree(S) ** 2)
    )


def evolution_coefficients(p: LabParams) -> tuple[float, float]:
    """(P, Q) with ``d scal/dt = P |Ric|^2 + Q scal^2``."""
    sf, rf = p.scal_factor, p.ric0_factor
    return 2 * rf**2 / sf, 2 * (sf**2 - rf**2) / (p.n * sf)


def evolution_rhs(S: CurvatureTensor, p: LabParams) -> CurvatureTensor:
    """Right-hand side of ``dS/dt = Q(S) + D_{a,b}(S)``."""
    return CurvatureTensor(q_quadratic(S).components + d_ab_closed_form(S, p).components)


def ricci_evolution(S: CurvatureTensor, p: LabParams) -> np.ndarray:
    """``d Ric(S)/dt`` under the evolution, from the traced closed forms."""
    return 2 * star_contract(S, ricci(S)) + ricci_of_dab(S, p)


def scal_evolution_check(S: CurvatureTensor, p: LabParams) -> tuple[float, float]:
    """(scal of the evolution right-hand side, P |Ric|^2 + Q scal^2)."""
    P, Q = evolution_coefficients(p)
    ric = ricci(S)
    lhs = scalar(evolution_rhs(S, p))
    rhs = P * float(np.sum(ric**2)) + Q * float(np.trace(ric)) ** 2
    return lhs, rhs
