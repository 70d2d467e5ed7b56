"""Exact rational evaluation of the parameter formulas.

Used as an independent oracle for the floating-point code.  Square roots are
taken to a fixed number of decimal digits with integer arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt

SQRT_DIGITS = 40


def sqrt_fraction(x: Fraction, digits: int = SQRT_DIGITS) -> Fraction:
    """Truncated square root of a nonnegative rational, accurate to 10^-digits."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("square root of a negative number")
    scale = 10**digits
    return Fraction(isqrt(x.numerator * scale * scale // x.denominator), scale)


def first_data(n: int, b: Fraction) -> dict[str, Fraction]:
    """a, gamma, rho, A, P, Q as exact rationals (omega needs a root)."""
    b = Fraction(b)
    a = (2 + (n - 2) * b) ** 2 * b / (2 * (2 + (n - 3) * b))
    gamma = b / (2 + (n - 3) * b)
    sf = 1 + 2 * (n - 1) * a
    rf = 1 + (n - 2) * b
    rho = (
        b
        - Fraction(2 * (n - 1), n**2) * gamma * (1 - 2 * b)
        - 2 * (n - 1) * (1 + gamma) * (n**2 * b**2 - 2 * (n - 1) * (a - b) * (1 - 2 * b)) / (n**2 * sf)
    )
    A = Fraction(2) * (1 + 4 * b) / ((n - 1) * (n - 4)) + Fraction(4, n) * (2 * b + (n - 2) * a)
    P = 2 * rf**2 / sf
    Q = 2 * (sf**2 - rf**2) / (n * sf)
    return {"a": a, "gamma": gamma, "rho": rho, "A_coef": A, "P_coef": P, "Q_coef": Q}


def _glue_constants(n: int) -> dict[str, Fraction]:
    bm = Fraction(1, 2 * n + 2)
    bt = Fraction(1, 5 * n)
    d = first_data(n, bm)
    at = bt + Fraction(n - 2, 2) * bt**2
    return {"b_max": bm, "a_max": d["a"], "gamma_max": d["gamma"], "bt": bt, "at": at}


def zeta_max(n: int, include_gamma_factor: bool) -> Fraction:
    g = _glue_constants(n)
    z = (1 + 2 * (n - 1) * g["at"]) / (1 + 2 * (n - 1) * g["a_max"])
    z *= (1 + (n - 2) * g["b_max"]) / (1 + (n - 2) * g["bt"])
    return z * (1 + g["gamma_max"]) if include_gamma_factor else z


def zeta_margin(n: int, z: Fraction) -> Fraction:
    return 1 + (n - 2) * (1 - z) - 2 * z**2 * Fraction(n**2 - 2 * n + 2, (n - 2) ** 2)


def glue_inequalities(n: int) -> dict[str, tuple[Fraction, Fraction]]:
    """(lhs, rhs) of the three inequalities joining the two families."""
    g = _glue_constants(n)
    bm, am, gm, bt, at = g["b_max"], g["a_max"], g["gamma_max"], g["bt"], g["at"]
    root = sqrt_fraction(2 * at)
    ratio = (1 + (n - 2) * bm) / (1 + (n - 2) * bt)
    da = (am - at) / (1 + 2 * (n - 1) * at)
    db = (bm - bt) / (1 + (n - 2) * bt)
    first = (ratio * root, Fraction(n**2 - 5 * n + 4, n**2 - 7 * n + 14) / (n - 4))
    second = (da - db, Fraction(0))
    third = (
        2 * (da - (1 + gm) * db) + (2 * (n - 1) * da - (n - 2) * db) * root,
        ratio * n * root / (n**2 - 5 * n + 4),
    )
    return {"root_ratio": first, "slope": second, "mixed": third}
