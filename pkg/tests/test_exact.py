from fractions import Fraction

import pytest

from pinchcone.exact import first_data, glue_inequalities, sqrt_fraction, zeta_margin, zeta_max
from pinchcone.family import first_cone_data


def test_sqrt_fraction_accuracy():
    r = sqrt_fraction(Fraction(2))
    assert 0 <= 2 - r * r < Fraction(3, 10**40)
    with pytest.raises(ValueError):
        sqrt_fraction(Fraction(-1))


@pytest.mark.parametrize("n", [9, 10, 11])
def test_float_formulas_match_exact(n):
    b = Fraction(1, 3 * n)
    ex = first_data(n, b)
    fl = first_cone_data(n, float(b))
    for key, val in ex.items():
        assert float(fl[key]) == pytest.approx(float(val), rel=1e-13)


def test_exact_joining_inequalities_hold():
    for n in (9, 10, 11):
        for lhs, rhs in glue_inequalities(n).values():
            assert lhs > rhs


def test_exact_zeta_and_margin_signs():
    for n in (9, 10, 11):
        for flag in (False, True):
            z = zeta_max(n, flag)
            assert 0 < z < 1
            assert zeta_margin(n, z) > 0
