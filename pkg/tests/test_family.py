import numpy as np
import pytest

from pinchcone.curvature import cylinder, identity_tensor, ricci, zero
from pinchcone.family import (
    FirstConeCertificate,
    b_max_first,
    b_max_second,
    check_first_cone_cert,
    f_quadratic,
    first_cone_params,
    format17,
    glue_family,
    params_report,
    second_cone_functional,
    second_cone_params,
    second_cone_z_min,
    zeta_value,
)
from pinchcone.membership import OptimizerBudget

FAST = OptimizerBudget(starts=16, iters=150, polish_iters=300, polish_starts=2)


def test_a_at_b_max_for_n9():
    p = first_cone_params(9, 0.05)
    assert p.a == pytest.approx(6.00271739130435e-2, rel=1e-12)
    assert p.b_max == 0.05


@pytest.mark.parametrize("n", [9, 10, 11])
def test_coefficient_identity_on_grid(n):
    for b in np.linspace(1e-4, b_max_first(n), 25):
        p = first_cone_params(n, b)
        assert p.P_coef + n * p.Q_coef == pytest.approx(2 + 4 * (n - 1) * p.a, abs=1e-12)


def test_range_errors():
    with pytest.raises(ValueError):
        first_cone_params(9, 0.9)
    with pytest.raises(ValueError):
        first_cone_params(9, 0.0)
    with pytest.raises(ValueError):
        second_cone_params(9, 0.03)


def test_outside_supported_dims_flag():
    assert first_cone_params(12, 0.01).outside_supported_dims
    assert not first_cone_params(10, 0.01).outside_supported_dims


def test_identity_certificate_margins():
    n = 9
    p = first_cone_params(n, b_max_first(n))
    rep = check_first_cone_cert(FirstConeCertificate(identity_tensor(n), zero(n)), p, FAST)
    t, pic, r3, gap = rep.margins
    assert t == pytest.approx(0.0)
    assert pic == pytest.approx(8.0, abs=1e-9)
    assert r3 > 0
    assert gap == pytest.approx(0.0, abs=1e-12)
    assert rep.holds()


def test_certificate_dimension_mismatch():
    with pytest.raises(ValueError):
        FirstConeCertificate(identity_tensor(9), zero(10))


def test_zeta_at_second_max_without_gamma_factor():
    for n, z in zip((9, 10, 11), (0.824287, 0.822096, 0.820267)):
        assert zeta_value(n, b_max_second(n), include_gamma_factor=False) == pytest.approx(z, abs=1e-6)


def test_second_params_fields():
    q = second_cone_params(9, b_max_second(9))
    assert q.a == pytest.approx(q.b + 7 * q.b**2 / 2)
    assert q.b_tilde_max == pytest.approx(1 / 45)


def test_glue_switch():
    n = 9
    assert glue_family(n, 0.04).family == "first"
    assert glue_family(n, 0.05).family == "first"
    g = glue_family(n, 0.06)
    assert g.family == "second" and g.local_b == pytest.approx(0.05 + 1 / 45 - 0.06)
    with pytest.raises(ValueError):
        glue_family(n, g.B)


def test_cylinder_second_functional_kernel_frame():
    n = 9
    q = second_cone_params(n, b_max_second(n))
    S = cylinder(n, axis=0)
    fun = second_cone_functional(S, q)
    F = np.zeros((n, 4))
    F[1, 0] = F[2, 1] = F[0, 2] = F[3, 3] = 1.0
    expected = np.sqrt(2 * q.a) * (7 + 7)
    assert fun.value_at(F, 0.0, 1.0) == pytest.approx(expected)
    assert second_cone_z_min(S, q, FAST).min_value <= expected


def test_f_quadratic_is_finite():
    p = first_cone_params(9, 0.03)
    assert np.isfinite(f_quadratic(0.1, 0.2, p))


def test_params_report_formats():
    text = params_report(9, 0.05)
    assert "a = 6.00271739" in text and "e-2" in text
    assert "second." not in text
    both = params_report(9, 0.022222)
    assert "second.zeta[on]" in both and "second.zeta[off]" in both
    assert format17(0.5) == "5.0000000000000000e-1"


def test_ricci_of_cylinder_used_for_h_term():
    S = cylinder(9)
    assert np.linalg.matrix_rank(ricci(S)) == 8


def test_first_family_rejects_small_dimension():
    with pytest.raises(ValueError):
        first_cone_params(4, 0.01)
