import numpy as np
import pytest

from pinchcone.curvature import Mode, cylinder, identity_tensor, kulkarni_nomizu, random_algebraic
from pinchcone.membership import (
    IsotropicFunctional,
    OptimizerBudget,
    brute_force_frame_scan,
    coordinate_frames,
    min_isotropic,
    shifted_membership,
)
from pinchcone.stiefel import random_frames

FAST = OptimizerBudget(starts=16, iters=150, polish_iters=300, polish_starts=2)


@pytest.mark.parametrize("n", [4, 9])
def test_cylinder_minima(n):
    R = cylinder(n)
    assert min_isotropic(R, Mode.PIC, FAST).min_value == pytest.approx(2.0, abs=1e-6)
    assert min_isotropic(R, Mode.PIC2, FAST).min_value == pytest.approx(0.0, abs=1e-6)
    assert min_isotropic(R, Mode.PIC1, FAST).min_value == pytest.approx(0.0, abs=1e-6)


def test_identity_minimum_is_eight():
    rep = min_isotropic(identity_tensor(6), Mode.PIC, FAST)
    assert rep.min_value == pytest.approx(8.0, abs=1e-9)
    assert rep.is_member


def test_nonnegative_operator_lower_bound(rng):
    lam = np.sort(rng.uniform(0.1, 1.0, 6))
    R = kulkarni_nomizu(np.diag(lam), np.diag(lam))
    exact = 2 * (lam[0] + lam[1]) * (lam[2] + lam[3])
    assert min_isotropic(R, Mode.PIC, FAST).min_value == pytest.approx(exact, rel=1e-6)


def test_report_value_matches_probe(rng):
    R = random_algebraic(5, rng)
    rep = min_isotropic(R, Mode.PIC1, FAST)
    fun = IsotropicFunctional.of(R, Mode.PIC1)
    p = rep.argmin_probe
    assert fun.value_at(p.frame.vectors, p.lam, p.mu) == pytest.approx(rep.min_value, abs=1e-10)


def test_optimizer_never_worse_than_random_frames(rng):
    R = random_algebraic(6, rng)
    fun = IsotropicFunctional.of(R, Mode.PIC)
    F = random_frames(2000, 6, 4, rng)
    sampled = min(fun.value_at(f, 1.0, 1.0) for f in F)
    assert min_isotropic(R, Mode.PIC, FAST).min_value <= sampled + 1e-9


def test_optimizer_sound_against_scan_n4(rng):
    for _ in range(5):
        R = random_algebraic(4, rng)
        for mode in Mode:
            opt = min_isotropic(R, mode, FAST).min_value
            scan = brute_force_frame_scan(R, mode, 8).min_value
            assert opt <= scan + 1e-8


def test_mode_nesting_implication(rng):
    for _ in range(5):
        R = identity_tensor(5) + random_algebraic(5, rng, scale=0.3)
        r2 = min_isotropic(R, Mode.PIC2, FAST).min_value
        if r2 >= 0:
            assert min_isotropic(R, Mode.PIC1, FAST).min_value >= -1e-9
            assert min_isotropic(R, Mode.PIC, FAST).min_value >= -1e-9


def test_shifted_membership_adds_eight_per_unit():
    R = cylinder(5)
    base = min_isotropic(R, Mode.PIC, FAST).min_value
    shifted = shifted_membership(R, Mode.PIC, 0.0, 0.25, FAST).min_value
    assert shifted == pytest.approx(base + 2.0, abs=1e-8)
    with pytest.raises(ValueError):
        shifted_membership(R, Mode.PIC, float("nan"), 0.0)


def test_budget_validation():
    with pytest.raises(ValueError):
        OptimizerBudget(starts=0)
    with pytest.raises(ValueError):
        OptimizerBudget(iters=-1)


def test_seed_reproducibility(rng):
    R = random_algebraic(6, rng)
    a = min_isotropic(R, Mode.PIC, FAST)
    b = min_isotropic(R, Mode.PIC, FAST)
    assert a.min_value == b.min_value


def test_coordinate_frames_count():
    F = coordinate_frames(4)
    assert F.shape == (48, 4, 4)


def test_h_term_requires_pic1():
    with pytest.raises(ValueError):
        IsotropicFunctional(identity_tensor(4).pair_matrix(), Mode.PIC, H=np.eye(4))
