"""Numerical verification of pinching cone families for the curvature reaction ODE."""

from .curvature import CurvatureTensor, Mode, cylinder, identity_tensor, kulkarni_nomizu, random_algebraic, ricci, scalar, sharp
from .family import FirstConeParams, SecondConeParams, first_cone_params, second_cone_params

__all__ = [
    "CurvatureTensor",
    "FirstConeParams",
    "Mode",
    "SecondConeParams",
    "cylinder",
    "first_cone_params",
    "identity_tensor",
    "kulkarni_nomizu",
    "random_algebraic",
    "ricci",
    "scalar",
    "second_cone_params",
    "sharp",
]
