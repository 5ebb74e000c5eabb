"""Numerical laboratory for rotationally symmetric asymptotically hyperbolic
metrics: curvature and Laplace-type operators on the radial class,
renormalized functionals (boundary mass, renormalized volume, expander
entropy), gauged geometric flows with entropy diagnostics, and a
finite-dimensional gradient-inequality toolkit."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .fields import (  # noqa: F401
    CurvatureData,
    RadialScalarField,
    RadialSymmetric2Tensor,
    WarpedMetric,
)
from .grid import RadialGrid, sphere_area  # noqa: F401
