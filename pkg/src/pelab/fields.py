"""Field types on the radial grid: scalars, radial symmetric 2-tensors, metrics.

The metric class is

    g = e^(2u(r)) dr^2 + e^(2v(r)) sinh^2(r) g_sphere,

encoded by the two profile logs (u, v) so that positivity is automatic and
the hyperbolic reference is u = v = 0.  Radial symmetric 2-tensors carry two
orthonormal-frame components (a, b): a = h(e_r, e_r) and b = h(e_alpha,
e_alpha) for every tangential frame direction.  Unless a function documents
otherwise, tensor components are taken in the frame of the hyperbolic
reference (which coincides with coordinate components rescaled by sinh^2).

All types serialize to CSV (columns r, value-columns) and JSON with
round-trip-exact float formatting.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatch, NonFiniteProfile
from .grid import RadialGrid


def _freeze(arr) -> np.ndarray:
    a = np.array(arr, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv_table(header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _parse_csv(text: str, ncols: int) -> list[np.ndarray]:
    lines = [ln for ln in text.strip().splitlines()[1:] if ln]
    cols = [np.array([float(ln.split(",")[j]) for ln in lines]) for j in range(ncols)]
    return cols


@dataclass(frozen=True, eq=False)
class RadialScalarField:
    """Nodal values of an even scalar field f(r)."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = _freeze(self.values)
        if vals.shape != (self.grid.num_nodes,):
            raise GridMismatch("field length does not match grid")
        object.__setattr__(self, "values", vals)

    @staticmethod
    def zero(grid: RadialGrid) -> "RadialScalarField":
        return RadialScalarField(grid, np.zeros(grid.num_nodes))

    @staticmethod
    def from_function(grid: RadialGrid, fn) -> "RadialScalarField":
        return RadialScalarField(grid, fn(grid.nodes))

    def require_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteProfile("scalar field contains non-finite values")

    def deriv(self) -> np.ndarray:
        return self.grid.deriv1(self.values)

    def to_csv(self) -> str:
        return _csv_table(["r", "f"], [self.grid.nodes, self.values])

    @staticmethod
    def from_csv(grid: RadialGrid, text: str) -> "RadialScalarField":
        _, f = _parse_csv(text, 2)
        return RadialScalarField(grid, f)


@dataclass(frozen=True, eq=False)
class RadialSymmetric2Tensor:
    """Radial symmetric 2-tensor with frame components (a, b).

    tr h = a + (n-1) b pointwise in the frame of its base metric.
    """

    grid: RadialGrid
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = _freeze(self.a)
        b = _freeze(self.b)
        if a.shape != (self.grid.num_nodes,) or b.shape != (self.grid.num_nodes,):
            raise GridMismatch("tensor component length does not match grid")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @staticmethod
    def zero(grid: RadialGrid) -> "RadialSymmetric2Tensor":
        z = np.zeros(grid.num_nodes)
        return RadialSymmetric2Tensor(grid, z, z)

    def trace(self) -> np.ndarray:
        return self.a + (self.grid.n - 1) * self.b

    def require_finite(self):
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise NonFiniteProfile("tensor contains non-finite values")

    def sup_norm(self) -> float:
        return float(max(np.abs(self.a).max(), np.abs(self.b).max()))

    def to_csv(self) -> str:
        return _csv_table(["r", "a", "b"], [self.grid.nodes, self.a, self.b])

    @staticmethod
    def from_csv(grid: RadialGrid, text: str) -> "RadialSymmetric2Tensor":
        _, a, b = _parse_csv(text, 3)
        return RadialSymmetric2Tensor(grid, a, b)


@dataclass(frozen=True, eq=False)
class WarpedMetric:
    """Radial metric g = e^(2u) dr^2 + e^(2v) sinh^2(r) g_sphere."""

    grid: RadialGrid
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = _freeze(self.u)
        v = _freeze(self.v)
        if u.shape != (self.grid.num_nodes,) or v.shape != (self.grid.num_nodes,):
            raise GridMismatch("profile length does not match grid")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    def require_finite(self):
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise NonFiniteProfile("metric profiles contain non-finite values")

    def is_hyperbolic(self) -> bool:
        return not (np.any(self.u) or np.any(self.v))

    def boundary_decay(self) -> float:
        return float(max(abs(self.u[-1]), abs(self.v[-1])))

    def is_admissible(self, decay_tol: float = 1e-8) -> bool:
        return (
            np.all(np.isfinite(self.u))
            and np.all(np.isfinite(self.v))
            and self.boundary_decay() <= decay_tol
        )

    # -- derived nodal data (cached; the metric is immutable) ----------------

    @cached_property
    def coth(self) -> np.ndarray:
        return 1.0 / np.tanh(self.grid.nodes)

    @cached_property
    def csch2(self) -> np.ndarray:
        return 1.0 / np.sinh(self.grid.nodes) ** 2

    @cached_property
    def psi(self) -> np.ndarray:
        """Sphere warping factor e^v sinh r."""
        return np.exp(self.v) * np.sinh(self.grid.nodes)

    @cached_property
    def du(self) -> np.ndarray:
        return self.grid.deriv1(self.u)

    @cached_property
    def dv(self) -> np.ndarray:
        return self.grid.deriv1(self.v)

    @cached_property
    def lam(self) -> np.ndarray:
        """Logarithmic derivative psi'/psi = v' + coth r."""
        return self.dv + self.coth

    @cached_property
    def volume_density(self) -> np.ndarray:
        """Radial density of dV_g: e^u psi^(n-1) (times the sphere area)."""
        return np.exp(self.u) * self.psi ** (self.grid.n - 1)

    @cached_property
    def flux_density(self) -> np.ndarray:
        """Conservative-form Laplacian coefficient e^(-u) psi^(n-1)."""
        return np.exp(-self.u) * self.psi ** (self.grid.n - 1)

    # -- perturbations --------------------------------------------------------

    def deviation(self) -> RadialSymmetric2Tensor:
        """h = g - ghat in the frame of the hyperbolic reference."""
        return RadialSymmetric2Tensor(self.grid, np.expm1(2 * self.u), np.expm1(2 * self.v))

    def perturbed(self, h: RadialSymmetric2Tensor, t: float) -> "WarpedMetric":
        """Metric with coordinate components g + t h (h in reference frame)."""
        if not self.grid.compatible(h.grid):
            raise GridMismatch("perturbation on incompatible grid")
        # deviations stay in expm1/log1p form: tiny perturbations would lose
        # all relative precision through exp/log round trips near 1
        dev_a = np.expm1(2 * self.u) + t * h.a
        dev_b = np.expm1(2 * self.v) + t * h.b
        if np.any(dev_a <= -1) or np.any(dev_b <= -1):
            raise NonFiniteProfile("perturbation destroys positivity")
        return WarpedMetric(self.grid, 0.5 * np.log1p(dev_a), 0.5 * np.log1p(dev_b))

    def tensor_to_frame(self, h: RadialSymmetric2Tensor) -> RadialSymmetric2Tensor:
        """Re-express reference-frame components in the orthonormal frame of g."""
        return RadialSymmetric2Tensor(
            self.grid, np.exp(-2 * self.u) * h.a, np.exp(-2 * self.v) * h.b
        )

    # -- serialization ---------------------------------------------------------

    def to_csv(self) -> str:
        return _csv_table(["r", "u", "v"], [self.grid.nodes, self.u, self.v])

    @staticmethod
    def from_csv(grid: RadialGrid, text: str) -> "WarpedMetric":
        _, u, v = _parse_csv(text, 3)
        return WarpedMetric(grid, u, v)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.grid.n,
                "R_max": self.grid.r_max,
                "N": self.grid.num_nodes,
                "scheme": self.grid.scheme,
                "u": list(self.u),
                "v": list(self.v),
            }
        )

    @staticmethod
    def from_json(text: str) -> "WarpedMetric":
        obj = json.loads(text)
        grid = RadialGrid.make(obj["n"], obj["N"], obj["R_max"], obj["scheme"])
        return WarpedMetric(grid, np.array(obj["u"]), np.array(obj["v"]))


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Sectional curvatures, Ricci frame components, scalar curvature.

    The *_excess fields hold the deviations from the hyperbolic values
    (K + 1, Ric + (n-1)g, scal + n(n-1)) computed cancellation-free; the
    renormalized functionals multiply them by exponentially large volume
    weights, so forming them by subtraction would lose all their digits in
    the far field.
    """

    grid: RadialGrid
    k_rad_excess: np.ndarray = field(repr=False)
    k_tan_excess: np.ndarray = field(repr=False)

    @property
    def k_rad(self) -> np.ndarray:
        return self.k_rad_excess - 1.0

    @property
    def k_tan(self) -> np.ndarray:
        return self.k_tan_excess - 1.0

    @property
    def ric_rr_excess(self) -> np.ndarray:
        return (self.grid.n - 1) * self.k_rad_excess

    @property
    def ric_tt_excess(self) -> np.ndarray:
        return self.k_rad_excess + (self.grid.n - 2) * self.k_tan_excess

    @property
    def scal_excess(self) -> np.ndarray:
        n = self.grid.n
        return 2 * (n - 1) * self.k_rad_excess + (n - 1) * (n - 2) * self.k_tan_excess

    @property
    def ric_rr(self) -> np.ndarray:
        return self.ric_rr_excess - (self.grid.n - 1)

    @property
    def ric_tt(self) -> np.ndarray:
        return self.ric_tt_excess - (self.grid.n - 1)

    @property
    def scal(self) -> np.ndarray:
        n = self.grid.n
        return self.scal_excess - n * (n - 1)

    def ricci(self) -> RadialSymmetric2Tensor:
        """Ricci tensor as a radial 2-tensor in the frame of its metric."""
        return RadialSymmetric2Tensor(self.grid, self.ric_rr, self.ric_tt)

    def to_csv(self) -> str:
        return _csv_table(
            ["r", "k_rad", "k_tan", "ric_rr", "ric_tt", "scal"],
            [self.grid.nodes, self.k_rad, self.k_tan, self.ric_rr, self.ric_tt, self.scal],
        )
