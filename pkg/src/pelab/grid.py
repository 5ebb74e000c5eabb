"""Radial grid, finite-difference operators, and quadrature.

The computational domain is the punctured interval (0, R_max] with N nodes
placed at cell centers,

    r_i = (i - 1/2) h,   i = 1..N,   h = R_max / (N - 1/2),

so that every node is strictly positive and the reflection r -> -r maps the
node set onto itself.  Fields in the rotationally symmetric class extend
evenly through the origin (vanishing first derivative at r = 0), which the
half-offset layout turns into an exact ghost-node closure: the ghost at
-(j - 1/2) h carries the value of node j.  Derivative stencils therefore
retain their full interior order at the origin.  At the outer boundary the
stencils are one-sided.

Integrals of volume-measure integrands (which vanish at r = 0 like r^(n-1))
are computed by composite per-cell cubic interpolation, globally 4th order,
with a cumulative evaluator so that partial-ball integrals at arbitrary
radii are available for the large-radius extrapolations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


def fd_weights(z: float, x: np.ndarray, order: int) -> np.ndarray:
    """Weights w with sum_j w_j f(x_j) ~ f^(order)(z) for the stencil x.

    Solves the local Vandermonde system in offsets scaled by the stencil
    width; exact for polynomials of degree < len(x).
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    if order >= m:
        raise ValueError("stencil too short for requested derivative order")
    scale = max(abs(x - z).max(), 1.0)
    t = (x - z) / scale
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    vander = np.vander(t, m, increasing=True).T
    w = np.linalg.solve(vander, rhs)
    return w / scale**order


def _interp_weights(x: np.ndarray, z: float) -> np.ndarray:
    return fd_weights(z, x, 0)


def interp_local(nodes: np.ndarray, values: np.ndarray, z: float, npts: int = 6) -> float:
    """Polynomial interpolation of nodal data on the npts nearest nodes."""
    idx = int(np.searchsorted(nodes, z))
    lo = max(0, min(idx - npts // 2, len(nodes) - npts))
    sl = slice(lo, lo + npts)
    return float(_interp_weights(nodes[sl], z) @ values[sl])


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform half-offset radial grid for dimension n >= 3.

    scheme selects the finite-difference order (2 or 4) of the derivative
    operators; the outer closure is one-sided, the origin closure uses the
    even-extension ghost nodes.
    """

    n: int
    nodes: np.ndarray = field(repr=False)
    r_max: float
    scheme: int = 4

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension n must be >= 3")
        if self.scheme not in (2, 4):
            raise ValueError("scheme must be 2 or 4")
        r = np.asarray(self.nodes, dtype=float)
        if r.size < 16:
            raise ValueError("need at least 16 nodes")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValueError("nodes must be strictly increasing and positive")
        if not math.isclose(r[-1], self.r_max, rel_tol=0, abs_tol=1e-12 * self.r_max):
            raise ValueError("r_max must equal the last node")
        h = r[0] * 2.0
        expected = (np.arange(1, r.size + 1) - 0.5) * h
        if not np.allclose(r, expected, rtol=0, atol=1e-9 * self.r_max):
            raise ValueError("nodes must be uniform with half-cell offset")
        object.__setattr__(self, "nodes", r)

    @staticmethod
    def make(n: int, num_nodes: int, r_max: float, scheme: int = 4) -> "RadialGrid":
        h = r_max / (num_nodes - 0.5)
        nodes = (np.arange(1, num_nodes + 1) - 0.5) * h
        nodes[-1] = r_max
        return RadialGrid(n=n, nodes=nodes, r_max=r_max, scheme=scheme)

    @property
    def num_nodes(self) -> int:
        return self.nodes.size

    @property
    def h(self) -> float:
        return float(self.nodes[0] * 2.0)

    def compatible(self, other: "RadialGrid") -> bool:
        return (
            self.n == other.n
            and self.scheme == other.scheme
            and self.num_nodes == other.num_nodes
            and math.isclose(self.r_max, other.r_max, rel_tol=1e-14)
        )

    # -- derivative operators ------------------------------------------------

    def _derivative_matrix(self, order: int, parity: int) -> sp.csr_matrix:
        """FD matrix for d^order/dr^order on fields of the given parity.

        parity +1: even extension f(-r) = f(r); parity -1: odd extension.
        """
        # one-sided second derivative needs an extra point to keep order 4
        if order == 2 and self.scheme == 4:
            npts_onesided = 6
        else:
            npts_onesided = self.scheme + 1
        k = self.scheme // 2
        N = self.num_nodes
        h = self.h
        r = self.nodes
        rows, cols, vals = [], [], []

        def add(i, idxs, wts):
            for j, w in zip(idxs, wts):
                if w != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(w)

        centered = fd_weights(0.0, np.arange(-k, k + 1) * h, order)
        for i in range(N):
            if k <= i < N - k:
                add(i, range(i - k, i + k + 1), centered)
            elif i < k:
                # fold ghost nodes through the origin: -(j+1/2)h <-> node j
                acc = {}
                for off, w in zip(range(-k, k + 1), centered):
                    j = i + off
                    if j >= 0:
                        acc[j] = acc.get(j, 0.0) + w
                    else:
                        acc[-j - 1] = acc.get(-j - 1, 0.0) + parity * w
                add(i, acc.keys(), acc.values())
            else:
                m = npts_onesided
                lo = N - m
                stencil = r[lo:N]
                add(i, range(lo, N), fd_weights(r[i], stencil, order))
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    @cached_property
    def d1(self) -> sp.csr_matrix:
        return self._derivative_matrix(1, parity=+1)

    @cached_property
    def d2(self) -> sp.csr_matrix:
        return self._derivative_matrix(2, parity=+1)

    @cached_property
    def d1_odd(self) -> sp.csr_matrix:
        return self._derivative_matrix(1, parity=-1)

    def deriv1(self, values: np.ndarray) -> np.ndarray:
        return self.d1 @ values

    def deriv2(self, values: np.ndarray) -> np.ndarray:
        return self.d2 @ values

    # -- staggered (flux) operators -------------------------------------------

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Flux points j h, j = 0..N-1; the origin is a flux point."""
        return np.arange(self.num_nodes) * self.h

    @cached_property
    def midpoint_weights(self) -> np.ndarray:
        """Midpoint-rule weights on flux cells; the origin cell is half-width."""
        w = np.full(self.num_nodes, self.h)
        w[0] = self.h / 2.0
        return w

    def _staggered_matrix(self, order: int) -> sp.csr_matrix:
        """Node-to-midpoint derivative (order 1) or interpolation (order 0).

        Even-parity ghost closure at the origin; the stencils are centered
        half-offset 4-point (5-point one-sided at the top), so the period-2
        node mode is visible to the flux derivative, which keeps the
        conservative form free of checkerboard null modes.
        """
        N = self.num_nodes
        h = self.h
        r = self.nodes
        y = self.midpoints
        npts = 4
        rows, cols, vals = [], [], []
        for j in range(N):
            if j <= N - 2:
                idx = range(j - 2, j + 2)
            else:
                idx = range(N - 5, N)
            acc = {}
            stencil, folded = [], []
            for i in idx:
                if i >= 0:
                    stencil.append(r[i])
                    folded.append(i)
                else:
                    stencil.append(-r[-i - 1])
                    folded.append(-i - 1)
            w = fd_weights(y[j], np.array(stencil), order)
            for i, wt in zip(folded, w):
                acc[i] = acc.get(i, 0.0) + wt
            for i, wt in acc.items():
                if wt != 0.0:
                    rows.append(j)
                    cols.append(i)
                    vals.append(wt)
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    @cached_property
    def stag_d1(self) -> sp.csr_matrix:
        return self._staggered_matrix(1)

    @cached_property
    def stag_interp(self) -> sp.csr_matrix:
        return self._staggered_matrix(0)

    @cached_property
    def highfreq_filter(self) -> sp.csr_matrix:
        """Normalized 6th-difference operator for artificial dissipation.

        Annihilates polynomials of degree <= 5 (invisible at scheme order),
        removes the period-2 node mode completely at unit strength.  Origin
        rows use the even-extension fold; the last three rows are left
        unfiltered (Dirichlet region).
        """
        N = self.num_nodes
        stencil = -np.array([1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]) / 64.0
        rows, cols, vals = [], [], []
        for i in range(N - 3):
            acc = {}
            for off, w in zip(range(-3, 4), stencil):
                j = i + off
                if j < 0:
                    j = -j - 1
                acc[j] = acc.get(j, 0.0) + w
            for j, w in acc.items():
                if w != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(w)
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    # -- quadrature -----------------------------------------------------------

    @cached_property
    def _cell_weight_table(self):
        """Per-cell cubic-interpolation integration weights.

        Cell 0 is [0, r_1] and uses the origin anchor (value 0 assumed there);
        cell i >= 1 is [r_i, r_{i+1}] (1-based) with a 4-node stencil.
        Returns (index arrays, weight arrays) per cell.
        """
        r = self.nodes
        N = self.num_nodes
        cells = []
        x0 = np.concatenate(([0.0], r[:3]))
        w0 = self._poly_cell_weights(x0, 0.0, r[0])
        cells.append((np.arange(-1, 3), w0))
        for i in range(N - 1):
            lo = min(max(i - 1, 0), N - 4)
            xs = r[lo : lo + 4]
            if i == 0:
                xs = np.concatenate(([0.0], r[:3]))
                w = self._poly_cell_weights(xs, r[0], r[1])
                cells.append((np.arange(-1, 3), w))
            else:
                w = self._poly_cell_weights(xs, r[i], r[i + 1])
                cells.append((np.arange(lo, lo + 4), w))
        return cells

    @staticmethod
    def _poly_cell_weights(xs: np.ndarray, a: float, b: float) -> np.ndarray:
        """Integrate the Lagrange basis on nodes xs over [a, b]."""
        m = len(xs)
        scale = xs[-1] - xs[0]
        t = xs / scale
        vander = np.vander(t, m, increasing=True).T
        moments = np.array(
            [((b / scale) ** (p + 1) - (a / scale) ** (p + 1)) / (p + 1) for p in range(m)]
        )
        return np.linalg.solve(vander, moments) * scale

    @cached_property
    def _cell_matrix(self) -> sp.csr_matrix:
        """Sparse map values -> per-cell integrals (origin anchor dropped)."""
        cells = self._cell_weight_table
        rows, cols, vals = [], [], []
        for i, (idxs, wts) in enumerate(cells):
            for j, wt in zip(idxs, wts):
                if j >= 0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(wt)
        N = self.num_nodes
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

    def cumulative_integral(self, values: np.ndarray) -> np.ndarray:
        """F_i = int_0^{r_i} f dr for integrands vanishing at the origin."""
        return np.cumsum(self._cell_matrix @ values)

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Linear functional w with w @ f = int_0^{R_max} f dr (f(0) = 0)."""
        return np.asarray(self._cell_matrix.sum(axis=0)).ravel()

    def integral(self, values: np.ndarray) -> float:
        return float(self.quad_weights @ values)

    def integral_to(self, values: np.ndarray, radius: float) -> float:
        """int_0^radius f dr by interpolating the cumulative integral."""
        if radius <= 0 or radius > self.r_max * (1 + 1e-12):
            raise ValueError("radius outside (0, R_max]")
        cum = self.cumulative_integral(values)
        if radius >= self.r_max:
            return float(cum[-1])
        return interp_local(self.nodes, cum, radius)


def sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere, 2 pi^(n/2) / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
