"""Curvature, Laplace-type operators, volume integrals, and the gauge vector.

All formulas are the cohomogeneity-one reductions for

    g = e^(2u) dr^2 + psi^2 g_sphere,      psi = e^v sinh r.

With lam := psi'/psi = v' + coth r and the proper-distance derivative
d/ds = e^(-u) d/dr, the sectional curvatures are

    K_rad = -e^(-2u) [v'' + v'^2 + 2 v' coth r + 1 - u'(v' + coth r)]
    K_tan =  e^(-2u) [csch^2(r) expm1(2(u-v)) - 1 - 2 v' coth r - v'^2]

written so that the hyperbolic cancellations coth^2 - csch^2 = 1 happen in
exact arithmetic; at u = v = 0 both values are -1 to the last ulp.  Ricci
and scalar curvature follow from the frame identities

    ric_rr = (n-1) K_rad,  ric_tt = K_rad + (n-2) K_tan,
    scal   = 2(n-1) K_rad + (n-1)(n-2) K_tan.

Sign conventions: Laplacian Delta = -tr grad^2 (positive spectrum), and the
curvature contraction on symmetric 2-tensors is normalized by Rcirc(g) =
Ric(g), which on the radial class reads

    (Rcirc h)_a = (n-1) K_rad b,   (Rcirc h)_b = K_rad a + (n-2) K_tan b.

Laplacians are assembled in symmetric conservative (weak) form
A = D1^T diag(w k) D1 with k = e^(-u) psi^(n-1), M = diag(w m) with
m = e^u psi^(n-1), so the discrete operators are exactly self-adjoint in the
discrete L^2(dV_g) pairing; pointwise values are 4th order at interior
nodes.
"""

from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, NonFiniteProfile, RadiusOutOfRange
from .fields import CurvatureData, RadialScalarField, RadialSymmetric2Tensor, WarpedMetric
from .grid import RadialGrid, interp_local, sphere_area

_OPERATOR_CACHE: "weakref.WeakKeyDictionary[WarpedMetric, dict]" = weakref.WeakKeyDictionary()


def _ops(g: WarpedMetric) -> dict:
    cache = _OPERATOR_CACHE.get(g)
    if cache is None:
        cache = {}
        _OPERATOR_CACHE[g] = cache
    return cache


def _check_grid(g: WarpedMetric, other) -> None:
    if not g.grid.compatible(other.grid):
        raise GridMismatch("operands live on different grids")


def hyperbolic_reference(grid: RadialGrid) -> WarpedMetric:
    """The hyperbolic model: u = v = 0, K_rad = K_tan = -1."""
    z = np.zeros(grid.num_nodes)
    return WarpedMetric(grid, z, z)


def curvature(g: WarpedMetric) -> CurvatureData:
    g.require_finite()
    du, dv = g.du, g.dv
    d2v = g.grid.deriv2(g.v)
    e2u = np.exp(-2 * g.u)
    em1 = np.expm1(-2 * g.u)
    coth, csch2 = g.coth, g.csch2
    # excess forms K + 1: every term vanishes identically at u = v = 0
    q_rad = d2v + dv * dv + 2 * dv * coth - du * (dv + coth)
    k_rad_excess = -e2u * q_rad - em1
    q_tan = csch2 * np.expm1(2 * (g.u - g.v)) - 2 * dv * coth - dv * dv
    k_tan_excess = e2u * q_tan - em1
    return CurvatureData(g.grid, k_rad_excess, k_tan_excess)


# -- operator assembly --------------------------------------------------------


def volume_weights(g: WarpedMetric) -> np.ndarray:
    """Diagonal of the discrete L^2(dV_g) pairing on scalars (sphere area included).

    Midpoint weights: exact translation invariance across the origin fold
    keeps the weak-form operators pointwise consistent there, and the
    Euler-Maclaurin boundary terms vanish for even-at-origin, decaying
    integrands, so the rule is at least 4th order on the fields in play.
    """
    ops = _ops(g)
    if "vw" not in ops:
        ops["vw"] = sphere_area(g.grid.n) * g.grid.h * g.volume_density
    return ops["vw"]


def _midpoint_flux_weights(g: WarpedMetric) -> np.ndarray:
    """omega * w_mid * k at the flux points, k = e^(-u) psi^(n-1).

    The warp factor sinh is evaluated analytically at the flux points (so the
    flux vanishes identically at the origin) while u, v are interpolated from
    the nodes at matching order.
    """
    ops = _ops(g)
    if "flux_mid" not in ops:
        grid = g.grid
        interp = grid.stag_interp
        u_mid = interp @ g.u
        v_mid = interp @ g.v
        psi_mid = np.exp(v_mid) * np.sinh(grid.midpoints)
        k_mid = np.exp(-u_mid) * psi_mid ** (grid.n - 1)
        ops["flux_mid"] = sphere_area(grid.n) * grid.midpoint_weights * k_mid
    return ops["flux_mid"]


def scalar_form(g: WarpedMetric) -> tuple[sp.csr_matrix, np.ndarray]:
    """(A, M): A symmetric with Delta f = A f / M, M = volume weights.

    Staggered conservative form A = G^T diag(w k) G with G the node-to-flux-
    point derivative: exactly self-adjoint, free of checkerboard null modes,
    4th-order consistent at interior nodes.
    """
    ops = _ops(g)
    if "scalar_form" not in ops:
        gmat = g.grid.stag_d1
        a = (gmat.T @ sp.diags(_midpoint_flux_weights(g)) @ gmat).tocsr()
        ops["scalar_form"] = (a, volume_weights(g))
    return ops["scalar_form"]


def tensor_form(g: WarpedMetric) -> tuple[sp.csr_matrix, np.ndarray]:
    """(A, M) for the rough Laplacian on radial 2-tensors, stacked (a, b).

    Quadratic form: int [e^(-2u)(a'^2 + (n-1) b'^2)
                         + 2(n-1) (e^(-u) lam)^2 (a-b)^2] dV.
    M carries the frame pairing <h, h> = a^2 + (n-1) b^2.
    """
    ops = _ops(g)
    if "tensor_form" not in ops:
        n = g.grid.n
        stag = g.grid.stag_d1
        gmat = (stag.T @ sp.diags(_midpoint_flux_weights(g)) @ stag).tocsr()
        w = sphere_area(n) * np.full(g.grid.num_nodes, g.grid.h)
        wk = w * g.flux_density
        p = sp.diags(2 * (n - 1) * wk * g.lam**2)
        a_form = sp.bmat(
            [[gmat + p, -p], [-p, (n - 1) * gmat + p]], format="csr"
        )
        m = np.concatenate([w * g.volume_density, (n - 1) * w * g.volume_density])
        ops["tensor_form"] = (a_form, m)
    return ops["tensor_form"]


def curvature_action_form(g: WarpedMetric) -> sp.csr_matrix:
    """Symmetric form B with (Rcirc h) = B x / M in the stacked layout."""
    ops = _ops(g)
    if "rcirc_form" not in ops:
        n = g.grid.n
        curv = curvature(g)
        wm = sphere_area(n) * g.grid.h * g.volume_density
        off = sp.diags((n - 1) * wm * curv.k_rad)
        bb = sp.diags((n - 1) * (n - 2) * wm * curv.k_tan)
        zero = sp.csr_matrix((g.grid.num_nodes, g.grid.num_nodes))
        ops["rcirc_form"] = sp.bmat([[zero, off], [off, bb]], format="csr")
    return ops["rcirc_form"]


def einstein_form(g: WarpedMetric) -> tuple[sp.csr_matrix, np.ndarray]:
    """(A, M) for the Einstein operator Delta - 2 Rcirc on radial 2-tensors."""
    ops = _ops(g)
    if "einstein_form" not in ops:
        a, m = tensor_form(g)
        ops["einstein_form"] = ((a - 2 * curvature_action_form(g)).tocsr(), m)
    return ops["einstein_form"]


def _stack(h: RadialSymmetric2Tensor) -> np.ndarray:
    return np.concatenate([h.a, h.b])


def _unstack(grid: RadialGrid, x: np.ndarray) -> RadialSymmetric2Tensor:
    n = grid.num_nodes
    return RadialSymmetric2Tensor(grid, x[:n], x[n:])


# -- operators ----------------------------------------------------------------


def scalar_laplacian(g: WarpedMetric, f: RadialScalarField) -> RadialScalarField:
    """Delta f = -(1/(e^u psi^(n-1))) (e^(-u) psi^(n-1) f')', positive spectrum."""
    _check_grid(g, f)
    g.require_finite()
    a, m = scalar_form(g)
    return RadialScalarField(g.grid, (a @ f.values) / m)


def tensor_laplacian(g: WarpedMetric, h: RadialSymmetric2Tensor) -> RadialSymmetric2Tensor:
    """Rough Laplacian on the radial tensor class; components in the frame of g."""
    _check_grid(g, h)
    g.require_finite()
    a, m = tensor_form(g)
    return _unstack(g.grid, (a @ _stack(h)) / m)


def curvature_action(g: WarpedMetric, h: RadialSymmetric2Tensor) -> RadialSymmetric2Tensor:
    """Rcirc h, normalized by Rcirc(g) = Ric(g)."""
    _check_grid(g, h)
    curv = curvature(g)
    n = g.grid.n
    return RadialSymmetric2Tensor(
        g.grid,
        (n - 1) * curv.k_rad * h.b,
        curv.k_rad * h.a + (n - 2) * curv.k_tan * h.b,
    )


def einstein_operator(g: WarpedMetric, h: RadialSymmetric2Tensor) -> RadialSymmetric2Tensor:
    """Delta_E h = Delta h - 2 Rcirc h."""
    lap = tensor_laplacian(g, h)
    act = curvature_action(g, h)
    return RadialSymmetric2Tensor(g.grid, lap.a - 2 * act.a, lap.b - 2 * act.b)


def integrate_ball(g: WarpedMetric, f: RadialScalarField, radius: float) -> float:
    """int_{B_R} f dV_g = omega_{n-1} int_0^R f e^u psi^(n-1) dr."""
    _check_grid(g, f)
    if not (0 < radius <= g.grid.r_max * (1 + 1e-12)):
        raise RadiusOutOfRange(f"radius {radius} outside (0, {g.grid.r_max}]")
    integrand = f.values * g.volume_density
    return sphere_area(g.grid.n) * g.grid.integral_to(integrand, min(radius, g.grid.r_max))


def area_radius_gauge(g: WarpedMetric) -> WarpedMetric:
    """Pull back to the canonical radial gauge with v = 0.

    Reparameterizes by sinh(rho) = e^v sinh(r), after which the metric is
    e^(2w) drho^2 + sinh^2(rho) g_sphere with w = u + ln cosh(rho) - ln psi'.
    Used by flow diagnostics: the diffeomorphism content of a gauged flow
    state is removed, so windowed functionals of the normalized state are
    gauge-invariant records.
    """
    g.require_finite()
    grid = g.grid
    if not np.any(g.v):
        return g
    psi = g.psi
    dpsi = psi * g.lam
    if np.any(dpsi <= 0):
        raise NonFiniteProfile("area radius is not monotone; cannot normalize gauge")
    rho = np.arcsinh(psi)
    w = g.u + 0.5 * np.log1p(psi * psi) - np.log(dpsi)
    # interpolate w(rho) onto the grid nodes with even reflection at 0
    rho_ext = np.concatenate([-rho[:4][::-1], rho])
    w_ext = np.concatenate([w[:4][::-1], w])
    out = np.empty(grid.num_nodes)
    for i, rr in enumerate(grid.nodes):
        if rr >= rho[-1]:
            out[i] = 0.0
        else:
            out[i] = interp_local(rho_ext, w_ext, rr)
    out[-1] = 0.0
    # one pass of the high-frequency filter removes sub-grid interpolation
    # roughness that curvature second derivatives would otherwise amplify
    out -= grid.highfreq_filter @ out
    return WarpedMetric(grid, out, np.zeros(grid.num_nodes))


def deturck_vector(g: WarpedMetric, ghat: WarpedMetric) -> RadialScalarField:
    """Radial component of W^k = g^pq (Gamma^k_pq - Gammahat^k_pq).

    Vanishes at g = ghat; near-origin cancellation of the coth singularity is
    done through expm1 so the field stays regular.
    """
    _check_grid(g, ghat)
    if not ghat.is_hyperbolic():
        raise NonFiniteProfile("reference metric must be the hyperbolic model")
    n = g.grid.n
    w = np.exp(-2 * g.u) * (
        g.du - (n - 1) * g.dv + (n - 1) * g.coth * np.expm1(2 * (g.u - g.v))
    )
    return RadialScalarField(g.grid, w)


def lie_derivative(g: WarpedMetric, w: RadialScalarField) -> RadialSymmetric2Tensor:
    """L_W g for the radial field W = w(r) d_r, in the frame of g."""
    _check_grid(g, w)
    dw = w.deriv()
    return RadialSymmetric2Tensor(
        g.grid, 2 * (dw + g.du * w.values), 2 * g.lam * w.values
    )


def hessian(g: WarpedMetric, f: RadialScalarField) -> RadialSymmetric2Tensor:
    """grad^2 f in the frame of g: (f_ss, lam_s f_s) with d/ds = e^(-u) d/dr."""
    _check_grid(g, f)
    df = f.deriv()
    d2f = g.grid.deriv2(f.values)
    e2u = np.exp(-2 * g.u)
    return RadialSymmetric2Tensor(g.grid, e2u * (d2f - g.du * df), e2u * g.lam * df)


def divergence(g: WarpedMetric, h: RadialSymmetric2Tensor) -> RadialScalarField:
    """(div_g h)(e_r) for h given in the frame of g."""
    _check_grid(g, h)
    da = g.grid.deriv1(h.a)
    vals = np.exp(-g.u) * (da + (g.grid.n - 1) * g.lam * (h.a - h.b))
    return RadialScalarField(g.grid, vals)


def grad_squared(g: WarpedMetric, f: RadialScalarField) -> np.ndarray:
    """|grad f|^2_g = e^(-2u) (f')^2 as nodal values."""
    _check_grid(g, f)
    df = f.deriv()
    return np.exp(-2 * g.u) * df * df


# -- inner products -----------------------------------------------------------


def l2_inner_scalar(g: WarpedMetric, f1: RadialScalarField, f2: RadialScalarField) -> float:
    return float(volume_weights(g) @ (f1.values * f2.values))


def l2_inner_tensor(
    g: WarpedMetric, h1: RadialSymmetric2Tensor, h2: RadialSymmetric2Tensor
) -> float:
    """<h1, h2>_{L^2(dV_g)} with frame contraction a1 a2 + (n-1) b1 b2."""
    vw = volume_weights(g)
    return float(vw @ (h1.a * h2.a + (g.grid.n - 1) * h1.b * h2.b))


def l2_norm_tensor(g: WarpedMetric, h: RadialSymmetric2Tensor) -> float:
    return float(np.sqrt(max(l2_inner_tensor(g, h, h), 0.0)))


def l2_norm_scalar(g: WarpedMetric, f: RadialScalarField) -> float:
    return float(np.sqrt(max(l2_inner_scalar(g, f, f), 0.0)))
