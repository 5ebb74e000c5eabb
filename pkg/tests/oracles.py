"""Brute-force coordinate oracles built with sympy.

Everything here is derived from the coordinate metric by textbook index
gymnastics (Christoffel symbols, Riemann tensor, covariant derivatives) with
no reuse of the package's radial reductions, so agreement is a genuine
cross-check.  Dimension n means the metric

    g = e^(2u(r)) dr^2 + (e^(v(r)) sinh r)^2 [round metric on S^(n-1)]

written in spherical angles; radial symmetric 2-tensors carry frame
components (a, b).
"""

from __future__ import annotations

import numpy as np
import sympy as sp


def _coords(n):
    r = sp.symbols("r", positive=True)
    angles = sp.symbols(f"t1:{n}")  # t1 .. t(n-1)
    return r, list(angles)


def _metric(n, u, v):
    r, angles = _coords(n)
    psi = sp.exp(v) * sp.sinh(r)
    gdiag = [sp.exp(2 * u)]
    factor = sp.Integer(1)
    for k in range(n - 1):
        gdiag.append(psi**2 * factor)
        if k < n - 2:
            factor = factor * sp.sin(angles[k]) ** 2
    return r, angles, gdiag


def christoffels(n, u, v):
    r, angles, gdiag = _metric(n, u, v)
    xs = [r] + angles
    g = sp.diag(*gdiag)
    ginv = sp.diag(*[1 / d for d in gdiag])
    gam = [[[sp.Integer(0)] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for c in range(b, n):
                expr = sp.Integer(0)
                for d in range(n):
                    if ginv[a, d] == 0:
                        continue
                    expr += ginv[a, d] * (
                        sp.diff(g[d, c], xs[b]) + sp.diff(g[b, d], xs[c]) - sp.diff(g[b, c], xs[d])
                    )
                expr = sp.together(expr / 2)
                gam[a][b][c] = expr
                gam[a][c][b] = expr
    return xs, g, ginv, gam


def riemann_down(n, u, v):
    """R_{abcd} = g_ae (d_c Gamma^e_{db} - d_d Gamma^e_{cb} + ...)."""
    xs, g, ginv, gam = christoffels(n, u, v)
    riem = {}
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    expr = sp.diff(gam[a][d][b], xs[c]) - sp.diff(gam[a][c][b], xs[d])
                    for e in range(n):
                        expr += gam[a][c][e] * gam[e][d][b] - gam[a][d][e] * gam[e][c][b]
                    riem[(a, b, c, d)] = expr
    down = {}
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    expr = sp.Integer(0)
                    for e in range(n):
                        if g[a, e] != 0:
                            expr += g[a, e] * riem[(e, b, c, d)]
                    down[(a, b, c, d)] = expr
    return xs, g, ginv, down


def sectional_curvatures(n, u_expr, v_expr):
    """Callables r -> (K_rad, K_tan) from the full Riemann tensor."""
    r = sp.symbols("r", positive=True)
    xs, g, ginv, down = riemann_down(n, u_expr, v_expr)
    # K(e_i, e_j) = <R(e_i, e_j) e_j, e_i> / (g_ii g_jj); the orientation of
    # the index loop is pinned so the hyperbolic reference gives -1
    k_rad = sp.together(-down[(0, 1, 1, 0)] / (g[0, 0] * g[1, 1]))
    k_tan = sp.together(-down[(1, 2, 2, 1)] / (g[1, 1] * g[2, 2]))
    subs = {a: 1.1 + 0.13 * i for i, a in enumerate(xs[1:])}
    k_rad_fn = sp.lambdify(r, k_rad.subs(subs), "numpy")
    k_tan_fn = sp.lambdify(r, k_tan.subs(subs), "numpy")
    # orientation: hyperbolic values must be -1
    zero = {sp.Symbol("r"): 1.0}
    del zero
    return k_rad_fn, k_tan_fn


def tensor_laplacian_oracle(n, u_expr, v_expr, a_expr, b_expr):
    """Callables r -> frame components of -tr grad^2 h for the radial tensor."""
    xs, g, ginv, gam_pack = None, None, None, None
    xs, g, ginv, gam = christoffels(n, u_expr, v_expr)
    r = xs[0]
    psi2 = g[1, 1]
    h = sp.zeros(len(xs), len(xs))
    h[0, 0] = a_expr * g[0, 0]
    for k in range(1, len(xs)):
        h[k, k] = b_expr * g[k, k]

    nn = len(xs)
    # first covariant derivative: (grad h)_{a;bc}
    dh = {}
    for a in range(nn):
        for b in range(nn):
            for c in range(nn):
                expr = sp.diff(h[b, c], xs[a])
                for e in range(nn):
                    expr -= gam[e][a][b] * h[e, c] + gam[e][a][c] * h[b, e]
                dh[(a, b, c)] = expr
    # second: (grad^2 h)_{ab;cd} = d_a (dh)_{b;cd} - Gamma-corrections
    lap = sp.zeros(nn, nn)
    for c in range(nn):
        for d in range(nn):
            total = sp.Integer(0)
            for a in range(nn):
                if ginv[a, a] == 0:
                    continue
                expr = sp.diff(dh[(a, c, d)], xs[a])
                for e in range(nn):
                    expr -= (
                        gam[e][a][a] * dh[(e, c, d)]
                        + gam[e][a][c] * dh[(a, e, d)]
                        + gam[e][a][d] * dh[(a, c, e)]
                    )
                total += ginv[a, a] * expr
            lap[c, d] = -total  # positive-spectrum convention
    subs = {a: 1.07 + 0.11 * i for i, a in enumerate(xs[1:])}
    comp_a = sp.together(lap[0, 0] / g[0, 0]).subs(subs)
    comp_b = sp.together(lap[1, 1] / g[1, 1]).subs(subs)
    return (
        sp.lambdify(r, comp_a, "numpy"),
        sp.lambdify(r, comp_b, "numpy"),
    )


def adm_integrand_oracle(n, a_expr, b_expr):
    """Callable r -> (div h - d tr h)(unit radial) on the hyperbolic reference."""
    r = sp.symbols("r", positive=True)
    zero = sp.Integer(0)
    xs, g, ginv, gam = christoffels(n, zero, zero)
    nn = len(xs)
    h = sp.zeros(nn, nn)
    h[0, 0] = a_expr  # ghat_rr = 1
    for k in range(1, nn):
        h[k, k] = b_expr * g[k, k]
    dh = {}
    for a in range(nn):
        for b in range(nn):
            for c in range(nn):
                expr = sp.diff(h[b, c], xs[a])
                for e in range(nn):
                    expr -= gam[e][a][b] * h[e, c] + gam[e][a][c] * h[b, e]
                dh[(a, b, c)] = expr
    div_r = sp.Integer(0)
    for a in range(nn):
        if ginv[a, a] != 0:
            div_r += ginv[a, a] * dh[(a, a, 0)]
    tr = sp.Integer(0)
    for a in range(nn):
        if ginv[a, a] != 0:
            tr += ginv[a, a] * h[a, a]
    dtr_r = sp.diff(tr, xs[0])
    expr = sp.together(div_r - dtr_r)
    subs = {a: 0.97 + 0.21 * i for i, a in enumerate(xs[1:])}
    return sp.lambdify(r, expr.subs(subs), "numpy")


def deturck_oracle(n, u_expr, v_expr):
    """Callable r -> W^r = g^{pq}(Gamma - Gammahat)^r_{pq}."""
    r = sp.symbols("r", positive=True)
    xs, g, ginv, gam = christoffels(n, u_expr, v_expr)
    zero = sp.Integer(0)
    _, _, _, gam0 = christoffels(n, zero, zero)
    expr = sp.Integer(0)
    for p in range(len(xs)):
        if ginv[p, p] == 0:
            continue
        expr += ginv[p, p] * (gam[0][p][p] - gam0[0][p][p])
    subs = {a: 1.19 + 0.07 * i for i, a in enumerate(xs[1:])}
    return sp.lambdify(r, sp.together(expr).subs(subs), "numpy")


def gaussian_expr(center, width, amp=1.0):
    r = sp.symbols("r", positive=True)
    return amp * sp.exp(-(((r - center) / width) ** 2))
