"""Acceptance criteria: one callable per criterion, shared by the CLI driver
and the pytest acceptance module.

Each criterion function returns (passed, detail string) and runs at the
tolerances fixed here; nothing is deferred to later calibration.  Criteria
7 and 8 share the same pair of flow trajectories through a module cache.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from . import elliptic as ell
from . import flow as fl
from . import functionals as fn
from . import geometry as geo
from . import lojasiewicz as loj
from .errors import LimitNotConverged
from .fields import RadialScalarField, RadialSymmetric2Tensor
from .grid import RadialGrid, sphere_area
from .harness import ExperimentConfig, run


def _gaussian(grid, center, width, amp=1.0):
    x = (grid.nodes - center) / width
    out = amp * np.exp(-(x * x))
    out[np.abs(x) >= 6] = 0.0
    return out


def _compact_pair(grid, amp, rng):
    return RadialSymmetric2Tensor(
        grid,
        _gaussian(grid, 3 + 2 * rng.random(), 0.9 + 0.5 * rng.random(), amp * rng.uniform(-1, 1)),
        _gaussian(grid, 3 + 2 * rng.random(), 0.9 + 0.5 * rng.random(), amp * rng.uniform(-1, 1)),
    )


def _divfree_compact(grid, amp):
    n = grid.n
    r = grid.nodes

    def weight(b):
        return (n - 1) * np.cosh(r) * np.sinh(r) ** (n - 2) * b

    b1 = _gaussian(grid, 3.0, 0.8)
    b2 = _gaussian(grid, 4.5, 0.8)
    b = b1 - (grid.integral(weight(b1)) / grid.integral(weight(b2))) * b2
    a = grid.cumulative_integral(weight(b)) / np.sinh(r) ** (n - 1)
    h = RadialSymmetric2Tensor(grid, a, b)
    s = h.sup_norm()
    return RadialSymmetric2Tensor(grid, amp * a / s, amp * b / s)


# -- criterion 1 ---------------------------------------------------------------


def criterion_1_hyperbolic_identities():
    """scal, Ric, boundary mass, RV, entropy, both gradients vanish at ghat."""
    worst = 0.0
    for n in (3, 4, 5):
        grid = RadialGrid.make(n, 800, 30.0, scheme=4)
        ghat = geo.hyperbolic_reference(grid)
        curv = geo.curvature(ghat)
        vals = [
            np.abs(curv.scal_excess).max(),
            np.abs(curv.ric_rr_excess).max(),
            np.abs(curv.ric_tt_excess).max(),
            abs(fn.adm_mass_at_radius(ghat, ghat, 0.7 * grid.r_max)),
            abs(fn.renormalized_volume_at_radius(ghat, ghat, 0.7 * grid.r_max)),
        ]
        mu, f = fn.entropy(ghat, ghat)
        vals.append(abs(mu))
        vals.append(fn.entropy_gradient(ghat, ghat, f=f).sup_norm())
        vals.append(fn.s_gradient(ghat, ghat).sup_norm())
        worst = max(worst, max(vals))
    return worst <= 1e-6, f"worst residual {worst:.3e} (tol 1e-6)"


# -- criterion 2 ---------------------------------------------------------------


def criterion_2_gradient_consistency(pairs: int = 10):
    """Central differences of mu and S match the gradient pairings (1e-3)."""
    grid = RadialGrid.make(4, 1600, 20.0)
    ghat = geo.hyperbolic_reference(grid)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(pairs):
        base = ghat.perturbed(_compact_pair(grid, 1.0, rng), 4e-3)
        d = _compact_pair(grid, 1.0, rng)
        eps = 1e-4
        mu_p, _ = fn.entropy(base.perturbed(d, +eps), ghat)
        mu_m, _ = fn.entropy(base.perturbed(d, -eps), ghat)
        fd_mu = (mu_p - mu_m) / (2 * eps)
        pair_mu = geo.l2_inner_tensor(
            base, fn.entropy_gradient(base, ghat), base.tensor_to_frame(d)
        )
        s_p = fn.s_functional(base.perturbed(d, +eps), ghat)
        s_m = fn.s_functional(base.perturbed(d, -eps), ghat)
        fd_s = (s_p - s_m) / (2 * eps)
        pair_s = geo.l2_inner_tensor(base, fn.s_gradient(base, ghat), base.tensor_to_frame(d))
        worst = max(
            worst,
            abs(fd_mu - pair_mu) / abs(pair_mu),
            abs(fd_s - pair_s) / abs(pair_s),
        )
    return worst <= 1e-3, f"worst relative error {worst:.3e} over {pairs} pairs (tol 1e-3)"


# -- criterion 3 ---------------------------------------------------------------


def criterion_3_potential_el_consistency():
    """f-variation of the potential functional equals the weighted EL residual;
    the transcribed integrand variant must fail."""
    grid = RadialGrid.make(4, 800, 20.0)
    n = grid.n
    ghat = geo.hyperbolic_reference(grid)
    rng = np.random.default_rng(7)
    g = ghat.perturbed(_compact_pair(grid, 1.0, rng), 2e-3)
    f = RadialScalarField(grid, _gaussian(grid, 4.0, 1.3, 5e-3))
    u_dir = _gaussian(grid, 4.5, 1.1)
    eps = 1e-6
    w_p = fn.w_functional(g, RadialScalarField(grid, f.values + eps * u_dir))
    w_m = fn.w_functional(g, RadialScalarField(grid, f.values - eps * u_dir))
    fd = (w_p - w_m) / (2 * eps)
    el = (
        2 * geo.scalar_laplacian(g, f).values
        + geo.grad_squared(g, f)
        - geo.curvature(g).scal_excess
        + 2 * (n - 1) * f.values
    )
    weighted = float(geo.volume_weights(g) @ (u_dir * np.exp(-f.values) * el))
    rel = abs(fd - weighted) / abs(weighted)
    # the transcribed "+f" variant diverges on admissible inputs
    try:
        fn.w_functional(g, f, integrand="transcribed")
        transcribed_fails = False
    except LimitNotConverged:
        transcribed_fails = True
    ok = rel <= 1e-4 and transcribed_fails
    return ok, f"rel {rel:.3e} (tol 1e-4); transcribed variant fails: {transcribed_fails}"


# -- criterion 4 ---------------------------------------------------------------


def criterion_4_criticality_slopes():
    """Slope-2 log-log fits of |mu|, |S|, |m_VR| over eps in [1e-4, 1e-2].

    The mass fit uses trace-free directions, whose trace integral vanishes;
    the unconstrained linear response of the mass is the genuine trace
    integral (n-1) int tr h dV (verified elsewhere), not a defect.
    """
    grid = RadialGrid.make(4, 800, 20.0)
    n = grid.n
    ghat = geo.hyperbolic_reference(grid)
    rng = np.random.default_rng(11)
    h = _compact_pair(grid, 1.0, rng)
    b = _gaussian(grid, 4.0, 1.0)
    h_tf = RadialSymmetric2Tensor(grid, -(n - 1) * b, b)
    eps_list = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
    mus, svals, mvrs = [], [], []
    for eps in eps_list:
        g = ghat.perturbed(h, eps)
        mu, _ = fn.entropy(g, ghat)
        mus.append(abs(mu))
        svals.append(abs(fn.s_functional(g, ghat)))
        mvrs.append(abs(fn.volume_renormalized_mass(ghat.perturbed(h_tf, eps), ghat)))
    slopes = [
        float(np.polyfit(np.log(eps_list), np.log(v), 1)[0]) for v in (mus, svals, mvrs)
    ]
    ok = all(abs(s - 2.0) <= 0.1 for s in slopes)
    return ok, "slopes mu/S/m_VR = " + ", ".join(f"{s:.3f}" for s in slopes) + " (tol 2 +/- 0.1)"


# -- criterion 5 ---------------------------------------------------------------


def criterion_5_local_positive_mass(seeds: int = 20):
    """scal >= -n(n-1) inputs have m_VR >= -1e-8; conformal normalization
    keeps RV >= -1e-8 and does not increase the mass."""
    grid = RadialGrid.make(4, 800, 20.0)
    ghat = geo.hyperbolic_reference(grid)
    n = grid.n
    worst_mvr = np.inf
    worst_rv = np.inf
    worst_drop = -np.inf
    for j in range(seeds):
        rng = np.random.Generator(np.random.Philox([77, j]))
        center = 2.0 + 3.0 * rng.random()
        width = 0.8 + 0.7 * rng.random()
        q = RadialScalarField(grid, _gaussian(grid, center, width, 1e-3))
        g = ell.prescribe_scalar_curvature(ghat, q)
        mvr = fn.volume_renormalized_mass(g, ghat)
        _, gbar = ell.solve_yamabe(g)
        mvr_bar = fn.volume_renormalized_mass(gbar, ghat, strict=False)
        rv_bar = fn.renormalized_volume_at_radius(gbar, ghat, 0.9 * grid.r_max)
        worst_mvr = min(worst_mvr, mvr)
        worst_rv = min(worst_rv, rv_bar)
        worst_drop = max(worst_drop, mvr_bar - mvr)
    ok = worst_mvr >= -1e-8 and worst_rv >= -1e-8 and worst_drop <= 1e-8
    return ok, (
        f"min m_VR {worst_mvr:.3e}, min RV(gbar) {worst_rv:.3e}, "
        f"max mass increase {worst_drop:.3e} over {seeds} seeds (tol -1e-8)"
    )


# -- criterion 6 ---------------------------------------------------------------


def criterion_6_s_equals_minus_mvr():
    """S = -m_VR on constant-scalar-curvature inputs (1e-6)."""
    worst = 0.0
    for seed, center in ((1, 3.0), (2, 3.5), (3, 2.5)):
        grid = RadialGrid.make(4, 1600, 20.0)
        ghat = geo.hyperbolic_reference(grid)
        rng = np.random.Generator(np.random.Philox([5, seed]))
        q = RadialScalarField(grid, _gaussian(grid, center, 0.9 + 0.3 * rng.random(), 2e-6))
        gq = ell.prescribe_scalar_curvature(ghat, q)
        _, gbar = ell.solve_yamabe(gq)
        s_val = fn.s_functional(gbar, ghat)
        mvr = fn.volume_renormalized_mass(gbar, ghat, strict=False)
        worst = max(worst, abs(s_val + mvr))
    return worst <= 1e-6, f"worst |S + m_VR| {worst:.3e} (tol 1e-6)"


# -- criteria 7 and 8 ------------------------------------------------------------


_FLOW_CACHE: dict = {}


def _stability_trajectories():
    if "runs" not in _FLOW_CACHE:
        grid = RadialGrid.make(3, 400, 20.0)
        ghat = geo.hyperbolic_reference(grid)
        g0 = ghat.perturbed(_divfree_compact(grid, 1e-2), 1.0)
        runs = {}
        for gauge in ("deturck", "entropy_gradient"):
            cfg = fl.FlowConfig(
                gauge=gauge,
                dt_init=2e-2,
                t_max=60.0,
                conv_tol=1e-6,
                escape_radius=0.5,
                diag_every=4,
            )
            runs[gauge] = fl.run_flow(g0, cfg)
        _FLOW_CACHE["runs"] = runs
    return _FLOW_CACHE["runs"]


def criterion_7_flow_stability():
    """Both gauges converge from sup-norm 1e-2 with monotone entropy and a
    final gradient norm below 1e-6."""
    details = []
    ok = True
    for gauge, traj in _stability_trajectories().items():
        mus = traj.mus()
        worst_dec = float(np.minimum(np.diff(mus), 0.0).min()) if len(mus) > 1 else 0.0
        good = (
            traj.verdict == "Converged"
            and worst_dec >= -1e-8
            and traj.states[-1].grad_norm <= 1e-6
        )
        ok = ok and good
        details.append(
            f"{gauge}: {traj.verdict} at t={traj.states[-1].t:.1f}, "
            f"worst entropy decrease {worst_dec:.1e}, final |grad| {traj.states[-1].grad_norm:.1e}"
        )
    return ok, "; ".join(details)


def criterion_8_lojasiewicz_along_flow():
    """Fitted exponent in [0.9, 1.0]; exponential branch of the rate fit."""
    details = []
    ok = True
    for gauge, traj in _stability_trajectories().items():
        good = (
            traj.theta_fit is not None
            and 0.9 <= traj.theta_fit <= 1.0
            and traj.rate_fit is not None
            and traj.rate_fit["branch"] == "exponential"
        )
        ok = ok and good
        theta = None if traj.theta_fit is None else round(traj.theta_fit, 3)
        branch = None if traj.rate_fit is None else traj.rate_fit["branch"]
        details.append(f"{gauge}: theta {theta}, branch {branch}")
    return ok, "; ".join(details)


# -- criterion 9 ---------------------------------------------------------------


def criterion_9_linearization_anchor():
    """One DeTurck step on divergence-free eps-perturbations matches the
    Einstein-operator heat action at joint order >= 1.9 in (dt, eps)."""
    grid = RadialGrid.make(3, 300, 15.0)
    ghat = geo.hyperbolic_reference(grid)
    nn = grid.num_nodes
    a_form, m = geo.einstein_form(ghat)
    op = -(a_form.toarray() / m[:, None])
    op[nn - 1, :] = 0.0
    op[2 * nn - 1, :] = 0.0
    # the dissipation filter is a separate stabilization layer with its own
    # O(dt) footprint at fixed grid; the anchor compares the bare IMEX step
    stepper = fl._Stepper(grid, "deturck", fl.FlowConfig().solve_opts, use_filter=False)
    h = _divfree_compact(grid, 1.0)
    errs = []
    levels = ((5e-3, 5e-4), (2.5e-3, 2.5e-4), (1.25e-3, 1.25e-4))
    for dt, eps in levels:
        g0 = ghat.perturbed(h, eps)
        x0 = fl._metric_to_vec(g0)
        x1, _ = stepper.step(x0, dt, None)
        target = sla.expm(dt * op) @ x0
        errs.append(np.abs(x1 - target).max() / eps)
    orders = [float(np.log2(errs[k] / errs[k + 1])) for k in range(len(errs) - 1)]
    ok = min(orders) >= 1.9
    return ok, f"observed orders {['%.2f' % o for o in orders]} (need >= 1.9)"


# -- criterion 10 -----------------------------------------------------------------


def criterion_10_spectral_suite():
    """Indicial radii (scalar closed form; Einstein configuration exact) and
    nonnegative lowest Einstein eigenvalue with truncation-monotone values."""
    ok = True
    details = []
    for n in (3, 4, 5, 6):
        for c in (0.5, 1.0, 2.0):
            rep = ell.indicial_roots(n, c)
            expected = np.sqrt(((n - 1) / 2) ** 2 + c)
            ok = ok and abs(rep.radius - expected) <= 1e-13
        repe = ell.indicial_roots(n, **ell.EINSTEIN_TT_CONFIG)
        ok = ok and repe.radius == (n - 1) / 2
    details.append("indicial radii exact")
    lams = []
    for r_max, num in ((15.0, 300), (20.0, 400), (25.0, 500)):
        grid = RadialGrid.make(3, num, r_max)
        ghat = geo.hyperbolic_reference(grid)
        lam, _ = ell.lowest_eigenvalue(ghat, "einstein", subspace="trace_free")
        lams.append(lam)
    monotone = all(lams[i + 1] <= lams[i] + 1e-10 for i in range(len(lams) - 1))
    ok = ok and monotone and lams[-1] >= -1e-4
    details.append(
        "lambda_min(trace-free) = "
        + ", ".join(f"{v:.5f}" for v in lams)
        + f" (monotone {monotone}, final >= -1e-4)"
    )
    return ok, "; ".join(details)


# -- criterion 11 -----------------------------------------------------------------


def criterion_11_reduction_harness():
    """Exponent table within 0.02 of the closed forms and finite lemma
    constants on 100 samples per functional.

    The cubic saddle's closed-form exponent is 2/3 in the squared-gradient
    normalization used throughout (equivalently 1/3 in the first-power
    form), and the inequality indeed fails for exponents near 1.
    """
    ok = True
    details = []
    for name, (factory, expected) in loj.STANDARD_TABLE.items():
        functional = factory()
        theta, _ = loj.ls_exponent(functional)
        checks = loj.verify_lemmas(functional, samples=100)
        finite = all(np.isfinite(row["constant"]) for row in checks.as_rows())
        good = abs(theta - expected) <= 0.02 and finite and checks.round_trip_max <= 1e-10
        ok = ok and good
        details.append(f"{name}: theta {theta:.2f} (expect {expected:.3f})")
    return ok, "; ".join(details)


# -- criterion 12 -----------------------------------------------------------------


def criterion_12_reproducibility(tmp_base: str = None):
    """Identical config and seed reproduce byte-identical outputs."""
    import tempfile

    digests = []
    with tempfile.TemporaryDirectory(dir=tmp_base) as td:
        for rep in range(2):
            out = f"{td}/rep{rep}"
            cfg = ExperimentConfig.from_dict(
                {
                    "experiment": "flow",
                    "n": 3,
                    "num_nodes": 300,
                    "r_max": 15.0,
                    "seed": 41,
                    "perturbation": {
                        "kind": "divfree-compact",
                        "amplitude": 1e-2,
                        "support": [1.0, 6.0],
                        "seed": 41,
                    },
                    "flow": {"gauge": "deturck", "dt_init": 2e-2, "t_max": 20.0, "diag_every": 4},
                    "output_dir": out,
                }
            )
            manifest = run(cfg)
            digests.append(tuple(sorted((o["name"], o["sha256"]) for o in manifest.outputs)))
    ok = digests[0] == digests[1]
    return ok, f"output digests identical: {ok}"


CRITERIA = [
    ("1 hyperbolic identities", criterion_1_hyperbolic_identities),
    ("2 gradient consistency", criterion_2_gradient_consistency),
    ("3 potential/EL consistency", criterion_3_potential_el_consistency),
    ("4 criticality slopes", criterion_4_criticality_slopes),
    ("5 local positive mass", criterion_5_local_positive_mass),
    ("6 S = -m_VR", criterion_6_s_equals_minus_mvr),
    ("7 flow stability", criterion_7_flow_stability),
    ("8 Lojasiewicz along flow", criterion_8_lojasiewicz_along_flow),
    ("9 linearization anchor", criterion_9_linearization_anchor),
    ("10 spectral/indicial suite", criterion_10_spectral_suite),
    ("11 reduction harness", criterion_11_reduction_harness),
    ("12 reproducibility", criterion_12_reproducibility),
]


def acceptance_suite(stream=None) -> list[tuple[str, bool, str]]:
    """Run every acceptance criterion and emit a pass/fail table."""
    import sys

    stream = stream or sys.stdout
    results = []
    for name, fun in CRITERIA:
        try:
            passed, detail = fun()
        except Exception as exc:  # pragma: no cover - defensive reporting
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, passed, detail))
        stream.write(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}\n")
    return results
