"""Finite-dimensional reduction pipeline and exponent estimation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pelab import lojasiewicz as loj


def test_kernel_projection_trivial():
    basis, proj = loj.kernel_projection(loj.quadratic_well(3))
    assert basis.shape[1] == 0
    assert np.abs(proj).max() == 0.0


def test_kernel_projection_one_dimensional():
    # F = -x1^2 in dim 2: kernel = span{e2}
    functional = loj.AnalyticFunctional(
        dim=2,
        eval=lambda x: -float(x[0] ** 2),
        grad=lambda x: np.array([-2.0 * x[0], 0.0]),
        hess=lambda x: np.diag([-2.0, 0.0]),
        provenance="-x1^2",
    )
    basis, proj = loj.kernel_projection(functional)
    assert basis.shape[1] == 1
    assert abs(abs(basis[1, 0]) - 1.0) < 1e-14
    assert abs(basis[0, 0]) < 1e-14


def test_kernel_projection_fully_degenerate():
    basis, proj = loj.kernel_projection(loj.quartic_well(2))
    assert basis.shape[1] == 2
    assert np.allclose(proj, np.eye(2))


def test_projector_properties():
    for factory, _ in loj.STANDARD_TABLE.values():
        _, proj = loj.kernel_projection(factory())
        assert np.abs(proj @ proj - proj).max() <= 1e-12
        assert np.abs(proj - proj.T).max() <= 1e-12


def test_d0n_nonsingular():
    for name, (factory, _) in loj.STANDARD_TABLE.items():
        functional = factory()
        lmat = np.asarray(functional.hess(np.zeros(functional.dim)))
        _, proj = loj.kernel_projection(functional)
        cond = np.linalg.cond(lmat + proj)
        assert np.isfinite(cond) and cond < 1e6, name


def test_invert_n_at_zero():
    for factory, _ in loj.STANDARD_TABLE.values():
        functional = factory()
        x = loj.invert_n(functional, np.zeros(functional.dim))
        assert np.abs(x).max() <= 1e-12


def test_round_trip_random_points():
    rng = np.random.default_rng(1)
    for factory, _ in loj.STANDARD_TABLE.values():
        functional = factory()
        for _ in range(50):
            x = 0.05 * rng.standard_normal(functional.dim)
            z = loj.invert_n(functional, loj.n_map(functional, x))
            assert np.abs(z - x).max() <= 1e-10


def test_gradient_consistency_all_table():
    rng = np.random.default_rng(2)
    for name, (factory, _) in loj.STANDARD_TABLE.items():
        assert factory().check_consistency(rng), name


@pytest.mark.parametrize("name", sorted(loj.STANDARD_TABLE))
def test_exponent_table(name):
    factory, expected = loj.STANDARD_TABLE[name]
    theta, c = loj.ls_exponent(factory())
    assert abs(theta - expected) <= 0.02
    assert np.isfinite(c) and c > 0


def test_exponent_quadratic_constant():
    # |F|^{2-1} = |x|^2 = |grad F|^2 / 4 exactly
    theta, c = loj.ls_exponent(loj.quadratic_well(3))
    assert theta == 1.0
    assert c == pytest.approx(0.25, rel=1e-6)


def test_lemma_checks_finite_constants():
    for name, (factory, _) in loj.STANDARD_TABLE.items():
        checks = loj.verify_lemmas(factory(), samples=100)
        for row in checks.as_rows():
            assert np.isfinite(row["constant"]), (name, row)
        assert checks.round_trip_max <= 1e-10, name


def test_reduced_functional_trivial_kernel():
    # F = -|x|^2: G is defined on the zero kernel; on the full space the
    # reduction is the identity composed with F
    functional = loj.quadratic_well(2)
    g_reduced = loj.reduced_functional(functional)
    # N = grad F = -2x, so Phi(y) = -y/2 and G(y) = -|y|^2/4
    for y in (np.array([0.02, -0.01]), np.array([-0.015, 0.03])):
        assert g_reduced(y) == pytest.approx(-float(y @ y) / 4, rel=1e-9)


def test_reduced_functional_polynomial_on_kernel():
    # mixed case: on the kernel direction G is analytic; an 8th-degree fit
    # reproduces it to high accuracy
    functional = loj.mixed_degenerate()
    g_reduced = loj.reduced_functional(functional)
    basis, _ = loj.kernel_projection(functional)
    ts = np.linspace(-0.1, 0.1, 33)
    vals = np.array([g_reduced(t * basis[:, 0]) for t in ts])
    coef = np.polyfit(ts, vals, 8)
    resid = np.abs(np.polyval(coef, ts) - vals).max()
    assert resid < 1e-8


def test_saddle_cubic_inequality_fails_near_one():
    # on the kernel direction |F|^{2-theta} <= C |grad F|^2 fails for theta
    # near 1: the ratio blows up as the samples scale down
    functional = loj.saddle_cubic()
    theta_bad = 0.95
    ratios = []
    for t in (0.1, 0.01, 0.001):
        x = np.array([0.0, t])
        val = abs(functional.eval(x)) ** (2 - theta_bad)
        gsq = float(np.linalg.norm(functional.grad(x))) ** 2
        ratios.append(val / gsq)
    assert ratios[2] > 10 * ratios[0]


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_round_trip_property(seed):
    functional = loj.mixed_degenerate()
    rng = np.random.default_rng(seed)
    x = 0.05 * rng.standard_normal(2)
    z = loj.invert_n(functional, loj.n_map(functional, x))
    assert np.abs(z - x).max() <= 1e-9


def test_lemma_csv_rows():
    checks = loj.verify_lemmas(loj.quadratic_well(2), samples=50)
    rows = checks.as_rows()
    assert {row["check"] for row in rows} == {
        "round_trip",
        "lipschitz",
        "gradient_comparison",
        "interpolation",
        "value_comparison",
    }
