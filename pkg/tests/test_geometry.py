import json
from fractions import Fraction

import numpy as np
import pytest

from stratlab.errors import ChartMismatch, DomainEscape, InvalidOperands
from stratlab.geometry import (
    AffineMap,
    BumpFunction,
    Box,
    Chart,
    DifferentiableMap,
    PolynomialMap,
    bump_eval,
    bump_grad,
    c1_distance,
    fd_jacobian,
    jacobian_consistency,
    local_representative,
)
from stratlab.subspace import Field


def parabola(shift=0.0):
    # (x, x^2), or the source-shifted (x - c, (x - c)^2)
    c = shift
    return PolynomialMap(1, 2, [[((1,), 1), ((0,), -c)],
                                [((2,), 1), ((1,), -2 * c), ((0,), c * c)]])


def lifted_parabola(shift=0.0):
    c = shift
    return PolynomialMap(1, 2, [[((1,), 1), ((0,), -c)],
                                [((2,), 1), ((1,), -2 * c), ((0,), c * c + 1)]])


# --- boxes / charts -------------------------------------------------------

def test_box_rejects_unordered_bounds():
    with pytest.raises(InvalidOperands):
        Box([1.0], [0.0])


def test_box_json_roundtrip_with_unbounded_sides():
    b = Box([0.0, -np.inf], [np.inf, 2.0])
    d = json.loads(json.dumps(b.to_json()))
    assert d == {"lo": [0.0, None], "hi": [None, 2.0]}
    back = Box.from_json(d)
    assert np.array_equal(back.lo, b.lo) and np.array_equal(back.hi, b.hi)


# --- local representatives ------------------------------------------------

def test_local_representative_global_charts_unchanged():
    f = parabola()
    rep = local_representative(f, Chart.global_chart("R", 1), Chart.global_chart("R2", 2))
    for x in (-1.3, 0.0, 2.5):
        assert np.allclose(rep(x), f(x))
    assert rep.charts == ("R", "R2")


def test_local_representative_hirsch_records_domain():
    f = lifted_parabola()
    u = Chart("U", 1, Box([0.0], [np.inf]))
    rep = local_representative(f, u, Chart.global_chart("V", 2))
    assert np.allclose(rep(0.5), [0.5, 1.25])
    assert rep.domain.lo[0] == 0.0 and np.isinf(rep.domain.hi[0])


def test_local_representative_escape_raises():
    # f(3) = (3, 9) lies outside V
    v = Chart("V", 2, Box([-5.0, -5.0], [5.0, 5.0]))
    with pytest.raises(ChartMismatch):
        local_representative(parabola(), Chart("U", 1, Box([0.0], [4.0])), v,
                             sample_points=[[0.0], [1.0], [3.0]])


# --- finite differences ----------------------------------------------------

def test_fd_jacobian_linear_exact():
    a = np.array([[1.0, -2.0], [0.5, 3.0], [4.0, 0.0]])
    L = AffineMap(a)
    for z in ([0.0, 0.0], [1.5, -2.0]):
        assert np.allclose(fd_jacobian(L, z), a, atol=1e-12)


def test_fd_jacobian_parabola():
    j = fd_jacobian(parabola(), [1.0], h=1e-4)
    assert j[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert j[1, 0] == pytest.approx(2.0, abs=1e-7)


def test_fd_jacobian_lifted_parabola():
    j = fd_jacobian(lifted_parabola(), [0.5])
    assert np.allclose(j, [[1.0], [1.0]], atol=1e-7)


def test_fd_jacobian_domain_escape():
    with pytest.raises(DomainEscape):
        fd_jacobian(parabola(), [0.0], h=1e-3, domain=Box([0.0], [1.0]))


def test_fd_jacobian_holomorphic():
    f = DifferentiableMap(1, 1, lambda z: z ** 3, field=Field.COMPLEX)
    z0 = 0.3 + 0.7j
    assert np.allclose(fd_jacobian(f, [z0], field=Field.COMPLEX), [[3 * z0 ** 2]], atol=1e-8)


# --- polynomial maps ----------------------------------------------------------

def test_polynomial_jacobian_matches_fd_on_17_point_grid():
    rng = np.random.default_rng(1)
    coords = [[((int(a), int(b)), float(c)) for a, b, c in
               zip(rng.integers(0, 4, 5), rng.integers(0, 4, 5), rng.integers(-5, 6, 5))]
              for _ in range(3)]
    f = PolynomialMap(2, 3, coords)
    pts = Box.cube(2, -1.0, 1.0).grid(17)
    assert jacobian_consistency(f, pts) < 1e-5


def test_polynomial_float_matches_exact():
    rng = np.random.default_rng(2)
    coords = [[((int(a), int(b)), int(c)) for a, b, c in
               zip(rng.integers(0, 4, 6), rng.integers(0, 4, 6), rng.integers(-1000, 1001, 6))]
              for _ in range(2)]
    f = PolynomialMap(2, 2, coords)
    for z in Box.cube(2, -1.5, 1.5).grid(7):
        ex = np.array([float(v) for v in f.evaluate_exact(z)])
        fl = f(z)
        scale = sum(abs(c) for row in coords for _, c in row)
        assert np.all(np.abs(fl - ex) <= 1e-12 * scale * 10)
        jex = np.array([[float(v) for v in row] for row in f.jacobian_exact(z)])
        assert np.allclose(f.jacobian(z), jex, rtol=1e-12, atol=1e-9)


def test_polynomial_json_roundtrip():
    f = lifted_parabola(0.25)
    g = PolynomialMap.from_json(json.loads(json.dumps(f.to_json())))
    assert np.allclose(g(1.0), f(1.0))


def test_polynomial_complex_exact():
    f = PolynomialMap(1, 1, [[((2,), 1), ((0,), 1j)]], field=Field.COMPLEX)
    z = 0.5 + 0.25j
    assert np.allclose(f(z), [z * z + 1j])
    assert complex(f.evaluate_exact([z])[0]) == pytest.approx(z * z + 1j)


# --- bump ---------------------------------------------------------------------

def test_bump_plateau_and_exterior():
    lam = BumpFunction(Box([-1.0], [1.0]), Box([-2.0], [2.0]))
    for z in (-1.0, 0.0, 0.7, 1.0):
        assert bump_eval(lam, [z]) == 1.0
        assert np.all(bump_grad(lam, [z]) == 0.0)
    for z in (-3.0, -2.0, 2.0, 2.5):
        assert bump_eval(lam, [z]) == 0.0
        assert np.all(bump_grad(lam, [z]) == 0.0)


def test_bump_transition_values_and_monotonicity():
    lam = BumpFunction(Box([-1.0], [1.0]), Box([-2.0], [2.0]))
    v = bump_eval(lam, [1.5])
    assert 0.0 < v < 1.0
    # symmetric profile: the midpoint of the transition is exactly 1/2
    assert v == pytest.approx(0.5)
    zs = np.linspace(1.0, 2.0, 201)
    vals = lam.values(zs.reshape(-1, 1))
    assert np.all(np.diff(vals) <= 0)
    # strict decrease wherever the value is not rounded to 0 or 1
    mid = (zs > 1.1) & (zs < 1.9)
    assert np.all(np.diff(vals[mid]) < 0)
    assert np.allclose(lam.values(-zs.reshape(-1, 1)), vals)


def test_bump_gradient_matches_fd_and_range_in_2d():
    lam = BumpFunction(Box([-1.0, -0.5], [1.0, 0.5]), Box([-2.0, -1.5], [2.5, 1.0]))
    pts = Box([-2.5, -2.0], [3.0, 1.5]).grid(17)
    vals = lam.values(pts)
    assert np.all((vals >= 0) & (vals <= 1))
    for p in pts:
        fd = fd_jacobian(lambda z: np.array([lam(z)]), p)[0]
        assert np.allclose(lam.grad(p), fd, atol=1e-5)
    assert np.all(np.abs(lam.gradients(pts)) <= lam.gradient_bound())


# --- C1 distance -------------------------------------------------------------

def test_c1_distance_self_is_zero():
    f = lifted_parabola()
    assert c1_distance(f, f, Box([0.5], [2.0])) == 0.0


@pytest.mark.parametrize("c, expected, tol", [(0.01, 0.0399, 1e-4), (1.0, 3.0, 0.1)])
def test_c1_distance_shifted_lifted_parabola(c, expected, tol):
    # difference (c, 2cx - c^2), derivative difference (0, 2c); sup at x = 2
    K = Box([0.5], [2.0])
    closed_form = max(c, 4 * c - c * c, 2 * c)
    assert closed_form == pytest.approx(expected, abs=tol)
    assert c1_distance(lifted_parabola(), lifted_parabola(c), K) == pytest.approx(closed_form, abs=1e-12)
