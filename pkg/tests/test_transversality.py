import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratlab import exact, shapes
from stratlab.errors import NotOnStratum
from stratlab.geometry import AffineMap, Box, PolynomialMap
from stratlab.strata import Stratification
from stratlab.subspace import numeric_rank
from stratlab.transversality import (
    Reason,
    codim_shortcut_applies,
    is_transverse_at,
    is_transverse_to_stratification,
    margin_eta,
    transverse_on_compact,
)


def circle_sigma():
    return Stratification("circle", 2, (shapes.circle(),))


def test_parabola_transverse_to_vertical_axis():
    v = is_transverse_at(shapes.parabola(), [0.0], shapes.y_axis())
    assert v.transverse and v.reason is Reason.RANK_FULL and v.conclusive
    assert v.margin == pytest.approx(1.0)
    assert v.chart == "identity"


def test_shifted_parabola_touching_ray_is_not_transverse():
    g = shapes.parabola(shift=0.5)
    v = is_transverse_at(g, [0.5], shapes.x_axis())
    assert not v.transverse and v.reason is Reason.RANK_DEFICIENT and v.conclusive
    assert margin_eta(g, [0.5], shapes.x_axis()) <= 1e-12


def test_lifted_parabola_misses_circle():
    v = is_transverse_at(shapes.hirsch_map(), [0.7], shapes.circle())
    assert v.transverse and v.reason is Reason.MISSES and v.margin is None


def test_margin_identity_on_circle():
    f = AffineMap(np.eye(2))
    for th in (0.0, 1.0, 2.5):
        assert margin_eta(f, [np.cos(th), np.sin(th)], shapes.circle()) == pytest.approx(1.0)


def test_margin_requires_point_on_stratum():
    with pytest.raises(NotOnStratum):
        margin_eta(shapes.hirsch_map(), [0.7], shapes.circle())


def test_margin_independent_of_normal_basis():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n, m, d = 5, 3, 3
        a = rng.standard_normal((n, m))
        s = shapes.linear_stratum("L", rng.standard_normal((n - d, n)))
        f = AffineMap(a)
        T = s.tangent_at(np.zeros(n))
        q0 = T.complement().basis
        u, _ = np.linalg.qr(rng.standard_normal((n - d, n - d)))
        assert abs(margin_eta(f, np.zeros(m), s) - margin_eta(f, np.zeros(m), s, q=q0 @ u)) <= 1e-10


def test_margin_and_rank_agree_outside_gap_band():
    rng = np.random.default_rng(6)
    tol = 1e-9
    for _ in range(200):
        n, m = 3, 2
        a = rng.standard_normal((n, m))
        if rng.random() < 0.3:
            a[:, 1] = a[:, 0] * rng.standard_normal()
        s = shapes.linear_stratum("L", rng.standard_normal((2, n)))
        f = AffineMap(a)
        v = is_transverse_at(f, np.zeros(m), s, tol_rank=tol)
        eta = v.margin
        # the block's smallest singular value is at most eta, and its scale is bounded by 2 + |Df|
        band = (2 + np.linalg.norm(a, 2)) * tol * 1e3
        if eta > 10 * band:
            assert v.reason is Reason.RANK_FULL
        elif eta <= tol * 1e-3:
            assert v.reason is Reason.RANK_DEFICIENT


def test_enlarging_tangent_never_lowers_rank():
    rng = np.random.default_rng(7)
    for _ in range(100):
        df = rng.standard_normal((4, 1))
        t = rng.standard_normal((4, 2))
        extra = rng.standard_normal((4, 1))
        r0 = numeric_rank(np.hstack([df, t])).numeric_rank
        r1 = numeric_rank(np.hstack([df, t, extra])).numeric_rank
        assert r1 >= r0


def test_stratification_verdicts():
    sv = is_transverse_to_stratification(shapes.parabola(), [0.0], shapes.golubitsky_axes())
    assert [v.reason for v in sv] == [Reason.MISSES, Reason.RANK_FULL]
    assert sv.transverse
    empty = Stratification("empty", 2, ())
    assert is_transverse_to_stratification(shapes.parabola(), [0.0], empty).transverse


def test_codim_shortcut():
    point = shapes.coordinate_subspace("pt", 2, [])
    assert codim_shortcut_applies(point, 1)
    assert not codim_shortcut_applies(shapes.circle(), 1)
    assert not codim_shortcut_applies(shapes.golubitsky_axes(), 1)
    assert codim_shortcut_applies(Stratification("empty", 2, ()), 1)


def test_compact_lifted_parabola_clears_circle():
    rep = transverse_on_compact(shapes.hirsch_map(), Box([0.5], [2.0]), circle_sigma())
    assert rep.transverse and rep.certified and not rep.encounters
    closed_form = np.hypot(0.5, 1.25) - 1
    assert rep.min_clearance == pytest.approx(closed_form, abs=1e-9)
    assert rep.min_clearance > 0.3


def test_compact_parabola_golubitsky():
    rep = transverse_on_compact(shapes.parabola(), Box([-1.0], [1.0]), shapes.golubitsky_axes())
    assert rep.transverse
    assert rep.min_margin == pytest.approx(1.0)
    assert [v.x[0] for v in rep.encounters] == [0.0]


@pytest.mark.parametrize("c", [0.3, 0.0249, 0.0013])
def test_compact_shifted_circle_map_fails_at_shift(c):
    rep = transverse_on_compact(shapes.hirsch_map(c), Box([-1.0], [1.0]), circle_sigma())
    assert not rep.transverse
    assert rep.failures[0].x[0] == pytest.approx(c, abs=1e-9)
    assert rep.failures[0].margin <= 1e-9


def test_compact_report_json_roundtrips():
    rep = transverse_on_compact(shapes.parabola(), Box([-1.0], [1.0]), shapes.golubitsky_axes())
    d = json.loads(json.dumps(rep.to_json()))
    assert set(d["summary"]) >= {"min_margin", "min_clearance", "failures"}
    assert d["points"][0]["stratum"] == "S2" and d["points"][0]["verdict"] == "RankFull"


def test_compact_deterministic():
    f = shapes.hirsch_map(0.2)
    a = transverse_on_compact(f, Box([-1.0], [1.0]), circle_sigma()).to_json()
    b = transverse_on_compact(f, Box([-1.0], [1.0]), circle_sigma()).to_json()
    assert a == b


def test_compact_two_dimensional_source():
    # (u, v) -> (u^2, u, v) meets the x axis only at the origin, which is not a grid node
    f = PolynomialMap(2, 3, [[((2, 0), 1)], [((1, 0), 1)], [((0, 1), 1)]])
    s = shapes.linear_stratum("line", [[0, 1, 0], [0, 0, 1]])
    rep = transverse_on_compact(f, Box([-1.0, -1.0], [1.0, 1.0]), Stratification("l", 3, (s,)))
    assert rep.grid_points == 400
    assert len(rep.encounters) == 1 and rep.transverse
    assert np.allclose(rep.encounters[0].x, 0.0, atol=1e-9)
    assert rep.min_margin == pytest.approx(1.0, abs=1e-6)


def test_compact_two_dimensional_fold_is_not_transverse():
    # (u, v) -> (u, v^2, v) meets the x axis along v = 0 with a degenerate normal part
    f = PolynomialMap(2, 3, [[((1, 0), 1)], [((0, 2), 1)], [((0, 1), 1)]])
    s = shapes.linear_stratum("line", [[0, 1, 0], [0, 0, 1]])
    rep = transverse_on_compact(f, Box([-1.0, -1.0], [1.0, 1.0]), Stratification("l", 3, (s,)))
    assert rep.failures and not rep.transverse


def _random_instance(rng):
    n = int(rng.integers(2, 4))
    m = int(rng.integers(1, 3))
    d = int(rng.integers(0, n))
    x = [int(v) for v in rng.integers(-2, 3, m)]
    coords = []
    for _ in range(n):
        row = []
        for _ in range(int(rng.integers(1, 4))):
            exps = tuple(int(e) for e in rng.integers(0, 3, m))
            row.append((exps, int(rng.integers(-2, 3))))
        coords.append(row)
    f0 = PolynomialMap(m, n, coords)
    # shift so f(x) = 0 lies on the linear stratum
    fx = [int(v) for v in f0.evaluate_exact(x)]
    coords = [row + [((0,) * m, -fx[i])] for i, row in enumerate(coords)]
    f = PolynomialMap(m, n, coords)
    normals = rng.integers(-2, 3, (n - d, n))
    while n - d and exact.rank(exact.matrix(normals.tolist())) < n - d:
        normals = rng.integers(-2, 3, (n - d, n))
    return f, np.array(x, float), normals


def test_oracle_equivalence_rational_instances():
    rng = np.random.default_rng(11)
    agree = checked = 0
    for _ in range(100):
        f, x, normals = _random_instance(rng)
        n = f.target_dim
        s = shapes.linear_stratum("L", normals) if len(normals) else shapes.coordinate_subspace("open", n, range(n))
        v = is_transverse_at(f, x, s)
        assert v.reason is not Reason.MISSES
        tangent = exact.nullspace(exact.matrix(normals.tolist()), n) if len(normals) else \
            [[1 if i == j else 0 for i in range(n)] for j in range(n)]
        truth = exact.is_transverse(f.jacobian_exact(x), tangent, n)
        if v.conclusive:
            checked += 1
            agree += v.transverse == truth
    assert checked >= 95 and agree == checked


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 0.9))
def test_margin_of_shifted_parabola_on_axis_is_slope(c):
    # touching point x = c on the x axis; the normal component of Df is 2(x - c) = 0
    g = shapes.parabola(shift=c)
    assert margin_eta(g, [c], shapes.x_axis()) <= 1e-12
