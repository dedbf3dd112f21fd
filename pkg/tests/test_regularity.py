import json
import math

import numpy as np
import pytest

from stratlab import exact, shapes
from stratlab.errors import InvalidOperands, NotOnStratum
from stratlab.regularity import (
    CERTIFIED,
    NO_LIMIT,
    REFUTED,
    Approach,
    Schedule,
    TangentSequence,
    check_condition_a,
    estimate_tau_limit,
    scan_pairs,
    sequence_from_curve,
)
from stratlab.strata import Stratification
from stratlab.subspace import Subspace, subspace_distance


def osc_curve(t):
    return np.array([t[0], t[0] ** 2 * np.sin(1.0 / t[0])])


def osc_sequence(ts):
    return sequence_from_curve(shapes.oscillation_curve(), osc_curve, [0.0, 0.0], Schedule(ts))


def test_geometric_schedule_on_ray():
    seq = sequence_from_curve(shapes.positive_x_axis(), lambda t: np.array([t[0], 0.0]), [0.0, 0.0],
                              Schedule.geometric(1.0, 0.5, 30))
    assert np.allclose(seq.points[:, 0], [2.0 ** -k for k in range(1, 31)])
    assert all(t.isclose(Subspace.coordinate(2, [0])) for t in seq.tangents)
    est = estimate_tau_limit(seq)
    assert est.converged and est.tau.isclose(Subspace.coordinate(2, [0]))


def test_circle_tangents_rotate_continuously():
    seq = sequence_from_curve(shapes.circle(), lambda t: np.array([np.sin(t[0]), np.cos(t[0])]), [0.0, 1.0])
    for t, tau in zip(seq.params, seq.tangents):
        assert tau.isclose(Subspace.span([[np.cos(t)], [-np.sin(t)]]), tol=1e-9)
    d = [subspace_distance(a, b) for a, b in zip(seq.tangents, seq.tangents[1:])]
    assert max(d) < 0.2
    est = estimate_tau_limit(seq)
    assert est.converged and est.tau.isclose(Subspace.coordinate(2, [0]))


def test_oscillation_slopes_tend_to_minus_one():
    ts = [1 / (2 * np.pi * k) for k in range(1, 41)]
    seq = osc_sequence(ts)
    for t, tau in zip(ts, seq.tangents):
        slope = 2 * t * np.sin(1 / t) - np.cos(1 / t)
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert tau.isclose(Subspace.span([[1.0], [slope]]))
    est = estimate_tau_limit(seq)
    assert est.converged and est.tau.isclose(Subspace.span([[1.0], [-1.0]]))


def test_order_one_over_k_convergence_is_accepted():
    # slope 2 t_k -> 0 only like 1/k, well above tol_conv between successive planes
    ts = [1 / ((2 * k + 0.5) * np.pi) for k in range(1, 41)]
    seq = osc_sequence(ts)
    est = estimate_tau_limit(seq)
    assert est.tail_spread > 1e-3
    assert est.converged and est.method == "graph-fit"
    assert est.tau.isclose(Subspace.coordinate(2, [0]), tol=1e-8)


def test_mixed_phases_do_not_converge():
    seq = osc_sequence([1 / k for k in range(1, 41)])
    est = estimate_tau_limit(seq)
    assert not est.converged and est.tau is None


def test_estimate_needs_five_points():
    seq = osc_sequence([1 / (2 * np.pi * k) for k in range(1, 5)])
    with pytest.raises(InvalidOperands):
        estimate_tau_limit(seq)


def test_off_stratum_curve_raises():
    with pytest.raises(NotOnStratum):
        sequence_from_curve(shapes.circle(), lambda t: np.array([t[0], 0.0]), [0.0, 0.0])


def test_sequence_must_approach():
    y = shapes.x_axis()
    with pytest.raises(InvalidOperands):
        TangentSequence.from_points(y, [[0.1, 0.0], [0.5, 0.0]], [0.0, 0.0])


def test_golubitsky_pair_refuted():
    g = shapes.golubitsky_axes()
    seq = sequence_from_curve(g.stratum("S1"), lambda t: np.array([t[0], 0.0]), [0.0, 0.0],
                              Schedule([1 / k for k in range(1, 41)]))
    rep = check_condition_a(g.stratum("S2"), [0.0, 0.0], seq)
    assert rep.converged and not rep.holds and rep.label == REFUTED
    assert rep.containment_residual == pytest.approx(1.0)


def test_open_stratum_always_holds():
    seq = sequence_from_curve(shapes.upper_half_plane(), lambda t: np.array([t[0], t[0]]), [0.0, 0.0])
    rep = check_condition_a(shapes.x_axis(), [0.0, 0.0], seq)
    assert rep.holds and rep.tau_limit.dim == 2 and rep.label == CERTIFIED


def test_oscillation_refuted_with_residual_inverse_sqrt_two():
    rep = check_condition_a(shapes.x_axis(), [0.0, 0.0], osc_sequence([1 / (2 * np.pi * k) for k in range(1, 41)]))
    assert rep.label == REFUTED
    assert rep.containment_residual == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_oscillation_other_phase_certified():
    ts = [1 / ((2 * k + 0.5) * np.pi) for k in range(1, 41)]
    rep = check_condition_a(shapes.x_axis(), [0.0, 0.0], osc_sequence(ts))
    assert rep.holds and rep.label == CERTIFIED


def test_no_limit_label():
    rep = check_condition_a(shapes.x_axis(), [0.0, 0.0], osc_sequence([1 / k for k in range(1, 41)]))
    assert not rep.holds and not rep.converged and rep.label == NO_LIMIT
    d = json.loads(json.dumps(rep.to_json()))
    assert d["containment_residual"] is None and len(d["diagnostics"]["per_k_residuals"]) == 40


def test_point_stratum_always_holds():
    point = shapes.coordinate_subspace("origin", 2, [])
    seq = osc_sequence([1 / k for k in range(1, 41)])
    # a point stratum's tangent is zero; a non-convergent sequence still yields no-limit
    assert check_condition_a(point, [0.0, 0.0], seq).label == NO_LIMIT
    seq = osc_sequence([1 / (2 * np.pi * k) for k in range(1, 41)])
    assert check_condition_a(point, [0.0, 0.0], seq).holds


def test_x_must_be_on_X():
    seq = osc_sequence([1 / (2 * np.pi * k) for k in range(1, 41)])
    with pytest.raises(NotOnStratum):
        check_condition_a(shapes.y_axis(), [0.5, 0.0], seq)


def test_residual_invariant_under_rebasing():
    from stratlab.subspace import containment_residual
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = rng.standard_normal((4, 2))
        b = rng.standard_normal((4, 1))
        tau, tx = Subspace.span(a), Subspace.span(b)
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        tau2 = Subspace(tau.basis @ q)
        tx2 = Subspace(-tx.basis)
        assert abs(containment_residual(tau, tx) - containment_residual(tau2, tx2)) <= 1e-10


def test_linear_strata_match_exact_containment():
    rng = np.random.default_rng(4)
    for _ in range(40):
        n = 3
        ny = rng.integers(-1, 2, (1, n))
        nx = rng.integers(-1, 2, (2, n))
        if exact.rank(exact.matrix(ny.tolist())) < 1 or exact.rank(exact.matrix(nx.tolist())) < 2:
            continue
        Y = shapes.linear_stratum("Y", ny)
        X = shapes.linear_stratum("X", nx)
        v = Y.tangent_at(np.zeros(n)).basis[:, 0]
        seq = sequence_from_curve(Y, lambda t: t[0] * v, np.zeros(n))
        rep = check_condition_a(X, np.zeros(n), seq)
        ty = exact.nullspace(exact.matrix(ny.tolist()), n)
        tx = exact.nullspace(exact.matrix(nx.tolist()), n)
        assert rep.holds == exact.contains(ty, tx, n)


def test_scan_pairs_golubitsky_reports_failing_direction():
    g = shapes.golubitsky_axes()
    ap = Approach("S2", "S1", (0.0, 0.0), curve=lambda t: np.array([t[0], 0.0]))
    scan = scan_pairs(g, [ap])
    assert not scan.certified
    assert scan.status(("S2", "S1")) == REFUTED
    assert scan.failing()[0].X == "S2" and scan.failing()[0].Y == "S1"
    json.dumps(scan.to_json())


def test_scan_pairs_circle_vacuous_and_half_plane_certified():
    assert scan_pairs(Stratification("c", 2, (shapes.circle(),)), []).certified
    sigma = Stratification("half", 2, (shapes.upper_half_plane(), shapes.x_axis()))
    aps = [Approach("x_axis", "upper", (x0, 0.0), points=[[x0, 2.0 ** -k] for k in range(1, 30)])
           for x0 in (-1.0, 0.0, 0.5)]
    scan = scan_pairs(sigma, aps)
    assert scan.certified and len(scan.pairs[("x_axis", "upper")]) == 3
