import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratlab import exact
from stratlab.errors import DimensionMismatch, InvalidOperands, NotContained
from stratlab.subspace import (
    Field,
    Subspace,
    complement_within,
    containment_residual,
    contains,
    extend_to_basis,
    intersect,
    numeric_rank,
    random_subspace,
    subspace_distance,
    subspace_sum,
    TOL_GRASS,
)

R2 = Subspace.full(2)
E1 = Subspace.coordinate(2, [0])
E2 = Subspace.coordinate(2, [1])


def e(n, *idx):
    return Subspace.coordinate(n, idx)


# --- sum ----------------------------------------------------------------

def test_sum_orthogonal_lines_fill_plane():
    assert subspace_sum(E1, E2).dim == 2


def test_sum_idempotent():
    s = subspace_sum(E1, E1)
    assert s.dim == 1 and s.isclose(E1)


def test_sum_overlapping_planes_in_r3_matches_exact_rank():
    a, b = e(3, 0, 1), e(3, 1, 2)
    stacked = [[1, 0, 0, 0], [0, 1, 1, 0], [0, 0, 0, 1]]
    assert exact.rank(exact.matrix(stacked)) == 3
    assert (a + b).dim == 3


def test_sum_rejects_mismatched_operands():
    with pytest.raises(InvalidOperands):
        subspace_sum(E1, e(3, 0))
    with pytest.raises(InvalidOperands):
        subspace_sum(E1, Subspace.coordinate(2, [0], Field.COMPLEX))


# --- intersect ------------------------------------------------------------

def test_intersect_coordinate_planes():
    i = intersect(e(3, 0, 1), e(3, 1, 2))
    assert i.dim == 1 and i.isclose(e(3, 1))


def test_intersect_idempotent():
    x = random_subspace(4, 2, rng=3)
    assert intersect(x, x).isclose(x)


def test_intersect_generic_3d_in_r5_against_exact_nullspace():
    rng = np.random.default_rng(11)
    a_int = rng.integers(-3, 4, size=(5, 3))
    b_int = rng.integers(-3, 4, size=(5, 3))
    a_cols = exact.matrix_columns(exact.matrix(a_int))
    b_cols = exact.matrix_columns(exact.matrix(b_int))
    ex = exact.intersect(a_cols, b_cols, 5)
    assert len(ex) == 1
    got = intersect(Subspace.span(a_int), Subspace.span(b_int))
    assert got.dim == 1
    ref = Subspace.span(exact.to_float_array(exact.columns_to_matrix(ex, 5)))
    assert subspace_distance(got, ref) < 1e-10


# --- distance ---------------------------------------------------------------

def test_distance_examples():
    assert subspace_distance(E1, E1) == pytest.approx(0.0, abs=1e-15)
    assert subspace_distance(E1, E2) == pytest.approx(1.0)
    diag = Subspace.span(np.array([1.0, 1.0]) / np.sqrt(2))
    # principal angle pi/4 from the inner product (1,0).(1,1)/sqrt2
    assert subspace_distance(E1, diag) == pytest.approx(np.sin(np.arccos(1 / np.sqrt(2))), abs=1e-6)
    assert subspace_distance(E1, diag) == pytest.approx(0.70711, abs=1e-5)


def test_distance_unequal_dims_raises():
    with pytest.raises(DimensionMismatch):
        subspace_distance(E1, R2)


# --- contains ---------------------------------------------------------------

def test_contains_examples():
    assert contains(R2, E1)
    assert not contains(E1, E2)
    anti = Subspace.span(np.array([1.0, -1.0]) / np.sqrt(2))
    # (I - P) e1 = e1 - (1/2)(1,-1) = (1/2, 1/2), norm 1/sqrt2
    assert containment_residual(anti, E1) == pytest.approx(1 / np.sqrt(2))
    assert not contains(anti, E1, tol=1e-6)


# --- complement_within ----------------------------------------------------

def test_complement_examples():
    assert complement_within(E1, R2).isclose(E2)
    x = e(3, 0, 2)
    assert complement_within(x, x).dim == 0
    c = complement_within(e(4, 1), e(4, 0, 1, 2))
    assert c.isclose(e(4, 0, 2))
    assert np.allclose(c.basis.T @ e(4, 1).basis, 0)


def test_complement_requires_containment():
    with pytest.raises(NotContained):
        complement_within(E2, E1)


# --- extend_to_basis --------------------------------------------------------

def test_extend_examples():
    assert np.allclose(extend_to_basis(E1), np.eye(2))
    assert np.array_equal(extend_to_basis(Subspace.zero(3)), np.eye(3))
    b = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    q = extend_to_basis(Subspace(b.reshape(3, 1)))
    assert np.allclose(q.T @ q, np.eye(3), atol=1e-12)
    assert np.allclose(q[:, 0], b)


def test_extend_complex_is_unitary():
    s = random_subspace(4, 2, Field.COMPLEX, rng=5)
    q = extend_to_basis(s)
    assert np.allclose(q.conj().T @ q, np.eye(4), atol=1e-12)
    assert np.allclose(q[:, :2], s.basis)


# --- numeric_rank -----------------------------------------------------------

def test_numeric_rank_examples():
    d = numeric_rank(np.eye(3))
    assert d.numeric_rank == 3 and d.conclusive
    d = numeric_rank(np.zeros((3, 3)))
    assert d.numeric_rank == 0 and d.conclusive
    d = numeric_rank(np.array([[1.0, 0.0], [0.0, 1e-14]]), tol_rel=1e-9)
    assert d.numeric_rank == 1 and d.conclusive


def test_numeric_rank_flags_values_near_threshold():
    d = numeric_rank(np.diag([1.0, 5e-9]), tol_rel=1e-9)
    assert not d.conclusive


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=1, max_size=5))
def test_numeric_rank_matches_exact_rank_on_small_integers(rows):
    d = numeric_rank(np.array(rows, dtype=float))
    if d.conclusive:
        assert d.numeric_rank == exact.rank(exact.matrix(rows))


# --- properties -------------------------------------------------------------

@pytest.mark.parametrize("field", [Field.REAL, Field.COMPLEX])
def test_grassmann_dimension_identity(field):
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        ka, kb = (int(k) for k in rng.integers(0, n + 1, size=2))
        a = random_subspace(n, ka, field, rng)
        b = random_subspace(n, kb, field, rng)
        assert (a + b).dim + (a & b).dim == a.dim + b.dim


def test_basis_reordering_gives_same_span():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = random_subspace(5, 3, rng=rng)
        perm = rng.permutation(3)
        b = Subspace.span(a.basis[:, perm] @ np.diag([2.0, -1.0, 0.5]))
        assert subspace_distance(a, b) <= TOL_GRASS


def test_contained_implies_sum_has_outer_dim():
    rng = np.random.default_rng(4)
    for _ in range(50):
        outer = random_subspace(5, 3, rng=rng)
        inner = Subspace.span(outer.basis @ rng.standard_normal((3, 2)))
        assert contains(outer, inner)
        assert (outer + inner).dim == outer.dim


# --- serialization --------------------------------------------------------

@pytest.mark.parametrize("field", [Field.REAL, Field.COMPLEX])
def test_json_roundtrip(field):
    s = random_subspace(4, 2, field, rng=9)
    data = json.loads(json.dumps(s.to_json()))
    back = Subspace.from_json(data)
    assert back.field is field and back.isclose(s)


def test_json_reorthonormalizes():
    data = {"field": "real", "ambient_dim": 2, "basis": [[[2.0]], [[2.0]]]}
    s = Subspace.from_json(data)
    assert np.allclose(np.abs(s.basis[:, 0]), [np.sqrt(0.5)] * 2)


def test_non_orthonormal_basis_rejected():
    with pytest.raises(InvalidOperands):
        Subspace(np.array([[2.0], [0.0]]))


def test_exact_gaussian_rational_rank():
    i = exact.GaussianRational(0, 1)
    m = [[Fraction(1), i], [i, Fraction(-1)]]  # second row = i * first
    assert exact.rank(m) == 1
