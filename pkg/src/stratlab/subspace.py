"""Linear subspaces of R^n and C^n with tolerance-aware rank decisions.

Every subspace carries a column-orthonormal basis.  Complex inner products
are conjugate-linear in the first argument, ``<u, v> = u^H v``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidOperands, NotContained

TOL_RANK = 1e-9
TOL_GRASS = 1e-8
TOL_ORTHO = 1e-10
GAP_RATIO = 1e3

# entries below this (relative to the column max) do not count as "first nonzero"
_LEAD_TOL = 1e-10


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128

    @classmethod
    def parse(cls, value) -> "Field":
        if isinstance(value, Field):
            return value
        return cls(str(value).lower())

    @classmethod
    def of(cls, array) -> "Field":
        return cls.COMPLEX if np.iscomplexobj(array) else cls.REAL


@dataclass(frozen=True)
class RankDecision:
    numeric_rank: int
    smallest_kept_singular_value: float
    largest_dropped_singular_value: float
    conclusive: bool
    threshold: float = 0.0

    def to_json(self) -> dict:
        return {
            "numeric_rank": self.numeric_rank,
            "smallest_kept_singular_value": self.smallest_kept_singular_value,
            "largest_dropped_singular_value": self.largest_dropped_singular_value,
            "conclusive": self.conclusive,
            "threshold": self.threshold,
        }


def _decide(singular_values: np.ndarray, tol_rel: float) -> RankDecision:
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] == 0.0:
        return RankDecision(0, 0.0, 0.0, True, 0.0)
    thr = tol_rel * s[0]
    rank = int(np.count_nonzero(s > thr))
    kept = float(s[rank - 1]) if rank else 0.0
    dropped = float(s[rank]) if rank < s.size else 0.0
    near = (s > thr / GAP_RATIO) & (s <= thr * GAP_RATIO)
    return RankDecision(rank, kept, dropped, not bool(near.any()), float(thr))


def numeric_rank(matrix, tol_rel: float = TOL_RANK) -> RankDecision:
    """Rank as the number of singular values above ``tol_rel * sigma_max``.

    The decision is marked inconclusive when any singular value lies within
    a factor ``GAP_RATIO`` of the threshold, on either side.
    """
    a = np.asarray(matrix)
    if a.size == 0:
        return RankDecision(0, 0.0, 0.0, True, 0.0)
    return _decide(np.linalg.svd(a, compute_uv=False), tol_rel)


def normalize_columns(mat: np.ndarray) -> np.ndarray:
    """Rescale each column so its first significant entry is real positive."""
    out = np.array(mat, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        idx = int(np.argmax(np.abs(col) > _LEAD_TOL * scale))
        lead = col[idx]
        out[:, j] = col * (np.conj(lead) / abs(lead))
    if not np.iscomplexobj(mat):
        out = out.real
    return out


def _lead_magnitude(col: np.ndarray) -> float:
    scale = np.max(np.abs(col))
    idx = int(np.argmax(np.abs(col) > _LEAD_TOL * scale))
    return float(abs(col[idx]))


def _as_field_array(mat, field: Field) -> np.ndarray:
    a = np.asarray(mat)
    if field is Field.REAL:
        if np.iscomplexobj(a):
            if np.any(np.abs(a.imag) > 0):
                raise InvalidOperands("complex entries in a real subspace")
            a = a.real
        return np.asarray(a, dtype=np.float64)
    return np.asarray(a, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span of an orthonormal ``n x k`` basis over ``field``."""

    basis: np.ndarray
    field: Field = Field.REAL

    def __post_init__(self):
        field = Field.parse(self.field)
        b = _as_field_array(self.basis, field)
        if b.ndim != 2 or b.shape[0] < 1:
            raise InvalidOperands(f"basis must be n x k with n >= 1, got shape {b.shape}")
        if b.shape[1] > b.shape[0]:
            raise InvalidOperands("more basis vectors than ambient dimensions")
        if b.shape[1]:
            err = np.max(np.abs(b.conj().T @ b - np.eye(b.shape[1])))
            if err > TOL_ORTHO:
                raise InvalidOperands(f"basis not orthonormal (error {err:.2e})")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "field", field)

    # construction -----------------------------------------------------

    @classmethod
    def span(cls, vectors, field=None, ambient_dim: int | None = None,
             tol_rel: float = TOL_RANK) -> "Subspace":
        """Orthonormal basis for the column span of ``vectors`` (n x k)."""
        a = np.asarray(vectors)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.size == 0:
            n = ambient_dim if ambient_dim is not None else a.shape[0]
            return cls.zero(n, field if field is not None else Field.REAL)
        fld = Field.parse(field) if field is not None else Field.of(a)
        a = _as_field_array(a, fld)
        if ambient_dim is not None and a.shape[0] != ambient_dim:
            raise InvalidOperands("vector length differs from ambient_dim")
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        rank = _decide(s, tol_rel).numeric_rank
        return cls(normalize_columns(u[:, :rank]), fld)

    @classmethod
    def zero(cls, n: int, field=Field.REAL) -> "Subspace":
        fld = Field.parse(field)
        return cls(np.zeros((n, 0), dtype=fld.dtype), fld)

    @classmethod
    def full(cls, n: int, field=Field.REAL) -> "Subspace":
        fld = Field.parse(field)
        return cls(np.eye(n, dtype=fld.dtype), fld)

    @classmethod
    def coordinate(cls, n: int, indices, field=Field.REAL) -> "Subspace":
        """Span of the standard basis vectors ``e_i`` for ``i`` in ``indices`` (0-based)."""
        fld = Field.parse(field)
        return cls(np.eye(n, dtype=fld.dtype)[:, list(indices)], fld)

    # properties -------------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def complement(self) -> "Subspace":
        """Orthogonal complement in the ambient space."""
        return complement_within(self, Subspace.full(self.ambient_dim, self.field))

    def isclose(self, other: "Subspace", tol: float = TOL_GRASS) -> bool:
        _check_operands(self, other)
        return self.dim == other.dim and subspace_distance(self, other) <= tol

    def __add__(self, other: "Subspace") -> "Subspace":
        return subspace_sum(self, other)

    def __and__(self, other: "Subspace") -> "Subspace":
        return intersect(self, other)

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim}, field={self.field.value})"

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        def entry(z):
            if self.field is Field.REAL:
                return [float(z)]
            return [float(z.real), float(z.imag)]

        return {
            "field": self.field.value,
            "ambient_dim": self.ambient_dim,
            "basis": [[entry(z) for z in row] for row in self.basis],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Subspace":
        field = Field.parse(data["field"])
        n = int(data["ambient_dim"])
        rows = data["basis"]
        if len(rows) != n:
            raise InvalidOperands(f"basis has {len(rows)} rows, expected {n}")
        k = len(rows[0]) if rows else 0
        mat = np.zeros((n, k), dtype=field.dtype)
        for i, row in enumerate(rows):
            if len(row) != k:
                raise InvalidOperands(f"basis row {i} has {len(row)} entries, expected {k}")
            for j, e in enumerate(row):
                if len(e) == 1:
                    mat[i, j] = e[0]
                elif len(e) == 2 and field is Field.COMPLEX:
                    mat[i, j] = complex(e[0], e[1])
                else:
                    raise InvalidOperands(f"bad entry at basis[{i}][{j}]: {e!r}")
        return cls.span(mat, field=field, ambient_dim=n)


def _check_operands(a: Subspace, b: Subspace) -> None:
    if a.field is not b.field:
        raise InvalidOperands(f"field mismatch: {a.field.value} vs {b.field.value}")
    if a.ambient_dim != b.ambient_dim:
        raise InvalidOperands(f"ambient dimension mismatch: {a.ambient_dim} vs {b.ambient_dim}")


def _stacked_svd(a: Subspace, b: Subspace, tol_rel: float):
    m = np.hstack([a.basis, b.basis])
    if m.shape[1] == 0:
        return m, None, None, None, RankDecision(0, 0.0, 0.0, True, 0.0)
    u, s, vh = np.linalg.svd(m, full_matrices=True)
    return m, u, s, vh, _decide(s, tol_rel)


def subspace_sum(a: Subspace, b: Subspace, tol_rel: float = TOL_RANK) -> Subspace:
    """Span of the union of ``a`` and ``b``."""
    _check_operands(a, b)
    _, u, _, _, dec = _stacked_svd(a, b, tol_rel)
    if u is None:
        return Subspace.zero(a.ambient_dim, a.field)
    return Subspace(normalize_columns(u[:, :dec.numeric_rank]), a.field)


def intersect(a: Subspace, b: Subspace, tol_rel: float = TOL_RANK) -> Subspace:
    """Intersection via the null space of ``[A | B]``.

    Uses the same rank decision as :func:`subspace_sum`, so
    ``dim(a + b) + dim(a & b) == dim a + dim b`` holds by construction.
    """
    _check_operands(a, b)
    m, _, _, vh, dec = _stacked_svd(a, b, tol_rel)
    q = m.shape[1] - dec.numeric_rank
    if q == 0:
        return Subspace.zero(a.ambient_dim, a.field)
    null = vh[dec.numeric_rank:].conj().T
    vecs = a.basis @ null[:a.dim]
    u, _, _ = np.linalg.svd(vecs, full_matrices=False)
    return Subspace(normalize_columns(u[:, :q]), a.field)


def containment_residual(outer: Subspace, inner: Subspace) -> float:
    """Spectral norm of ``(I - P_outer) B_inner``."""
    _check_operands(outer, inner)
    if inner.dim == 0:
        return 0.0
    r = inner.basis - outer.basis @ (outer.basis.conj().T @ inner.basis)
    return float(np.linalg.norm(r, 2))


def contains(outer: Subspace, inner: Subspace, tol: float = TOL_GRASS) -> bool:
    return containment_residual(outer, inner) <= tol


def subspace_distance(a: Subspace, b: Subspace) -> float:
    """Sine of the largest principal angle between equal-dimensional subspaces."""
    _check_operands(a, b)
    if a.dim != b.dim:
        raise DimensionMismatch(f"distance needs equal dimensions, got {a.dim} and {b.dim}")
    if a.dim == 0:
        return 0.0
    return min(1.0, containment_residual(a, b))


def complement_within(inner: Subspace, outer: Subspace, tol: float = TOL_GRASS) -> Subspace:
    """Orthogonal complement of ``inner`` inside ``outer``."""
    _check_operands(inner, outer)
    res = containment_residual(outer, inner)
    if res > tol:
        raise NotContained(f"inner not contained in outer (residual {res:.3e})")
    q = outer.dim - inner.dim
    if q == 0:
        return Subspace.zero(outer.ambient_dim, outer.field)
    r = outer.basis - inner.basis @ (inner.basis.conj().T @ outer.basis)
    u, _, _ = np.linalg.svd(r, full_matrices=False)
    return Subspace(normalize_columns(u[:, :q]), outer.field)


def extend_to_basis(partial: Subspace) -> np.ndarray:
    """Complete ``partial.basis`` to an orthonormal basis of the ambient space.

    The first ``k`` columns are ``partial.basis`` unchanged.  The completion
    is a column-pivoted Gram-Schmidt on the projected identity; completion
    columns are then sign-normalized (first significant entry positive) and
    stably sorted by descending magnitude of that entry.  The zero subspace
    therefore extends to the identity.
    """
    n, k = partial.ambient_dim, partial.dim
    b = partial.basis
    dtype = partial.field.dtype
    resid = np.eye(n, dtype=dtype) - b @ b.conj().T
    cols: list[np.ndarray] = []
    for _ in range(n - k):
        norms = np.linalg.norm(resid, axis=0)
        j = int(np.argmax(norms))
        q = resid[:, j] / norms[j]
        # second orthogonalization pass for stability
        q = q - b @ (b.conj().T @ q)
        for c in cols:
            q = q - c * (c.conj() @ q)
        q = q / np.linalg.norm(q)
        cols.append(q)
        resid = resid - np.outer(q, q.conj() @ resid)
    if not cols:
        return np.array(b, copy=True)
    comp = normalize_columns(np.column_stack(cols).astype(dtype))
    order = sorted(range(comp.shape[1]), key=lambda j: -_lead_magnitude(comp[:, j]))
    return np.hstack([b, comp[:, order]])


def random_subspace(n: int, k: int, field=Field.REAL, rng=None) -> Subspace:
    """Haar-ish random k-dimensional subspace (Gaussian columns, orthonormalized)."""
    rng = np.random.default_rng(rng)
    fld = Field.parse(field)
    a = rng.standard_normal((n, k))
    if fld is Field.COMPLEX:
        a = a + 1j * rng.standard_normal((n, k))
    if k == 0:
        return Subspace.zero(n, fld)
    q, _ = np.linalg.qr(a)
    return Subspace(q, fld)
