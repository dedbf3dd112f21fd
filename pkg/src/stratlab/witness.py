"""Witness families for condition-(a) faults.

Given strata ``X`` and ``Y``, a point ``x`` of ``X`` and a sequence
``y_k -> x`` in ``Y`` whose tangent planes converge to ``tau`` with
``T_x X`` not inside ``tau``, this module builds

* a subspace ``H`` with ``H + T_x X`` the whole space and ``H + tau`` not,
* a linear map ``L`` with image ``H`` and its bump-localized version ``f``,
  which is transverse to ``X`` at the source origin ``w``,
* maps ``f^k -> f`` (C^1 on compacts) with ``f^k(w) = y_k`` and ``f^k`` not
  transverse to ``Y`` at ``w``.

Hence the set of maps transverse to the stratification is not open.  The
target chart is the translation ``y -> y - x``; the source chart is the
identity of ``K^m`` with ``w = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import (
    AlignmentFailure,
    ConstructionContradiction,
    DimensionHypothesisViolated,
    InfeasibleH,
    InvalidOperands,
    NonComplexSubspace,
    NotAFault,
)
from .geometry import AffineMap, BumpFunction, Box, DifferentiableMap, c1_distance, complexify
from .regularity import TOL_A, TOL_CONV, TangentSequence, estimate_tau_limit
from .strata import TOL_ON, Stratum
from .subspace import (
    Field,
    Subspace,
    TOL_GRASS,
    complement_within,
    contains,
    containment_residual,
    extend_to_basis,
    intersect,
    normalize_columns,
    numeric_rank,
)
from .transversality import Reason, TransversalityVerdict, is_transverse_at, margin_eta

ALIGN_SLACK = 1e-8
CHART_HALF_WIDTH = 4.0


def _pt(v) -> list:
    v = np.asarray(v).reshape(-1)
    if np.iscomplexobj(v):
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in v]


def _mat(a) -> list:
    return [_pt(col) for col in np.asarray(a).T]


# ---------------------------------------------------------------------------
# faults


def fault_direction(tx: Subspace, tau: Subspace) -> np.ndarray:
    """Unit vector of ``tx`` farthest from ``tau`` (largest principal angle)."""
    r = tx.basis - tau.basis @ (tau.basis.conj().T @ tx.basis)
    _, _, vh = np.linalg.svd(r)
    v = tx.basis @ vh[0].conj()
    return normalize_columns(v.reshape(-1, 1))[:, 0] / np.linalg.norm(v)


def as_complex_subspace(sub: Subspace, tol: float = TOL_GRASS) -> Subspace:
    """A real subspace of ``R^{2p}`` (interleaved re/im) as a subspace of ``C^p``."""
    if sub.field is Field.COMPLEX:
        return sub
    b = sub.basis
    if b.shape[0] % 2:
        raise NonComplexSubspace("odd real dimension")
    jb = np.empty_like(b)
    jb[0::2], jb[1::2] = -b[1::2], b[0::2]
    if containment_residual(sub, Subspace.span(jb, Field.REAL)) > tol:
        raise NonComplexSubspace("subspace is not invariant under multiplication by i")
    cols = complexify(b.T).T
    out = Subspace.span(cols, Field.COMPLEX)
    if 2 * out.dim != sub.dim:
        raise NonComplexSubspace("complex dimension does not halve the real dimension")
    return out


@dataclass(frozen=True, eq=False)
class FaultInstance:
    """A failure of condition (a) at ``x`` for the pair ``(X, Y)``.

    ``m`` is the real-case source dimension; complex faults instead carry
    ``source_tangent``, the tangent space ``T_w M`` inside ``C^p``.
    """

    X: Stratum
    Y: Stratum
    x: np.ndarray
    seq: TangentSequence
    r: int
    m: Optional[int] = None
    v: Optional[np.ndarray] = None
    field: Field = Field.REAL
    source_tangent: Optional[Subspace] = None
    tau: Optional[Subspace] = None
    tol_a: float = TOL_A
    tol_conv: float = TOL_CONV

    def __post_init__(self):
        fld = Field.parse(self.field)
        object.__setattr__(self, "field", fld)
        if self.X.field is not fld or self.Y.field is not fld:
            raise InvalidOperands(f"strata are {self.X.field.value}, fault is tagged {fld.value}")
        x = np.asarray(self.x, dtype=fld.dtype).reshape(-1)
        object.__setattr__(self, "x", x)
        if self.seq.stratum is not self.Y:
            raise InvalidOperands("sequence does not lie on Y")
        if not self.X.on_stratum(x, TOL_ON):
            raise NotAFault(f"{_pt(x)} is not on {self.X.name!r}")
        if self.X.dim < 1 or self.Y.dim < 1 or self.r < 1:
            raise NotAFault("strata must have dimension at least 1")
        if fld is Field.COMPLEX:
            if self.source_tangent is None:
                raise InvalidOperands("complex faults need the source tangent space")
            object.__setattr__(self, "source_tangent", as_complex_subspace(self.source_tangent))
        elif self.m is None:
            raise InvalidOperands("real faults need the source dimension m")
        if self.tau is None:
            est = estimate_tau_limit(self.seq, self.tol_conv)
            if not est.converged:
                raise NotAFault("tangent planes along the sequence have no limit")
            object.__setattr__(self, "tau", est.tau)
        tx = self.X.tangent_at(x)
        object.__setattr__(self, "_tx", tx)
        if self.v is None:
            if containment_residual(self.tau, tx) <= self.tol_a:
                raise NotAFault("T_x X lies in the limit plane: condition (a) holds here")
            object.__setattr__(self, "v", fault_direction(tx, self.tau))
        else:
            v = np.asarray(self.v, dtype=fld.dtype).reshape(-1)
            sv = Subspace.span(v, fld)
            if sv.dim != 1 or not contains(tx, sv):
                raise NotAFault("v is not a nonzero vector of T_x X")
            if contains(self.tau, sv, self.tol_a):
                raise NotAFault("v lies in the limit plane")
            object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.X.ambient_dim

    @property
    def tx(self) -> Subspace:
        return self._tx

    @property
    def source_dim(self) -> int:
        return self.m if self.field is Field.REAL else self.source_tangent.dim


# ---------------------------------------------------------------------------
# linear algebra of the construction


@dataclass(frozen=True)
class Decomposition:
    E: Subspace
    W1: Subspace
    W2: Subspace
    T1: Subspace
    T2: Subspace

    def parts(self) -> dict:
        return {"E": self.E, "W1": self.W1, "W2": self.W2, "T1": self.T1, "T2": self.T2}

    def dims(self) -> dict:
        return {k: s.dim for k, s in self.parts().items()}

    def to_json(self) -> dict:
        return {k: s.to_json() for k, s in self.parts().items()}


def decompose(tx: Subspace, tau: Subspace, v) -> Decomposition:
    """``T_x X = E + W1 + T1``, ``tau = T1 + T2``, ambient ``= E + W1 + W2 + T1 + T2``."""
    n, fld = tx.ambient_dim, tx.field
    e = Subspace.span(np.asarray(v).reshape(-1, 1), fld)
    if contains(tau, e, TOL_A):
        raise NotAFault("v lies in tau")
    t1 = intersect(tx, tau)
    w1 = complement_within(e + t1, tx)
    t2 = complement_within(t1, tau)
    w2 = complement_within(tx + tau, Subspace.full(n, fld))
    d = Decomposition(e, w1, w2, t1, t2)
    allb = np.hstack([s.basis for s in d.parts().values()])
    if allb.shape[1] != n or numeric_rank(allb).numeric_rank != n:
        raise ConstructionContradiction(f"decomposition dims {d.dims()} do not split K^{n}")
    return d


def construct_H(d: Decomposition, r: int, tx: Subspace | None = None, tau: Subspace | None = None) -> Subspace:
    """Greedy ``H`` with ``T2 + W2 <= H <= T1 + T2 + W1 + W2`` and ``dim H = n - r``.

    The ordered basis starts with the bases of ``T2`` and ``W2``, then takes
    basis vectors of ``T1`` and of ``W1`` in order.  When ``tx`` and ``tau``
    are given the two rank facts ``H + tx = K^n`` and ``H + tau != K^n`` are
    checked.
    """
    n = d.E.ambient_dim
    target = n - r
    lower = d.T2 + d.W2
    upper_dim = d.T1.dim + d.T2.dim + d.W1.dim + d.W2.dim
    if not lower.dim <= target <= upper_dim:
        raise InfeasibleH(f"need {lower.dim} <= n - r = {target} <= {upper_dim}")
    cols = [lower.basis]
    have = lower.dim
    for block in (d.T1, d.W1):
        for j in range(block.dim):
            if have >= target:
                break
            cols.append(block.basis[:, j:j + 1])
            have += 1
    ordered = np.hstack(cols)
    q, _ = np.linalg.qr(ordered)
    # Gram-Schmidt order: column i spans the first i + 1 ordered vectors
    H = Subspace(normalize_columns(q) + 0.0, d.E.field)
    if tx is not None and (H + tx).dim != n:
        raise ConstructionContradiction("H + T_x X is not the whole space")
    if tau is not None and (H + tau).dim >= n:
        raise ConstructionContradiction("H + tau is the whole space")
    return H


def reference_basis(H: Subspace, tau: Subspace, v) -> np.ndarray:
    """Columns ``v_1..v_{n-1}, v'``: ``H``, then ``H + tau``, then the rest, then ``v' = v``."""
    n, fld = H.ambient_dim, H.field
    ht = H + tau
    e = Subspace.span(np.asarray(v).reshape(-1, 1), fld)
    c1 = complement_within(H, ht)
    c2 = complement_within(ht + e, Subspace.full(n, fld))
    ref = np.hstack([H.basis, c1.basis, c2.basis, np.asarray(v, dtype=fld.dtype).reshape(-1, 1)])
    if ref.shape[1] != n or numeric_rank(ref).numeric_rank != n:
        raise ConstructionContradiction("reference vectors are not a basis")
    return ref


def build_L(h_basis, m: int, field=Field.REAL) -> AffineMap:
    """``L(a) = a_1 v_1 + ... + a_{n-r} v_{n-r}`` on ``K^m``."""
    hb = np.asarray(h_basis)
    k = hb.shape[1]
    if k == 0:
        raise DimensionHypothesisViolated("n - r = 0: the construction degenerates")
    if m < k:
        raise DimensionHypothesisViolated(f"dim M = {m} < n - r = {k}")
    fld = Field.parse(field)
    mat = np.zeros((hb.shape[0], m), dtype=fld.dtype)
    mat[:, :k] = hb
    return AffineMap(mat, field=fld, description=f"L: K^{m} -> K^{hb.shape[0]} onto H")


# ---------------------------------------------------------------------------
# localized maps


class LocalizedAffine(DifferentiableMap):
    """``z -> x + lambda(z) (a + M z)`` for a bump ``lambda``."""

    def __init__(self, x, a, matrix, bump: BumpFunction, description: str = ""):
        self.x = np.asarray(x, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)
        self.bump = bump
        n, m = self.matrix.shape
        super().__init__(m, n, self._one, self._jac_one, Field.REAL, description,
                         batch_evaluator=self._many, batch_jacobian=self._jac_many)

    def _many(self, zs):
        lam = self.bump.values(zs)
        return self.x + lam[:, None] * (self.a + zs @ self.matrix.T)

    def _one(self, z):
        return self._many(z.reshape(1, -1))[0]

    def _jac_many(self, zs):
        lam = self.bump.values(zs)
        grad = self.bump.gradients(zs)
        inner = self.a + zs @ self.matrix.T
        return lam[:, None, None] * self.matrix + inner[:, :, None] * grad[:, None, :]

    def _jac_one(self, z):
        return self._jac_many(z.reshape(1, -1))[0]


def default_bump(m: int, half_width: float = CHART_HALF_WIDTH) -> BumpFunction:
    """Plateau ``[-h/4, h/4]^m``, support ``[-h/2, h/2]^m`` inside the chart ``[-h, h]^m``."""
    return BumpFunction(Box.cube(m, -half_width / 4, half_width / 4), Box.cube(m, -half_width / 2, half_width / 2))


def localize(L: AffineMap, bump: BumpFunction, x=None) -> LocalizedAffine:
    """``f = x + lambda L``: equal to ``x + L`` on the plateau, to ``x`` off the support."""
    if not bump.inner.contains(np.zeros(bump.dim)):
        raise InvalidOperands("the plateau must contain the source origin")
    n = L.target_dim
    x = np.zeros(n) if x is None else np.asarray(x, dtype=float)
    return LocalizedAffine(x, np.zeros(n), L.matrix, bump, "f = x + lambda L")


# ---------------------------------------------------------------------------
# alignment


def _polar(a: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size and s[-1] <= 1e-12 * max(1.0, s[0]):
        raise AlignmentFailure("completion block lost rank")
    return u @ vh


@dataclass(frozen=True)
class Alignment:
    bases: tuple
    rotations: tuple
    residuals: tuple


def align_bases(seq: TangentSequence, tau: Subspace, reference: np.ndarray,
                slack: float = ALIGN_SLACK) -> Alignment:
    """Move the reference basis along the sequence so the tangent planes stay in the first block.

    ``R_k`` is a unitary map carrying ``tau`` onto ``tau_k``: the ``tau`` block
    is matched by orthogonal Procrustes and the complement by the polar
    factor of its projection.  Then ``v_i^k = R_k v_i``.
    """
    ref = np.asarray(reference)
    n = tau.ambient_dim
    if ref.shape != (n, n):
        raise AlignmentFailure(f"reference basis has shape {ref.shape}, expected {(n, n)}")
    B = tau.basis
    C = tau.complement().basis
    q_ref = np.hstack([B, C])
    bases, rots, res = [], [], []
    for tk in seq.tangents:
        if tk.dim != tau.dim or tk.field is not tau.field:
            raise AlignmentFailure(f"tangent of dim {tk.dim} cannot align with tau of dim {tau.dim}")
        Bk = tk.basis
        u, _, vh = np.linalg.svd(Bk.conj().T @ B)
        omega = u @ vh
        Ck = _polar(C - Bk @ (Bk.conj().T @ C))
        qk = np.hstack([Bk @ omega, Ck])
        R = qk @ q_ref.conj().T
        Vk = R @ ref
        bases.append(Vk)
        rots.append(R)
        res.append(float(np.max(np.linalg.norm(Vk - ref, axis=0))))
    for a, b in zip(res, res[1:]):
        if b > a + slack:
            raise AlignmentFailure(f"alignment residual grew from {a:.3e} to {b:.3e}")
    return Alignment(tuple(bases), tuple(rots), tuple(res))


# ---------------------------------------------------------------------------
# families


@dataclass
class WitnessMember:
    k: int
    y: np.ndarray
    basis: np.ndarray
    H: Subspace
    L_matrix: np.ndarray
    f: DifferentiableMap
    verdict_Y: TransversalityVerdict
    margin_Y: float
    alignment_residual: float
    c1_K: float
    c1_support: float
    c1_bound: float

    def to_json(self) -> dict:
        return {"k": self.k, "y": _pt(self.y), "v": _mat(self.basis[:, :self.H.dim]),
                "H": self.H.to_json(), "verdict_Y": self.verdict_Y.reason.value,
                "margin_Y": self.margin_Y, "alignment_residual": self.alignment_residual,
                "c1_distance_K": self.c1_K, "c1_distance_support": self.c1_support,
                "c1_bound": self.c1_bound}


@dataclass
class WitnessFamily:
    fault: FaultInstance
    decomposition: Decomposition
    H: Subspace
    reference: np.ndarray
    L: AffineMap
    f: DifferentiableMap
    verdict_X: TransversalityVerdict
    members: list
    K: Optional[Box] = None
    support: Optional[Box] = None
    c1_constant: Optional[float] = None
    threshold: Optional[int] = None
    trail: list = dc_field(default_factory=list)

    @property
    def field(self) -> Field:
        return self.fault.field

    def soundness(self) -> dict:
        """The end-to-end checks every family must pass."""
        n = self.fault.n
        tx, tau = self.fault.tx, self.fault.tau
        c1 = [mb.c1_support for mb in self.members]
        tail = c1[4:]
        return {
            "H_plus_TX_full": (self.H + tx).dim == n,
            "H_plus_tau_proper": (self.H + tau).dim <= n - 1,
            "fk_at_w_is_yk": max(float(np.max(np.abs(mb.f(np.zeros(mb.f.source_dim)) - mb.y)))
                                 for mb in self.members) <= 1e-14 * (1 + max(np.abs(self.fault.x).max(), 1)),
            "margins_vanish": max(mb.margin_Y for mb in self.members) <= 1e-10,
            "f_transverse_to_X": self.verdict_X.transverse and self.verdict_X.reason is Reason.RANK_FULL,
            "c1_nonincreasing_after_5": all(b <= a + 1e-15 for a, b in zip(tail, tail[1:])),
            "c1_tends_to_zero": len(c1) > 1 and c1[-1] < c1[0],
        }

    def to_json(self) -> dict:
        return {
            "field": self.field.value, "X": self.fault.X.name, "Y": self.fault.Y.name,
            "x": _pt(self.fault.x), "v": _pt(self.fault.v), "r": self.fault.r,
            "tau": self.fault.tau.to_json(), "decomposition": self.decomposition.to_json(),
            "dims": self.decomposition.dims(), "H": self.H.to_json(),
            "reference_basis": _mat(self.reference),
            "L": _mat(self.L.matrix), "verdict_X": self.verdict_X.to_json(),
            "K": None if self.K is None else self.K.to_json(),
            "support": None if self.support is None else self.support.to_json(),
            "c1_constant": self.c1_constant, "threshold": self.threshold,
            "members": [mb.to_json() for mb in self.members],
            "soundness": self.soundness(), "trail": self.trail,
        }


def _first_stable_k(flags: list) -> Optional[int]:
    """Smallest k (1-based) from which every flag is true."""
    k = None
    for i, ok in enumerate(flags, start=1):
        if ok and k is None:
            k = i
        elif not ok:
            k = None
    return k


def build_family(fault: FaultInstance, bump: BumpFunction | None = None,
                 per_axis: int | None = None) -> WitnessFamily:
    """Run the real construction end to end."""
    if fault.field is not Field.REAL:
        raise InvalidOperands("use complex_witness for complex faults")
    n, m, r = fault.n, fault.m, fault.r
    if n - r == 0:
        raise DimensionHypothesisViolated("n - r = 0")
    if m < n - r:
        raise DimensionHypothesisViolated(f"dim M = {m} < n - r = {n - r}")
    trail = []
    d = decompose(fault.tx, fault.tau, fault.v)
    trail.append(f"decomposition dims {d.dims()}")
    H = construct_H(d, r, fault.tx, fault.tau)
    trail.append(f"H of dim {H.dim}: H + T_xX full, H + tau proper")
    ref = reference_basis(H, fault.tau, fault.v)
    L = build_L(H.basis, m)
    bump = bump or default_bump(m)
    f = localize(L, bump, fault.x)
    w = np.zeros(m)
    vx = is_transverse_at(f, w, fault.X)
    if not vx.transverse:
        raise ConstructionContradiction(f"f is not transverse to X at w ({vx.reason.value})")
    trail.append(f"f transverse to {fault.X.name} at w ({vx.reason.value})")
    al = align_bases(fault.seq, fault.tau, ref)
    K, Kp = bump.inner, bump.outer
    G = bump.gradient_bound()
    Z = float(np.sum(np.maximum(np.abs(Kp.lo), np.abs(Kp.hi))))
    C = (1 + Z) * (1 + G)
    h = H.dim
    members = []
    for k, (y, Vk, res) in enumerate(zip(fault.seq.points, al.bases, al.residuals), start=1):
        Lk = np.zeros((n, m))
        Lk[:, :h] = Vk[:, :h]
        fk = LocalizedAffine(fault.x, y.real - fault.x, Lk, bump, f"f^{k}")
        vy = is_transverse_at(fk, w, fault.Y)
        if vy.transverse and vy.conclusive:
            raise ConstructionContradiction(f"f^{k} is transverse to {fault.Y.name} at w")
        eta = margin_eta(fk, w, fault.Y)
        dmax = float(np.max(np.linalg.norm(Vk[:, :h] - ref[:, :h], axis=0)))
        members.append(WitnessMember(
            k, y, Vk, Subspace.span(Vk[:, :h]), Lk, fk, vy, eta, res,
            c1_distance(fk, f, K, per_axis), c1_distance(fk, f, Kp, per_axis),
            C * (float(np.linalg.norm(y - fault.x)) + dmax)))
    thr = _first_stable_k([mb.verdict_Y.reason is Reason.RANK_DEFICIENT for mb in members])
    trail.append(f"f^k not transverse to {fault.Y.name} at w from k = {thr}")
    return WitnessFamily(fault, d, H, ref, L, f, vx, members, K, Kp, C, thr, trail)


def complex_witness(fault: FaultInstance) -> WitnessFamily:
    """The complex construction: globally affine maps, no bump.

    ``L`` sends the ``i``-th vector of a unitary completion of ``T_w M`` to
    ``v_i`` (``i <= n - r``) and kills the rest; ``g(z) = x + L z`` and
    ``g^k(z) = y_k + L^k z`` on ``C^p``.  The family members are the
    restrictions to ``T_w M`` in its orthonormal coordinates.
    """
    if fault.field is not Field.COMPLEX:
        raise InvalidOperands("complex_witness needs a complex fault")
    n, r = fault.n, fault.r
    tw = fault.source_tangent
    if n - r == 0:
        raise DimensionHypothesisViolated("n - r = 0")
    if tw.dim < n - r:
        raise DimensionHypothesisViolated(f"dim M = {tw.dim} < n - r = {n - r}")
    trail = []
    d = decompose(fault.tx, fault.tau, fault.v)
    trail.append(f"decomposition dims {d.dims()}")
    H = construct_H(d, r, fault.tx, fault.tau)
    ref = reference_basis(H, fault.tau, fault.v)
    h = H.dim
    U = extend_to_basis(tw)
    uh = U.conj().T[:h]
    Lg = H.basis @ uh
    m = tw.dim
    L = AffineMap(Lg @ tw.basis, field=Field.COMPLEX, description="L restricted to T_w M")
    f = AffineMap(Lg @ tw.basis, offset=fault.x, field=Field.COMPLEX, description="f = g on M")
    w = np.zeros(m, dtype=complex)
    vx = is_transverse_at(f, w, fault.X)
    if not vx.transverse:
        raise ConstructionContradiction(f"f is not transverse to X at w ({vx.reason.value})")
    al = align_bases(fault.seq, fault.tau, ref)
    box = Box.cube(2 * m, -1.0, 1.0)
    # |z|_2 <= sqrt(2m) on the box and |V^k - V|_2 <= sqrt(h) max column error
    C = math.sqrt(h) * (1 + math.sqrt(2 * m))
    members = []
    for k, (y, Vk, res) in enumerate(zip(fault.seq.points, al.bases, al.residuals), start=1):
        Lk = Vk[:, :h] @ uh @ tw.basis
        fk = AffineMap(Lk, offset=y, field=Field.COMPLEX, description=f"f^{k} = g^{k} on M")
        vy = is_transverse_at(fk, w, fault.Y)
        if vy.transverse and vy.conclusive:
            raise ConstructionContradiction(f"f^{k} is transverse to {fault.Y.name} at w")
        eta = margin_eta(fk, w, fault.Y)
        dmax = float(np.max(np.linalg.norm(Vk[:, :h] - ref[:, :h], axis=0)))
        c1 = c1_distance(fk, f, box, per_axis=5)
        members.append(WitnessMember(k, y, Vk, Subspace.span(Vk[:, :h], Field.COMPLEX), Lk, fk, vy, eta, res,
                                     c1, c1, C * (float(np.linalg.norm(y - fault.x)) + dmax)))
    thr = _first_stable_k([mb.verdict_Y.reason is Reason.RANK_DEFICIENT for mb in members])
    trail.append(f"f^k not transverse to {fault.Y.name} at w from k = {thr}")
    return WitnessFamily(fault, d, H, ref, L, f, vx, members, box, box, C, thr, trail)
