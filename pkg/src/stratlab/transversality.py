"""Pointwise and sampled transversality of maps to strata.

All checks work in the identity chart: the differential is the Jacobian of
the map as given, and the stratum's tangent space is taken in the ambient
coordinates.  The margin is the smallest singular value of the differential
composed with the orthogonal projection onto the normal space of the stratum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import Inconclusive, InvalidOperands, NotOnStratum
from .geometry import Box, DifferentiableMap, default_per_axis, sample_grid
from .strata import TOL_ON, Stratification, Stratum
from .subspace import Field, RankDecision, TOL_RANK, numeric_rank

CHART = "identity"


class Reason(str, enum.Enum):
    MISSES = "MissesStratum"
    RANK_FULL = "RankFull"
    RANK_DEFICIENT = "RankDeficient"
    INCONCLUSIVE = "Inconclusive"


def _pt(v) -> list:
    v = np.asarray(v).reshape(-1)
    if np.iscomplexobj(v):
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in v]


def _num(v):
    if v is None:
        return None
    return v if math.isfinite(v) else "inf"


@dataclass(frozen=True)
class TransversalityVerdict:
    transverse: bool
    reason: Reason
    stratum: str
    x: np.ndarray
    image: np.ndarray
    margin: Optional[float] = None
    rank_decision: Optional[RankDecision] = None
    conclusive: bool = True
    detail: str = ""
    chart: str = CHART

    def to_json(self) -> dict:
        return {
            "x": _pt(self.x), "stratum": self.stratum, "transverse": self.transverse,
            "verdict": self.reason.value, "margin": _num(self.margin),
            "conclusive": self.conclusive, "chart": self.chart,
            "rank_decision": None if self.rank_decision is None else self.rank_decision.to_json(),
            "detail": self.detail,
        }


def _normal_margin(df: np.ndarray, tangent_basis: np.ndarray, q: np.ndarray | None = None) -> float:
    n, m = df.shape
    codim = n - tangent_basis.shape[1]
    if codim == 0:
        return math.inf
    if m < codim:
        return 0.0
    if q is None:
        u, _, _ = np.linalg.svd(tangent_basis, full_matrices=True)
        q = u[:, tangent_basis.shape[1]:]
    s = np.linalg.svd(q.conj().T @ df, compute_uv=False)
    return float(s[codim - 1])


def margin_eta(f: DifferentiableMap, x, s: Stratum, q=None, tol_on: float = TOL_ON) -> float:
    """``sigma_min(Q^H Df(x))`` for an orthonormal basis ``Q`` of the normal space at ``f(x)``.

    ``q`` overrides the basis; it must span the orthogonal complement of the
    tangent space.  Infinite for open strata, zero when ``dim M`` is smaller
    than the codimension.
    """
    y = f(x)
    if not s.on_stratum(y, tol_on):
        raise NotOnStratum(f"f(x) = {_pt(y)} is not on {s.name!r}")
    T = s.tangent_at(y)
    return _normal_margin(f.jacobian(x), T.basis, None if q is None else np.asarray(q))


def is_transverse_at(f: DifferentiableMap, x, s: Stratum, tol_rank: float = TOL_RANK,
                     tol_on: float = TOL_ON) -> TransversalityVerdict:
    if f.target_dim != s.ambient_dim or f.field is not s.field:
        raise InvalidOperands(f"map target does not match the ambient space of {s.name!r}")
    x = np.asarray(x, dtype=f.field.dtype).reshape(-1)
    y = f(x)
    try:
        on = s.on_stratum(y, tol_on)
    except Inconclusive as exc:
        return TransversalityVerdict(False, Reason.INCONCLUSIVE, s.name, x, y, conclusive=False, detail=str(exc))
    if not on:
        return TransversalityVerdict(True, Reason.MISSES, s.name, x, y)
    try:
        T = s.tangent_at(y, tol_rank)
    except Inconclusive as exc:
        return TransversalityVerdict(False, Reason.INCONCLUSIVE, s.name, x, y, conclusive=False, detail=str(exc))
    df = f.jacobian(x)
    dec = numeric_rank(np.hstack([df, T.basis]), tol_rank)
    full = dec.numeric_rank == s.ambient_dim
    return TransversalityVerdict(full, Reason.RANK_FULL if full else Reason.RANK_DEFICIENT, s.name, x, y,
                                 margin=_normal_margin(df, T.basis), rank_decision=dec,
                                 conclusive=dec.conclusive)


@dataclass(frozen=True)
class StratificationVerdict:
    verdicts: tuple

    @property
    def transverse(self) -> bool:
        return all(v.transverse for v in self.verdicts)

    @property
    def conclusive(self) -> bool:
        return all(v.conclusive for v in self.verdicts)

    def __iter__(self):
        return iter(self.verdicts)

    def __len__(self):
        return len(self.verdicts)

    def to_json(self) -> dict:
        return {"transverse": self.transverse, "conclusive": self.conclusive,
                "verdicts": [v.to_json() for v in self.verdicts]}


def is_transverse_to_stratification(f: DifferentiableMap, x, sigma: Stratification,
                                    tol_rank: float = TOL_RANK, tol_on: float = TOL_ON) -> StratificationVerdict:
    return StratificationVerdict(tuple(is_transverse_at(f, x, s, tol_rank, tol_on) for s in sigma.strata))


def codim_shortcut_applies(target, m: int) -> bool:
    """True when every stratum has codimension above ``m``, so transverse means disjoint."""
    if isinstance(target, Stratification):
        if target.min_dim is None:
            return True
        return target.ambient_dim - target.min_dim > m
    return target.codim > m


# ---------------------------------------------------------------------------
# sampled check on a compact box


@dataclass
class CompactReport:
    stratification: str
    box: Box
    grid_points: int
    encounters: list = dc_field(default_factory=list)
    failures: list = dc_field(default_factory=list)
    inconclusive: list = dc_field(default_factory=list)
    min_margin: Optional[float] = None
    min_clearance: Optional[float] = None
    clearance_point: Optional[np.ndarray] = None
    chart: str = CHART

    @property
    def transverse(self) -> bool:
        return not self.failures and not self.inconclusive

    @property
    def certified(self) -> bool:
        """No failures, and both the margin and the clearance are positive where defined."""
        if not self.transverse:
            return False
        if self.min_margin is not None and not self.min_margin > 0:
            return False
        return self.min_clearance is None or self.min_clearance > 0

    def to_json(self) -> dict:
        return {
            "stratification": self.stratification, "box": self.box.to_json(),
            "grid_points": self.grid_points, "chart": self.chart,
            "points": [v.to_json() for v in self.encounters],
            "summary": {
                "transverse": self.transverse, "certified": self.certified,
                "min_margin": _num(self.min_margin), "min_clearance": _num(self.min_clearance),
                "clearance_point": None if self.clearance_point is None else _pt(self.clearance_point),
                "failures": [v.to_json() for v in self.failures],
                "inconclusive": [v.to_json() for v in self.inconclusive],
            },
        }


def _local_minima(values: np.ndarray, shape: tuple) -> np.ndarray:
    """Flat indices of grid points not larger than any axis neighbour."""
    v = values.reshape(shape)
    mask = np.ones(shape, dtype=bool)
    for ax in range(len(shape)):
        if shape[ax] < 2:
            continue
        d = np.diff(v, axis=ax)
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        mask[tuple(lo)] &= d >= 0
        mask[tuple(hi)] &= d <= 0
    return np.flatnonzero(mask.reshape(-1))


def _refine_1d(f: DifferentiableMap, s: Stratum, axis: np.ndarray, idx: int) -> list:
    """Zeros of ``g o f`` (or critical points of it) bracketed around grid node ``idx``."""
    g = s.representation.constraint

    def h(t):
        return float(g(f([t]))[0].real)

    def dh(t):
        return float((g.jacobian(f([t])) @ f.jacobian([t]))[0, 0].real)

    lo, hi = axis[max(idx - 1, 0)], axis[min(idx + 1, len(axis) - 1)]
    out = []
    for a, b in ((lo, axis[idx]), (axis[idx], hi)):
        if a == b:
            continue
        ha, hb = h(a), h(b)
        if ha == 0.0:
            out.append(a)
        elif hb == 0.0:
            out.append(b)
        elif ha * hb < 0:
            out.append(optimize.brentq(h, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if out:
        return out
    if lo < hi:
        da, db = dh(lo), dh(hi)
        if da * db < 0:
            out.append(optimize.brentq(dh, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return out


def _dips_between_nodes(axis: np.ndarray, h: np.ndarray, idx: int) -> bool:
    """Whether ``h`` may vanish near node ``idx``, judged from a parabola through three nodes."""
    j0 = min(max(idx - 1, 0), len(axis) - 3)
    xs, hs = axis[j0:j0 + 3], h[j0:j0 + 3]
    if np.any(hs == 0) or np.any(np.sign(hs[1:]) != np.sign(hs[:-1])):
        return True
    a, b, c = np.polyfit(xs, hs, 2)
    cands = [xs[0], xs[-1]]
    if a != 0 and xs[0] < -b / (2 * a) < xs[-1]:
        cands.append(-b / (2 * a))
    vals = np.polyval([a, b, c], cands)
    if np.any(np.sign(vals) != np.sign(hs[0])):
        return True
    return float(np.min(np.abs(vals))) <= 0.5 * float(np.min(np.abs(hs)))


def _refine_nd(f: DifferentiableMap, s: Stratum, K: Box, z0: np.ndarray) -> list:
    g = s.representation.constraint
    res = optimize.least_squares(
        lambda z: np.real(g(f(z))), z0,
        jac=lambda z: np.real(g.jacobian(f(z)) @ f.jacobian(z)),
        bounds=(K.lo, K.hi), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    return [res.x]


def _encounters(f, s, K, pts, ys, res, scale, refine_limit):
    on = s.region_mask(ys) & (res <= scale)
    cands = [pts[i] for i in np.flatnonzero(on)]
    can_refine = (s.is_implicit and s.codim > 0 and s.field is Field.REAL)
    if can_refine:
        per = int(round(len(pts) ** (1.0 / K.dim)))
        mins = _local_minima(res, (per,) * K.dim)
        mins = mins[np.argsort(res[mins], kind="stable")][:refine_limit]
        one_d = K.dim == 1 and s.codim == 1 and per >= 3
        if one_d:
            axis, h = K.axes(per)[0], s.constraint_values(ys)[:, 0].real
        for i in sorted(mins):
            if on[i]:
                continue
            if one_d:
                if not _dips_between_nodes(axis, h, int(i)):
                    continue
                found = _refine_1d(f, s, axis, int(i))
                cands.extend(np.array([t]) for t in found)
            else:
                cands.extend(_refine_nd(f, s, K, pts[i]))
    out = []
    for z in cands:
        if any(np.allclose(z, w, rtol=0, atol=1e-12) for w in out):
            continue
        out.append(np.asarray(z))
    return out


def transverse_on_compact(f: DifferentiableMap, K: Box, sigma: Stratification, per_axis: int | None = None,
                          tol_rank: float = TOL_RANK, tol_on: float = TOL_ON,
                          clearance_candidates: int = 2, refine_limit: int = 16) -> CompactReport:
    """Sampling certificate of transversality on the box ``K``.

    Grid points whose image lies on a stratum are encounters; local minima of
    the constraint residual are refined to catch encounters between grid
    nodes.  The clearance is the smallest distance from an off-union image
    point to the strata, evaluated at the points with the smallest residuals.
    """
    if f.field is not sigma.field or f.target_dim != sigma.ambient_dim:
        raise InvalidOperands("map target does not match the stratification")
    need = f.source_dim * (2 if f.field is Field.COMPLEX else 1)
    if K.dim != need:
        raise InvalidOperands(f"box has dim {K.dim}, expected {need}")
    if not K.is_bounded:
        raise InvalidOperands("K must be bounded")
    per = per_axis or default_per_axis(K.dim)
    pts = sample_grid(K, f.field, per)
    ys = f.values(pts)
    scale = tol_on * (1 + np.linalg.norm(ys, axis=1))
    report = CompactReport(sigma.name, K, len(pts))
    off_union = np.ones(len(pts), dtype=bool)
    best_clear, best_pt = math.inf, None

    for s in sigma.strata:
        res = s.residual_norms(ys)
        on = s.region_mask(ys) & (res <= scale)
        off_union &= ~on
        for z in _encounters(f, s, K, pts, ys, res, scale, refine_limit):
            v = is_transverse_at(f, z, s, tol_rank, tol_on)
            if v.reason is Reason.MISSES:
                continue
            report.encounters.append(v)
            if not v.conclusive:
                report.inconclusive.append(v)
            elif not v.transverse:
                report.failures.append(v)
            if v.margin is not None:
                report.min_margin = v.margin if report.min_margin is None else min(report.min_margin, v.margin)

    if off_union.any():
        idx_off = np.flatnonzero(off_union)
        for s in sigma.strata:
            res = s.residual_norms(ys)
            order = idx_off[np.argsort(res[idx_off], kind="stable")][:clearance_candidates]
            per_mins = _local_minima(res, (per,) * K.dim)
            cand = list(order) + [i for i in per_mins if off_union[i]][:clearance_candidates]
            for i in sorted(set(int(c) for c in cand)):
                d = s.distance(ys[i])
                if math.isfinite(d) and d < best_clear:
                    best_clear, best_pt = d, pts[i]
        if math.isfinite(best_clear):
            report.min_clearance, report.clearance_point = float(best_clear), best_pt
    return report
