"""Strata, stratifications, membership and tangent spaces.

A stratum is either *implicit* (zero set of a submersion ``g: K^n -> K^{n-d}``
cut down by strict or non-strict polynomial inequalities) or *parametric*
(image of an immersion of a parameter box).  Region inequalities are
polynomials in the real coordinates of the ambient space; for complex
strata these are the interleaved coordinates ``(re_1, im_1, ...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import Inconclusive, InvalidOperands, NotOnStratum, SingularPoint
from .geometry import Box, DifferentiableMap, PolynomialMap, realify, complexify
from .subspace import Field, Subspace, TOL_RANK, normalize_columns, numeric_rank

TOL_ON = 1e-9


@dataclass(frozen=True)
class Inequality:
    """``poly(y) > 0`` (strict) or ``poly(y) >= 0``, on real coordinates."""

    poly: PolynomialMap
    strict: bool = True

    def values(self, y_real: np.ndarray) -> np.ndarray:
        return self.poly.values(y_real)[:, 0]

    def to_json(self) -> dict:
        return {"terms": self.poly.to_json()["coords"][0], "op": ">" if self.strict else ">="}

    @classmethod
    def from_json(cls, data: dict, real_dim: int) -> "Inequality":
        op = data.get("op", ">")
        if op not in (">", ">="):
            raise InvalidOperands(f"unsupported inequality operator {op!r}")
        poly = PolynomialMap.from_json({"m": real_dim, "n": 1, "field": "real",
                                        "coords": [data["terms"]]})
        return cls(poly, op == ">")


def halfspace(real_dim: int, axis: int, sign: float = 1.0, strict: bool = True) -> Inequality:
    """``sign * y_axis > 0``."""
    idx = [0] * real_dim
    idx[axis] = 1
    return Inequality(PolynomialMap(real_dim, 1, [[(tuple(idx), sign)]]), strict)


@dataclass(frozen=True)
class Implicit:
    constraint: Optional[DifferentiableMap]
    region: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "region", tuple(self.region))


@dataclass(frozen=True)
class Parametric:
    immersion: DifferentiableMap
    param_box: Box
    seeds_per_axis: int = 33


@dataclass(frozen=True, eq=False)
class Stratum:
    name: str
    ambient_dim: int
    dim: int
    representation: Implicit | Parametric
    field: Field = Field.REAL

    def __post_init__(self):
        object.__setattr__(self, "field", Field.parse(self.field))
        n, d = self.ambient_dim, self.dim
        if not 0 <= d <= n:
            raise InvalidOperands(f"stratum {self.name!r}: dim {d} outside [0, {n}]")
        rep = self.representation
        if isinstance(rep, Implicit):
            g = rep.constraint
            if n - d == 0:
                if g is not None and g.target_dim != 0:
                    raise InvalidOperands(f"open stratum {self.name!r} takes no constraint")
            elif g is None or (g.source_dim, g.target_dim) != (n, n - d):
                raise InvalidOperands(f"stratum {self.name!r}: constraint must map {n} -> {n - d}")
        elif isinstance(rep, Parametric):
            if self.field is not Field.REAL:
                raise InvalidOperands("parametric strata are real only")
            f = rep.immersion
            if (f.source_dim, f.target_dim) != (d, n):
                raise InvalidOperands(f"stratum {self.name!r}: immersion must map {d} -> {n}")
        else:
            raise InvalidOperands("unknown stratum representation")

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.dim

    @property
    def is_implicit(self) -> bool:
        return isinstance(self.representation, Implicit)

    # --- implicit helpers ----------------------------------------------------

    def _points(self, ys) -> np.ndarray:
        return np.asarray(ys, dtype=self.field.dtype).reshape(-1, self.ambient_dim)

    def _real(self, ys: np.ndarray) -> np.ndarray:
        return realify(ys) if self.field is Field.COMPLEX else ys.real.astype(float)

    def region_mask(self, ys, slack: float = 0.0) -> np.ndarray:
        """Inequalities at each point; ``slack > 0`` relaxes them to ``>= -slack``."""
        ys = self._points(ys)
        mask = np.ones(len(ys), dtype=bool)
        if not self.is_implicit:
            return mask
        yr = self._real(ys)
        for ineq in self.representation.region:
            v = ineq.values(yr)
            if slack > 0:
                mask &= v >= -slack
            else:
                mask &= (v > 0) if ineq.strict else (v >= 0)
        return mask

    def constraint_values(self, ys) -> np.ndarray:
        ys = self._points(ys)
        g = self.representation.constraint
        if self.codim == 0 or g is None:
            return np.zeros((len(ys), 0), dtype=self.field.dtype)
        return g.values(ys)

    def residual_norms(self, ys) -> np.ndarray:
        """``|g(y)|`` for implicit strata, nearest-point distance for parametric."""
        ys = self._points(ys)
        if self.is_implicit:
            return np.linalg.norm(self.constraint_values(ys), axis=1)
        return np.array([self.nearest(y)[1] for y in ys])

    # --- parametric helpers --------------------------------------------------

    def nearest(self, y, max_iter: int = 200):
        """Nearest parameter by damped Gauss-Newton from grid seeds.

        Returns ``(t, residual, converged)``.
        """
        rep = self.representation
        if not isinstance(rep, Parametric):
            raise InvalidOperands("nearest() needs a parametric stratum")
        y = np.asarray(y, dtype=float).reshape(-1)
        psi, box = rep.immersion, rep.param_box
        seeds = box.truncated().grid(rep.seeds_per_axis)
        d0 = np.linalg.norm(psi.values(seeds) - y, axis=1)
        best = None
        for idx in np.argsort(d0, kind="stable")[:3]:
            t = seeds[idx].copy()
            r = psi(t) - y
            mu = 1e-3
            converged = False
            for _ in range(max_iter):
                J = psi.jacobian(t)
                grad = J.T @ r
                if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(y)):
                    converged = True
                    break
                step = np.linalg.solve(J.T @ J + mu * np.eye(len(t)), -grad)
                t_new = np.clip(t + step, box.lo, box.hi)
                r_new = psi(t_new) - y
                if np.linalg.norm(r_new) < np.linalg.norm(r):
                    moved = np.linalg.norm(t_new - t)
                    t, r = t_new, r_new
                    mu = max(mu / 3, 1e-12)
                    if moved <= 1e-14 * (1 + np.linalg.norm(t)):
                        converged = True
                        break
                else:
                    mu *= 4
                    # stalled with a first-order stationary point
                    if mu > 1e12 or np.linalg.norm(grad) <= 1e-14 * (1 + np.linalg.norm(r)):
                        converged = True
                        break
            res = float(np.linalg.norm(r))
            if best is None or res < best[1]:
                best = (t, res, converged)
        return best

    # --- membership ----------------------------------------------------------

    def on_stratum(self, y, tol: float = TOL_ON) -> bool:
        y = self._points(y)[0]
        scale = tol * (1 + float(np.linalg.norm(y)))
        if self.is_implicit:
            if not self.region_mask(y)[0]:
                return False
            return bool(self.residual_norms(y)[0] <= scale)
        t, res, converged = self.nearest(y)
        if res <= scale:
            return True
        if not converged:
            raise Inconclusive(f"nearest-point search on {self.name!r} did not converge")
        return False

    def tangent_at(self, y, tol_rank: float = TOL_RANK) -> Subspace:
        y = self._points(y)[0]
        n, d = self.ambient_dim, self.dim
        if self.is_implicit:
            if self.codim == 0:
                return Subspace.full(n, self.field)
            dg = self.representation.constraint.jacobian(y)
            dec = numeric_rank(dg, tol_rank)
            if not dec.conclusive or dec.numeric_rank != self.codim:
                raise SingularPoint(f"Dg has rank {dec.numeric_rank} (conclusive={dec.conclusive}) "
                                    f"on {self.name!r}, expected {self.codim}")
            _, _, vh = np.linalg.svd(dg, full_matrices=True)
            return Subspace(normalize_columns(vh[self.codim:].conj().T), self.field)
        t, res, _ = self.nearest(y)
        dpsi = self.representation.immersion.jacobian(t)
        dec = numeric_rank(dpsi, tol_rank)
        if not dec.conclusive or dec.numeric_rank != d:
            raise SingularPoint(f"immersion rank {dec.numeric_rank} on {self.name!r}, expected {d}")
        return Subspace.span(dpsi, field=Field.REAL)

    def project(self, y, iters: int = 40):
        """Min-norm Newton projection onto the zero set of the constraint.

        Returns ``(point, converged)``.  Ignores the region.
        """
        p = self._points(y)[0].copy()
        if self.codim == 0:
            return p, True
        g = self.representation.constraint
        for _ in range(iters):
            r = g(p)
            if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(p)):
                return p, True
            J = g.jacobian(p)
            step = np.linalg.pinv(J, rcond=1e-12) @ r
            if not np.all(np.isfinite(step)) or np.linalg.norm(step) == 0:
                break
            p = p - step
        return p, bool(np.linalg.norm(g(p)) <= TOL_ON * (1 + np.linalg.norm(p)))

    def distance(self, y, iters: int = 60) -> float:
        """Distance from ``y`` to a locally nearest point of the stratum.

        Implicit strata: the foot point on the constraint's zero set found by
        alternating projection and tangent moves; when that foot point fails
        the region, the result is the distance to the zero set, a lower
        bound.  Returns ``nan`` if no foot point is found.
        """
        y = self._points(y)[0]
        if not self.is_implicit:
            return float(self.nearest(y)[1])
        if self.codim == 0:
            if self.region_mask(y)[0]:
                return 0.0
            yr = self._real(y.reshape(1, -1))
            est = math.inf
            for ineq in self.representation.region:
                v = ineq.values(yr)[0]
                if v > 0 or (v == 0 and not ineq.strict):
                    continue
                gr = np.linalg.norm(ineq.poly.jacobian(yr[0]))
                est = min(est, abs(v) / gr if gr > 0 else math.inf)
            return float(est)
        p, ok = self.project(y)
        if not ok:
            return math.nan
        for _ in range(iters):
            try:
                T = self.tangent_at(p)
            except SingularPoint:
                break
            step = T.projector() @ (y - p)
            if np.linalg.norm(step) <= 1e-13 * (1 + np.linalg.norm(y)):
                break
            q, ok = self.project(p + step)
            if not ok:
                break
            p = q
        return float(np.linalg.norm(y - p))

    # --- sampling ------------------------------------------------------------

    def sample(self, box: Box, per_axis: int = 21) -> np.ndarray:
        """Points of the stratum near the grid of ``box`` (ambient real coordinates)."""
        if not self.is_implicit:
            rep = self.representation
            ts = rep.param_box.truncated().grid(per_axis)
            return rep.immersion.values(ts)
        grid = box.grid(per_axis)
        pts = complexify(grid) if self.field is Field.COMPLEX else grid
        out = []
        for y in pts:
            p, ok = self.project(y)
            if ok and self.region_mask(p)[0]:
                out.append(p)
        return np.array(out, dtype=self.field.dtype).reshape(-1, self.ambient_dim)

    def closure_candidates(self, box: Box, per_axis: int = 21, slack: float = 1e-12) -> np.ndarray:
        """Sampled points of the closure that are not on the stratum itself."""
        if not self.is_implicit:
            rep = self.representation
            pb = rep.param_box
            ts = pb.truncated().grid(per_axis)
            on_face = np.zeros(len(ts), dtype=bool)
            for i in range(pb.dim):
                on_face |= (np.isfinite(pb.lo[i]) & (ts[:, i] == pb.lo[i]))
                on_face |= (np.isfinite(pb.hi[i]) & (ts[:, i] == pb.hi[i]))
            return rep.immersion.values(ts[on_face])
        if not self.representation.region:
            return np.zeros((0, self.ambient_dim), dtype=self.field.dtype)
        grid = box.grid(per_axis)
        pts = complexify(grid) if self.field is Field.COMPLEX else grid
        out = []
        for y in pts:
            p, ok = self.project(y)
            if not ok:
                continue
            if self.region_mask(p, slack=slack)[0] and not self.region_mask(p)[0]:
                out.append(p)
        return np.array(out, dtype=self.field.dtype).reshape(-1, self.ambient_dim)

    # --- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        rep = self.representation
        if isinstance(rep, Implicit):
            g = rep.constraint
            if g is not None and not isinstance(g, PolynomialMap):
                raise InvalidOperands(f"stratum {self.name!r} has a non-polynomial constraint")
            r = {"type": "implicit", "map": g.to_json() if g is not None else None,
                 "region": [q.to_json() for q in rep.region]}
        else:
            if not isinstance(rep.immersion, PolynomialMap):
                raise InvalidOperands(f"stratum {self.name!r} has a non-polynomial immersion")
            r = {"type": "parametric", "map": rep.immersion.to_json(),
                 "param_box": rep.param_box.to_json()}
        return {"name": self.name, "dim": self.dim, "repr": r}

    @classmethod
    def from_json(cls, data: dict, ambient_dim: int, field=Field.REAL) -> "Stratum":
        fld = Field.parse(field)
        rep = data["repr"]
        kind = rep.get("type")
        if kind == "implicit":
            g = PolynomialMap.from_json(rep["map"], f"constraint of {data['name']}") \
                if rep.get("map") is not None else None
            real_dim = ambient_dim * (2 if fld is Field.COMPLEX else 1)
            region = tuple(Inequality.from_json(q, real_dim) for q in rep.get("region", []))
            representation = Implicit(g, region)
        elif kind == "parametric":
            representation = Parametric(PolynomialMap.from_json(rep["map"]),
                                        Box.from_json(rep["param_box"]))
        else:
            raise InvalidOperands(f"unknown stratum representation {kind!r}")
        return cls(data["name"], ambient_dim, int(data["dim"]), representation, fld)

    def __repr__(self) -> str:
        kind = "implicit" if self.is_implicit else "parametric"
        return f"Stratum({self.name!r}, dim={self.dim}, ambient={self.ambient_dim}, {kind})"


def on_stratum(s: Stratum, y, tol: float = TOL_ON) -> bool:
    return s.on_stratum(y, tol)


def tangent_at(s: Stratum, y, tol_rank: float = TOL_RANK) -> Subspace:
    if not s.on_stratum(y):
        raise NotOnStratum(f"{np.asarray(y).tolist()} is not on {s.name!r}")
    return s.tangent_at(y, tol_rank)


@dataclass(frozen=True, eq=False)
class Stratification:
    name: str
    ambient_dim: int
    strata: tuple
    field: Field = Field.REAL
    union_closed: bool = True
    declared_a_regular: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "strata", tuple(self.strata))
        object.__setattr__(self, "field", Field.parse(self.field))
        names = [s.name for s in self.strata]
        if len(set(names)) != len(names):
            raise InvalidOperands(f"duplicate stratum names in {self.name!r}")
        for s in self.strata:
            if s.ambient_dim != self.ambient_dim or s.field is not self.field:
                raise InvalidOperands(f"stratum {s.name!r} does not live in {self.name!r}'s ambient space")

    @property
    def min_dim(self) -> Optional[int]:
        return min((s.dim for s in self.strata), default=None)

    r = min_dim

    def stratum(self, name: str) -> Stratum:
        for s in self.strata:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"name": self.name, "ambient_dim": self.ambient_dim, "field": self.field.value,
                "strata": [s.to_json() for s in self.strata],
                "union_closed": self.union_closed, "declared_a_regular": self.declared_a_regular}

    @classmethod
    def from_json(cls, data: dict) -> "Stratification":
        fld = Field.parse(data.get("field", "real"))
        n = int(data["ambient_dim"])
        strata = [Stratum.from_json(s, n, fld) for s in data["strata"]]
        return cls(data["name"], n, strata, fld, bool(data.get("union_closed", True)),
                   data.get("declared_a_regular"))


@dataclass
class ValidationReport:
    name: str
    r: Optional[int]
    samples: dict
    disjointness_violations: list = dc_field(default_factory=list)
    regularity_violations: list = dc_field(default_factory=list)
    union_violations: list = dc_field(default_factory=list)
    inconclusive: list = dc_field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not (self.disjointness_violations or self.regularity_violations or self.union_violations)

    def to_json(self) -> dict:
        return {"name": self.name, "valid": self.valid, "r": self.r, "samples": self.samples,
                "disjointness_violations": self.disjointness_violations,
                "regularity_violations": self.regularity_violations,
                "union_violations": self.union_violations, "inconclusive": self.inconclusive}


def _pt(y) -> list:
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return [[float(z.real), float(z.imag)] for z in y]
    return [float(v) for v in y]


def validate(sigma: Stratification, box: Box | None = None, per_axis: int | None = None,
             tol: float = TOL_ON, max_reports: int = 10) -> ValidationReport:
    """Sampled checks of disjointness, regularity and (when declared) closedness of the union."""
    real_dim = sigma.ambient_dim * (2 if sigma.field is Field.COMPLEX else 1)
    box = box or Box.cube(real_dim, -2.0, 2.0)
    per_axis = per_axis or (21 if real_dim <= 2 else 9 if real_dim <= 4 else 5)
    rep = ValidationReport(sigma.name, sigma.min_dim, {})
    samples = {}
    for s in sigma.strata:
        pts = s.sample(box, per_axis)
        samples[s.name] = pts
        rep.samples[s.name] = len(pts)
        for y in pts:
            try:
                s.tangent_at(y)
            except SingularPoint as exc:
                if len(rep.regularity_violations) < max_reports:
                    rep.regularity_violations.append({"stratum": s.name, "point": _pt(y), "detail": str(exc)})
    for s in sigma.strata:
        for other in sigma.strata:
            if other is s:
                continue
            for y in samples[s.name]:
                try:
                    hit = other.on_stratum(y, tol)
                except Inconclusive:
                    rep.inconclusive.append({"stratum": other.name, "point": _pt(y)})
                    continue
                if hit and len(rep.disjointness_violations) < max_reports:
                    rep.disjointness_violations.append({"point": _pt(y), "strata": [s.name, other.name]})
    if sigma.union_closed:
        for s in sigma.strata:
            for y in s.closure_candidates(box, per_axis):
                try:
                    inside = any(t.on_stratum(y, tol) for t in sigma.strata)
                except Inconclusive:
                    rep.inconclusive.append({"stratum": s.name, "point": _pt(y)})
                    continue
                if not inside and len(rep.union_violations) < max_reports:
                    rep.union_violations.append({"stratum": s.name, "limit_point": _pt(y)})
    return rep
