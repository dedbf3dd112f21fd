"""Weak C^1 neighbourhoods of a map, perturbation sampling and openness probes.

A weak subbasic neighbourhood is fixed by a base map, a source and a target
chart, a compact box ``K`` in the source chart and a radius ``eps``: it
holds the maps sending ``K`` into the target chart whose values and first
derivatives stay within ``eps`` of the base map on ``K``.  Membership is
checked on a grid, so it is a sampled test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from itertools import product
from typing import Optional

import numpy as np

from .errors import InvalidOperands, ProbePreconditionError, SamplingFailure
from .geometry import BumpFunction, Box, Chart, DifferentiableMap, PolynomialMap, c1_distance, sample_grid
from .strata import Stratification
from .subspace import Field
from .transversality import transverse_on_compact

MAX_HALVINGS = 20
ESCAPE_NOTE = "failure escapes K (weak-topology non-openness over all of M)"


def _pt(v) -> list:
    return [float(z) for z in np.asarray(v).reshape(-1)]


@dataclass(frozen=True, eq=False)
class WeakNeighborhoodSpec:
    f: DifferentiableMap
    K: Box
    epsilon: float
    src_chart: Optional[Chart] = None
    tgt_chart: Optional[Chart] = None
    jet_order: int = 1

    def __post_init__(self):
        if self.f.field is not Field.REAL:
            raise InvalidOperands("neighbourhood probes are real-only")
        src = self.src_chart or Chart.global_chart("src", self.f.source_dim)
        tgt = self.tgt_chart or Chart.global_chart("tgt", self.f.target_dim)
        object.__setattr__(self, "src_chart", src)
        object.__setattr__(self, "tgt_chart", tgt)
        if not self.K.is_bounded:
            raise InvalidOperands("K must be compact; strong-topology neighbourhoods are not supported")
        if self.K.dim != self.f.source_dim:
            raise InvalidOperands("K does not live in the source")
        if not src.domain.contains_box(self.K):
            raise InvalidOperands("K is not inside the source chart domain")
        if not self.epsilon > 0:
            raise InvalidOperands("epsilon must be positive")
        if self.jet_order != 1:
            raise InvalidOperands("only jet order 1 is supported")

    def to_json(self) -> dict:
        return {"map": self.f.description, "K": self.K.to_json(), "epsilon": self.epsilon,
                "jet_order": self.jet_order, "src_chart": self.src_chart.name, "tgt_chart": self.tgt_chart.name}


def nbhd_contains(spec: WeakNeighborhoodSpec, g: DifferentiableMap, per_axis: int | None = None) -> bool:
    if (g.source_dim, g.target_dim) != (spec.f.source_dim, spec.f.target_dim):
        raise InvalidOperands("g and the base map have different dimensions")
    pts = sample_grid(spec.K, Field.REAL, per_axis)
    img = g.values(pts)
    dom = spec.tgt_chart.domain
    if not np.all((img >= dom.lo) & (img <= dom.hi)):
        return False
    return c1_distance(spec.f, g, spec.K, points=pts) < spec.epsilon


# ---------------------------------------------------------------------------
# random perturbations


class PerturbedMap(DifferentiableMap):
    """``g(z) = f(z) + s lambda(z) P((z - c) / h)``."""

    def __init__(self, base: DifferentiableMap, bump: BumpFunction, poly: PolynomialMap,
                 center, half_width, scale: float, description: str = ""):
        self.base, self.bump, self.poly = base, bump, poly
        self.center = np.asarray(center, float)
        self.half_width = np.asarray(half_width, float)
        self.scale = float(scale)
        super().__init__(base.source_dim, base.target_dim, self._one, self._jac_one, Field.REAL,
                         description or f"{base.description} + {self.scale:.3g} lambda P",
                         base.domain, self._many, self._jac_many)

    def with_scale(self, scale: float) -> "PerturbedMap":
        return PerturbedMap(self.base, self.bump, self.poly, self.center, self.half_width, scale)

    def _many(self, zs):
        u = (zs - self.center) / self.half_width
        return self.base.values(zs) + self.scale * self.bump.values(zs)[:, None] * self.poly.values(u)

    def _jac_many(self, zs):
        u = (zs - self.center) / self.half_width
        lam = self.bump.values(zs)
        p = self.poly.values(u)
        dp = self.poly.jacobians(u) / self.half_width
        return self.base.jacobians(zs) + self.scale * (lam[:, None, None] * dp
                                                       + p[:, :, None] * self.bump.gradients(zs)[:, None, :])

    def _one(self, z):
        return self._many(z.reshape(1, -1))[0]

    def _jac_one(self, z):
        return self._jac_many(z.reshape(1, -1))[0]


def _random_poly(rng: np.random.Generator, m: int, n: int, degree: int) -> PolynomialMap:
    exps = [e for e in product(range(degree + 1), repeat=m) if sum(e) <= degree]
    coeffs = rng.standard_normal((n, len(exps)))
    return PolynomialMap(m, n, [list(zip(exps, row)) for row in coeffs], description=f"degree {degree} polynomial")


def sample_perturbations(spec: WeakNeighborhoodSpec, count: int, seed: int = 0, degree: int = 3,
                         scale: float | None = None, per_axis: int | None = None) -> list:
    """``count`` maps of the neighbourhood, each a bump-localized random polynomial added to ``f``.

    The bump is 1 on ``K`` and vanishes outside ``K`` enlarged by half its
    width, so ``g = f`` away from ``K``.  The initial scale puts the C^1 size
    of the perturbation on ``K`` at ``0.9 eps``; it is halved until the draw
    is inside the neighbourhood.  ``scale = 0`` returns copies of ``f``.
    """
    if count < 1:
        raise InvalidOperands("count must be at least 1")
    f, K = spec.f, spec.K
    center, half = K.center, np.maximum(K.half_width, 1e-12)
    bump = BumpFunction(K, Box(K.lo - half, K.hi + half))
    rng = np.random.default_rng(seed)
    pts = sample_grid(K, Field.REAL, per_axis)
    out = []
    for i in range(count):
        poly = _random_poly(rng, f.source_dim, f.target_dim, degree)
        g = PerturbedMap(f, bump, poly, center, half, 1.0, f"{f.description} + sample {i}")
        if scale is None:
            size = c1_distance(f, g, K, points=pts)
            s = 0.9 * spec.epsilon / size if size > 0 else 0.0
        else:
            s = float(scale)
        for _ in range(MAX_HALVINGS + 1):
            cand = g.with_scale(s)
            if nbhd_contains(spec, cand, per_axis):
                out.append(cand)
                break
            s /= 2
        else:
            raise SamplingFailure(f"sample {i} not inside the neighbourhood after {MAX_HALVINGS} halvings")
    return out


# ---------------------------------------------------------------------------
# directed families


class ShiftedMap(DifferentiableMap):
    """``f(z - c d)`` (source shift) or ``f(z) + c d`` (target shift)."""

    def __init__(self, base: DifferentiableMap, kind: str, c: float, direction):
        self.base, self.kind, self.c = base, kind, float(c)
        self.direction = np.asarray(direction, float)
        super().__init__(base.source_dim, base.target_dim, self._one, self._jac_one, Field.REAL,
                         f"{kind} of {base.description} by c = {self.c:.6g}", None, self._many, self._jac_many)

    def _many(self, zs):
        if self.kind == "source_shift":
            return self.base.values(zs - self.c * self.direction)
        return self.base.values(zs) + self.c * self.direction

    def _jac_many(self, zs):
        if self.kind == "source_shift":
            return self.base.jacobians(zs - self.c * self.direction)
        return self.base.jacobians(zs)

    def _one(self, z):
        return self._many(z.reshape(1, -1))[0]

    def _jac_one(self, z):
        return self._jac_many(z.reshape(1, -1))[0]


@dataclass(frozen=True)
class DirectedFamily:
    """A one-parameter family ``c -> g_c`` with ``g_0 = f``."""

    kind: str
    direction: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in ("source_shift", "target_shift"):
            raise InvalidOperands(f"unknown family kind {self.kind!r}")

    def member(self, f: DifferentiableMap, c: float) -> ShiftedMap:
        dim = f.source_dim if self.kind == "source_shift" else f.target_dim
        d = np.zeros(dim)
        d[:len(self.direction)] = self.direction
        return ShiftedMap(f, self.kind, c, d)


def containment_boundary(spec: WeakNeighborhoodSpec, family: DirectedFamily, per_axis: int | None = None,
                         iters: int = 60) -> float:
    """Supremum of ``c > 0`` with ``g_c`` in the neighbourhood, by bisection."""
    inside = lambda c: nbhd_contains(spec, family.member(spec.f, c), per_axis)
    lo, hi = 0.0, spec.epsilon
    for _ in range(60):
        if not inside(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        return math.inf
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


# ---------------------------------------------------------------------------
# probes


@dataclass
class ProbeReport:
    mode: str
    samples: int
    transverse_count: int
    min_margin_seen: Optional[float]
    min_clearance_seen: Optional[float]
    spec: dict
    seed: Optional[int] = None
    counterexample: Optional[dict] = None
    details: dict = dc_field(default_factory=dict)

    @property
    def transverse_fraction(self) -> float:
        return self.transverse_count / self.samples if self.samples else 1.0

    def to_json(self) -> dict:
        return {"mode": self.mode, "seed": self.seed, "spec": self.spec, "samples": self.samples,
                "transverse_count": self.transverse_count, "transverse_fraction": self.transverse_fraction,
                "min_margin_seen": self.min_margin_seen, "min_clearance_seen": self.min_clearance_seen,
                "counterexample": self.counterexample, "details": self.details}


def _fold_min(cur, val):
    if val is None or (isinstance(val, float) and not math.isfinite(val)):
        return cur
    return val if cur is None else min(cur, val)


def search_domain(spec: WeakNeighborhoodSpec, span: float = 10.0) -> Box:
    """``K`` widened by ``span`` widths on each side, clipped to the source chart."""
    width = spec.K.hi - spec.K.lo
    dom = spec.src_chart.domain
    lo = np.maximum(spec.K.lo - span * width, dom.lo)
    hi = np.minimum(spec.K.hi + span * width, dom.hi)
    return Box(lo, hi)


def probe_openness(spec: WeakNeighborhoodSpec, sigma: Stratification, count: int = 200, seed: int = 0,
                   family: DirectedFamily | None = None, per_axis: int | None = None,
                   candidates: int = 8) -> ProbeReport:
    """Sample the neighbourhood and count members still transverse to ``sigma``.

    Random mode checks transversality on ``K``.  Directed mode walks the
    family from the edge of the neighbourhood, ``c_j = 0.99 c_max 2^-j``, and
    checks each member on the search domain around ``K``; the first
    non-transverse member is the counterexample, flagged when its failure
    point lies outside ``K``.
    """
    base = transverse_on_compact(spec.f, spec.K, sigma, per_axis)
    if not base.transverse:
        raise ProbePreconditionError("the base map is not transverse on K")
    if family is None:
        maps = sample_perturbations(spec, count, seed, per_axis=per_axis)
        rep = ProbeReport("random", len(maps), 0, None, None, spec.to_json(), seed)
        for i, g in enumerate(maps):
            r = transverse_on_compact(g, spec.K, sigma, per_axis)
            rep.min_margin_seen = _fold_min(rep.min_margin_seen, r.min_margin)
            rep.min_clearance_seen = _fold_min(rep.min_clearance_seen, r.min_clearance)
            if r.transverse:
                rep.transverse_count += 1
            elif rep.counterexample is None:
                v = (r.failures or r.inconclusive)[0]
                rep.counterexample = {"g": g.description, "sample": i, "failure_point": _pt(v.x),
                                      "verdict": v.to_json(), "escapes_K": False}
        return rep

    c_max = containment_boundary(spec, family, per_axis)
    dom = search_domain(spec)
    rep = ProbeReport("directed", 0, 0, None, None, spec.to_json(), seed,
                      details={"family": family.kind, "c_max": c_max, "search_domain": dom.to_json(),
                               "tried": []})
    start = 0.99 * (c_max if math.isfinite(c_max) else spec.epsilon)
    for j in range(candidates):
        c = start * 0.5 ** j
        g = family.member(spec.f, c)
        r = transverse_on_compact(g, dom, sigma, per_axis)
        rep.samples += 1
        rep.min_margin_seen = _fold_min(rep.min_margin_seen, r.min_margin)
        rep.min_clearance_seen = _fold_min(rep.min_clearance_seen, r.min_clearance)
        rep.details["tried"].append({"c": c, "transverse": r.transverse})
        if r.transverse:
            rep.transverse_count += 1
            continue
        v = (r.failures or r.inconclusive)[0]
        escapes = not spec.K.contains(np.real(v.x))
        rep.counterexample = {
            "g": g.description, "c": c, "failure_point": _pt(v.x), "verdict": v.to_json(),
            "margin": v.margin, "c1_distance": c1_distance(spec.f, g, spec.K, per_axis),
            "in_neighborhood": nbhd_contains(spec, g, per_axis), "escapes_K": escapes,
            "note": ESCAPE_NOTE if escapes else "failure inside K",
        }
        break
    return rep
