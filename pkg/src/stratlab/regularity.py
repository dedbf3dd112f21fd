"""Whitney condition (a) along supplied tangent-plane sequences.

Condition (a) for a pair ``(X, Y)`` at ``x`` asks that every limit of
tangent planes ``T_{y_k} Y`` along sequences ``y_k -> x`` contain
``T_x X``.  Nothing here quantifies over all sequences: each report covers
the sequences it was given and is labelled accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidOperands, NotOnStratum
from .strata import TOL_ON, Stratification, Stratum
from .subspace import Subspace, containment_residual, subspace_distance

TOL_A = 1e-6
TOL_CONV = 1e-6
MIN_CHART_SIGMA = 0.1

CERTIFIED = "certified on the given approaches"
REFUTED = "refuted"
NO_LIMIT = "no-limit"


def _pt(v) -> list:
    v = np.asarray(v).reshape(-1)
    if np.iscomplexobj(v):
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in v]


@dataclass(frozen=True)
class Schedule:
    """Parameter values ``t_1 > t_2 > ... > 0`` at which a curve is sampled."""

    ts: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.ts)
        if not ts or any(t <= 0 for t in ts):
            raise InvalidOperands("schedule values must be positive")
        object.__setattr__(self, "ts", ts)

    @classmethod
    def geometric(cls, t0: float = 0.5, rho: float = 0.7, n: int = 40) -> "Schedule":
        if not 0 < rho < 1:
            raise InvalidOperands("rho must lie in (0, 1)")
        return cls(tuple(t0 * rho ** k for k in range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.ts)

    def to_json(self) -> dict:
        return {"ts": list(self.ts)}

    @classmethod
    def from_json(cls, data: dict) -> "Schedule":
        if "ts" in data:
            return cls(tuple(data["ts"]))
        return cls.geometric(float(data.get("t0", 0.5)), float(data.get("rho", 0.7)), int(data.get("N", 40)))


@dataclass(frozen=True, eq=False)
class TangentSequence:
    stratum: Stratum
    points: np.ndarray
    tangents: tuple
    limit_point: np.ndarray
    params: Optional[tuple] = None
    curve: Optional[Callable] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=self.stratum.field.dtype).reshape(-1, self.stratum.ambient_dim)
        x = np.asarray(self.limit_point, dtype=self.stratum.field.dtype).reshape(-1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "limit_point", x)
        object.__setattr__(self, "tangents", tuple(self.tangents))
        if len(self.tangents) != len(pts):
            raise InvalidOperands("one tangent per point is required")
        if len(pts) >= 2 and not np.linalg.norm(pts[-1] - x) < np.linalg.norm(pts[0] - x):
            raise InvalidOperands("sequence does not approach the limit point")

    @classmethod
    def from_points(cls, Y: Stratum, points, x, params=None, curve=None, tol: float = TOL_ON) -> "TangentSequence":
        pts = np.asarray(points, dtype=Y.field.dtype).reshape(-1, Y.ambient_dim)
        for k, y in enumerate(pts):
            if not Y.on_stratum(y, tol):
                raise NotOnStratum(f"y_{k + 1} = {_pt(y)} is not on {Y.name!r}")
        tangents = tuple(Y.tangent_at(y) for y in pts)
        return cls(Y, pts, tangents, x, None if params is None else tuple(params), curve)

    def __len__(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        return {"stratum": self.stratum.name, "limit_point": _pt(self.limit_point),
                "points": [_pt(y) for y in self.points],
                "params": None if self.params is None else list(self.params),
                "tangents": [t.to_json() for t in self.tangents]}


def sequence_from_curve(Y: Stratum, curve: Callable, x, schedule: Schedule | None = None,
                        tol: float = TOL_ON) -> TangentSequence:
    """Sample ``y_k = curve(t_k)`` and take the tangent planes of ``Y`` there."""
    schedule = schedule or Schedule.geometric()
    pts = [np.asarray(curve(np.array([t])), dtype=Y.field.dtype).reshape(-1) for t in schedule.ts]
    return TangentSequence.from_points(Y, pts, x, schedule.ts, curve, tol)


@dataclass(frozen=True)
class LimitEstimate:
    converged: bool
    tau: Optional[Subspace]
    method: str
    tail_spread: float
    fit_residual: Optional[float] = None
    chart_min_sigma: Optional[float] = None


def _graph_coordinates(tangents: Sequence[Subspace], ref: Subspace):
    """Each tangent as the graph of a linear map ``ref -> ref^perp``."""
    b, bp = ref.basis, ref.complement().basis
    coords, sig = [], math.inf
    for t in tangents:
        m = b.conj().T @ t.basis
        sig = min(sig, float(np.linalg.svd(m, compute_uv=False).min(initial=math.inf)))
        if sig < MIN_CHART_SIGMA:
            return None, sig
        coords.append((bp.conj().T @ t.basis) @ np.linalg.inv(m))
    return np.array(coords), sig


def estimate_tau_limit(seq: TangentSequence, tol_conv: float = TOL_CONV) -> LimitEstimate:
    """Decide whether the tangent planes converge and estimate the limit.

    The last quarter of the sequence is examined.  If its planes are
    already within ``tol_conv`` of each other the final plane is the
    limit.  Otherwise the planes are written as graphs over the final one
    and each coordinate is fitted by a quadratic in the approach parameter
    (the curve parameter, or the distance to the limit point); a fit within
    ``tol_conv`` counts as convergence and its value at zero is the limit.
    """
    n = len(seq)
    if n < 5:
        raise InvalidOperands("at least 5 tangent planes are needed")
    tail = list(range(n - max(4, n // 4), n))
    taus = [seq.tangents[i] for i in tail]
    spread = max((subspace_distance(a, b) for i, a in enumerate(taus) for b in taus[i + 1:]), default=0.0)
    if spread <= tol_conv:
        return LimitEstimate(True, taus[-1], "cauchy", spread)
    last = taus[-1]
    if last.dim in (0, last.ambient_dim):
        # Grassmannians of points: every plane is the same
        return LimitEstimate(True, last, "cauchy", spread)
    coords, sig = _graph_coordinates(taus, last)
    if coords is None:
        return LimitEstimate(False, None, "graph-fit", spread, None, sig)
    if seq.params is not None:
        s = np.array([seq.params[i] for i in tail])
    else:
        s = np.linalg.norm(seq.points[tail] - seq.limit_point, axis=1)
    flat = coords.reshape(len(tail), -1)
    if np.iscomplexobj(flat):
        flat = np.hstack([flat.real, flat.imag])
    resid, at_zero = 0.0, []
    for j in range(flat.shape[1]):
        p = np.polynomial.Polynomial.fit(s, flat[:, j], 2)
        resid = max(resid, float(np.max(np.abs(p(s) - flat[:, j]))))
        at_zero.append(p(0.0))
    if resid > tol_conv:
        return LimitEstimate(False, None, "graph-fit", spread, resid, sig)
    a0 = np.array(at_zero)
    if np.iscomplexobj(coords):
        half = len(a0) // 2
        a0 = a0[:half] + 1j * a0[half:]
    a0 = a0.reshape(coords.shape[1:])
    bp = last.complement().basis
    tau = Subspace.span(last.basis + bp @ a0, field=last.field)
    return LimitEstimate(True, tau, "graph-fit", spread, resid, sig)


@dataclass(frozen=True)
class ConditionAReport:
    X: str
    Y: str
    x: np.ndarray
    converged: bool
    tau_limit: Optional[Subspace]
    containment_residual: float
    holds: bool
    tangent_X: Subspace
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.holds:
            return CERTIFIED
        return REFUTED if self.converged else NO_LIMIT

    def to_json(self) -> dict:
        res = self.containment_residual
        return {"X": self.X, "Y": self.Y, "x": _pt(self.x), "converged": self.converged,
                "holds": self.holds, "label": self.label,
                "containment_residual": None if math.isnan(res) else res,
                "tau_limit": None if self.tau_limit is None else self.tau_limit.to_json(),
                "tangent_X": self.tangent_X.to_json(), "diagnostics": self.diagnostics}


def check_condition_a(X: Stratum, x, seq: TangentSequence, tol_a: float = TOL_A,
                      tol_conv: float = TOL_CONV, tol_on: float = TOL_ON) -> ConditionAReport:
    x = np.asarray(x, dtype=X.field.dtype).reshape(-1)
    if not X.on_stratum(x, tol_on):
        raise NotOnStratum(f"{_pt(x)} is not on {X.name!r}")
    if X.ambient_dim != seq.stratum.ambient_dim or X.field is not seq.stratum.field:
        raise InvalidOperands("X and Y live in different spaces")
    if np.linalg.norm(x - seq.limit_point) > tol_on * (1 + np.linalg.norm(x)):
        raise InvalidOperands("x is not the limit point of the sequence")
    tx = X.tangent_at(x)
    est = estimate_tau_limit(seq, tol_conv)
    successive = [subspace_distance(a, b) for a, b in zip(seq.tangents, seq.tangents[1:])]
    per_k = [containment_residual(t, tx) for t in seq.tangents]
    res = containment_residual(est.tau, tx) if est.converged else math.nan
    diag = {"method": est.method, "tail_spread": est.tail_spread, "fit_residual": est.fit_residual,
            "chart_min_sigma": est.chart_min_sigma, "successive_distances": successive,
            "per_k_residuals": per_k, "tol_a": tol_a, "tol_conv": tol_conv}
    holds = bool(est.converged and res <= tol_a)
    return ConditionAReport(X.name, seq.stratum.name, x, est.converged, est.tau, res, holds, tx, diag)


@dataclass(frozen=True)
class Approach:
    """A frontier point ``x`` of ``X`` approached inside ``Y`` along a curve or a point list."""

    X: str
    Y: str
    x: tuple
    curve: Optional[Callable] = None
    schedule: Optional[Schedule] = None
    points: Optional[np.ndarray] = None


@dataclass
class PairScan:
    name: str
    pairs: dict = dc_field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return all(r.holds for reps in self.pairs.values() for r in reps)

    def status(self, pair) -> str:
        reps = self.pairs[pair]
        if all(r.holds for r in reps):
            return CERTIFIED
        return REFUTED if any(r.converged and not r.holds for r in reps) else NO_LIMIT

    def failing(self) -> list:
        return [r for reps in self.pairs.values() for r in reps if not r.holds]

    def to_json(self) -> dict:
        return {"stratification": self.name, "certified": self.certified,
                "pairs": [{"X": x, "Y": y, "status": self.status((x, y)),
                           "reports": [r.to_json() for r in reps]}
                          for (x, y), reps in self.pairs.items()]}


def scan_pairs(sigma: Stratification, approaches: Sequence[Approach], tol_a: float = TOL_A,
               tol_conv: float = TOL_CONV) -> PairScan:
    """Condition (a) for every supplied approach, grouped by stratum pair in input order."""
    scan = PairScan(sigma.name)
    for ap in approaches:
        X, Y = sigma.stratum(ap.X), sigma.stratum(ap.Y)
        if ap.points is not None:
            seq = TangentSequence.from_points(Y, ap.points, ap.x)
        else:
            seq = sequence_from_curve(Y, ap.curve, ap.x, ap.schedule)
        scan.pairs.setdefault((ap.X, ap.Y), []).append(check_condition_a(X, ap.x, seq, tol_a, tol_conv))
    return scan
