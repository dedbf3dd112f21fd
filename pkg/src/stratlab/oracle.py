"""Exact rational reruns of transversality verdicts.

Only inputs that are exactly representable qualify: polynomial maps,
implicit strata cut out by polynomial constraints and polynomial
inequalities, and points whose coordinates are binary floats (taken at face
value).  Everything is decided with equality tests over Q or Q(i), so there
are no tolerances and no inconclusive band.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import exact
from .errors import InvalidOperands
from .geometry import DifferentiableMap, PolynomialMap
from .strata import Implicit, Stratification, Stratum
from .subspace import Field
from .transversality import Reason, TransversalityVerdict, is_transverse_at


class OracleUnavailable(InvalidOperands):
    """The inputs are not exactly representable."""


def _real_parts(values: list) -> list:
    out = []
    for v in values:
        if isinstance(v, exact.GaussianRational):
            out += [v.re, v.im]
        else:
            out += [Fraction(v), Fraction(0)]
    return out


def exact_on_stratum(s: Stratum, y: list) -> bool:
    rep = s.representation
    if not isinstance(rep, Implicit):
        raise OracleUnavailable(f"stratum {s.name!r} is parametric")
    g = rep.constraint
    if g is not None:
        if not isinstance(g, PolynomialMap):
            raise OracleUnavailable(f"stratum {s.name!r} has a non-polynomial constraint")
        if any(v != 0 for v in g.evaluate_exact(y)):
            return False
    coords = _real_parts(y) if s.field is Field.COMPLEX else list(y)
    for q in rep.region:
        val = q.poly.evaluate_exact(coords)[0]
        if (val <= 0) if q.strict else (val < 0):
            return False
    return True


def exact_tangent(s: Stratum, y: list) -> list:
    """Column basis of the tangent space at ``y`` (which must lie on ``s``)."""
    g = s.representation.constraint
    n = s.ambient_dim
    if g is None:
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    dg = g.jacobian_exact(y)
    if exact.rank(dg) != s.codim:
        raise OracleUnavailable(f"constraint of {s.name!r} is singular at {y}")
    return exact.nullspace(dg, n)


@dataclass(frozen=True)
class ExactVerdict:
    stratum: str
    transverse: bool
    reason: Reason

    def to_json(self) -> dict:
        return {"stratum": self.stratum, "transverse": self.transverse, "verdict": self.reason.value}


def exact_transverse_at(f: DifferentiableMap, x, s: Stratum) -> ExactVerdict:
    if not isinstance(f, PolynomialMap):
        raise OracleUnavailable("only polynomial maps have an exact rerun")
    if f.target_dim != s.ambient_dim or f.field is not s.field:
        raise InvalidOperands(f"map target does not match the ambient space of {s.name!r}")
    xs = [exact.to_exact(v) for v in np.asarray(x, dtype=f.field.dtype).reshape(-1)]
    y = f.evaluate_exact(xs)
    if not exact_on_stratum(s, y):
        return ExactVerdict(s.name, True, Reason.MISSES)
    tangent = exact_tangent(s, y)
    full = exact.is_transverse(f.jacobian_exact(xs), tangent, s.ambient_dim)
    return ExactVerdict(s.name, full, Reason.RANK_FULL if full else Reason.RANK_DEFICIENT)


@dataclass(frozen=True)
class OracleComparison:
    label: str
    floating: TransversalityVerdict
    exact: Optional[ExactVerdict]
    note: str = ""

    @property
    def conclusive(self) -> bool:
        return self.floating.conclusive and self.exact is not None

    @property
    def agree(self) -> bool:
        """Vacuously true when either side has no verdict."""
        if not self.conclusive:
            return True
        return self.floating.transverse == self.exact.transverse

    def to_json(self) -> dict:
        return {"label": self.label, "floating": self.floating.to_json(),
                "exact": None if self.exact is None else self.exact.to_json(),
                "conclusive": self.conclusive, "agree": self.agree, "note": self.note}


def compare(f: DifferentiableMap, x, s: Stratum, label: str = "", tol_rank: float | None = None) -> OracleComparison:
    kw = {} if tol_rank is None else {"tol_rank": tol_rank}
    fl = is_transverse_at(f, x, s, **kw)
    try:
        ex = exact_transverse_at(f, x, s)
        note = ""
    except OracleUnavailable as exc:
        ex, note = None, str(exc)
    return OracleComparison(label or s.name, fl, ex, note)


def compare_stratification(f: DifferentiableMap, x, sigma: Stratification,
                           tol_rank: float | None = None) -> list:
    return [compare(f, x, s, s.name, tol_rank) for s in sigma.strata]
