"""Built-in fixtures with expected outcomes, and a runner that diffs them.

Each fixture bundles a stratification, the maps and curves it exercises and
a list of checks.  A check pairs an expected value with a zero-argument
callable that recomputes it; the runner evaluates every check and records
the observed value next to the expectation.  Fixtures are independent, so
they run in a thread pool, but results are always ordered by name.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import cache
from typing import Any, Callable, Optional

import numpy as np

from . import exact, shapes
from .errors import StratLabError
from .geometry import Box, Chart, DifferentiableMap, PolynomialMap, c1_distance
from .neighborhoods import (
    DirectedFamily,
    WeakNeighborhoodSpec,
    nbhd_contains,
    probe_openness,
)
from .oracle import compare
from .regularity import (
    CERTIFIED,
    NO_LIMIT,
    REFUTED,
    Approach,
    Schedule,
    check_condition_a,
    scan_pairs,
    sequence_from_curve,
)
from .strata import Stratification, Stratum, halfspace, validate
from .subspace import Field, Subspace
from .transversality import Reason, is_transverse_at, is_transverse_to_stratification, transverse_on_compact
from .witness import FaultInstance, build_family, complex_witness

HARMONIC = Schedule([1 / k for k in range(1, 41)])


@dataclass
class Check:
    """``kind`` is one of ``eq``, ``approx`` (within ``tol``), ``le`` or ``ge``."""

    name: str
    expected: Any
    observe: Callable[[], Any]
    kind: str = "eq"
    tol: Optional[float] = None
    provenance: str = ""


@dataclass
class CheckResult:
    name: str
    kind: str
    expected: Any
    observed: Any
    tol: Optional[float]
    ok: bool
    provenance: str = ""
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "expected": _plain(self.expected),
                "observed": _plain(self.observed), "tol": self.tol, "ok": self.ok,
                "provenance": self.provenance, "error": self.error}

    def diff(self) -> str:
        if self.error:
            return f"{self.name}: raised {self.error}"
        rel = {"eq": "==", "approx": f"~= (tol {self.tol:g})" if self.tol is not None else "~=",
               "le": "<=", "ge": ">="}[self.kind]
        return f"{self.name}: observed {_plain(self.observed)!r}, expected {rel} {_plain(self.expected)!r}"


def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _compare(kind: str, observed, expected, tol) -> bool:
    if kind == "eq":
        return _plain(observed) == _plain(expected)
    o, e = float(observed), float(expected)
    if kind == "approx":
        return abs(o - e) <= tol
    if kind == "le":
        return o <= e
    if kind == "ge":
        return o >= e
    raise ValueError(f"unknown check kind {kind!r}")


@dataclass
class OracleCase:
    label: str
    f: DifferentiableMap
    x: Any
    stratum: Stratum


@dataclass
class Fixture:
    name: str
    description: str
    stratification: Optional[Stratification]
    maps: dict
    checks: list
    points: dict = dc_field(default_factory=dict)
    oracle_cases: list = dc_field(default_factory=list)
    notes: str = ""
    substitute: bool = False

    def run(self) -> "FixtureResult":
        results = []
        for c in self.checks:
            try:
                obs = c.observe()
                ok = _compare(c.kind, obs, c.expected, c.tol)
                results.append(CheckResult(c.name, c.kind, c.expected, obs, c.tol, ok, c.provenance))
            except (StratLabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                results.append(CheckResult(c.name, c.kind, c.expected, None, c.tol, False, c.provenance,
                                           f"{type(exc).__name__}: {exc}"))
        return FixtureResult(self.name, self.description, self.notes, self.substitute, results)

    def oracle(self, tol_rank: float | None = None) -> list:
        return [compare(c.f, c.x, c.stratum, c.label, tol_rank) for c in self.oracle_cases]


@dataclass
class FixtureResult:
    name: str
    description: str
    notes: str
    substitute: bool
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def misses(self) -> list:
        return [c for c in self.checks if not c.ok]

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "substitute": self.substitute,
                "notes": self.notes, "passed": self.passed, "checks": [c.to_json() for c in self.checks]}


@dataclass
class GalleryReport:
    fixtures: list

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fixtures)

    def diff(self) -> list:
        return [f"{f.name}.{c.diff()}" for f in self.fixtures for c in f.misses()]

    def to_json(self) -> dict:
        return {"passed": self.passed, "fixtures": [f.to_json() for f in self.fixtures]}

    def rows(self) -> list:
        return [{"fixture": f.name, "check": c.name, "kind": c.kind, "expected": _plain(c.expected),
                 "observed": _plain(c.observed), "tol": c.tol, "ok": c.ok}
                for f in self.fixtures for c in f.checks]


# ---------------------------------------------------------------------------
# fixtures


def _reasons(verdicts) -> list:
    return [v.reason.value for v in verdicts]


def _poly_identity(n: int) -> PolynomialMap:
    coords = [[(tuple(int(i == j) for i in range(n)), 1.0)] for j in range(n)]
    return PolynomialMap(n, n, coords, description=f"identity of R^{n}")


def fixture_hirsch_circle() -> Fixture:
    circle = shapes.circle()
    sigma = Stratification("circle", 2, (circle,), union_closed=True, declared_a_regular=True)
    f = shapes.hirsch_map()
    K = Box([0.5], [2.0])
    M = Chart("M", 1, Box([0.0], [np.inf]))
    sampled_M = Box([1e-3], [50.0])
    cs = (0.01, 0.1, 0.5, 1.0, 2.0)

    @cache
    def on_K():
        return transverse_on_compact(f, K, sigma)

    @cache
    def directed():
        spec = WeakNeighborhoodSpec(f, K, 0.1, src_chart=M)
        return probe_openness(spec, sigma, family=DirectedFamily("source_shift")).counterexample or {}

    def random_fraction():
        eps = min(0.05, on_K().min_clearance / 2)
        spec = WeakNeighborhoodSpec(f, K, eps, src_chart=M)
        return probe_openness(spec, sigma, count=50, seed=0).transverse_fraction

    spec01 = WeakNeighborhoodSpec(f, K, 0.1, src_chart=M)
    checks = [
        Check("f_transverse_on_sampled_M", True, lambda: transverse_on_compact(f, sampled_M, sigma).transverse,
              provenance="f meets the circle only at x = 0, outside M"),
        Check("g_half_verdict_at_half", Reason.RANK_DEFICIENT.value,
              lambda: is_transverse_at(shapes.hirsch_map(0.5), [0.5], circle).reason.value,
              provenance="parabola vertex touches the circle at (0, 1)"),
        Check("g_c_tangent_at_c", [Reason.RANK_DEFICIENT.value] * len(cs),
              lambda: _reasons(is_transverse_at(shapes.hirsch_map(c), [c], circle) for c in cs)),
        Check("g_c_margin_at_c", 0.0, lambda: max(is_transverse_at(shapes.hirsch_map(c), [c], circle).margin
                                                   for c in cs), "le"),
        Check("clearance_on_K_at_least", 0.3, lambda: on_K().min_clearance, "ge"),
        Check("clearance_on_K", math.sqrt(1.8125) - 1, lambda: on_K().min_clearance, "approx", 1e-6,
              "closest point of f(K) is f(0.5), at distance |f(0.5)| - 1"),
        Check("c1_distance_c_0.01", 4 * 0.01 - 0.01 ** 2,
              lambda: c1_distance(f, shapes.hirsch_map(0.01), K), "approx", 1e-9,
              "value gap (-c, c^2 - 2cx) dominates the slope gap 2c; peak 4c - c^2 at x = 2"),
        Check("c1_distance_c_1", 3.0, lambda: c1_distance(f, shapes.hirsch_map(1.0), K), "approx", 1e-9),
        Check("contains_c_0.01", True, lambda: nbhd_contains(spec01, shapes.hirsch_map(0.01))),
        Check("contains_c_1", False, lambda: nbhd_contains(spec01, shapes.hirsch_map(1.0))),
        Check("directed_c_at_most", 0.025, lambda: directed().get("c", math.inf), "le"),
        Check("directed_in_neighborhood", True, lambda: directed().get("in_neighborhood")),
        Check("directed_c1_distance_below_eps", 0.1, lambda: directed().get("c1_distance", math.inf), "le"),
        Check("directed_margin", 1e-9, lambda: directed().get("margin", math.inf), "le"),
        Check("directed_failure_at_c", 0.0,
              lambda: abs(directed()["failure_point"][0] - directed()["c"]), "approx", 1e-9),
        Check("directed_escapes_K", True, lambda: directed().get("escapes_K")),
        Check("random_probe_fraction", 1.0, random_fraction, "approx", 0.0),
    ]
    oracle = [OracleCase(f"g_{c:g} at {c:g}", shapes.hirsch_map(c), [c], circle) for c in (0.5, 1.0, 2.0)]
    oracle += [OracleCase("f at 1", f, [1.0], circle), OracleCase("f at 0", f, [0.0], circle)]
    return Fixture("hirsch_circle", "parabola over the unit circle on M = (0, inf)", sigma,
                   {"f": f, "g_c": "source shift x -> f(x - c)"}, checks, {"K": K.to_json()}, oracle)


def golubitsky_fault(m: int = 1) -> FaultInstance:
    g = shapes.golubitsky_axes()
    seq = sequence_from_curve(g.stratum("S1"), lambda t: np.array([t[0], 0.0]), [0.0, 0.0], HARMONIC)
    return FaultInstance(g.stratum("S2"), g.stratum("S1"), [0.0, 0.0], seq, r=1, m=m)


def fixture_golubitsky_axes() -> Fixture:
    sigma = shapes.golubitsky_axes()
    S1, S2 = sigma.stratum("S1"), sigma.stratum("S2")
    f = shapes.parabola()
    K = Box([-1.0], [1.0])

    @cache
    def fam():
        return build_family(golubitsky_fault())

    @cache
    def directed():
        spec = WeakNeighborhoodSpec(f, K, 0.1)
        return probe_openness(spec, sigma, family=DirectedFamily("target_shift")).counterexample or {}

    def exact_h():
        fa = golubitsky_fault()
        facts = exact.construct_h_facts(exact.matrix(fa.tx.basis.T.tolist()),
                                        exact.matrix(fa.tau.basis.T.tolist()),
                                        [exact.to_exact(v) for v in fa.v], 1, 2)
        e1 = [exact.Fraction(1), exact.Fraction(0)]
        return (facts["dim_H"] == 1 and exact.span_dim(facts["H"] + [e1], 2) == 1
                and facts["H_plus_TX_full"] and facts["H_plus_tau_proper"])

    def fk_error():
        return max(float(np.max(np.abs(mb.f([0.0]) - [1.0 / mb.k, 0.0]))) for mb in fam().members)

    def c1_error():
        return max(abs(mb.c1_K - 1.0 / mb.k) for mb in fam().members)

    def cond_a():
        seq = sequence_from_curve(S1, lambda t: np.array([t[0], 0.0]), [0.0, 0.0], HARMONIC)
        return check_condition_a(S2, [0.0, 0.0], seq)

    checks = [
        Check("validate", True, lambda: validate(sigma).valid),
        Check("r", 1, lambda: sigma.min_dim),
        Check("f_at_0_verdicts", [Reason.MISSES.value, Reason.RANK_FULL.value],
              lambda: _reasons(is_transverse_to_stratification(f, [0.0], sigma))),
        Check("f_at_0_margin_S2", 1.0, lambda: is_transverse_at(f, [0.0], S2).margin, "approx", 1e-12),
        Check("f_certified_on_K", True, lambda: transverse_on_compact(f, K, sigma).certified),
        Check("condition_a_label", REFUTED, lambda: cond_a().label),
        Check("condition_a_residual", 1.0, lambda: cond_a().containment_residual, "approx", 1e-6),
        Check("witness_H", True, lambda: fam().H.isclose(Subspace.coordinate(2, [0]))),
        Check("witness_H_exact", True, exact_h, provenance="rational rerun of the H construction"),
        Check("witness_fk_at_0_error", 0.0, fk_error, "le"),
        Check("witness_margins", 1e-10, lambda: max(mb.margin_Y for mb in fam().members), "le"),
        Check("witness_f_transverse_to_X", True, lambda: fam().verdict_X.transverse),
        Check("witness_c1_error", 1e-9, c1_error, "le", provenance="c1 distance of f^k to f on K is 1/k"),
        Check("witness_threshold", 1, lambda: fam().threshold),
        Check("witness_soundness", True, lambda: all(fam().soundness().values())),
        Check("shifted_tangent_to_S1", [Reason.RANK_DEFICIENT.value] * 3,
              lambda: _reasons(is_transverse_at(shapes.parabola(target_shift=(c, 0.0)), [0.0], S1)
                               for c in (0.01, 0.05, 0.25))),
        Check("directed_c_at_most", 0.1, lambda: directed().get("c", math.inf), "le"),
        Check("directed_failure_point", [0.0], lambda: directed().get("failure_point")),
        Check("directed_stratum", "S1", lambda: directed()["verdict"]["stratum"]),
        Check("directed_inside_K", False, lambda: directed().get("escapes_K")),
    ]
    oracle = [OracleCase("f at 0 vs S1", f, [0.0], S1), OracleCase("f at 0 vs S2", f, [0.0], S2),
              OracleCase("f + (0.25, 0) at 0 vs S1", shapes.parabola(target_shift=(0.25, 0.0)), [0.0], S1),
              OracleCase("f at 0.5 vs S1", f, [0.5], S1)]
    return Fixture("golubitsky_axes", "parabola against the positive x-axis and the y-axis", sigma,
                   {"f": f, "shift": "f + (c, 0)"}, checks, {"w": [0.0], "x": [0.0, 0.0], "K": K.to_json()},
                   oracle)


def nonclosed_union() -> Stratification:
    pos = shapes.positive_x_axis("S1")
    neg = shapes.coordinate_subspace("S_neg", 2, [0], region=[halfspace(2, 0, sign=-1.0)])
    origin = shapes.coordinate_subspace("origin", 2, [])
    return Stratification("nonclosed_union", 2, (pos, neg, origin), union_closed=True, declared_a_regular=True)


def fixture_nonclosed_union() -> Fixture:
    sigma = nonclosed_union()
    pos, neg, origin = sigma.strata
    o = [0.0, 0.0]

    def not_closed(s: Stratum, sign: float) -> bool:
        near = all(s.on_stratum([sign * 2.0 ** -k, 0.0]) for k in range(1, 40))
        return near and not s.on_stratum(o)

    def cond_over_point(Y: Stratum, sign: float) -> str:
        seq = sequence_from_curve(Y, lambda t: np.array([sign * t[0], 0.0]), o, HARMONIC)
        return check_condition_a(origin, o, seq).label

    def dim0_guard() -> str:
        seq = sequence_from_curve(pos, lambda t: np.array([t[0], 0.0]), o, HARMONIC)
        try:
            FaultInstance(origin, pos, o, seq, r=0, m=2)
        except StratLabError as exc:
            return type(exc).__name__
        return "accepted"

    checks = [
        Check("validate", True, lambda: validate(sigma).valid, provenance="disjoint, union closed (sampled)"),
        Check("r", 0, lambda: sigma.min_dim),
        Check("S1_not_closed", True, lambda: not_closed(pos, 1.0)),
        Check("S_neg_not_closed", True, lambda: not_closed(neg, -1.0)),
        Check("union_is_x_axis", True,
              lambda: all(any(s.on_stratum([x, 0.0]) for s in sigma.strata) for x in np.linspace(-2, 2, 41))),
        Check("condition_a_over_point_from_S1", CERTIFIED, lambda: cond_over_point(pos, 1.0)),
        Check("condition_a_over_point_from_S_neg", CERTIFIED, lambda: cond_over_point(neg, -1.0)),
        Check("dim0_fault_rejected", "NotAFault", dim0_guard),
    ]
    ident = _poly_identity(2)
    axis_map = PolynomialMap(1, 2, [[((1,), 1.0)], []], description="(x, 0)")
    oracle = [OracleCase("identity at origin vs origin", ident, o, origin),
              OracleCase("identity at origin vs S1", ident, o, pos),
              OracleCase("(x, 0) at 1 vs S1", axis_map, [1.0], pos),
              OracleCase("(x, 0) at 1 vs S_neg", axis_map, [1.0], neg),
              OracleCase("(x, 0) at 0 vs origin", axis_map, [0.0], origin)]
    return Fixture("nonclosed_union", "substitute: two non-closed rays and the origin, union the x-axis", sigma,
                   {"identity": ident, "axis": axis_map}, checks, {"x": o}, oracle,
                   notes="labelled substitute; the source figure gives no formulas, so this configuration "
                         "is chosen to have non-closed strata with a closed union",
                   substitute=True)


def _osc(t):
    return np.array([t[0], t[0] ** 2 * np.sin(1.0 / t[0])])


def fixture_oscillation() -> Fixture:
    X, Y = shapes.x_axis(), shapes.oscillation_curve()
    sigma = Stratification("oscillation", 2, (X, Y), union_closed=False, declared_a_regular=False)
    o = [0.0, 0.0]
    ts_fail = [1 / (2 * np.pi * k) for k in range(1, 41)]
    ts_hold = [1 / ((2 * k + 0.5) * np.pi) for k in range(1, 41)]
    ts_mixed = [1 / k for k in range(1, 41)]

    @cache
    def report(which: str):
        ts = {"fail": ts_fail, "hold": ts_hold, "mixed": ts_mixed}[which]
        return check_condition_a(X, o, sequence_from_curve(Y, _osc, o, Schedule(ts)))

    checks = [
        Check("slope_error_within_2t", True,
              lambda: all(abs(shapes.oscillation_slope(t) + 1) <= 2 * t + 1e-12 for t in ts_fail),
              provenance="slope is 2t sin(1/t) - cos(1/t)"),
        Check("tau_hat_fail_phase", True,
              lambda: report("fail").tau_limit.isclose(Subspace.span([[1.0], [-1.0]]), 1e-6)),
        Check("label_fail_phase", REFUTED, lambda: report("fail").label),
        Check("residual_fail_phase", 1 / math.sqrt(2), lambda: report("fail").containment_residual,
              "approx", 1e-3),
        Check("label_quarter_phase", CERTIFIED, lambda: report("hold").label),
        Check("tau_hat_quarter_phase", True,
              lambda: report("hold").tau_limit.isclose(Subspace.coordinate(2, [0]), 1e-6)),
        Check("label_mixed_phases", NO_LIMIT, lambda: report("mixed").label),
    ]
    return Fixture("oscillation", "x-axis against the curve (t, t^2 sin(1/t)), t > 0", sigma,
                   {"curve": "(t, t^2 sin(1/t))"}, checks, {"x": o}, [],
                   notes="a pair for condition (a) only; the curve meets the x-axis at t = 1/(pi k), "
                         "so the two sets are not a stratification")


def complex_fault() -> FaultInstance:
    sigma = shapes.complex_axes()
    X, Y = sigma.strata
    seq = sequence_from_curve(Y, lambda t: np.array([t[0], 0.0], dtype=complex), [0.0, 0.0], HARMONIC)
    return FaultInstance(X, Y, [0.0, 0.0], seq, r=1, field=Field.COMPLEX,
                         source_tangent=Subspace.full(1, Field.COMPLEX))


def fixture_complex_axes() -> Fixture:
    sigma = shapes.complex_axes()
    X, Y = sigma.strata

    @cache
    def fam():
        return complex_witness(complex_fault())

    def gk_error():
        return max(float(np.max(np.abs(mb.f(np.zeros(1, complex)) - [1.0 / mb.k, 0.0]))) for mb in fam().members)

    line = PolynomialMap(1, 2, [[((1,), 1 + 0j)], []], Field.COMPLEX, description="z -> (z, 0)")
    checks = [
        Check("witness_H", True, lambda: fam().H.isclose(Subspace.coordinate(2, [0], Field.COMPLEX))),
        Check("witness_gk_at_0_error", 0.0, gk_error, "le"),
        Check("witness_margins", 1e-10, lambda: max(mb.margin_Y for mb in fam().members), "le"),
        Check("witness_not_transverse_to_Y", True,
              lambda: all(mb.verdict_Y.reason is Reason.RANK_DEFICIENT for mb in fam().members)),
        Check("witness_f_transverse_to_X", Reason.RANK_FULL.value, lambda: fam().verdict_X.reason.value),
        Check("witness_soundness", True, lambda: all(fam().soundness().values())),
        Check("line_at_0_verdicts", [Reason.RANK_FULL.value, Reason.MISSES.value],
              lambda: _reasons(is_transverse_to_stratification(line, [0.0], sigma))),
    ]
    oracle = [OracleCase("(z, 0) at 0 vs X", line, [0.0], X), OracleCase("(z, 0) at 0 vs Y", line, [0.0], Y),
              OracleCase("(z, 0) at 1/2 vs Y", line, [0.5], Y),
              OracleCase("(z, 0) at i/4 vs Y", line, [0.25j], Y)]
    return Fixture("complex_axes", "0 x C against (C minus 0) x 0 in C^2", sigma, {"line": line}, checks,
                   {"x": [0.0, 0.0]}, oracle)


def fixture_half_plane() -> Fixture:
    upper, axis = shapes.upper_half_plane(), shapes.x_axis()
    sigma = Stratification("half_plane", 2, (upper, axis), union_closed=True, declared_a_regular=True)
    ident = _poly_identity(2)
    aps = [Approach("x_axis", "upper", (x0, 0.0), points=[[x0 + 2.0 ** -k, 2.0 ** -k] for k in range(1, 30)])
           for x0 in (-1.0, 0.0, 0.5)]

    def worst_residual():
        return max(r.containment_residual for r in scan_pairs(sigma, aps).pairs[("x_axis", "upper")])

    checks = [
        Check("validate", True, lambda: validate(sigma).valid),
        Check("scan_certified", True, lambda: scan_pairs(sigma, aps).certified),
        Check("top_dimensional_residual", 1e-10, worst_residual, "le"),
        Check("identity_transverse_on_box", True,
              lambda: transverse_on_compact(ident, Box.cube(2, -1.0, 1.0), sigma).certified),
    ]
    oracle = [OracleCase("identity at origin vs upper", ident, [0.0, 0.0], upper),
              OracleCase("identity at origin vs x_axis", ident, [0.0, 0.0], axis),
              OracleCase("identity at (0.5, 0.5) vs upper", ident, [0.5, 0.5], upper)]
    return Fixture("half_plane", "regression: open upper half plane over the x-axis", sigma,
                   {"identity": ident}, checks, {}, oracle)


FIXTURES: dict = {
    "complex_axes": fixture_complex_axes,
    "golubitsky_axes": fixture_golubitsky_axes,
    "half_plane": fixture_half_plane,
    "hirsch_circle": fixture_hirsch_circle,
    "nonclosed_union": fixture_nonclosed_union,
    "oscillation": fixture_oscillation,
}


def fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURES))}") from None


def run_gallery(names=None, workers: int | None = None) -> GalleryReport:
    names = sorted(names or FIXTURES)
    for n in names:
        if n not in FIXTURES:
            raise KeyError(f"unknown fixture {n!r}; known: {', '.join(sorted(FIXTURES))}")
    with ThreadPoolExecutor(max_workers=workers or len(names)) as pool:
        results = list(pool.map(lambda n: fixture(n).run(), names))
    return GalleryReport(results)


def run_oracle(names=None, tol_rank: float | None = None) -> list:
    """Every oracle case of the named fixtures, as ``(fixture, comparison)`` pairs."""
    out = []
    for n in sorted(names or FIXTURES):
        out += [(n, c) for c in fixture(n).oracle(tol_rank)]
    return out
