"""Coordinate boxes, charts, differentiable maps and smooth bump functions.

Charts are identity coordinates on boxes: every construction here is
chart-local, so a :class:`Chart` only records a name and a domain.
Complex maps take complex vectors; their boxes live in the realified
coordinates ``(re_1, im_1, re_2, im_2, ...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import exact
from .errors import ChartMismatch, DomainEscape, InvalidOperands
from .subspace import Field

TOL_FD = 1e-5
EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# boxes and charts


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box; ``-inf``/``inf`` bounds mark unbounded sides."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise InvalidOperands("box bounds have different lengths")
        if np.any(lo > hi):
            raise InvalidOperands(f"box bounds out of order: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float) -> "Box":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def half_width(self) -> np.ndarray:
        return (self.hi - self.lo) / 2

    def contains(self, point, atol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        return bool(np.all(p >= self.lo - atol) and np.all(p <= self.hi + atol))

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def expanded(self, factor: float) -> "Box":
        c, h = self.center, self.half_width
        return Box(c - factor * h, c + factor * h)

    def truncated(self, span: float = 10.0) -> "Box":
        """Finite sub-box: unbounded sides are cut ``span`` units from the other bound."""
        lo, hi = self.lo.copy(), self.hi.copy()
        for i in range(self.dim):
            if not np.isfinite(lo[i]) and not np.isfinite(hi[i]):
                lo[i], hi[i] = -span, span
            elif not np.isfinite(hi[i]):
                hi[i] = lo[i] + span
            elif not np.isfinite(lo[i]):
                lo[i] = hi[i] - span
        return Box(lo, hi)

    def axes(self, per_axis: int) -> list[np.ndarray]:
        if not self.is_bounded:
            raise InvalidOperands("cannot grid an unbounded box")
        return [np.linspace(a, b, per_axis) if b > a else np.array([a])
                for a, b in zip(self.lo, self.hi)]

    def grid(self, per_axis: int) -> np.ndarray:
        """All grid points, C order over axes, shape ``(N, dim)``."""
        axes = self.axes(per_axis)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def to_json(self) -> dict:
        def enc(v):
            return [None if not np.isfinite(x) else float(x) for x in v]
        return {"lo": enc(self.lo), "hi": enc(self.hi)}

    @classmethod
    def from_json(cls, data: dict) -> "Box":
        lo = [-np.inf if x is None else float(x) for x in data["lo"]]
        hi = [np.inf if x is None else float(x) for x in data["hi"]]
        return cls(np.array(lo), np.array(hi))

    def __repr__(self) -> str:
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def realify(points: np.ndarray) -> np.ndarray:
    """Complex ``(N, m)`` points to real ``(N, 2m)`` interleaved coordinates."""
    p = np.asarray(points)
    out = np.empty(p.shape[:-1] + (2 * p.shape[-1],), dtype=float)
    out[..., 0::2] = p.real
    out[..., 1::2] = p.imag
    return out


def complexify(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return p[..., 0::2] + 1j * p[..., 1::2]


def default_per_axis(real_dim: int) -> int:
    return max(3, int(round(401 ** (1.0 / max(real_dim, 1)))))


def sample_grid(box: Box, field: Field = Field.REAL, per_axis: int | None = None) -> np.ndarray:
    """Grid points of ``box`` as source points of the given field."""
    per_axis = per_axis or default_per_axis(box.dim)
    pts = box.grid(per_axis)
    return complexify(pts) if field is Field.COMPLEX else pts


@dataclass(frozen=True)
class Chart:
    name: str
    dim: int
    domain: Box
    field: Field = Field.REAL

    def __post_init__(self):
        need = self.dim * (2 if self.field is Field.COMPLEX else 1)
        if self.domain.dim != need:
            raise InvalidOperands(f"chart {self.name!r}: domain has dim {self.domain.dim}, expected {need}")

    @classmethod
    def global_chart(cls, name: str, dim: int, field=Field.REAL) -> "Chart":
        fld = Field.parse(field)
        rd = dim * (2 if fld is Field.COMPLEX else 1)
        return cls(name, dim, Box.cube(rd, -np.inf, np.inf), fld)

    def contains(self, point, atol: float = 0.0) -> bool:
        p = np.asarray(point).reshape(-1)
        if self.field is Field.COMPLEX:
            p = realify(p.reshape(1, -1))[0]
        return self.domain.contains(p, atol)


# ---------------------------------------------------------------------------
# maps


def fd_jacobian(evaluator: Callable, z, h: float | None = None, domain: Box | None = None,
                field: Field = Field.REAL) -> np.ndarray:
    """Central-difference Jacobian of ``evaluator`` at ``z``.

    Steps are taken along the real coordinate directions; for holomorphic
    maps this gives the complex derivative.  Raises :class:`DomainEscape`
    when a stencil point leaves ``domain``.
    """
    z = np.asarray(z, dtype=field.dtype).reshape(-1)
    if h is None:
        h = EPS ** (1.0 / 3.0) * (1.0 + float(np.linalg.norm(z)))
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    cols = []
    for j in range(z.size):
        step = np.zeros_like(z)
        step[j] = h
        plus, minus = z + step, z - step
        if domain is not None:
            for p in (plus, minus):
                pr = realify(p.reshape(1, -1))[0] if field is Field.COMPLEX else p
                if not domain.contains(pr):
                    raise DomainEscape(f"stencil point {p} outside {domain}")
        fp = np.asarray(evaluator(plus)).reshape(-1)
        fm = np.asarray(evaluator(minus)).reshape(-1)
        cols.append((fp - fm) / (2 * h))
    return np.column_stack(cols)


class DifferentiableMap:
    """A map ``K^m -> K^n`` with an evaluator and a Jacobian.

    ``values``/``jacobians`` evaluate a stack of points; subclasses override
    them with vectorized versions where possible.
    """

    def __init__(self, source_dim: int, target_dim: int, evaluator: Callable,
                 jacobian: Callable | None = None, field=Field.REAL,
                 description: str = "", domain: Box | None = None,
                 batch_evaluator: Callable | None = None,
                 batch_jacobian: Callable | None = None):
        self.source_dim = int(source_dim)
        self.target_dim = int(target_dim)
        self.field = Field.parse(field)
        self.description = description
        self.domain = domain
        self._eval = evaluator
        self._jac = jacobian
        self._batch_eval = batch_evaluator
        self._batch_jac = batch_jacobian

    def _point(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=self.field.dtype).reshape(-1)
        if z.size != self.source_dim:
            raise InvalidOperands(f"expected a point of dim {self.source_dim}, got {z.size}")
        return z

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self._eval(self._point(z)), dtype=self.field.dtype).reshape(-1)

    def jacobian(self, z) -> np.ndarray:
        z = self._point(z)
        if self._jac is None:
            return fd_jacobian(self._eval, z, field=self.field)
        return np.asarray(self._jac(z), dtype=self.field.dtype).reshape(self.target_dim, self.source_dim)

    def values(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=self.field.dtype).reshape(-1, self.source_dim)
        if self._batch_eval is not None:
            return np.asarray(self._batch_eval(pts), dtype=self.field.dtype).reshape(len(pts), self.target_dim)
        return np.array([self(p) for p in pts], dtype=self.field.dtype).reshape(len(pts), self.target_dim)

    def jacobians(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=self.field.dtype).reshape(-1, self.source_dim)
        if self._batch_jac is not None:
            return np.asarray(self._batch_jac(pts), dtype=self.field.dtype)
        out = np.empty((len(pts), self.target_dim, self.source_dim), dtype=self.field.dtype)
        for i, p in enumerate(pts):
            out[i] = self.jacobian(p)
        return out

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.source_dim}->{self.target_dim} {self.description!r}>"


class AffineMap(DifferentiableMap):
    """``z -> offset + A z``."""

    def __init__(self, matrix, offset=None, field=None, description: str = "affine map"):
        a = np.asarray(matrix)
        fld = Field.parse(field) if field is not None else Field.of(a)
        a = np.asarray(a, dtype=fld.dtype)
        b = np.zeros(a.shape[0], dtype=fld.dtype) if offset is None else \
            np.asarray(offset, dtype=fld.dtype).reshape(-1)
        self.matrix = a
        self.offset = b
        super().__init__(
            a.shape[1], a.shape[0],
            evaluator=lambda z: b + a @ z,
            jacobian=lambda z: a,
            field=fld, description=description,
            batch_evaluator=lambda zs: b + zs @ a.T,
            batch_jacobian=lambda zs: np.broadcast_to(a, (len(zs),) + a.shape),
        )


def _parse_coeff(c, field: Field):
    if isinstance(c, (list, tuple)):
        if len(c) == 1:
            return c[0]
        if len(c) == 2:
            if field is not Field.COMPLEX:
                raise InvalidOperands("complex coefficient in a real polynomial map")
            return complex(c[0], c[1])
        raise InvalidOperands(f"bad coefficient {c!r}")
    return c


class PolynomialMap(DifferentiableMap):
    """Polynomial map given by, per output, a list of ``(multi_index, coeff)``.

    Coefficients may be ints, floats, :class:`fractions.Fraction` or complex;
    :meth:`evaluate_exact` and :meth:`jacobian_exact` use exact arithmetic.
    """

    def __init__(self, m: int, n: int, coords: Sequence[Sequence], field=Field.REAL,
                 description: str = "", domain: Box | None = None):
        fld = Field.parse(field)
        if len(coords) != n:
            raise InvalidOperands(f"expected {n} coordinate polynomials, got {len(coords)}")
        terms = []
        for out_i, poly in enumerate(coords):
            row = []
            for term in poly:
                idx, coeff = term
                idx = tuple(int(k) for k in idx)
                if len(idx) != m or any(k < 0 for k in idx):
                    raise InvalidOperands(f"bad multi-index {idx} in output {out_i}")
                row.append((idx, coeff))
            terms.append(row)
        self.m, self.n = m, n
        self.terms = terms
        # dense coefficient tables for vectorized evaluation
        self._exps = np.array(sorted({idx for row in terms for idx, _ in row}) or [(0,) * m],
                              dtype=int).reshape(-1, m)
        pos = {tuple(e): i for i, e in enumerate(self._exps)}
        self._coef = np.zeros((len(self._exps), n), dtype=fld.dtype)
        for j, row in enumerate(terms):
            for idx, c in row:
                self._coef[pos[idx], j] += complex(c) if fld is Field.COMPLEX else float(c)
        super().__init__(m, n, self._eval_one, self._jac_one, fld, description or "polynomial map",
                         domain, self._eval_many, self._jac_many)

    def _monomials(self, zs: np.ndarray) -> np.ndarray:
        # (N, T) values of each monomial
        return np.prod(zs[:, None, :] ** self._exps[None, :, :], axis=2)

    def _eval_many(self, zs):
        return self._monomials(zs) @ self._coef

    def _eval_one(self, z):
        return self._eval_many(z.reshape(1, -1))[0]

    def _jac_many(self, zs):
        out = np.zeros((len(zs), self.n, self.m), dtype=self.field.dtype)
        for k in range(self.m):
            e = self._exps.copy()
            mult = e[:, k].astype(float)
            e[:, k] = np.maximum(e[:, k] - 1, 0)
            mon = np.prod(zs[:, None, :] ** e[None, :, :], axis=2) * mult[None, :]
            out[:, :, k] = mon @ self._coef
        return out

    def _jac_one(self, z):
        return self._jac_many(z.reshape(1, -1))[0]

    def evaluate_exact(self, z) -> list:
        zq = [exact.to_exact(x) for x in np.asarray(z, dtype=object).reshape(-1)]
        out = []
        for row in self.terms:
            acc = exact.Fraction(0)
            for idx, c in row:
                t = exact.to_exact(c)
                for x, k in zip(zq, idx):
                    for _ in range(k):
                        t = t * x
                acc = acc + t
            out.append(acc)
        return out

    def jacobian_exact(self, z) -> list[list]:
        zq = [exact.to_exact(x) for x in np.asarray(z, dtype=object).reshape(-1)]
        jac = []
        for row in self.terms:
            jrow = []
            for k in range(self.m):
                acc = exact.Fraction(0)
                for idx, c in row:
                    if idx[k] == 0:
                        continue
                    t = exact.to_exact(c) * idx[k]
                    for j, (x, p) in enumerate(zip(zq, idx)):
                        for _ in range(p - (1 if j == k else 0)):
                            t = t * x
                    acc = acc + t
                jrow.append(acc)
            jac.append(jrow)
        return jac

    def to_json(self) -> dict:
        def enc(c):
            if isinstance(c, complex):
                return [c.real, c.imag]
            if isinstance(c, exact.Fraction):
                return float(c)
            return c
        return {"m": self.m, "n": self.n, "field": self.field.value,
                "coords": [[[list(idx), enc(c)] for idx, c in row] for row in self.terms]}

    @classmethod
    def from_json(cls, data: dict, description: str = "") -> "PolynomialMap":
        fld = Field.parse(data.get("field", "real"))
        coords = [[(tuple(t[0]), _parse_coeff(t[1], fld)) for t in row] for row in data["coords"]]
        return cls(int(data["m"]), int(data["n"]), coords, fld, description)


def restrict(f: DifferentiableMap, domain: Box, description: str | None = None) -> DifferentiableMap:
    """Same map with a recorded domain."""
    return DifferentiableMap(f.source_dim, f.target_dim, f._eval, f._jac if f._jac else None,
                             f.field, description or f.description, domain,
                             f._batch_eval, f._batch_jac)


def local_representative(f: DifferentiableMap, src_chart: Chart, tgt_chart: Chart,
                         sample_points=None, per_axis: int = 17) -> DifferentiableMap:
    """``psi o f o phi^-1`` in the identity-chart model.

    The map is unchanged; the source box and chart names are recorded.
    Sampled images outside the target box raise :class:`ChartMismatch`.
    """
    if src_chart.dim != f.source_dim or tgt_chart.dim != f.target_dim:
        raise InvalidOperands("chart dimensions do not match the map")
    if sample_points is None:
        sample_points = sample_grid(src_chart.domain.truncated(), src_chart.field, per_axis)
    pts = np.asarray(sample_points, dtype=f.field.dtype).reshape(-1, f.source_dim)
    for p in pts:
        if not src_chart.contains(p):
            continue
        y = f(p)
        if not tgt_chart.contains(y):
            raise ChartMismatch(f"f({p.tolist()}) = {y.tolist()} escapes chart {tgt_chart.name!r}")
    rep = restrict(f, src_chart.domain, f"{f.description} in charts ({src_chart.name}, {tgt_chart.name})")
    rep.charts = (src_chart.name, tgt_chart.name)
    return rep


def c1_distance(f: DifferentiableMap, g: DifferentiableMap, K: Box,
                per_axis: int | None = None, points=None) -> float:
    """Sampled C^1 distance on ``K``: max of ``|f - g|_inf`` and ``|Df - Dg|_max``.

    A lower bound for the supremum over the whole box.
    """
    if (f.source_dim, f.target_dim) != (g.source_dim, g.target_dim):
        raise InvalidOperands("maps have different dimensions")
    pts = sample_grid(K, f.field, per_axis) if points is None else np.asarray(points)
    dv = np.abs(f.values(pts) - g.values(pts))
    dj = np.abs(f.jacobians(pts) - g.jacobians(pts))
    return float(max(dv.max(initial=0.0), dj.max(initial=0.0)))


# ---------------------------------------------------------------------------
# bump functions


def _sigma(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _dsigma(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def transition(s):
    """Smooth step on [0, 1]: 1 at s <= 0, 0 at s >= 1."""
    s = np.asarray(s, dtype=float)
    a, b = _sigma(1.0 - s), _sigma(s)
    return a / (a + b)


def transition_derivative(s):
    s = np.asarray(s, dtype=float)
    a, b = _sigma(1.0 - s), _sigma(s)
    da, db = -_dsigma(1.0 - s), _dsigma(s)
    return (da * b - a * db) / (a + b) ** 2


@dataclass(frozen=True, eq=False)
class BumpFunction:
    """Product of smooth per-axis steps: 1 on ``inner``, 0 outside ``outer``."""

    inner: Box
    outer: Box

    def __post_init__(self):
        if not (self.inner.is_bounded and self.outer.is_bounded):
            raise InvalidOperands("bump boxes must be bounded")
        if self.inner.dim != self.outer.dim:
            raise InvalidOperands("bump boxes differ in dimension")
        if np.any(self.outer.lo >= self.inner.lo) or np.any(self.outer.hi <= self.inner.hi):
            raise InvalidOperands("outer box must strictly contain the inner box")

    @property
    def dim(self) -> int:
        return self.inner.dim

    def _axis(self, zs: np.ndarray):
        """Per-axis factor values and derivatives, each of shape (N, dim)."""
        lo, hi = self.inner.lo, self.inner.hi
        glo, ghi = lo - self.outer.lo, self.outer.hi - hi
        val = np.ones_like(zs)
        der = np.zeros_like(zs)
        above = zs > hi
        below = zs < lo
        s_hi = np.where(above, (zs - hi) / ghi, 0.0)
        s_lo = np.where(below, (lo - zs) / glo, 0.0)
        val = np.where(above, transition(s_hi), val)
        val = np.where(below, transition(s_lo), val)
        der = np.where(above, transition_derivative(s_hi) / ghi, der)
        der = np.where(below, -transition_derivative(s_lo) / glo, der)
        # exactly flat outside the support
        out = (zs >= self.outer.hi) | (zs <= self.outer.lo)
        val = np.where(out, 0.0, val)
        der = np.where(out, 0.0, der)
        return val, der

    def values(self, points) -> np.ndarray:
        zs = np.asarray(points, dtype=float).reshape(-1, self.dim)
        val, _ = self._axis(zs)
        return np.prod(val, axis=1)

    def gradients(self, points) -> np.ndarray:
        zs = np.asarray(points, dtype=float).reshape(-1, self.dim)
        val, der = self._axis(zs)
        grads = np.empty_like(zs)
        for j in range(self.dim):
            others = np.prod(np.delete(val, j, axis=1), axis=1) if self.dim > 1 else 1.0
            grads[:, j] = der[:, j] * others
        return grads

    def __call__(self, z) -> float:
        return float(self.values(z)[0])

    def grad(self, z) -> np.ndarray:
        return self.gradients(z)[0]

    def gradient_bound(self) -> float:
        """Upper bound on ``max_z |grad lambda(z)|_inf``."""
        s = np.linspace(0.0, 1.0, 4001)
        peak = float(np.max(np.abs(transition_derivative(s)))) * 1.01
        gaps = np.concatenate([self.inner.lo - self.outer.lo, self.outer.hi - self.inner.hi])
        return peak / float(np.min(gaps))


def bump_eval(bump: BumpFunction, z) -> float:
    return bump(z)


def bump_grad(bump: BumpFunction, z) -> np.ndarray:
    return bump.grad(z)


def jacobian_consistency(f: DifferentiableMap, points, tol: float = TOL_FD) -> float:
    """Worst relative gap between declared and finite-difference Jacobians."""
    worst = 0.0
    for p in np.asarray(points, dtype=f.field.dtype).reshape(-1, f.source_dim):
        j = f.jacobian(p)
        fd = fd_jacobian(f._eval, p, field=f.field)
        gap = float(np.max(np.abs(j - fd), initial=0.0)) / (1.0 + float(np.linalg.norm(j)))
        worst = max(worst, gap)
    return worst
