"""Exact linear algebra over Q and Q(i) for cross-checking the float path.

Matrices are lists of rows.  Entries are :class:`fractions.Fraction` or
:class:`GaussianRational`; floats convert exactly (binary expansion), so a
float input is treated as the rational number it actually stores.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np


class GaussianRational:
    """Complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _lift(other):
        if isinstance(other, GaussianRational):
            return other
        if isinstance(other, (int, Fraction, Rational)):
            return GaussianRational(other, 0)
        if isinstance(other, float):
            return GaussianRational(Fraction(other), 0)
        if isinstance(other, complex):
            return GaussianRational(Fraction(other.real), Fraction(other.imag))
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(num.re / d, num.im / d)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __eq__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def to_exact(x):
    """Exact rational image of a number (floats are taken at face value)."""
    if isinstance(x, (Fraction, GaussianRational)):
        return x
    if isinstance(x, (bool, int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        if z.imag == 0:
            return Fraction(z.real)
        return GaussianRational(Fraction(z.real), Fraction(z.imag))
    return Fraction(float(x))


def conj(x):
    return x.conjugate() if isinstance(x, GaussianRational) else x


def matrix(rows) -> list[list]:
    """Exact copy of a 2-D array-like."""
    a = np.asarray(rows, dtype=object) if not isinstance(rows, list) else rows
    return [[to_exact(e) for e in row] for row in a]


def columns_to_matrix(cols, n: int) -> list[list]:
    """Assemble column vectors into an ``n x len(cols)`` matrix."""
    return [[cols[j][i] for j in range(len(cols))] for i in range(n)]


def matrix_columns(m: list[list]) -> list[list]:
    if not m:
        return []
    return [[row[j] for row in m] for j in range(len(m[0]))]


def hstack(*mats):
    n = len(mats[0])
    return [sum((list(m[i]) for m in mats), []) for i in range(n)]


def rref(m: list[list]):
    """Reduced row echelon form; returns (rows, pivot_columns)."""
    a = [list(r) for r in m]
    if not a:
        return a, []
    rows, cols = len(a), len(a[0])
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [e * inv for e in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, pivots


def rank(m: list[list]) -> int:
    if not m or not m[0]:
        return 0
    return len(rref(m)[1])


def nullspace(m: list[list], ncols: int | None = None) -> list[list]:
    """Basis (list of column vectors) of ``{x : m x = 0}``."""
    if not m:
        return [[Fraction(int(i == j)) for i in range(ncols or 0)] for j in range(ncols or 0)]
    cols = len(m[0])
    red, piv = rref(m)
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * cols
        v[fcol] = Fraction(1)
        for i, pc in enumerate(piv):
            v[pc] = -red[i][fcol]
        basis.append(v)
    return basis


def independent_columns(cols: list[list], n: int) -> list[list]:
    """Greedy maximal independent subset, preserving order."""
    kept: list[list] = []
    for c in cols:
        trial = kept + [c]
        if rank(columns_to_matrix(trial, n)) == len(trial):
            kept = trial
    return kept


def span_dim(cols: list[list], n: int) -> int:
    return rank(columns_to_matrix(cols, n)) if cols else 0


def inner(u, v):
    return sum((conj(a) * b for a, b in zip(u, v)), Fraction(0))


def intersect(a_cols: list[list], b_cols: list[list], n: int) -> list[list]:
    """Basis of span(a) ∩ span(b)."""
    if not a_cols or not b_cols:
        return []
    a_cols = independent_columns(a_cols, n)
    b_cols = independent_columns(b_cols, n)
    m = hstack(columns_to_matrix(a_cols, n),
               columns_to_matrix([[-e for e in c] for c in b_cols], n))
    out = []
    for z in nullspace(m):
        x = z[:len(a_cols)]
        out.append([sum((x[j] * a_cols[j][i] for j in range(len(a_cols))), Fraction(0))
                    for i in range(n)])
    return independent_columns(out, n)


def orthogonal_complement_within(inner_cols: list[list], outer_cols: list[list],
                                 n: int) -> list[list]:
    """Basis of ``{w in span(outer) : <u, w> = 0 for all u in inner}``."""
    outer_cols = independent_columns(outer_cols, n)
    if not outer_cols:
        return []
    if not inner_cols:
        return outer_cols
    # coefficients c with inner^H (O c) = 0
    gram = [[inner(u, o) for o in outer_cols] for u in inner_cols]
    out = []
    for c in nullspace(gram):
        out.append([sum((c[j] * outer_cols[j][i] for j in range(len(outer_cols))), Fraction(0))
                    for i in range(n)])
    return independent_columns(out, n)


def contains(outer_cols: list[list], inner_cols: list[list], n: int) -> bool:
    return span_dim(outer_cols + inner_cols, n) == span_dim(outer_cols, n)


def is_transverse(df_rows: list[list], tangent_cols: list[list], n: int) -> bool:
    """Exact test ``rank [Df | T] == n``."""
    m = df_rows
    if tangent_cols:
        m = hstack(df_rows, columns_to_matrix(tangent_cols, n)) if df_rows and df_rows[0] else \
            columns_to_matrix(tangent_cols, n)
    return rank(m) == n


def to_float_array(m: list[list]) -> np.ndarray:
    if any(isinstance(e, GaussianRational) for row in m for e in row):
        return np.array([[complex(e) if isinstance(e, GaussianRational) else float(e)
                          for e in row] for row in m], dtype=complex)
    return np.array([[float(e) for e in row] for row in m], dtype=float)


def construct_h_facts(tx_cols: list[list], tau_cols: list[list], v: list,
                      r: int, n: int) -> dict:
    """Exact rerun of the H construction for a condition-(a) fault.

    Builds ``T1 = TX ∩ tau``, ``E = span{v}``, ``W1`` (complement of
    ``E + T1`` in ``TX``), ``T2`` (complement of ``T1`` in ``tau``), ``W2``
    (complement of ``TX + tau``), then ``H = T2 + W2`` greedily extended by
    ``T1`` then ``W1`` until ``dim H = n - r``.  Returns dimensions and the
    two rank facts ``H + TX = K^n`` and ``H + tau != K^n``.
    """
    tx = independent_columns(tx_cols, n)
    tau = independent_columns(tau_cols, n)
    t1 = intersect(tx, tau, n)
    e = [list(v)]
    w1 = orthogonal_complement_within(independent_columns(e + t1, n), tx, n)
    t2 = orthogonal_complement_within(t1, tau, n)
    ident = [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    w2 = orthogonal_complement_within(independent_columns(tx + tau, n), ident, n)
    target = n - r
    h = independent_columns(t2 + w2, n)
    for c in t1 + w1:
        if len(h) >= target:
            break
        trial = h + [c]
        if span_dim(trial, n) == len(trial):
            h = trial
    return {
        "dims": {"E": 1, "W1": len(w1), "W2": len(w2), "T1": len(t1), "T2": len(t2)},
        "dim_H": len(h),
        "H_plus_TX_full": span_dim(h + tx, n) == n,
        "H_plus_tau_proper": span_dim(h + tau, n) < n,
        "H": h,
    }
