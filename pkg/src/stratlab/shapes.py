"""Ready-made strata and maps used by the gallery and the tests."""

from __future__ import annotations

import numpy as np

from .geometry import AffineMap, Box, DifferentiableMap, PolynomialMap
from .strata import Implicit, Inequality, Parametric, Stratification, Stratum, halfspace
from .subspace import Field


def _unit(n: int, i: int) -> tuple:
    idx = [0] * n
    idx[i] = 1
    return tuple(idx)


def circle(name: str = "circle") -> Stratum:
    """Unit circle ``x^2 + y^2 - 1 = 0``."""
    g = PolynomialMap(2, 1, [[((2, 0), 1), ((0, 2), 1), ((0, 0), -1)]], description="x^2+y^2-1")
    return Stratum(name, 2, 1, Implicit(g))


def circle_parametric(name: str = "circle_param") -> Stratum:
    psi = DifferentiableMap(
        1, 2,
        evaluator=lambda t: np.array([np.cos(t[0]), np.sin(t[0])]),
        jacobian=lambda t: np.array([[-np.sin(t[0])], [np.cos(t[0])]]),
        description="(cos t, sin t)",
    )
    return Stratum(name, 2, 1, Parametric(psi, Box([-np.pi], [np.pi])))


def linear_stratum(name: str, normals, region=(), field=Field.REAL) -> Stratum:
    """``{y : N y = 0}`` for the rows of ``normals``, cut by ``region``."""
    nrm = np.atleast_2d(np.asarray(normals))
    fld = Field.parse(field)
    n = nrm.shape[1]
    coords = [[(_unit(n, j), (complex(c) if fld is Field.COMPLEX else float(c)))
               for j, c in enumerate(row) if c != 0] for row in nrm]
    g = PolynomialMap(n, len(coords), coords, fld, description=f"linear constraint of {name}")
    return Stratum(name, n, n - len(coords), Implicit(g, tuple(region)), fld)


def coordinate_subspace(name: str, n: int, free_axes, region=(), field=Field.REAL) -> Stratum:
    """Linear stratum spanned by the coordinate axes ``free_axes``."""
    fld = Field.parse(field)
    fixed = [i for i in range(n) if i not in set(free_axes)]
    if not fixed:
        return Stratum(name, n, n, Implicit(None, tuple(region)), fld)
    return linear_stratum(name, np.eye(n)[fixed], region, fld)


def positive_x_axis(name: str = "S1") -> Stratum:
    """``R+ x 0`` in the plane."""
    return coordinate_subspace(name, 2, [0], region=[halfspace(2, 0)])


def x_axis(name: str = "x_axis") -> Stratum:
    return coordinate_subspace(name, 2, [0])


def y_axis(name: str = "S2") -> Stratum:
    """``0 x R`` in the plane."""
    return coordinate_subspace(name, 2, [1])


def upper_half_plane(name: str = "upper") -> Stratum:
    return Stratum(name, 2, 2, Implicit(None, (halfspace(2, 1),)))


def golubitsky_axes() -> Stratification:
    return Stratification("golubitsky_axes", 2, (positive_x_axis("S1"), y_axis("S2")),
                          union_closed=True, declared_a_regular=False)


def oscillation_curve(name: str = "Y_osc") -> Stratum:
    """``{(t, t^2 sin(1/t)) : t > 0}`` as the zero set of ``y - x^2 sin(1/x)``."""

    def g(p):
        x, y = p
        return np.array([y - x * x * np.sin(1.0 / x)]) if x != 0 else np.array([y])

    def dg(p):
        x, _ = p
        if x == 0:
            return np.array([[0.0, 1.0]])
        return np.array([[-(2 * x * np.sin(1.0 / x) - np.cos(1.0 / x)), 1.0]])

    constraint = DifferentiableMap(2, 1, g, dg, description="y - x^2 sin(1/x)")
    return Stratum(name, 2, 1, Implicit(constraint, (halfspace(2, 0),)))


def oscillation_slope(t: float) -> float:
    return 2 * t * np.sin(1.0 / t) - np.cos(1.0 / t)


def parabola(shift: float = 0.0, lift: float = 0.0, target_shift=(0.0, 0.0)) -> PolynomialMap:
    """``x -> (x - c + a, (x - c)^2 + lift + b)`` with ``c = shift`` and ``(a, b) = target_shift``."""
    c = float(shift)
    a, b = (float(v) for v in target_shift)
    coords = [[((1,), 1.0), ((0,), a - c)],
              [((2,), 1.0), ((1,), -2 * c), ((0,), c * c + lift + b)]]
    desc = "(x, x^2)" if (c, lift, a, b) == (0, 0, 0, 0) else \
        f"(x - {c:g} + {a:g}, (x - {c:g})^2 + {lift + b:g})"
    return PolynomialMap(1, 2, coords, description=desc)


def hirsch_map(c: float = 0.0) -> PolynomialMap:
    """``(x - c, (x - c)^2 + 1)``; ``c = 0`` is the base map."""
    return parabola(shift=c, lift=1.0)


def complex_axes() -> Stratification:
    """``X = 0 x C`` and ``Y = (C minus 0) x 0`` in ``C^2``."""
    x = coordinate_subspace("X", 2, [1], field=Field.COMPLEX)
    nonzero = Inequality(PolynomialMap(4, 1, [[((2, 0, 0, 0), 1.0), ((0, 2, 0, 0), 1.0)]]), True)
    y = coordinate_subspace("Y", 2, [0], region=[nonzero], field=Field.COMPLEX)
    return Stratification("complex_axes", 2, (x, y), Field.COMPLEX, True, False)


def identity_map(n: int) -> AffineMap:
    return AffineMap(np.eye(n), description=f"identity of R^{n}")
