"""Reading CLI input documents.

Every loader raises :class:`InputError` with a location prefix (file,
line and column for syntax errors, file and key path for missing or
ill-typed fields).  Nested references such as ``"map": "parabola.json"``
are resolved relative to the document that contains them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import StratLabError
from .geometry import Box, Chart, PolynomialMap
from .regularity import Schedule, TangentSequence, sequence_from_curve
from .strata import Stratification, Stratum
from .subspace import Field, Subspace


class InputError(StratLabError):
    """Malformed or inconsistent input document."""


@dataclass(frozen=True)
class Doc:
    """A parsed JSON value together with where it came from."""

    value: Any
    source: str
    base: Path
    path: str = "$"

    def where(self) -> str:
        return f"{self.source}: {self.path}"

    def fail(self, msg: str):
        raise InputError(f"{self.where()}: {msg}")

    def has(self, key: str) -> bool:
        return isinstance(self.value, dict) and key in self.value

    def __getitem__(self, key) -> "Doc":
        if isinstance(key, int):
            if not isinstance(self.value, list) or not -len(self.value) <= key < len(self.value):
                self.fail(f"no element {key}")
            return Doc(self.value[key], self.source, self.base, f"{self.path}[{key}]")
        if not isinstance(self.value, dict):
            self.fail(f"expected an object holding {key!r}")
        if key not in self.value:
            self.fail(f"missing key {key!r}")
        return Doc(self.value[key], self.source, self.base, f"{self.path}.{key}")

    def get(self, key: str, default=None):
        return self[key] if self.has(key) else default

    def deref(self) -> "Doc":
        """Follow a string reference to another JSON file."""
        if isinstance(self.value, str):
            return read_json(self.base / self.value)
        return self


def parse_json(text: str, source: str, base: Path | None = None) -> Doc:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None
    return Doc(value, source, base or Path("."))


def read_json(path) -> Doc:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"{p}: cannot read: {exc.strerror}") from None
    return parse_json(text, str(p), p.parent)


def _guard(doc: Doc, build):
    """Run ``build`` and tag any shape or value error with the document location."""
    try:
        return build()
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, StratLabError) as exc:
        doc.fail(f"{type(exc).__name__}: {exc}")


def parse_number(v, field: Field = Field.REAL):
    """Numbers, ``"inf"``, complex strings like ``"1+2j"`` or ``[re, im]`` pairs."""
    if isinstance(v, list) and len(v) == 2 and field is Field.COMPLEX:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "")) if field is Field.COMPLEX else float(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"not a number: {v!r}")
    return complex(v) if field is Field.COMPLEX else float(v)


def parse_point(text: str, field: Field = Field.REAL) -> np.ndarray:
    """A point from the command line: JSON list or comma-separated numbers."""
    text = text.strip()
    try:
        raw = json.loads(text) if text.startswith("[") else [t for t in text.split(",") if t.strip()]
        vals = raw if isinstance(raw, list) else [raw]
        return np.array([parse_number(v, field) for v in vals], dtype=field.dtype)
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"--point {text!r}: {exc}") from None


def point(doc: Doc, field: Field = Field.REAL) -> np.ndarray:
    vals = doc.value if isinstance(doc.value, list) else [doc.value]
    return _guard(doc, lambda: np.array([parse_number(v, field) for v in vals], dtype=field.dtype))


def field_of(doc: Doc, default: Field) -> Field:
    return _guard(doc, lambda: Field.parse(doc.value.get("field", default.value))) if isinstance(doc.value, dict) \
        else default


def poly_map(doc: Doc, field: Field = Field.REAL) -> PolynomialMap:
    doc = doc.deref()
    v = doc.value
    if isinstance(v, dict) and "field" not in v:
        v = dict(v, field=field.value)
        doc = Doc(v, doc.source, doc.base, doc.path)
    for key in ("m", "n", "coords"):
        doc[key]
    desc = doc.value.get("description") or f"{Path(doc.source).stem}{'' if doc.path == '$' else ':' + doc.path}"
    return _guard(doc, lambda: PolynomialMap.from_json(doc.value, desc))


def box(doc: Doc) -> Box:
    doc = doc.deref()
    if isinstance(doc.value, list):
        return _guard(doc, lambda: Box([b[0] for b in doc.value], [b[1] for b in doc.value]))
    doc["lo"], doc["hi"]
    return _guard(doc, lambda: Box.from_json(doc.value))


def parse_box(text: str) -> Box:
    """``lo:hi`` per axis, axes separated by commas (``0.5:2`` or ``-1:1,-1:1``)."""
    try:
        pairs = [part.split(":") for part in text.split(",")]
        lo = [float(p[0]) for p in pairs]
        hi = [float(p[1]) for p in pairs]
        return Box(lo, hi)
    except (ValueError, IndexError, StratLabError) as exc:
        raise InputError(f"--K {text!r}: expected lo:hi per axis ({exc})") from None


def stratum(doc: Doc, ambient_dim: int | None = None, field: Field = Field.REAL) -> Stratum:
    doc = doc.deref()
    field = field_of(doc, field)
    if doc.has("ambient_dim"):
        ambient_dim = _guard(doc, lambda: int(doc.value["ambient_dim"]))
    if ambient_dim is None:
        doc.fail("ambient_dim is needed to read this stratum")
    doc["name"], doc["dim"], doc["repr"]
    return _guard(doc, lambda: Stratum.from_json(doc.value, ambient_dim, field))


def stratification(doc: Doc, field: Field = Field.REAL) -> Stratification:
    doc = doc.deref()
    if doc.has("strata"):
        doc["name"], doc["ambient_dim"]
        v = doc.value if "field" in doc.value else dict(doc.value, field=field.value)
        return _guard(doc, lambda: Stratification.from_json(v))
    s = stratum(doc, None, field)
    return Stratification(s.name, s.ambient_dim, (s,), s.field)


def sequence(doc: Doc, Y: Stratum, x: np.ndarray) -> TangentSequence:
    """``{"points": [...]}`` or ``{"curve": <map 1 -> n>, "schedule": {...}}``."""
    doc = doc.deref()
    if doc.has("points"):
        pts = doc["points"]
        return _guard(pts, lambda: TangentSequence.from_points(
            Y, [point(pts[i], Y.field) for i in range(len(pts.value))], x))
    curve = poly_map(doc["curve"], Y.field)
    if (curve.source_dim, curve.target_dim) != (1, Y.ambient_dim):
        doc["curve"].fail(f"curve must map 1 -> {Y.ambient_dim}")
    sched = _guard(doc, lambda: Schedule.from_json(doc.value["schedule"])) if doc.has("schedule") else None
    return _guard(doc, lambda: sequence_from_curve(Y, curve, x, sched))


def chart(doc: Doc, name: str, dim: int) -> Chart:
    return _guard(doc, lambda: Chart(name, dim, box(doc)))


def subspace(doc: Doc, field: Field) -> Subspace:
    doc = doc.deref()
    if isinstance(doc.value, dict):
        return _guard(doc, lambda: Subspace.from_json(doc.value))
    cols = doc.value
    return _guard(doc, lambda: Subspace.span(
        np.array([[parse_number(e, field) for e in c] for c in cols], dtype=field.dtype).T, field))
