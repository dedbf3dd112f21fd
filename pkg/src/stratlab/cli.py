"""Command-line entry point.

Exit codes: 0 success, 1 gallery expectation miss or oracle disagreement,
2 unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Iterable

import numpy as np

from . import loaders
from .errors import StratLabError
from .gallery import FIXTURES, run_gallery, run_oracle
from .geometry import Box
from .loaders import Doc, InputError
from .neighborhoods import DirectedFamily, WeakNeighborhoodSpec, probe_openness
from .oracle import compare
from .regularity import TOL_A, check_condition_a
from .strata import TOL_ON, Stratification
from .subspace import TOL_RANK, Field
from .transversality import is_transverse_to_stratification, transverse_on_compact
from .witness import FaultInstance, build_family, complex_witness


# ---------------------------------------------------------------------------
# output


def _clean(v):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return f"{v:.12g}"
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(rows: list, out) -> None:
    if not rows:
        return
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [k for k in r if k not in cols]
    w = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(r.get(k)) for k in cols})


def emit(args, payload: dict, rows: Iterable[dict]) -> None:
    if args.out == "csv":
        buf = io.StringIO()
        write_csv(list(rows), buf)
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(_clean(payload), indent=2) + "\n")


def _verdict_row(v) -> dict:
    d = v.to_json()
    return {"x": d["x"], "stratum": d["stratum"], "transverse": d["transverse"], "verdict": d["verdict"],
            "margin": v.margin, "conclusive": d["conclusive"]}


# ---------------------------------------------------------------------------
# shared input handling


def _field(args) -> Field:
    return Field.parse(args.field)


def _map(args):
    return loaders.poly_map(loaders.read_json(args.map), _field(args))


def _target(args, n: int):
    """The stratification named by --stratification, or a single --stratum wrapped as one."""
    if args.stratification:
        return loaders.stratification(loaders.read_json(args.stratification), _field(args))
    if args.stratum:
        s = loaders.stratum(loaders.read_json(args.stratum), n, _field(args))
        return Stratification(s.name, s.ambient_dim, (s,), s.field)
    raise InputError("give --stratum or --stratification")


def _points(args, f) -> list:
    if not args.point:
        raise InputError("give at least one --point")
    return [loaders.parse_point(p, f.field) for p in args.point]


def _resolve_stratum(doc: Doc, sigma, n, field):
    if isinstance(doc.value, str) and sigma is not None and not doc.value.endswith(".json"):
        try:
            return sigma.stratum(doc.value)
        except KeyError:
            doc.fail(f"no stratum named {doc.value!r}")
    return loaders.stratum(doc, n, field)


def _pair(doc: Doc, default_field: Field):
    """X, Y, x and the sequence of a pair document."""
    field = loaders.field_of(doc, default_field)
    sigma = loaders.stratification(doc["stratification"], field) if doc.has("stratification") else None
    n = sigma.ambient_dim if sigma else (int(doc["ambient_dim"].value) if doc.has("ambient_dim") else None)
    X = _resolve_stratum(doc["X"], sigma, n, field)
    Y = _resolve_stratum(doc["Y"], sigma, X.ambient_dim, field)
    x = loaders.point(doc["x"], X.field)
    seq = loaders.sequence(doc["approach"], Y, x)
    return X, Y, x, seq


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    f = _map(args)
    sigma = _target(args, f.target_dim)
    reports = []
    for x in _points(args, f):
        sv = is_transverse_to_stratification(f, x, sigma, args.tol_rank, TOL_ON)
        reports.append(sv)
    payload = {"map": f.description, "stratification": sigma.name,
               "results": [r.to_json() for r in reports]}
    emit(args, payload, [_verdict_row(v) for r in reports for v in r])
    return 0


def _compact_box(args) -> Box:
    if args.K:
        K = loaders.parse_box(args.K)
    elif args.box:
        K = loaders.box(loaders.read_json(args.box))
    else:
        raise InputError("give --K lo:hi[,lo:hi...] or --box FILE")
    if not K.is_bounded:
        raise InputError("K must be compact: strong-topology (noncompact) control is not finitely checkable")
    return K


def cmd_check_compact(args) -> int:
    f = _map(args)
    sigma = _target(args, f.target_dim)
    rep = transverse_on_compact(f, _compact_box(args), sigma, args.grid, args.tol_rank)
    emit(args, rep.to_json(), [_verdict_row(v) for v in rep.encounters])
    return 0


def cmd_condition_a(args) -> int:
    doc = loaders.read_json(args.input)
    X, Y, x, seq = _pair(doc, _field(args))
    rep = check_condition_a(X, x, seq, args.tol_a)
    d = rep.to_json()
    rows = [{"k": k, "point": _flat(p), "residual": r}
            for k, (p, r) in enumerate(zip(seq.points, d["diagnostics"]["per_k_residuals"]), start=1)]
    emit(args, d, rows)
    return 0


def _flat(p) -> list:
    p = np.asarray(p)
    if np.iscomplexobj(p):
        return [v for z in p for v in (float(z.real), float(z.imag))]
    return [float(v) for v in p]


def cmd_witness(args) -> int:
    doc = loaders.read_json(args.input)
    X, Y, x, seq = _pair(doc, _field(args))
    kw = {"r": int(doc["r"].value), "field": X.field, "tol_a": args.tol_a}
    if doc.has("v"):
        kw["v"] = loaders.point(doc["v"], X.field)
    if doc.has("tau"):
        kw["tau"] = loaders.subspace(doc["tau"], X.field)
    if X.field is Field.COMPLEX:
        kw["source_tangent"] = loaders.subspace(doc["source_tangent"], Field.COMPLEX)
        fam = complex_witness(FaultInstance(X, Y, x, seq, **kw))
    else:
        kw["m"] = int(doc["m"].value)
        fam = build_family(FaultInstance(X, Y, x, seq, **kw), per_axis=args.grid)
    d = fam.to_json()
    emit(args, d, [{k: m[k] for k in ("k", "y", "verdict_Y", "margin_Y", "alignment_residual",
                                       "c1_distance_K", "c1_distance_support", "c1_bound")}
                   for m in d["members"]])
    return 0


def cmd_probe(args) -> int:
    doc = loaders.read_json(args.input)
    f = loaders.poly_map(doc["map"], Field.REAL)
    K = loaders.box(doc["K"])
    if not K.is_bounded:
        doc["K"].fail("K must be compact: strong-topology (noncompact) control is not finitely checkable")
    if args.stratification:
        sigma = loaders.stratification(loaders.read_json(args.stratification), Field.REAL)
    else:
        sigma = loaders.stratification(doc["stratification"], Field.REAL)
    kw = {}
    if doc.has("src_chart"):
        kw["src_chart"] = loaders.chart(doc["src_chart"], "src", f.source_dim)
    if doc.has("tgt_chart"):
        kw["tgt_chart"] = loaders.chart(doc["tgt_chart"], "tgt", f.target_dim)
    eps = doc["epsilon"]
    spec = loaders._guard(doc, lambda: WeakNeighborhoodSpec(
        f, K, float(eps.value), jet_order=int(doc.value.get("jet_order", 1)), **kw))
    family = None
    kind = args.family or (doc["family"]["kind"].value if doc.has("family") else None)
    if kind:
        direction = tuple(doc["family"].value.get("direction", (1.0,))) if doc.has("family") else (1.0,)
        family = loaders._guard(doc, lambda: DirectedFamily(kind, direction))
    count = args.count if args.count is not None else int(doc.value.get("count", 200))
    rep = probe_openness(spec, sigma, count, args.seed, family, args.grid)
    d = rep.to_json()
    rows = [{"mode": d["mode"], "seed": d["seed"], "samples": d["samples"],
             "transverse_count": d["transverse_count"], "transverse_fraction": d["transverse_fraction"],
             "min_margin_seen": rep.min_margin_seen, "min_clearance_seen": rep.min_clearance_seen,
             "counterexample_c": (rep.counterexample or {}).get("c"),
             "failure_point": (rep.counterexample or {}).get("failure_point"),
             "escapes_K": (rep.counterexample or {}).get("escapes_K")}]
    emit(args, d, rows)
    return 0


def cmd_gallery(args) -> int:
    names = None if args.all or not args.name else args.name
    rep = run_gallery(names)
    emit(args, rep.to_json(), rep.rows())
    if not rep.passed:
        for line in rep.diff():
            print(f"miss: {line}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle(args) -> int:
    if args.gallery:
        pairs = run_oracle(args.name or None, args.tol_rank)
    else:
        f = _map(args)
        sigma = _target(args, f.target_dim)
        pairs = [("input", compare(f, x, s, f"{s.name} at {_flat(x)}", args.tol_rank))
                 for x in _points(args, f) for s in sigma.strata]
    comps = [c for _, c in pairs]
    conclusive = [c for c in comps if c.conclusive]
    agree = all(c.agree for c in comps)
    payload = {"agree": agree, "cases": len(comps), "conclusive": len(conclusive),
               "comparisons": [dict(c.to_json(), fixture=n) for n, c in pairs]}
    rows = [{"fixture": n, "label": c.label, "floating": c.floating.reason.value,
             "exact": None if c.exact is None else c.exact.reason.value,
             "conclusive": c.conclusive, "agree": c.agree} for n, c in pairs]
    emit(args, payload, rows)
    if not agree:
        for n, c in pairs:
            if not c.agree:
                print(f"disagreement: {n}: {c.label}: floating {c.floating.reason.value}, "
                      f"exact {c.exact.reason.value}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = p.add_argument_group("global options")
    g.add_argument("--tol-rank", type=float, default=d(TOL_RANK), help="relative rank threshold")
    g.add_argument("--tol-a", type=float, default=d(TOL_A), help="condition-(a) containment tolerance")
    g.add_argument("--grid", type=int, default=d(None), help="grid points per source axis")
    g.add_argument("--seed", type=int, default=d(0), help="random seed (unsigned 64-bit)")
    g.add_argument("--out", choices=("json", "csv"), default=d("json"))
    g.add_argument("--field", choices=("real", "complex"), default=d("real"),
                   help="field assumed for inputs that do not state one")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratlab", description="Transversality and stratification checks.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    def target(p):
        p.add_argument("--map", required=True, help="polynomial map JSON")
        p.add_argument("--stratum", help="stratum JSON")
        p.add_argument("--stratification", help="stratification JSON")

    p = add("check", cmd_check, "verdict and margin at points")
    target(p)
    p.add_argument("--point", action="append", help="source point, e.g. 0 or 0.5,1 or [1, 2]")

    p = add("check-compact", cmd_check_compact, "sampled check on a compact box")
    target(p)
    p.add_argument("--K", help="box as lo:hi per axis, comma separated")
    p.add_argument("--box", help="box JSON {lo, hi}")

    p = add("condition-a", cmd_condition_a, "condition (a) along an approach")
    p.add_argument("--in", dest="input", required=True, help="pair JSON")

    p = add("witness", cmd_witness, "build the non-transversality witness family")
    p.add_argument("--in", dest="input", required=True, help="fault JSON")

    p = add("probe", cmd_probe, "empirical openness probe of a weak neighbourhood")
    p.add_argument("--in", dest="input", required=True, help="neighbourhood spec JSON")
    p.add_argument("--stratification", help="overrides the spec's stratification")
    p.add_argument("--count", type=int, help="random samples (default 200)")
    p.add_argument("--family", choices=("source_shift", "target_shift"), help="directed family")

    p = add("gallery", cmd_gallery, "run built-in fixtures")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--name", action="append", choices=sorted(FIXTURES))
    grp.add_argument("--all", action="store_true")

    p = add("oracle", cmd_oracle, "rerun verdicts in exact rational arithmetic")
    p.add_argument("--gallery", action="store_true", help="rerun every gallery verdict that admits it")
    p.add_argument("--name", action="append", choices=sorted(FIXTURES), help="restrict --gallery")
    p.add_argument("--map", help="polynomial map JSON")
    p.add_argument("--stratum")
    p.add_argument("--stratification")
    p.add_argument("--point", action="append")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed < 0 or args.seed >= 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.command == "oracle" and not args.gallery and not args.map:
        parser.error("oracle needs --gallery or --map")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StratLabError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
