import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from stratlab import cli, gallery, shapes
from stratlab.gallery import Check, Fixture, run_gallery, run_oracle
from stratlab.oracle import OracleUnavailable, compare, exact_transverse_at
from stratlab.transversality import Reason

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def samples(tmp_path):
    dst = tmp_path / "samples"
    shutil.copytree(SAMPLES, dst)
    return dst


# --- gallery -----------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(gallery.FIXTURES))
def test_each_fixture_reproduces(name):
    res = gallery.fixture(name).run()
    assert res.passed, [c.diff() for c in res.misses()]


def test_gallery_order_and_determinism():
    a = run_gallery()
    assert [f.name for f in a.fixtures] == sorted(gallery.FIXTURES)
    b = run_gallery(workers=1)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_nonclosed_fixture_is_labelled_substitute():
    fx = gallery.fixture("nonclosed_union")
    assert fx.substitute and "substitute" in fx.notes
    assert fx.stratification.min_dim == 0


def test_miss_is_reported(monkeypatch):
    bad = lambda: Fixture("bad", "always misses", None, {}, [Check("two", 2, lambda: 3)])
    monkeypatch.setitem(gallery.FIXTURES, "bad", bad)
    rep = run_gallery(["bad"])
    assert not rep.passed
    assert rep.diff() == ["bad.two: observed 3, expected == 2"]


def test_check_errors_become_misses():
    def boom():
        raise OracleUnavailable("nope")
    res = Fixture("e", "", None, {}, [Check("c", 1, boom)]).run()
    assert not res.passed and "OracleUnavailable" in res.checks[0].error


def test_oracle_agrees_on_every_gallery_case():
    pairs = run_oracle()
    assert len(pairs) >= 15
    assert all(c.conclusive and c.agree for _, c in pairs)


def test_oracle_unavailable_for_non_polynomial():
    c = compare(shapes.identity_map(2), [0.0, 0.0], shapes.x_axis())
    assert c.exact is None and c.agree and not c.conclusive
    with pytest.raises(OracleUnavailable):
        exact_transverse_at(shapes.parabola(), [0.0], shapes.circle_parametric())


def test_oracle_exact_on_stratum_uses_no_tolerance():
    # f(1e-12) lies 1e-24 off the x-axis: within tol_on for the float path, a miss for the exact one
    f = shapes.parabola()
    assert compare(f, [0.0], shapes.x_axis()).exact.reason is Reason.RANK_DEFICIENT
    c = compare(f, [1e-12], shapes.x_axis())
    assert c.exact.reason is Reason.MISSES and c.floating.reason is Reason.RANK_DEFICIENT
    assert not c.agree


# --- CLI -----------------------------------------------------------------------


def test_cli_gallery_single(capsys):
    code, out, _ = run(capsys, "gallery", "--name", "golubitsky_axes")
    assert code == 0
    d = json.loads(out)
    assert d["passed"] and [f["name"] for f in d["fixtures"]] == ["golubitsky_axes"]


def test_cli_gallery_miss_exit_one(capsys, monkeypatch):
    bad = lambda: Fixture("bad", "", None, {}, [Check("two", 2, lambda: 3)])
    monkeypatch.setitem(gallery.FIXTURES, "bad", bad)
    code, _, err = run(capsys, "gallery", "--all")
    assert code == 1 and "bad.two" in err


def test_cli_check_parabola_s2(capsys, samples):
    code, out, _ = run(capsys, "check", "--map", samples / "parabola.json", "--stratum", samples / "s2.json",
                       "--point", "0")
    assert code == 0
    v = json.loads(out)["results"][0]["verdicts"][0]
    assert v["transverse"] and v["verdict"] == "RankFull" and v["margin"] == 1.0


def test_cli_check_csv_twelve_digits(capsys, samples):
    code, out, _ = run(capsys, "--out", "csv", "check", "--map", samples / "hirsch.json",
                       "--stratification", samples / "circle.json", "--point", str(1 / 3))
    rows = out.strip().splitlines()
    assert code == 0 and rows[0].startswith("x,stratum")
    assert rows[1].split(",")[0] == "0.333333333333"


def test_cli_global_flags_after_subcommand(capsys, samples):
    code, out, _ = run(capsys, "check", "--map", samples / "parabola.json", "--stratum", samples / "s2.json",
                       "--point", "0", "--out", "csv")
    assert code == 0 and out.startswith("x,")


def test_cli_check_compact(capsys, samples):
    code, out, _ = run(capsys, "check-compact", "--map", samples / "parabola.json",
                       "--stratification", samples / "golubitsky.json", "--K=-1:1")
    s = json.loads(out)["summary"]
    assert code == 0 and s["certified"] and s["min_margin"] == pytest.approx(1.0)


def test_cli_refuses_noncompact_K(capsys, samples):
    code, _, err = run(capsys, "check-compact", "--map", samples / "parabola.json",
                       "--stratum", samples / "s2.json", "--K=0:inf")
    assert code == 2 and "compact" in err
    spec = json.loads((samples / "hirsch_probe.json").read_text())
    spec["K"] = {"lo": [0.5], "hi": [None]}
    (samples / "open.json").write_text(json.dumps(spec))
    code, _, err = run(capsys, "probe", "--in", samples / "open.json")
    assert code == 2 and "compact" in err


def test_cli_condition_a(capsys, samples):
    code, out, _ = run(capsys, "condition-a", "--in", samples / "golubitsky_pair.json")
    d = json.loads(out)
    assert code == 0 and d["label"] == "refuted" and d["containment_residual"] == pytest.approx(1.0)


def test_cli_condition_a_with_points(capsys, tmp_path):
    doc = {"ambient_dim": 2, "X": dict(shapes.x_axis().to_json()), "Y": shapes.upper_half_plane().to_json(),
           "x": [0, 0], "approach": {"points": [[2.0 ** -k, 2.0 ** -k] for k in range(1, 30)]}}
    (tmp_path / "pair.json").write_text(json.dumps(doc))
    code, out, _ = run(capsys, "--out", "csv", "condition-a", "--in", tmp_path / "pair.json")
    assert code == 0 and len(out.strip().splitlines()) == 30


def test_cli_witness_golubitsky(capsys, samples):
    code, out, _ = run(capsys, "witness", "--in", samples / "golubitsky_fault.json")
    d = json.loads(out)
    assert code == 0 and all(d["soundness"].values())
    H = np.array([[e[0] for e in row] for row in d["H"]["basis"]])
    assert np.allclose(np.abs(H[:, 0]), [1.0, 0.0])
    assert [m["y"] for m in d["members"][:3]] == [[1.0, 0.0], [0.5, 0.0], [1 / 3, 0.0]]


def test_cli_witness_complex(capsys, tmp_path):
    doc = {"field": "complex", "stratification": shapes.complex_axes().to_json(), "X": "X", "Y": "Y",
           "x": [0, 0], "r": 1,
           "source_tangent": {"field": "complex", "ambient_dim": 1, "basis": [[[1.0, 0.0]]]},
           "approach": {"curve": {"m": 1, "n": 2, "field": "complex", "coords": [[[[1], [1.0, 0.0]]], []]},
                        "schedule": {"ts": [1 / k for k in range(1, 41)]}}}
    (tmp_path / "fault.json").write_text(json.dumps(doc))
    code, out, _ = run(capsys, "witness", "--in", tmp_path / "fault.json")
    d = json.loads(out)
    assert code == 0 and d["field"] == "complex" and all(d["soundness"].values())


def test_cli_witness_not_a_fault_exit_two(capsys, samples):
    doc = json.loads((samples / "golubitsky_fault.json").read_text())
    doc["X"], doc["Y"] = "S1", "S2"
    doc["x"] = [0, 1e-3]
    doc["approach"] = {"points": [[0.0, 2.0 ** -k] for k in range(1, 20)]}
    (samples / "f2.json").write_text(json.dumps(doc))
    code, _, err = run(capsys, "witness", "--in", samples / "f2.json")
    assert code == 2 and "error" in err


def test_cli_probe_directed_and_random(capsys, samples):
    code, out, _ = run(capsys, "probe", "--in", samples / "hirsch_probe.json")
    ce = json.loads(out)["counterexample"]
    assert code == 0 and ce["c"] <= 0.025 and ce["escapes_K"]
    code, a, _ = run(capsys, "--seed", "5", "probe", "--in", samples / "hirsch_random.json", "--count", "10")
    code2, b, _ = run(capsys, "--seed", "5", "probe", "--in", samples / "hirsch_random.json", "--count", "10")
    assert code == code2 == 0 and a == b
    assert json.loads(a)["transverse_fraction"] == 1.0


def test_cli_oracle_modes(capsys, samples):
    code, out, _ = run(capsys, "oracle", "--gallery", "--name", "hirsch_circle")
    d = json.loads(out)
    assert code == 0 and d["agree"] and d["conclusive"] == d["cases"] == 5
    code, out, _ = run(capsys, "oracle", "--map", samples / "parabola.json", "--stratification",
                       samples / "golubitsky.json", "--point", "0")
    assert code == 0 and json.loads(out)["conclusive"] == 2


def test_cli_oracle_disagreement_exit_one(capsys, monkeypatch):
    c = compare(shapes.parabola(), [0.0], shapes.y_axis())
    fake = type(c)(c.label, c.floating, type(c.exact)(c.exact.stratum, False, Reason.RANK_DEFICIENT))
    monkeypatch.setattr(cli, "run_oracle", lambda names, tol: [("x", fake)])
    code, _, err = run(capsys, "oracle", "--gallery")
    assert code == 1 and "disagreement" in err


def test_cli_malformed_json_location(capsys, tmp_path, samples):
    (tmp_path / "bad.json").write_text('{"m": 1,\n  "n": 2,, }')
    code, _, err = run(capsys, "check", "--map", tmp_path / "bad.json", "--stratum", samples / "s2.json",
                       "--point", "0")
    assert code == 2 and "bad.json:2:10" in err
    (tmp_path / "short.json").write_text('{"m": 1, "n": 2}')
    code, _, err = run(capsys, "check", "--map", tmp_path / "short.json", "--stratum", samples / "s2.json",
                       "--point", "0")
    assert code == 2 and "missing key 'coords'" in err


def test_cli_seed_range(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--seed", "-1", "gallery", "--all"])
    assert exc.value.code == 2
