import json

import numpy as np
import pytest

from concavelift import cli
from concavelift import generate as gen
from concavelift.operators import matrix_to_json


def run(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def write(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def brownian_blocks(sigma=2.0, depth=8):
    return {
        "version": 1,
        "spaces": [{"label": "V", "dim": depth, "tower": {"base_dim": 1, "depth": depth}},
                   {"label": "u", "dim": 1}],
        "operator": {"kind": "blocks", "layout": {"entries": [
            {"row": "V", "col": "V", "builtin": "shift"},
            {"row": "V", "col": "u", "builtin": "embed", "scale": sigma},
            {"row": "u", "col": "u", "entries": [[[1, 0]]]}]}},
    }


def test_generate_then_classify(tmp_path, capsys):
    out = str(tmp_path / "b.json")
    rc, _, _ = run(capsys, "generate", "brownian", "sigma=2", "depth=10", "--out", out)
    assert rc == 0
    doc = json.loads(open(out).read())
    assert doc["operator"]["kind"] == "generator"
    assert doc["validation"]["verdicts"]["two_isometry"]
    rc, text, _ = run(capsys, "classify", out, "--json", "--order", "4")
    assert rc == 0
    rep = json.loads(text)
    assert rep["command"] == "classify" and rep["version"] == 1
    names = {v["name"]: v["verdict"] for v in rep["verdicts"]}
    assert names["two_isometry"] and names["delta_regular"]


def test_generate_materialize_roundtrip(tmp_path, capsys):
    out = str(tmp_path / "d.json")
    assert run(capsys, "generate", "dirichlet", "depth=12", "--materialize",
               "--out", out)[0] == 0
    t, _ = cli.load_spec(out)
    ref = gen.gen_weighted_shift(gen.dirichlet_weights(12), 12)
    assert np.allclose(t.matrix, ref.matrix)
    assert t.boundary_depth == 1


def test_blocks_spec_matches_generator(tmp_path):
    t, seed = cli.parse_spec(brownian_blocks(2.0, 8))
    assert seed is None
    ref = gen.gen_brownian_shift(2.0, 8)
    assert np.allclose(t.matrix, ref.matrix)
    assert t.boundary_depth == 1


def test_dense_spec_roundtrip():
    t = gen.gen_brownian_shift(1.5, 6)
    back, _ = cli.parse_spec(json.loads(json.dumps(cli.operator_spec(t))))
    assert np.array_equal(back.matrix, t.matrix)
    assert back.dom == t.dom


def test_weighted_shift_spec():
    doc = {"version": 1, "operator": {"kind": "weighted_shift",
                                      "weights": [2, 1.5, 1.25], "depth": 4}}
    t, _ = cli.parse_spec(doc)
    assert t.matrix[1, 0] == 2


def test_lift_human_and_json(tmp_path, capsys):
    spec = str(tmp_path / "s.json")
    run(capsys, "generate", "regular_scalar", "gamma=1.4", "depth=10", "--out", spec)
    rc, text, _ = run(capsys, "lift", spec, "--method", "regular", "--depth", "6")
    assert rc == 0 and "lift_regular" in text
    out = str(tmp_path / "lift.json")
    rc, text, _ = run(capsys, "lift", spec, "--json", "--out", out)
    assert rc == 0
    rep = json.loads(text)
    assert rep["construction_tag"] == "lift_basic"
    assert all(r["value"] <= 1e-8 for r in rep["residuals"])


def test_lift_minimal_delta_majorant(tmp_path, capsys):
    spec = write(tmp_path, brownian_blocks(2.0, 10))
    rc, text, _ = run(capsys, "lift", spec, "--method", "minimal",
                      "--majorant", "delta", "--json")
    assert rc == 0
    assert json.loads(text)["covariance"] == pytest.approx(2.0)


def test_lift_regular_precondition_exit(tmp_path, capsys):
    spec = str(tmp_path / "d.json")
    run(capsys, "generate", "dirichlet", "depth=16", "--out", spec)
    rc, _, err = run(capsys, "lift", spec, "--method", "regular")
    assert rc == cli.EXIT_PRECONDITION
    assert "[Delta_T-regular]" in err


def test_verify_exit_codes(tmp_path, capsys):
    spec = str(tmp_path / "b.json")
    run(capsys, "generate", "brownian", "sigma=2", "--out", spec)
    rc, text, _ = run(capsys, "verify", spec, "--theorem", "4.1", "--json")
    assert rc == 0 and json.loads(text)["agreement"]
    nil = str(tmp_path / "n.json")
    run(capsys, "generate", "regular_scalar", "gamma=1.2",
        "t_hat=[[0,0.5],[0,0]]", "--out", nil)
    rc, text, _ = run(capsys, "verify", nil, "--theorem", "3.4", "--order", "8", "--json")
    assert rc == cli.EXIT_DISAGREE
    assert not json.loads(text)["agreement"]


def test_parse_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "classify", str(bad))[0] == cli.EXIT_PARSE
    assert run(capsys, "classify", write(tmp_path, {"version": 9}))[0] == cli.EXIT_PARSE
    assert run(capsys, "generate", "nope")[0] == cli.EXIT_PARSE
    assert run(capsys, "generate", "regular_scalar")[0] == cli.EXIT_PARSE
    assert run(capsys, "frobnicate")[0] == cli.EXIT_PARSE
    doc = brownian_blocks()
    doc["operator"]["layout"]["entries"][0]["builtin"] = "twist"
    assert run(capsys, "classify", write(tmp_path, doc))[0] == cli.EXIT_PARSE


def test_numeric_exit(tmp_path, capsys):
    # order larger than the tower supports
    spec = write(tmp_path, brownian_blocks(2.0, 6))
    assert run(capsys, "verify", spec, "--theorem", "3.4", "--order", "12")[0] == cli.EXIT_NUMERIC


def test_settings_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path, {"tol": 1e-3, "order": 3}, "cfg.json")
    args = cli.build_parser().parse_args(["classify", "x", "--config", cfg, "--order", "5"])
    monkeypatch.setenv("CONCAVELIFT_TOL", "1e-4")
    s = cli.resolve_settings(args, ("tol", "order", "margin"))
    assert s == {"tol": 1e-4, "order": 5, "margin": 0}
    monkeypatch.setenv("CONCAVELIFT_MARGIN", "two")
    with pytest.raises(cli.SpecError):
        cli.resolve_settings(args, ("margin",))


def test_generator_seed_reproducible():
    doc = {"version": 1, "operator": {"kind": "generator", "name": "two_hypercontraction",
                                      "params": {"depth": 8}, "seed": 5}}
    a, s = cli.parse_spec(doc)
    b, _ = cli.parse_spec(doc)
    assert s == 5 and np.array_equal(a.matrix, b.matrix)


def test_complex_matrix_param():
    t_hat = matrix_to_json(np.array([[0.3j]]))
    t = cli.run_generator("regular_scalar", {"t_hat": t_hat, "gamma": 1.5, "depth": 6}, 0)
    assert t.matrix[-1, -1] == pytest.approx(0.3j)


def test_version(capsys):
    assert run(capsys, "--version")[0] == 0
