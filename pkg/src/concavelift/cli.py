"""Command-line interface: ``concavelift {classify,lift,verify,generate}``.

Exit codes: 0 success, 1 theorem clauses disagree, 2 parse or usage error
(including unknown generators), 3 numeric failure, 4 violated precondition.

Settings resolve as flag > ``CONCAVELIFT_*`` environment variable >
``--config`` JSON file > built-in default.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import classify as cl
from . import construct as cs
from . import generate as gen
from . import linalg as la
from . import verify as vf
from .errors import (ConcaveLiftError, GenerationFailed, NumericError,
                     PreconditionFailed, SpaceError, UnknownGenerator)
from .operators import (BlockLayout, Operator, assemble, matrix_from_json,
                        matrix_to_json)
from .spaces import GradedSpace, WindowSpec, embed, forward_shift

SCHEMA_VERSION = 1
EXIT_OK, EXIT_DISAGREE, EXIT_PARSE, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 1, 2, 3, 4

DEFAULTS = {"tol": la.IDENTITY_TOL, "margin": 0, "order": 8, "depth": 6,
            "seed": 0, "samples": 100}
_TYPES = {"tol": float, "margin": int, "order": int, "depth": int,
          "seed": int, "samples": int}


class SpecError(ValueError):
    """Malformed operator spec file."""


# ---------------------------------------------------------------------------
# generators by name
# ---------------------------------------------------------------------------

def _matrix_param(x) -> np.ndarray:
    """Accept a real scalar, a real nested list, or ``[re, im]`` pairs."""
    a = np.asarray(x)
    if a.ndim == 0:
        return np.array([[complex(a)]])
    if a.ndim == 3:
        return matrix_from_json(x)
    return la.cmatrix(a)


def _gen_regular_scalar(p, seed):
    if "t_hat" in p:
        t_hat = _matrix_param(p["t_hat"])
    else:
        rng = np.random.default_rng(seed)
        t_hat = gen.random_normal(rng, int(p.get("dim", 2)), float(p.get("rmax", 0.9)))
    return gen.gen_regular_concave_scalar(t_hat, float(p["gamma"]),
                                          int(p.get("depth", 16)))


GENERATORS = {
    "regular_scalar": _gen_regular_scalar,
    "brownian": lambda p, s: gen.gen_brownian_shift(float(p.get("sigma", 1.0)),
                                                    int(p.get("depth", 16))),
    "dirichlet": lambda p, s: gen.gen_weighted_shift(
        gen.dirichlet_weights(int(p.get("depth", 32))), int(p.get("depth", 32))),
    "weighted_shift": lambda p, s: gen.gen_weighted_shift(
        p["weights"], int(p.get("depth", len(p["weights"]) + 1))),
    "two_hypercontraction": lambda p, s: gen.gen_two_hypercontraction(
        s, p.get("dim"), int(p.get("depth", 16))),
    "isometric_coupling": lambda p, s: gen.gen_isometric_coupling(
        _matrix_param(p["t_hat"]), float(p["sigma"]), int(p.get("depth", 16))),
}


def run_generator(name: str, params: dict, seed: int) -> Operator:
    if name not in GENERATORS:
        raise UnknownGenerator(f"unknown generator {name!r}; known: "
                               + ", ".join(sorted(GENERATORS)))
    try:
        return GENERATORS[name](params, seed)
    except (KeyError, TypeError) as exc:
        raise SpecError(f"bad parameters for {name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------

def _space_from_spec(spaces) -> GradedSpace:
    if not spaces:
        raise SpecError("spec needs a non-empty 'spaces' list")
    if isinstance(spaces[0], list):
        spaces = spaces[0]
    return GradedSpace.from_list(spaces)


def _builtin(entry: dict, rows: GradedSpace, cols: GradedSpace) -> Operator:
    kind = entry["builtin"]
    scale = complex(*entry["scale"]) if isinstance(entry.get("scale"), list) \
        else complex(entry.get("scale", 1.0))
    if kind == "shift":
        if rows != cols:
            raise SpecError("shift builtin must sit on the diagonal")
        op = forward_shift(rows)
    elif kind == "embed":
        op = embed(cols, rows, rows.blocks[0].label, int(entry.get("offset", 0)))
    elif kind == "scalar":
        if rows.total_dim != cols.total_dim:
            raise SpecError("scalar builtin needs a square block")
        op = Operator(np.eye(rows.total_dim, dtype=complex), cols, rows, 0)
    else:
        raise SpecError(f"unknown builtin {kind!r}")
    return Operator(scale * op.matrix, cols, rows, op.boundary_depth)


def _blocks_operator(sp: GradedSpace, layout: dict) -> Operator:
    subs = [GradedSpace((b,)) for b in sp.blocks]
    index = {b.label: i for i, b in enumerate(sp.blocks)}
    lay = BlockLayout(subs, subs)
    for e in layout.get("entries", []):
        i, j = index[e["row"]], index[e["col"]]
        if "builtin" in e:
            lay[i, j] = _builtin(e, subs[i], subs[j])
        else:
            lay[i, j] = Operator(matrix_from_json(e["entries"]), subs[j], subs[i], 0)
    op = assemble(lay)
    if "boundary_depth" in layout:
        op = Operator(op.matrix, op.dom, op.cod, int(layout["boundary_depth"]))
    return op


def parse_spec(doc: dict, seed: int | None = None) -> tuple:
    """``(operator, seed_used)`` from a spec document."""
    if not isinstance(doc, dict) or doc.get("version") != SCHEMA_VERSION:
        raise SpecError(f"spec must be an object with version = {SCHEMA_VERSION}")
    op_doc = doc.get("operator")
    if not isinstance(op_doc, dict) or "kind" not in op_doc:
        raise SpecError("spec needs an 'operator' object with a 'kind'")
    kind = op_doc["kind"]
    try:
        if kind == "dense":
            sp = _space_from_spec(doc.get("spaces"))
            m = matrix_from_json(op_doc["entries"])
            bd = int(op_doc.get("boundary_depth", 1 if sp.towers else 0))
            return Operator(m, sp, sp, bd), None
        if kind == "blocks":
            return _blocks_operator(_space_from_spec(doc.get("spaces")),
                                    op_doc["layout"]), None
        if kind == "weighted_shift":
            if op_doc.get("family") == "dirichlet":
                w = gen.dirichlet_weights(int(op_doc["depth"]))
            else:
                w = op_doc["weights"]
            depth = int(op_doc.get("depth", len(w) + 1))
            return gen.gen_weighted_shift(w, depth), None
        if kind == "generator":
            s = int(op_doc.get("seed", 0) if seed is None else seed)
            return run_generator(op_doc["name"], op_doc.get("params", {}), s), s
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"malformed operator spec: {exc!r}") from exc
    raise SpecError(f"unknown operator kind {kind!r}")


def operator_spec(t: Operator) -> dict:
    """Dense spec document for an operator."""
    return {"version": SCHEMA_VERSION, "spaces": t.dom.to_list(),
            "operator": {"kind": "dense", "boundary_depth": t.boundary_depth,
                         "entries": matrix_to_json(t.matrix)}}


def load_spec(path: str, seed: int | None = None) -> tuple:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path!r}: {exc}") from exc
    try:
        return parse_spec(doc, seed)
    except SpaceError as exc:
        raise SpecError(f"inconsistent spaces in {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# settings and reports
# ---------------------------------------------------------------------------

def resolve_settings(args: argparse.Namespace, keys) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {args.config!r}: {exc}") from exc
    out = {}
    for k in keys:
        flag = getattr(args, k, None)
        env = os.environ.get(f"CONCAVELIFT_{k.upper()}")
        if flag is not None:
            v = flag
        elif env is not None:
            v = env
        elif k in cfg:
            v = cfg[k]
        else:
            v = DEFAULTS[k]
        try:
            out[k] = _TYPES[k](v)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad value for {k}: {v!r}") from exc
    return out


def report(command: str, params: dict, verdicts: list, residuals: list,
           seed=None, tolerances=None, **extra) -> dict:
    doc = {"version": SCHEMA_VERSION, "command": command, "params": params,
           "verdicts": verdicts, "residuals": residuals, "seed": seed,
           "tolerances": tolerances or {}}
    doc.update(extra)
    return vf._jsonable(doc)


def render(doc: dict) -> str:
    """Human-readable text derived from a JSON report."""
    lines = [f"{doc['command']}  (schema v{doc['version']})"]
    for v in doc["verdicts"]:
        mark = "yes" if v["verdict"] else "no"
        lines.append(f"  {v['name']:<58} {mark}")
    for r in doc["residuals"]:
        val = r["value"]
        lines.append(f"  residual {r['name']:<49} "
                     + ("inf" if val is None else f"{val:.3e}"))
    for key in ("agreement", "covariance", "construction_tag", "output"):
        if key in doc:
            lines.append(f"  {key}: {doc[key]}")
    return "\n".join(lines)


def _emit(doc: dict, as_json: bool):
    print(json.dumps(doc) if as_json else render(doc))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    s = resolve_settings(args, ("tol", "margin", "order", "seed"))
    t, seed = load_spec(args.input)
    rep = cl.classify_all(t, WindowSpec(t.dom, s["margin"]), s["tol"], s["order"])
    d = rep.to_dict()
    doc = report("classify", {"input": args.input, **s},
                 [{"name": k, "verdict": v} for k, v in sorted(d["verdicts"].items())],
                 [{"name": k, "value": v} for k, v in sorted(d["residuals"].items())],
                 seed, {"tol": s["tol"]}, extras=d["extras"],
                 hyper_profile=d.get("hyper_profile"),
                 hypercontractive_profile=d.get("hypercontractive_profile"))
    _emit(doc, args.json)
    return EXIT_OK


def _load_majorant(path: str, t: Operator) -> np.ndarray:
    if path == "delta":
        return cs.two_isometry_majorant(t)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read majorant {path!r}: {exc}") from exc
    return matrix_from_json(doc["matrix"] if isinstance(doc, dict) else doc)


def cmd_lift(args) -> int:
    s = resolve_settings(args, ("tol", "depth", "seed"))
    t, seed = load_spec(args.input)
    if args.method == "basic":
        res = cs.lift_basic(t, s["depth"], s["tol"])
    elif args.method == "regular":
        res = cs.lift_regular(t, s["depth"], s["tol"])
    else:
        a = (_load_majorant(args.majorant, t) if args.majorant
             else cs.two_isometry_majorant(t, s["tol"]))
        res = cs.lift_minimal(t, a, s["depth"], s["tol"])
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(vf._jsonable({"version": SCHEMA_VERSION, **res.to_dict()}), fh)
    keys = sorted(res.residuals)
    doc = report("lift", {"input": args.input, "method": args.method, **s},
                 [{"name": f"{k} <= tol", "verdict": bool(res.residuals[k] <= s["tol"])}
                  for k in keys if k != "covariance"],
                 [{"name": k, "value": res.residuals[k]} for k in keys],
                 seed, {"tol": s["tol"]}, covariance=res.covariance,
                 construction_tag=res.construction_tag, witness=res.witness,
                 output=args.out)
    _emit(doc, args.json)
    return EXIT_OK


def cmd_verify(args) -> int:
    s = resolve_settings(args, ("tol", "margin", "order", "depth", "seed", "samples"))
    t, seed = load_spec(args.input)
    th, tol, m = args.theorem, s["tol"], s["margin"]
    if th == "2.3":
        v = vf.check_thm23(t, s["depth"], tol, m)
    elif th == "3.1":
        v = vf.check_thm31(t, s["samples"], tol, s["seed"], m)
    elif th == "3.3":
        v = vf.check_prop33(t, max(2, s["order"]), tol, m)
    elif th == "3.4":
        v = vf.check_thm34(t, s["order"], tol, m)
    elif th == "4.1":
        v = vf.check_thm41(t, min(s["order"], 4), tol, m)
    elif th == "4.4b":
        v = vf.check_cor44b(t, tol, m)
    else:
        v = vf.check_thm46(t, min(s["order"], 4), tol, m)
    d = v.to_dict()
    doc = report("verify", {"input": args.input, "theorem": th, **s},
                 [{"name": c["clause"], "verdict": c["verdict"]} for c in d["clauses"]],
                 [{"name": c["clause"], "value": c["residual"]} for c in d["clauses"]],
                 seed, {"tol": tol}, agreement=v.agreement,
                 diagnostics=d["diagnostics"])
    _emit(doc, args.json)
    return EXIT_OK if v.agreement else EXIT_DISAGREE


def _parse_params(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise SpecError(f"generator parameter {it!r} is not key=value")
        k, v = it.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_generate(args) -> int:
    s = resolve_settings(args, ("seed", "tol"))
    params = _parse_params(args.params)
    t = run_generator(args.name, params, s["seed"])
    rep = cl.classify_all(t, WindowSpec(t.dom, 0), s["tol"])
    spec = {"version": SCHEMA_VERSION, "spaces": t.dom.to_list(),
            "operator": {"kind": "generator", "name": args.name,
                         "params": params, "seed": s["seed"]},
            "validation": {"verdicts": rep.verdicts,
                           "tolerances": {"tol": s["tol"]}}}
    if args.materialize:
        spec["operator"] = operator_spec(t)["operator"]
    text = json.dumps(vf._jsonable(spec), indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="concavelift",
                                description="Concave operators, 2-isometric "
                                "liftings and Cauchy duals on truncated models.")
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float)
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--json", action="store_true", help="single JSON object on stdout")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="class predicates")
    c.add_argument("input")
    c.add_argument("--margin", type=int)
    c.add_argument("--order", type=int, help="hyper profile order M")
    c.set_defaults(func=cmd_classify)

    lft = sub.add_parser("lift", parents=[common], help="2-isometric liftings")
    lft.add_argument("input")
    lft.add_argument("--method", choices=("basic", "minimal", "regular"), default="basic")
    lft.add_argument("--depth", type=int, help="levels of the new towers")
    lft.add_argument("--majorant", help="JSON matrix file, or 'delta' for A = Delta_T")
    lft.add_argument("--out")
    lft.set_defaults(func=cmd_lift)

    v = sub.add_parser("verify", parents=[common], help="theorem suites")
    v.add_argument("input")
    v.add_argument("--theorem", required=True, choices=sorted(vf.THEOREMS))
    v.add_argument("--order", type=int)
    v.add_argument("--margin", type=int)
    v.add_argument("--depth", type=int)
    v.add_argument("--samples", type=int)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("generate", parents=[common], help="write an instance spec")
    g.add_argument("name")
    g.add_argument("params", nargs="*", help="key=value (values parsed as JSON)")
    g.add_argument("--out")
    g.add_argument("--materialize", action="store_true",
                   help="write the dense matrix instead of the generator call")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (SpecError, UnknownGenerator) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PreconditionFailed as exc:
        print(f"precondition failed [{exc.clause}]: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NumericError, SpaceError, GenerationFailed, ConcaveLiftError) as exc:
        print(f"numeric failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
