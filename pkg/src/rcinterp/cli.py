"""Command-line front end: ``rcinterp <command> --problem P --out R``.

Exit status: 0 when every audit passes, 2 when an audit fails (the report is
still written), 1 on input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import conformal, covering, engine
from .disk_algebra import DiskAlgebraError, node_set
from .reporting import dumps, write_csv
from .star_body import GaugeError, body_from_json

COMMANDS = ("interpolate", "hull", "lift", "gauge", "conformal", "verify")


class InputError(ValueError):
    pass


# --- schemas -------------------------------------------------------------------

_num = {"type": "number"}
_int = {"type": "integer", "minimum": 1}
_cplx = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_grid = {"type": "object", "additionalProperties": False,
         "properties": {"radial": _int, "angular": _int}}
_engine = {"type": "object", "additionalProperties": False, "properties": {
    "k_max": {"type": "integer", "minimum": 1, "maximum": 8},
    "delta": {"type": "number", "exclusiveMinimum": 0},
    "collar": {"type": "number", "exclusiveMinimum": 0},
    "conformal_N": {"type": "integer", "minimum": 64},
    "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "r_margin": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "modulus_samples": _int,
}}
_tolerances = {"type": "object", "additionalProperties": False,
               "properties": {"interp": {"type": "number", "exclusiveMinimum": 0}}}
_common = {"seed": {"type": "integer", "minimum": 0}, "grid": _grid,
           "tolerances": _tolerances, "name": {"type": "string"}}
_nodes = {"type": "array", "items": _num, "minItems": 1}
_values = {"type": "array", "minItems": 1}
_body = {"type": "object", "required": ["kind"]}


def _schema(props: dict, required: list[str]) -> dict:
    return {"type": "object", "additionalProperties": False, "required": required,
            "properties": {**_common, **props}}


SCHEMAS = {
    "interpolate": _schema({"nodes": _nodes, "values": _values, "body": _body, "engine": _engine},
                           ["nodes", "values", "body"]),
    "hull": _schema({"nodes": _nodes, "values": _values, "eps": {"type": "number", "exclusiveMinimum": 0},
                     "engine": _engine}, ["nodes", "values", "eps"]),
    "lift": _schema({"nodes": _nodes, "values": {"type": "array", "items": _cplx, "minItems": 1},
                     "branch_offsets": {"type": "array", "items": {"type": "integer"}},
                     "c": {"type": "number", "minimum": 1}}, ["nodes", "values"]),
    "gauge": _schema({"body": _body, "vectors": {"type": "array", "minItems": 1}}, ["body", "vectors"]),
    "conformal": _schema({
        "profile": {"type": "object", "required": ["kind"], "additionalProperties": False, "properties": {
            "kind": {"enum": ["parabolic", "table", "calibration"]},
            "c": {"type": "number", "exclusiveMinimum": 0},
            "r": {"type": "array", "items": _num}, "theta": {"type": "array", "items": _num}}},
        "N": {"type": "integer", "minimum": 4}, "shrink": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "audit_grid": _int, "points": _int}, ["profile"]),
    "verify": {"type": "object", "required": ["command", "problem", "report"]},
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts.append(extra[0] if extra else "?")
    elif err.validator == "required":
        parts.append(err.message.split("'")[1])
    return ".".join(parts) or "<root>"


def validate(command: str, data) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InputError(f"invalid key '{_path(err)}': {err.message}")


# --- parsing -------------------------------------------------------------------

def _complex(x, key: str) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise InputError(f"invalid key '{key}': expected a number or [re, im]")


def _vectors(raw, dim: int, key: str) -> np.ndarray:
    out = []
    for i, entry in enumerate(raw):
        k = f"{key}.{i}"
        if dim == 1:
            out.append([_complex(entry, k)])
        else:
            if not isinstance(entry, list) or len(entry) != dim:
                raise InputError(f"invalid key '{k}': expected {dim} components")
            out.append([_complex(v, f"{k}.{j}") for j, v in enumerate(entry)])
    return np.array(out, complex)


def _body(raw):
    try:
        return body_from_json(raw)
    except (GaugeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid key 'body': {exc}") from exc


def _nodes(raw):
    try:
        return node_set(raw)
    except DiskAlgebraError as exc:
        raise InputError(f"invalid key 'nodes': {exc}") from exc


def _config(data: dict, args) -> engine.EngineConfig:
    cfg = engine.EngineConfig(**data.get("engine", {}))
    grid = data.get("grid", {})
    return replace(cfg, grid_radial=grid.get("radial", cfg.grid_radial),
                   grid_angular=grid.get("angular", cfg.grid_angular),
                   seed=data.get("seed", cfg.seed), threads=args.threads)


def apply_overrides(data: dict, args) -> dict:
    """Fold command-line flags into the problem so the report echoes what was run."""
    data = json.loads(json.dumps(data))
    if args.seed is not None:
        data["seed"] = args.seed
    if args.grid_radial is not None or args.grid_angular is not None:
        grid = data.setdefault("grid", {})
        if args.grid_radial is not None:
            grid["radial"] = args.grid_radial
        if args.grid_angular is not None:
            grid["angular"] = args.grid_angular
    return data


def build_problem(command: str, data: dict, args) -> engine.InterpolationProblem:
    S = _nodes(data["nodes"])
    cfg = _config(data, args)
    name = data.get("name", command)
    if command == "hull":
        from .star_body import hull_body
        f = _vectors(data["values"], _dim_of(data["values"]), "values")
        try:
            body = hull_body(f, float(data["eps"]))
        except GaugeError as exc:
            raise InputError(f"invalid key 'eps': {exc}") from exc
    else:
        body = _body(data["body"])
        f = _vectors(data["values"], body.dim, "values")
    if len(f) != len(S):
        raise InputError(f"invalid key 'values': {len(f)} values for {len(S)} nodes")
    try:
        return engine.InterpolationProblem(S, f, body, cfg, name)
    except engine.EngineError as exc:
        raise InputError(f"invalid key 'values': {exc}") from exc


def _dim_of(values) -> int:
    first = values[0]
    if isinstance(first, list) and first and isinstance(first[0], list):
        return len(first)
    return 1


# --- commands ------------------------------------------------------------------

def _extension_payload(command, data, problem, result) -> dict:
    out = {"command": command, "problem": data}
    out.update(result.to_json())
    tol = data.get("tolerances", {}).get("interp")
    if tol is not None:
        out["report"]["checks"]["interp_user_tolerance"] = result.report["interp_residual"] <= tol
        out["report"]["ok"] = all(out["report"]["checks"].values())
    return out


def _grid_csv(path: Path, result) -> None:
    s = result.samples
    if not s:
        return
    z = s["z"]
    header = ["x", "y", "gauge_h"] + [f"abs_h{k + 1}" for k in range(len(s["abs_h"]))]
    write_csv(path, header, [z.real, z.imag, s["gauge_h"], *s["abs_h"]])


def _run_extension(command, data, args, out: Path) -> dict:
    problem = build_problem(command, data, args)
    try:
        if command == "hull":
            result = engine.convex_hull_extension(problem.S, problem.f_values, float(data["eps"]),
                                                  problem.config, problem.name)
        else:
            result = engine.assemble_extension(problem)
    except engine.EngineError as exc:
        if "degenerate data" in str(exc) or "outside the closed body" in str(exc):
            raise InputError(f"invalid key 'values': {exc}") from exc
        return {"command": command, "problem": data, "error": str(exc), "report": {"ok": False}}
    _grid_csv(out.with_suffix(".grid.csv"), result)
    return _extension_payload(command, data, problem, result)


def run_lift(data, args, out: Path) -> dict:
    S = _nodes(data["nodes"])
    f = np.array([_complex(v, f"values.{i}") for i, v in enumerate(data["values"])])
    try:
        p = covering.LiftProblem(S, f, data.get("branch_offsets"))
    except covering.CoveringError as exc:
        key = "branch_offsets" if "branch" in str(exc) else "values"
        raise InputError(f"invalid key '{key}': {exc}") from exc
    grid = data.get("grid", {})
    rep = covering.lift_report(p, (grid.get("radial", 100), grid.get("angular", 100)),
                               float(data.get("c", 1.0)))
    lift = covering.clopen_partition_lift(p)
    return {"command": "lift", "problem": data, "report": rep, "g_tilde": lift.g_tilde.to_json()}


def run_gauge(data, args, out: Path) -> dict:
    body = _body(data["body"])
    v = _vectors(data["vectors"], body.dim, "vectors")
    p = np.atleast_1d(body.gauge(v))
    labels = body.classify(v)
    rows = [{"vector": [[float(c.real), float(c.imag)] for c in vec], "gauge": float(g), "class": str(c)}
            for vec, g, c in zip(v, p, labels)]
    return {"command": "gauge", "problem": data, "report": {"ok": True, "table": rows,
            "kernel_inradius": body.kernel_inradius, "lipschitz_bound": body.lipschitz_bound}}


def run_conformal(data, args, out: Path) -> dict:
    prof = data["profile"]
    kind = prof["kind"]
    csv_path = out.with_suffix(".boundary.csv")
    if kind == "calibration":
        N = data.get("N", 1024)
        rep = conformal.calibration_report(N, data.get("points", 1000), data.get("seed", 0))
        rep["ok"] = bool(rep["max_rotation_error"] <= 1e-4 and rep["max_modulus"] <= 1)
        Z = conformal.calibration_map(N)
        t = np.arange(N) / N
        write_csv(csv_path, ["t", "gamma_re", "gamma_im", "preimage_angle"],
                  [t, Z.node_images.real, Z.node_images.imag, Z.preimages])
        return {"command": "conformal", "problem": data, "report": rep}
    try:
        if kind == "parabolic":
            if "c" not in prof:
                raise InputError("invalid key 'profile.c': required for parabolic profiles")
            profile = conformal.parabolic_profile(float(prof["c"]))
        else:
            if "r" not in prof or "theta" not in prof:
                raise InputError("invalid key 'profile.r': table profiles need r and theta")
            profile = conformal.CuspProfile(np.array(prof["r"]), np.array(prof["theta"]))
    except conformal.ConformalError as exc:
        raise InputError(f"invalid key 'profile': {exc}") from exc
    N = data.get("N", 1024)
    try:
        G = conformal.build_cusp_map(profile, N, data.get("shrink", 0.2))
    except conformal.ConformalError as exc:
        if "N too small" in str(exc):
            raise InputError(f"invalid key 'N': {exc}") from exc
        return {"command": "conformal", "problem": data, "error": str(exc), "report": {"ok": False}}
    grid = data.get("audit_grid", 100)
    rep = conformal.verify_containment(G, profile, grid)
    rep.update({"slope": G.slope, "accuracy": G.accuracy, "resolution": G.resolution,
                "z0": [-1.0, 0.0], "z1": [1.0, 0.0]})
    rep["ok"] = bool(rep["ok"] and G.accuracy <= 1e-3)
    corr = conformal.boundary_correspondence(G)
    t, gam, pre = zip(*corr)
    gam = np.array(gam)
    write_csv(csv_path, ["t", "gamma_re", "gamma_im", "preimage_angle"],
              [np.array(t), gam.real, gam.imag, np.array(pre)])
    return {"command": "conformal", "problem": data, "report": rep, "map": G.to_json()}


def run_verify(data, args, out: Path) -> dict:
    command = data["command"]
    if command not in ("interpolate", "hull"):
        raise InputError(f"invalid key 'command': cannot verify {command!r} results")
    stored = data["report"]
    problem_data = data["problem"]
    validate(command, problem_data)
    problem = build_problem(command, problem_data, args)
    if stored.get("constant"):
        rep = engine.constant_extension(problem).report
    else:
        if "h" not in data:
            raise InputError("invalid key 'h': result carries no extension")
        try:
            result = engine.result_from_json(data)
        except (KeyError, TypeError, DiskAlgebraError) as exc:
            raise InputError(f"invalid key 'h': {exc}") from exc
        rep = engine.audit_margins(result, problem)
        tol = problem_data.get("tolerances", {}).get("interp")
        if tol is not None:
            rep["checks"]["interp_user_tolerance"] = rep["interp_residual"] <= tol
            rep["ok"] = all(rep["checks"].values())
    a, b = json.loads(dumps(rep)), json.loads(dumps(stored))
    mismatched = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    return {"command": "verify", "report": {"ok": bool(rep["ok"] and not mismatched),
                                            "recomputed_ok": bool(rep["ok"]),
                                            "mismatched_keys": mismatched,
                                            "recomputed": rep}}


RUNNERS = {"lift": run_lift, "gauge": run_gauge, "conformal": run_conformal, "verify": run_verify}


def run(command: str, data: dict, args, out: Path) -> dict:
    validate(command, data)
    if command in ("interpolate", "hull"):
        return _run_extension(command, data, args, out)
    return RUNNERS[command](data, args, out)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcinterp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--problem", required=True, help="problem JSON (or a result JSON for verify)")
    ap.add_argument("--out", required=True, help="report JSON path; CSV dumps go alongside")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--grid-radial", type=int, default=None)
    ap.add_argument("--grid-angular", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.threads < 1:
            raise InputError("invalid key 'threads': must be >= 1")
        try:
            data = json.loads(Path(args.problem).read_text())
        except OSError as exc:
            raise InputError(f"invalid key 'problem': cannot read {args.problem}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid key '<root>': malformed JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("invalid key '<root>': expected a JSON object")
        if args.command != "verify":
            data = apply_overrides(data, args)
        payload = run(args.command, data, args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(payload))
    ok = bool(payload["report"].get("ok"))
    print(f"{args.command}: {'ok' if ok else 'AUDIT FAILURE'} -> {out}")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
