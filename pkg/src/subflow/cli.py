"""Command-line front end.

Subcommands: ``curve`` (maximal integral curves with CSV traces and
JSON interval sidecars), ``flow`` (per-seed interval report over a seed
grid or sample), ``check`` (algebraic identity checks as a JSON
report), and ``sample`` (membership point sampling).

Exit codes: 0 success, 1 configuration error, 2 numeric or per-seed
failure. Tolerances resolve as CLI flags > SUBFLOW_TOL_* environment
variables > space file > defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import derivation as dv
from . import dspace
from .flow import (
    FlowError,
    IntegralCurve,
    Tolerances,
    flow as run_flow,
    maximal_curve,
)
from .expr import ExprError, parse as parse_expr


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config loading


def _resolve_space_path(spec: str) -> Path:
    path = Path(spec)
    if path.exists():
        return path
    if os.sep not in spec:
        name = spec if spec.endswith(".json") else f"{spec}.json"
        candidate = resources.files("subflow.gallery") / name
        if candidate.is_file():
            return Path(str(candidate))
    raise ConfigError(f"space file not found: {spec}")


def load_config(args) -> tuple[dspace.EmbeddedSpace, dv.Derivation, dict]:
    if not args.space:
        raise ConfigError("--space is required")
    space, raw = dspace.load_space_file(_resolve_space_path(args.space))

    components = None
    if getattr(args, "components", None):
        components = [s.strip() for s in args.components.split(",")]
    elif getattr(args, "derivation", None):
        dpath = Path(args.derivation)
        if not dpath.exists():
            raise ConfigError(f"derivation file not found: {args.derivation}")
        components = json.loads(dpath.read_text())["components"]
    elif "derivation" in raw:
        components = raw["derivation"]["components"]
    if components is None:
        raise ConfigError("no derivation: use --derivation, --components, "
                          "or a space file with a derivation entry")
    try:
        deriv = dv.Derivation.from_strings(space, components)
    except Exception as err:
        raise ConfigError(f"bad derivation components: {err}")
    return space, deriv, raw


def resolve_tolerances(args, raw: dict) -> Tolerances:
    values: dict[str, object] = {}
    names = {f.name for f in dataclass_fields(Tolerances)}
    for name in names:
        if name in raw:
            values[name] = raw[name]
        env = os.environ.get(f"SUBFLOW_TOL_{name.upper()}")
        if env is not None:
            values[name] = env == "1" if name == "project_equalities" else float(env)
    if getattr(args, "horizon", None) is not None:
        values["horizon"] = args.horizon
    if getattr(args, "project", False):
        values["project_equalities"] = True
    typed = {
        k: (bool(v) if k == "project_equalities" else float(v))
        for k, v in values.items()
    }
    return Tolerances(**typed)


def resolve_seeds(args, space: dspace.EmbeddedSpace, raw: dict) -> list[np.ndarray]:
    sources = sum(
        x is not None for x in (args.seeds, args.grid, args.sample)
    )
    if sources > 1:
        raise ConfigError("use exactly one of --seeds, --grid, --sample")
    if args.seeds is not None:
        path = Path(args.seeds)
        if not path.exists():
            raise ConfigError(f"seeds file not found: {args.seeds}")
        data = json.loads(path.read_text())
        return [np.asarray(p, dtype=float) for p in data]
    if args.grid is not None:
        try:
            counts = [int(c) for c in args.grid.lower().split("x")]
        except ValueError:
            raise ConfigError(f"bad grid spec: {args.grid}")
        if len(counts) != space.ambient_dim or any(c < 2 for c in counts):
            raise ConfigError(
                f"grid spec {args.grid} does not match ambient dimension "
                f"{space.ambient_dim}"
            )
        axes = [
            np.linspace(lo, hi, c)
            for (lo, hi), c in zip(space.sample_box, counts)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        return [p for p in points if space.membership(p)]
    if args.sample is not None:
        return space.sample(args.sample, args.seed)
    if "seeds" in raw:
        return [np.asarray(p, dtype=float) for p in raw["seeds"]]
    raise ConfigError("no seeds: use --seeds, --grid, --sample, "
                      "or a space file with a seeds entry")


def _dump_json(data, path: Path | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


def _write_trace(path: Path, seed_index: int, curve: IntegralCurve, dt: float | None):
    n = curve.space.ambient_dim
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed_index", "t"] + [f"x{i}" for i in range(n)])
        width = curve.t_max - curve.t_min
        if width == 0.0:
            ts = [0.0]
        else:
            step = dt if dt else width / 200.0
            count = max(2, int(round(width / step)) + 1)
            ts = np.linspace(curve.t_min, curve.t_max, count)
        for t in ts:
            y = curve(float(t))
            writer.writerow([seed_index, repr(float(t))] + [repr(float(x)) for x in y])


def _sidecar(curve: IntegralCurve) -> dict:
    return {
        "seed": [float(x) for x in curve.seed],
        "t_min": curve.t_min,
        "t_max": curve.t_max,
        "end_reasons": {
            "backward": curve.reason_backward,
            "forward": curve.reason_forward,
        },
        "membership_audit_ok": curve.audit.ok,
    }


# ---------------------------------------------------------------------------
# Subcommands


def cmd_curve(args) -> int:
    space, deriv, raw = load_config(args)
    tol = resolve_tolerances(args, raw)
    seeds = resolve_seeds(args, space, raw)
    if not seeds:
        raise ConfigError("empty seed set")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for i, p in enumerate(seeds):
        try:
            curve = maximal_curve(deriv, p, tol)
        except (FlowError, dspace.SpaceError) as err:
            failures += 1
            _dump_json({"seed": [float(x) for x in p], "error": str(err)},
                       out / f"curve_{i}.json")
            continue
        _write_trace(out / f"curve_{i}.csv", i, curve, args.dt)
        _dump_json(_sidecar(curve), out / f"curve_{i}.json")
    if failures:
        print(f"{failures}/{len(seeds)} seeds failed; see JSON sidecars in {out}",
              file=sys.stderr)
        return 2
    return 0


def cmd_flow(args) -> int:
    space, deriv, raw = load_config(args)
    tol = resolve_tolerances(args, raw)
    seeds = resolve_seeds(args, space, raw)
    if not seeds:
        raise ConfigError("empty seed set")
    result = run_flow(deriv, seeds, tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(result.domain(), out / "intervals.json")
    if args.format == "csv":
        for i, curve in enumerate(result.curves):
            if curve is not None:
                _write_trace(out / f"curve_{i}.csv", i, curve, args.dt)
    if result.errors:
        print(f"{len(result.errors)}/{len(seeds)} seeds failed; "
              f"see {out / 'intervals.json'}", file=sys.stderr)
        return 2
    return 0


KNOWN_CHECKS = ("leibniz", "chain_rule", "inverse_rule", "hadamard",
                "tangency", "point_determined")


def _function_corpus(n: int) -> list[str]:
    base = ["x0", "x0^2", "sin(x0)", "exp(0.3*x0)", "1 + x0^2"]
    if n >= 2:
        base += ["x1", "x0*x1", "cos(x1)", "x0^2 + x1^2", "tanh(x1)"]
    if n >= 3:
        base += ["x2", "x0*x2 + x1"]
    return base


def _outer_corpus() -> list[tuple[str, int]]:
    # (expression over y0..y{k-1}, arity k)
    return [
        ("y0*y1", 2),
        ("sin(y0)", 1),
        ("y0^2 + y1", 2),
        ("exp(0.2*y0)*cos(y1)", 2),
        ("tanh(y0 + y1)", 2),
    ]


def _aggregate(name: str, reports: list[dv.CheckReport]) -> dict:
    worst = max(reports, key=lambda r: r.max_residual)
    status = "PASS"
    if any(r.status == "FAIL" for r in reports):
        status = "FAIL"
    elif any(r.status == "WARN" for r in reports):
        status = "WARN"
    out = worst.to_dict()
    out.update({"check": name, "status": status, "cases": len(reports)})
    return out


def run_checks(
    space: dspace.EmbeddedSpace,
    deriv: dv.Derivation,
    names: list[str],
    samples: int = 100,
    seed: int = 0,
) -> list[dict]:
    n = space.ambient_dim
    funcs = [space.restrict(parse_expr(s)) for s in _function_corpus(n)]
    coords = [space.restrict(parse_expr(f"x{i}")) for i in range(min(n, 2))]
    outer_names = {"y0": 0, "y1": 1}
    results: list[dict] = []
    for name in names:
        if name == "leibniz":
            reports = [
                dv.leibniz_check(deriv, f, g, samples, seed)
                for f in funcs[:4]
                for g in funcs[:4]
            ]
            results.append(_aggregate(name, reports))
        elif name == "chain_rule":
            reports = []
            for src, arity in _outer_corpus():
                outer = parse_expr(src, outer_names)
                inner = (coords * 2)[:arity] if len(coords) < arity else coords[:arity]
                reports.append(
                    dv.chain_rule_check(deriv, outer, inner, samples, seed)
                )
            results.append(_aggregate(name, reports))
        elif name == "inverse_rule":
            invertibles = [space.restrict(parse_expr(s))
                           for s in ("3 + x0", "4 + sin(x0)")]
            reports = [
                dv.inverse_rule_check(deriv, a, samples, seed) for a in invertibles
            ]
            results.append(_aggregate(name, reports))
        elif name == "hadamard":
            rng = np.random.default_rng(seed)
            worst = 0.0
            cases = 0
            for src in _function_corpus(n)[:6]:
                f = parse_expr(src)
                k = max(f.max_coord + 1, 1)
                for _ in range(20):
                    b = rng.uniform(-1.0, 1.0, k)
                    y = rng.uniform(-1.0, 1.0, k)
                    decomp = dv.hadamard_decompose(f, b)
                    from . import expr as ex

                    worst = max(worst, abs(decomp.reconstruct(y) - ex.evaluate(f, y)))
                    cases += 1
            results.append({
                "check": name,
                "status": "PASS" if worst <= 1e-8 else "FAIL",
                "max_residual": worst,
                "worst_point": None,
                "samples": cases,
                "seed": seed,
            })
        elif name == "tangency":
            results.append(dv.tangency_check(deriv, samples, seed).to_dict())
        elif name == "point_determined":
            points = space.sample(20, seed)
            reports = []
            for src, arity in _outer_corpus():
                outer = parse_expr(src, outer_names)
                inner = (coords * 2)[:arity] if len(coords) < arity else coords[:arity]
                reports.append(
                    dv.point_determined_check(deriv, outer, inner, points)
                )
            results.append(_aggregate(name, reports))
        else:
            raise ConfigError(f"unknown check: {name}")
    return results


def cmd_check(args) -> int:
    space, deriv, raw = load_config(args)
    selected = args.checks or "all"
    names = list(KNOWN_CHECKS) if selected == "all" else [
        s.strip() for s in selected.split(",")
    ]
    for name in names:
        if name not in KNOWN_CHECKS:
            raise ConfigError(f"unknown check: {name}")
    reports = run_checks(space, deriv, names, samples=args.samples, seed=args.seed)
    passing = {"PASS"} if args.strict_tangency else {"PASS", "WARN"}
    all_ok = all(r["status"] in passing for r in reports)
    payload = {"space": raw.get("name", args.space), "checks": reports,
               "all_passed": all_ok}
    _dump_json(payload, Path(args.out) if args.out else None)
    return 0 if all_ok else 2


def cmd_sample(args) -> int:
    space, _raw = dspace.load_space_file(_resolve_space_path(args.space))
    count = args.sample if args.sample is not None else 100
    points = space.sample(count, args.seed)
    _dump_json([[float(x) for x in p] for p in points],
               Path(args.out) if args.out else None)
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subflow",
        description="Flows of derivations on embedded differential spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, with_derivation: bool = True):
        p.add_argument("--space", required=True,
                       help="space spec file (JSON/TOML) or gallery name")
        if with_derivation:
            p.add_argument("--derivation", help="derivation spec file")
            p.add_argument("--components",
                           help="comma-separated component expressions")
        p.add_argument("--seeds", help="JSON file with a list of seed points")
        p.add_argument("--grid", help="per-axis grid spec over the sample box, "
                                      "e.g. 21x21")
        p.add_argument("--sample", type=int, help="number of sampled seeds")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--horizon", type=float, help="integration horizon")
        p.add_argument("--project", action="store_true",
                       help="post-step Newton projection onto equality sets")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--dt", type=float, help="trace sampling step")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_curve = sub.add_parser("curve", help="compute maximal integral curves")
    common(p_curve)
    p_curve.set_defaults(func=cmd_curve)

    p_flow = sub.add_parser("flow", help="compute the flow over a seed set")
    common(p_flow)
    p_flow.set_defaults(func=cmd_flow)

    p_check = sub.add_parser("check", help="run algebraic identity checks")
    p_check.add_argument("--space", required=True)
    p_check.add_argument("--derivation")
    p_check.add_argument("--components")
    p_check.add_argument("--checks", help="comma-separated check names or 'all'")
    p_check.add_argument("--samples", type=int, default=100)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--strict-tangency", action="store_true",
                         help="treat tangency WARN as failure")
    p_check.add_argument("--out", help="write the JSON report here "
                                       "instead of stdout")
    p_check.set_defaults(func=cmd_check)

    p_sample = sub.add_parser("sample", help="sample membership points")
    p_sample.add_argument("--space", required=True)
    p_sample.add_argument("--sample", type=int, help="number of points")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out")
    p_sample.set_defaults(func=cmd_sample)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ConfigError, dspace.SpaceError, ExprError,
            json.JSONDecodeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
