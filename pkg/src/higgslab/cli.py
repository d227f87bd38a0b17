"""Command-line front end: experiment configs in, CSV artifacts out.

Subcommands: solve, sweep, wkb, energy, selftest.  Configurations are JSON
documents validated against a closed schema (unknown keys are rejected).
Every output CSV carries a schema/version header and the hash of the
resolved configuration; bodies are deterministic for a fixed config and
seed (the generated= line is the only timestamped content).

Exit codes: 0 success, 2 usage/config error, 3 solver non-convergence,
4 internal inconsistency, 1 selftest failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, HiggsLabError, InternalInconsistencyError, NonConvergenceError
from .fields import HiggsField, PathSpec
from .grid import Grid
from .solver import SolverConfig, solve_ray
from .measures import run_decay_sweep
from .energy import energy_comparison_sweep, pullback_tensors
from .transport import wkb_report

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

BOUNDARY_CAVEAT = (
    "harmonic metric fixed by Dirichlet identity data on the square boundary; "
    "fitted constants depend on this choice, decay verdicts do not"
)

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["field", "grid", "r_schedule"],
    "properties": {
        "field": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "inline": {"type": "object"}},
            "minProperties": 1,
            "maxProperties": 1,
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["half_width", "points_per_side"],
            "properties": {
                "half_width": {"type": "number", "exclusiveMinimum": 1.0},
                "points_per_side": {"type": "integer", "minimum": 5},
            },
        },
        "r_schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "start": {"type": "number", "exclusiveMinimum": 0},
                "stop": {"type": "number", "exclusiveMinimum": 0},
                "factor": {"type": "number", "exclusiveMinimum": 1.0},
                "step": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "region_radius": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "paths": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["start", "end"],
                "properties": {
                    "start": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "end": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "samples": {"type": "integer", "minimum": 5},
                },
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hitchin_residual": {"type": "number", "exclusiveMinimum": 0},
                "transport": {"type": "number", "exclusiveMinimum": 0},
                "fit_floor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "region_radius": 0.5,
    "paths": [],
    "tolerances": {"hitchin_residual": 1e-9, "transport": 1e-8, "fit_floor": 1e-12},
    "seed": 0,
}


def load_config(path, grid_override=None, rmax=None):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if jsonschema is not None:
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config schema violation: {exc.message}") from exc
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    tol = dict(DEFAULTS["tolerances"])
    tol.update(raw.get("tolerances", {}))
    cfg["tolerances"] = tol
    if grid_override is not None:
        cfg["grid"] = dict(cfg["grid"], points_per_side=int(grid_override))
    if rmax is not None:
        cfg["_rmax"] = float(rmax)
    cfg["_hash"] = hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:12]
    return cfg


def resolve_field(cfg, config_dir: Path) -> HiggsField:
    spec = cfg["field"]
    if "inline" in spec:
        return HiggsField.from_json(json.dumps(spec["inline"]))
    return HiggsField.from_json((config_dir / spec["path"]).read_text())


def resolve_schedule(cfg):
    rs = cfg["r_schedule"]
    if "values" in rs:
        vals = [float(v) for v in rs["values"]]
    elif "factor" in rs:
        vals, r = [], rs["start"]
        while r <= rs["stop"] * (1 + 1e-12):
            vals.append(float(r))
            r *= rs["factor"]
    elif "step" in rs:
        vals = list(np.arange(rs["start"], rs["stop"] + rs["step"] * 0.5, rs["step"]))
    else:
        raise ConfigError("r_schedule needs 'values', 'factor', or 'step'")
    rmax = cfg.get("_rmax")
    if rmax is not None:
        vals = [v for v in vals if v <= rmax]
    if not vals:
        raise ConfigError("empty coupling schedule")
    return sorted(vals)


def resolve_paths(cfg):
    out = []
    for p in cfg["paths"]:
        z0 = complex(p["start"][0], p["start"][1])
        z1 = complex(p["end"][0], p["end"][1])
        out.append(PathSpec.line(z0, z1, p.get("samples", 201)))
    return out


def solver_config(cfg) -> SolverConfig:
    return SolverConfig(tol_factor=cfg["tolerances"]["hitchin_residual"])


# ---------------------------------------------------------------------------
# CSV writing


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def write_csv(path: Path, schema: str, cfg_hash: str, header, rows, extra_comments=()):
    lines = [f"# schema={schema}/v1, config={cfg_hash}"]
    lines.append(f"# generated={datetime.now(timezone.utc).isoformat()}")
    for c in extra_comments:
        lines.append(f"# {c}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg, outdir: Path, config_dir: Path, jobs: int) -> int:
    phi = resolve_field(cfg, config_dir)
    grid = Grid(cfg["grid"]["half_width"], cfg["grid"]["points_per_side"])
    targets = resolve_schedule(cfg)
    metrics, reports = solve_ray(phi, targets, grid, solver_config(cfg))
    summary = []
    for R in targets:
        ck = outdir / f"metric_R{_fmt(R)}.npz"
        outdir.mkdir(parents=True, exist_ok=True)
        metrics[R].save(ck)
        rep = reports[R]
        summary.append(
            {
                "R": R,
                "checkpoint": ck.name,
                "residual_sup": rep.residual_sup,
                "tolerance": rep.tolerance,
                "newton_iterations": rep.newton_iterations,
                "continuation_steps": rep.continuation_steps,
                "converged": rep.converged,
            }
        )
    (outdir / "solve_report.json").write_text(
        json.dumps({"config": cfg["_hash"], "solves": summary}, indent=2)
    )
    print(f"wrote {len(targets)} checkpoints and solve_report.json to {outdir}")
    return 0


def cmd_sweep(cfg, outdir: Path, config_dir: Path, jobs: int) -> int:
    phi = resolve_field(cfg, config_dir)
    grid = Grid(cfg["grid"]["half_width"], cfg["grid"]["points_per_side"])
    targets = resolve_schedule(cfg)
    result = run_decay_sweep(
        phi,
        targets,
        grid,
        solver_config(cfg),
        region_radius=cfg["region_radius"],
        fit_floor=cfg["tolerances"]["fit_floor"],
        jobs=jobs,
    )
    summary_rows = []
    for q, sw in sorted(result.sweeps.items()):
        rows = [
            (R, v, int(c))
            for R, v, c in zip(sw.R_values, sw.measurements, sw.censored)
        ]
        write_csv(
            outdir / f"decay_{q}.csv",
            "decay",
            cfg["_hash"],
            ("R", "value", "censored"),
            rows,
            extra_comments=(f"quantity={q}", f"caveat={BOUNDARY_CAVEAT}"),
        )
        summary_rows.append(
            (q, sw.fit_model, sw.fit_C, sw.fit_c, sw.fit_residual, sw.floor,
             int(np.sum(~sw.censored)))
        )
    write_csv(
        outdir / "summary.csv",
        "summary",
        cfg["_hash"],
        ("quantity", "model", "C", "c", "residual", "floor", "n_fit"),
        summary_rows,
        extra_comments=(f"caveat={BOUNDARY_CAVEAT}",),
    )
    print(f"wrote {len(result.sweeps)} decay CSVs and summary.csv to {outdir}")
    return 0


def cmd_wkb(cfg, outdir: Path, config_dir: Path, jobs: int) -> int:
    phi = resolve_field(cfg, config_dir)
    grid = Grid(cfg["grid"]["half_width"], cfg["grid"]["points_per_side"])
    targets = resolve_schedule(cfg)
    paths = resolve_paths(cfg)
    if not paths:
        raise ConfigError("wkb requires at least one path in the config")
    metrics, _ = solve_ray(phi, targets, grid, solver_config(cfg))
    n = phi.rank

    def run_one(args):
        k, gamma = args
        rows = []
        for R in targets:
            rpt = wkb_report(phi, metrics[R], R, gamma)
            rows.append(
                (R, *rpt.beta, *rpt.alpha, rpt.discrepancy, *rpt.wedge_lognorms)
            )
        return k, rows

    tasks = list(enumerate(paths))
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_one, tasks))
    else:
        results = [run_one(t) for t in tasks]
    header = (
        ["R"]
        + [f"beta_{i}" for i in range(1, n + 1)]
        + [f"alpha_{i}" for i in range(1, n + 1)]
        + ["discrepancy"]
        + [f"wedge_{i}" for i in range(1, n + 1)]
    )
    for k, rows in sorted(results):
        write_csv(outdir / f"wkb_path{k}.csv", "wkb", cfg["_hash"], header, rows)
    print(f"wrote {len(paths)} wkb CSVs to {outdir}")
    return 0


def cmd_energy(cfg, outdir: Path, config_dir: Path, jobs: int) -> int:
    phi = resolve_field(cfg, config_dir)
    grid = Grid(cfg["grid"]["half_width"], cfg["grid"]["points_per_side"])
    targets = resolve_schedule(cfg)
    es = energy_comparison_sweep(
        phi,
        targets,
        grid,
        solver_config(cfg),
        region_radius=cfg["region_radius"],
        fit_floor=cfg["tolerances"]["fit_floor"],
    )
    sw = es.sweep
    write_csv(
        outdir / "decay_energy_gap.csv",
        "decay",
        cfg["_hash"],
        ("R", "value", "censored"),
        [(R, v, int(c)) for R, v, c in zip(sw.R_values, sw.measurements, sw.censored)],
        extra_comments=("quantity=energy_gap", f"caveat={BOUNDARY_CAVEAT}"),
    )
    t = es.tensors[max(targets)]
    mask = grid.interior_mask()
    for comp in ("g_mixed", "toral_mixed", "u_part"):
        vals = getattr(t, comp)
        rows = [
            (t.x[i, j], t.y[i, j], vals[i, j])
            for i, j in zip(*np.nonzero(mask))
        ]
        write_csv(
            outdir / f"tensor_{comp}.csv",
            "heatmap",
            cfg["_hash"],
            ("x", "y", "value"),
            rows,
            extra_comments=(f"component={comp}", f"R={_fmt(t.R)}"),
        )
    write_csv(
        outdir / "summary.csv",
        "summary",
        cfg["_hash"],
        ("quantity", "model", "C", "c", "residual", "floor", "n_fit"),
        [("energy_gap", sw.fit_model, sw.fit_C, sw.fit_c, sw.fit_residual, sw.floor,
          int(np.sum(~sw.censored)))],
    )
    print(f"wrote energy gap sweep and 3 tensor CSVs to {outdir}")
    return 0


def cmd_selftest(cfg, outdir: Path, config_dir: Path, jobs: int) -> int:
    from . import selftest

    failures = selftest.run(verbose=True)
    return 1 if failures else 0


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "wkb": cmd_wkb,
    "energy": cmd_energy,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="higgslab",
        description="harmonic-metric experiments: solve, decay sweeps, WKB transport, energy tensors",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name != "selftest":
            p.add_argument("--config", required=True, help="experiment JSON document")
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=None, help="worker count (env HIGGSLAB_JOBS)")
        p.add_argument("--grid", type=int, default=None, help="override points_per_side")
        p.add_argument("--rmax", type=float, default=None, help="truncate the coupling schedule")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("HIGGSLAB_JOBS", os.cpu_count() or 1))
    try:
        if args.command == "selftest":
            return cmd_selftest(None, None, None, jobs)
        cfg = load_config(args.config, grid_override=args.grid, rmax=args.rmax)
        outdir = Path(args.out)
        config_dir = Path(args.config).resolve().parent
        return COMMANDS[args.command](cfg, outdir, config_dir, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(f"  last residual: {exc.report.residual_sup:.3e}", file=sys.stderr)
        return 3
    except InternalInconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return 4
    except HiggsLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
