"""Command line entry point: ``ijsim {sweep,compare,demo,optimize}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema

from .analytic import AnalyticParams, InfeasibleError
from .channel import ChannelSpec
from .harness import (
    ConstraintViolation,
    ExperimentConfig,
    corrupt_payload_demo,
    run_comparison,
    run_optimizer,
    run_sweep,
)
from .jamming import SCHEMES

_NUM = {"type": "number"}
_GAIN = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "payload_path": {"type": ["string", "null"]},
        "schemes": {"type": "array", "items": {"enum": list(SCHEMES)}, "minItems": 1},
        "e_j_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "energy_unit": {"enum": ["htltf", "abs"]},
        "rho_grid": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "minItems": 1,
        },
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "uniqueItems": True},
        "frames": {"type": "integer", "minimum": 1},
        "full_scale": {"type": "boolean"},
        "n_pulse": {"type": "integer", "minimum": 1},
        "corruption_factor": {"type": "number", "exclusiveMinimum": 0},
        "payload_seed": {"type": "integer"},
        "out_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "demo_rho": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h_ab": _GAIN,
                "h_ae": _GAIN,
                "h_jb": _GAIN,
                "h_je": _GAIN,
                "n0_bob": {"type": "number", "minimum": 0},
                "n0_eve": {"type": "number", "minimum": 0},
                "sync_offset_samples": {"type": "integer"},
            },
        },
        "analytic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "w_min_jsr": {"type": "number", "minimum": 0},
                "signal_power": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


def _gain(v):
    return complex(v[0], v[1]) if isinstance(v, list) else v


def config_from_dict(d: dict) -> ExperimentConfig:
    jsonschema.validate(d, CONFIG_SCHEMA)
    d = dict(d)
    if "channel" in d:
        d["channel"] = ChannelSpec(**{k: _gain(v) for k, v in d["channel"].items()})
    if "analytic" in d:
        d["analytic"] = AnalyticParams(**d["analytic"])
    for key in ("schemes", "e_j_grid", "rho_grid", "seeds"):
        if key in d:
            d[key] = tuple(d[key])
    return ExperimentConfig(**d)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x)


def _seeds(s: str) -> tuple[int, ...]:
    if "-" in s and "," not in s:
        a, b = s.split("-")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(x) for x in s.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ijsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("sweep", "scheme x energy x proportion x seed sweep (sweep.csv, analytic.csv)"),
        ("compare", "best SER per scheme and energy (comparison.csv)"),
        ("demo", "write Eve's recovered payload per scheme and energy"),
        ("optimize", "analytic SEREE grid search (optimizer.json)"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--payload", help="binary file to transmit")
        sp.add_argument("--schemes", type=lambda s: tuple(s.split(",")))
        sp.add_argument("--energy-grid", type=_floats)
        sp.add_argument("--energy-unit", choices=("htltf", "abs"))
        sp.add_argument("--rho-grid", type=_floats)
        sp.add_argument("--seeds", type=_seeds, help="comma list or inclusive range a-b")
        sp.add_argument("--frames", type=int)
        sp.add_argument("--out")
        sp.add_argument("--full-scale", action="store_true", default=None)
        sp.add_argument("--workers", type=int)
        if name == "optimize":
            sp.add_argument("--budget", type=float, required=True, help="available jamming energy")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config is not None:
        cfg = config_from_dict(json.loads(args.config.read_text()))
    overrides = {
        "payload_path": args.payload,
        "schemes": args.schemes,
        "e_j_grid": args.energy_grid,
        "energy_unit": args.energy_unit,
        "rho_grid": args.rho_grid,
        "seeds": args.seeds,
        "frames": args.frames,
        "out_dir": args.out,
        "full_scale": args.full_scale,
        "workers": args.workers,
    }
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, jsonschema.ValidationError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)

    try:
        if args.command == "sweep":
            report = run_sweep(cfg)
            report.write(out)
            print(f"{len(report.rows)} rows -> {out / 'sweep.csv'}")
        elif args.command == "compare":
            report = run_sweep(cfg)
            report.write(out)
            for row in run_comparison(cfg, report):
                print(f"{row['scheme']:7s} e_j={row['e_j']:<12g} best_rho={row['best_rho']:<8.4g} ser={row['best_ser']:.5f}")
        elif args.command == "demo":
            for row in corrupt_payload_demo(cfg):
                print(f"{row['scheme']:7s} e_j={row['e_j']:<12g} bytes differing={row['diff_fraction']:.4f}  {row['file']}")
        elif args.command == "optimize":
            res = run_optimizer(cfg, args.budget)
            print(json.dumps({k: res[k] for k in ("scheme", "params", "seree", "w", "constraints")}, indent=2))
    except ConstraintViolation as exc:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "constraint_violation.json"
        path.write_text(json.dumps({"error": str(exc), "rows": exc.rows}, indent=2) + "\n")
        print(f"constraint violation: {exc}; report in {path}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
