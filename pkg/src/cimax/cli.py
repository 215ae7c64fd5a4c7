"""Command-line entry point: run scenarios, emit CSV/JSON artifacts.

Subcommands: trajectory, sweep, vectorfield, lab, validate. Every output
is written atomically (temp file + rename) inside --out, and every run is
fully determined by (config, seed). The seed resolves in this order:
--seed flag, CIMAX_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from typing import Iterable, Optional, Sequence

from . import __version__
from .config import (
    ConfigError,
    ScenarioConfig,
    config_hash,
    load_config,
    validate_config,
)
from .scenarios import (
    default_vector_grid,
    expected_agent_decisions,
    run_lab_alternating,
    run_lab_suite,
    run_success_sweep,
    run_trajectory,
    run_vector_field,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

SWEEP_CSV_BY_KIND = {"discrete": "fig5.csv", "gradient": "fig8.csv"}
VECTORFIELD_CSV_BY_KIND = {"discrete": "fig6.csv", "gradient": "fig9.csv", "cloud": "fig10.csv"}


def _write_atomic(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        target = os.path.join(out_dir, name)
        os.replace(tmp, target)
        return target
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_meta(out_dir: str, command: str, cfg: ScenarioConfig, seed: int) -> None:
    meta = {
        "command": command,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "version": __version__,
    }
    _write_atomic(out_dir, "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CIMAX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"CIMAX_SEED must be an integer, got {env!r}") from exc
    return 0


def _load_valid_config(path: str) -> ScenarioConfig:
    cfg = load_config(path)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problems = validate_config(cfg)
    if problems:
        for problem in problems:
            print(f"invalid: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {args.config} (hash {config_hash(cfg)})")
    return EXIT_OK


def cmd_trajectory(args: argparse.Namespace) -> int:
    cfg = _load_valid_config(args.config)
    seed = _resolve_seed(args)
    result = run_trajectory(
        cfg, seed, collect_agent_trace=True, collect_decision_log=True
    )
    digest = result.config_digest
    _write_atomic(
        args.out,
        "trajectory.csv",
        _csv_text(
            ["t", "agent_id", "x", "y", "mode", "measurement"],
            result.agent_trace or [],
        ),
    )
    _write_atomic(
        args.out,
        "periods.csv",
        _csv_text(
            [
                "period",
                "t_steps",
                "com_x",
                "com_y",
                "collective_direction",
                "resultant_length",
                "mean_diversity",
                "seed",
                "config_hash",
            ],
            [
                (
                    r.period,
                    r.t_steps,
                    r.com_x,
                    r.com_y,
                    r.collective_direction,
                    r.resultant_length,
                    r.mean_diversity,
                    seed,
                    digest,
                )
                for r in result.records
            ],
        ),
    )
    _write_atomic(
        args.out,
        "fig4b.csv",
        _csv_text(
            ["period", "mean_diversity"],
            [(t, v) for t, v in result.diversity.samples],
        ),
    )
    bins = 2 if cfg.scenario.kind == "lab" else cfg.decision.bins
    _write_atomic(
        args.out,
        "decisions.csv",
        _csv_text(
            ["period", "collective_direction", "agent_id", "opinion"]
            + [f"w{k}" for k in range(bins)],
            result.decision_rows,
        ),
    )
    _write_meta(args.out, "trajectory", cfg, seed)
    state = "success" if result.success else "no success"
    print(
        f"trajectory: {len(result.records)} periods, {state}"
        + (f" at t={result.success_time_steps}" if result.success else "")
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_valid_config(args.config)
    seed = _resolve_seed(args)
    result = run_success_sweep(
        cfg, seed, runs_per_point=args.runs, jobs=args.jobs
    )
    name = SWEEP_CSV_BY_KIND.get(cfg.scenario.kind, "sweep.csv")
    _write_atomic(
        args.out,
        name,
        _csv_text(
            [
                "x_init",
                "runs",
                "successes",
                "success_rate",
                "mean_success_time",
                "ci_low",
                "ci_high",
                "seed",
                "config_hash",
            ],
            [
                (
                    p.x_init,
                    p.runs,
                    p.successes,
                    p.success_rate,
                    p.mean_success_time,
                    p.ci_low,
                    p.ci_high,
                    result.seed,
                    result.config_digest,
                )
                for p in result.points
            ],
        ),
    )
    summary = {
        "seed": result.seed,
        "config_hash": result.config_digest,
        "points": [
            {
                "x_init": p.x_init,
                "runs": p.runs,
                "success_rate": p.success_rate,
                "mean_success_time": p.mean_success_time,
                "ci95": [p.ci_low, p.ci_high],
            }
            for p in result.points
        ],
    }
    _write_atomic(
        args.out, "sweep_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    _write_meta(args.out, "sweep", cfg, seed)
    for p in result.points:
        print(f"x_init={p.x_init:+.2f}: success {p.successes}/{p.runs}")
    return EXIT_OK


def cmd_vectorfield(args: argparse.Namespace) -> int:
    cfg = _load_valid_config(args.config)
    seed = _resolve_seed(args)
    points = run_vector_field(cfg, seed)
    name = VECTORFIELD_CSV_BY_KIND.get(cfg.scenario.kind, "vectorfield.csv")
    digest = config_hash(cfg)
    _write_atomic(
        args.out,
        name,
        _csv_text(
            ["x", "y", "direction", "resultant_length", "seed", "config_hash"],
            [
                (p.x, p.y, p.direction, p.resultant_length, seed, digest)
                for p in points
            ],
        ),
    )
    _write_meta(args.out, "vectorfield", cfg, seed)
    print(f"vectorfield: {len(points)} arrows")
    return EXIT_OK


def cmd_lab(args: argparse.Namespace) -> int:
    cfg = _load_valid_config(args.config)
    if cfg.scenario.kind != "lab":
        raise ConfigError("lab subcommand needs scenario.kind = 'lab'")
    seed = _resolve_seed(args)
    runs = run_lab_suite(cfg, seed)
    digest = config_hash(cfg)
    rows = []
    for run in runs:
        pattern = "".join(str(v) for v in run.pattern)
        for agent_id, (decision, expected) in enumerate(
            zip(run.decisions, run.expected)
        ):
            rows.append(
                (
                    pattern,
                    run.repeat,
                    agent_id,
                    decision,
                    expected,
                    int(decision == expected),
                    seed,
                    digest,
                )
            )
    _write_atomic(
        args.out,
        "lab.csv",
        _csv_text(
            [
                "pattern",
                "repeat",
                "agent_id",
                "decision",
                "expected",
                "correct",
                "seed",
                "config_hash",
            ],
            rows,
        ),
    )
    alternating = run_lab_alternating(cfg, seed)
    summary = {
        "seed": seed,
        "config_hash": digest,
        "runs": len(runs),
        "correct_runs": sum(r.correct for r in runs),
        "alternating_repeats": len(alternating),
        "alternating_correct": sum(r.correct for r in alternating),
    }
    _write_atomic(
        args.out, "lab_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    _write_meta(args.out, "lab", cfg, seed)
    print(
        f"lab: {summary['correct_runs']}/{summary['runs']} correct, "
        f"alternating {summary['alternating_correct']}/{summary['alternating_repeats']}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimax",
        description="Swarm simulator: collective movement toward measurement diversity.",
    )
    parser.add_argument("--version", action="version", version=f"cimax {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_runs in (
        ("trajectory", cmd_trajectory, False),
        ("sweep", cmd_sweep, True),
        ("vectorfield", cmd_vectorfield, False),
        ("lab", cmd_lab, False),
        ("validate", cmd_validate, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.set_defaults(fn=fn)
        if name != "validate":
            p.add_argument("--seed", type=int, default=None, help="run seed (default: CIMAX_SEED or 0)")
            p.add_argument("--out", default="out", help="output directory")
        if needs_runs:
            p.add_argument("--runs", type=int, default=None, help="runs per sweep point")
            p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on unknown flags; config-surface errors are 1 here.
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure contract: exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
