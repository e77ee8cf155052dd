"""Command-line entry point: ``rsuloc {run,sweep,bench,oracle}``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 a run
failed, 1 anything else. Errors go to stderr as one JSON object per line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import yaml

from rsuloc.errors import ConfigurationError, RsulocError, RunError
from rsuloc.metrics import format_value, write_report_csv
from rsuloc.runner.config import ExperimentConfig, SweepSpec, config_to_dict, load_config, reference_scale_config
from rsuloc.runner.experiment import bench, oracle_compare, run_experiment, trajectory_rows

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_RUN = 0, 1, 2, 3


def write_rows(rows, path, columns: Sequence[str]) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row.get(c, "")) for c in columns])
            n += 1
    return n


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    return cols


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsuloc", description="RSU-based vehicle localization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="YAML experiment config (default: built-in reference-scale scenario)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
        sp.add_argument("--methods", help="comma-separated methods, e.g. cv2x_loca,sdp,wlls")
        sp.add_argument("--runs", type=int, help="override the number of runs")

    for name, text in (("run", "run a single scenario"), ("sweep", "sweep one parameter")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        sp.add_argument("--plots", action="store_true", help="also render PNG figures into --out")
        if name == "sweep":
            sp.add_argument("--param", help="sweep parameter (overrides the config sweep)")
            sp.add_argument("--values", help="comma-separated sweep values")

    sp = sub.add_parser("bench", help="time per-epoch coarse fixes")
    common(sp)
    sp.add_argument("--n-solves", type=int, default=100)

    sp = sub.add_parser("oracle", help="compare the relaxation with the grid oracle")
    common(sp)
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--step", type=float, default=0.25)
    return p


def _parse_value(text: str):
    text = text.strip()
    if text.lower() in ("none", "null", "inf"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else reference_scale_config()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.runs is not None:
        updates["runs"] = args.runs
    if args.methods:
        updates["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "param", None):
        if not args.values:
            raise ConfigurationError("--param needs --values")
        updates["sweep"] = SweepSpec(args.param, tuple(_parse_value(v) for v in args.values.split(",")))
    return replace(cfg, **updates) if updates else cfg


def _emit_error(kind: str, exc: BaseException, **extra) -> None:
    payload = {"error": kind, "message": str(exc), **extra}
    print(json.dumps(payload, default=str), file=sys.stderr)


def _write_config(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.yaml").write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False), encoding="utf-8")


def _cmd_experiment(args, cfg: ExperimentConfig) -> int:
    if args.command == "sweep" and cfg.sweep is None:
        raise ConfigurationError("sweep needs a 'sweep' block in the config or --param/--values")
    if args.command == "run" and cfg.sweep is not None:
        cfg = replace(cfg, sweep=None)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    result = run_experiment(cfg, jobs=args.jobs)
    extra = ["n"] + (["sweep_param", "sweep_value"] if cfg.sweep else [])
    write_report_csv(result.rows(), out / "report.csv", extra)
    summary = result.summary_rows()
    write_rows(summary, out / "summary.csv", _columns(summary))
    diag = [{"run": r.run, "sweep_value": r.sweep_value, **r.diagnostics} for r in result.runs]
    write_rows(diag, out / "diagnostics.csv", _columns(diag))
    traj_cols = ["sweep_value", "method", "t", "x_true", "y_true", "x_est", "y_est"]
    write_rows(trajectory_rows(result), out / "trajectory.csv", traj_cols)
    _write_config(cfg, out)
    if args.plots:
        from rsuloc.runner.plots import render_all

        render_all(result, out)
    for row in summary:
        label = f" {row['sweep_param']}={row['sweep_value']}" if "sweep_param" in row else ""
        print(f"{row['method']}{label}: ALE {row['ale_mean']:.3f} m over {row['runs']} runs")
    return EXIT_OK


def _cmd_bench(args, cfg: ExperimentConfig) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    row = bench(cfg, args.n_solves)
    write_rows([row], args.out / "bench.csv", list(row))
    print(f"coarse_fix: mean {row['mean_ms']:.3f} ms per epoch over {row['n_solves']} solves "
          f"(batched {row['batched_mean_ms']:.3f} ms)")
    return EXIT_OK


def _cmd_oracle(args, cfg: ExperimentConfig) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    rows = oracle_compare(cfg, args.epochs, args.step)
    write_rows(rows, args.out / "oracle.csv", list(rows[0]))
    bad = sum(not r["lower_bound_ok"] for r in rows)
    print(f"oracle: {len(rows)} epochs, {bad} lower-bound violations")
    return EXIT_OK if bad == 0 else EXIT_ERROR


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command in ("run", "sweep"):
            return _cmd_experiment(args, cfg)
        if args.command == "bench":
            return _cmd_bench(args, cfg)
        return _cmd_oracle(args, cfg)
    except ConfigurationError as exc:
        _emit_error("configuration", exc)
        return EXIT_CONFIG
    except RunError as exc:
        _emit_error("run", exc.cause, scenario=exc.scenario, run=exc.run, type=type(exc.cause).__name__)
        return EXIT_RUN
    except RsulocError as exc:
        _emit_error(type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
