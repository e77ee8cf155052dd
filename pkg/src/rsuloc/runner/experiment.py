"""Seeded Monte Carlo experiments over the full localization pipeline.

One run: build the road (or a fixed geometry case) and ground truth, draw
per-RSU exponents, estimate them from anchor messages, simulate every
epoch's measurements, match them into epochs, compute coarse fixes, filter,
evaluate the baselines and score everything against the truth.

Run ``r`` of a config with seed ``s`` draws from
``numpy.random.SeedSequence([s, r])``, split into independent streams for
the environment, the anchor messages and the vehicle measurements. Sweep
values reuse the same run seeds, so results are paired across values.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from rsuloc import baselines
from rsuloc.channel import ChannelDiagnostics, simulate_epoch, to_model_convention
from rsuloc.coarse.estimator import EstimatorInputs, GridBox, grid_argmin, nonconvex_objective
from rsuloc.coarse.fix import PositionFix, coarse_fix, coarse_fix_batch
from rsuloc.coarse.sdp import build_sdp, solve_sdp
from rsuloc.dataproc import MatchedEpoch, match_epochs
from rsuloc.errors import DomainError, GammaUnavailableError, RsulocError, RunError
from rsuloc.metrics import ErrorReport, compute_report, report_row
from rsuloc.plecal import GAMMA_MAX, GAMMA_MIN, estimate_gamma, simulate_anchor_observations
from rsuloc.runner.config import ExperimentConfig
from rsuloc.scenario import (
    RsuNode,
    Side,
    Trajectory,
    deploy_rsus,
    generate_trajectory,
    static_trajectory,
)
from rsuloc.tracking import run_filter

# Fixed RSU triangle of the geometric-dilution study.
GEOMETRY_RSUS = ((0.0, -1.0), (60.0, 15.0), (120.0, -1.0))
GEOMETRY_VEHICLES = {
    "centroid": None,  # triangle centroid
    "near_one": (12.0, 1.75),  # inside the triangle, about 12 m from RSU 1
    "outside_hull": (160.0, 5.25),
}


@dataclass(frozen=True)
class GeometryCase:
    layout: str
    rsus: tuple[RsuNode, ...]
    vehicle: np.ndarray

    def inside_hull(self) -> bool:
        """Point-in-triangle test (boundary counts as inside)."""
        a, b, c = (r.position for r in self.rsus)
        p = self.vehicle

        def cross(o, u, v):
            return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

        s = np.array([cross(a, b, p), cross(b, c, p), cross(c, a, p)])
        return bool(np.all(s >= 0) or np.all(s <= 0))


def geometry_case(layout: str) -> GeometryCase:
    """One of the canonical vehicle-versus-RSU layouts.

    Raises:
        DomainError: for an unknown layout name.
    """
    if layout not in GEOMETRY_VEHICLES:
        raise DomainError(f"unknown layout {layout!r}; choose from {sorted(GEOMETRY_VEHICLES)}")
    sides = (Side.NEAR, Side.FAR, Side.NEAR)
    rsus = tuple(RsuNode(i + 1, np.array(p), s) for i, (p, s) in enumerate(zip(GEOMETRY_RSUS, sides)))
    vehicle = GEOMETRY_VEHICLES[layout]
    pos = np.mean(GEOMETRY_RSUS, axis=0) if vehicle is None else np.array(vehicle, dtype=float)
    return GeometryCase(layout, rsus, pos)


def run_seeds(seed: int, run: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(environment, anchor, measurement) generators for one run."""
    env, anchor, meas = np.random.SeedSequence([int(seed), int(run)]).spawn(3)
    return np.random.default_rng(env), np.random.default_rng(anchor), np.random.default_rng(meas)


def build_scenario(cfg: ExperimentConfig) -> tuple[list[RsuNode], Trajectory]:
    if cfg.geometry is not None:
        case = geometry_case(cfg.geometry.layout)
        return list(case.rsus), static_trajectory(case.vehicle, cfg.geometry.n_samples, cfg.trajectory.dt)
    t = cfg.trajectory
    traj = generate_trajectory(t.kind, t.speed, t.dt, cfg.road, t.maneuver_window, t.lane, t.x_range)
    return deploy_rsus(cfg.road), traj


@dataclass
class MethodTrack:
    """Per-epoch estimates of one method; NaN rows mark epochs without output."""

    times: np.ndarray
    estimates: np.ndarray
    truths: np.ndarray

    def report(self) -> ErrorReport | None:
        ok = np.all(np.isfinite(self.estimates), axis=1)
        if not ok.any():
            return None
        return compute_report(self.estimates[ok], self.truths[ok])


@dataclass
class RunResult:
    run: int
    sweep_value: object
    tracks: dict[str, MethodTrack]
    diagnostics: dict = field(default_factory=dict)

    def reports(self) -> dict[str, ErrorReport | None]:
        return {m: t.report() for m, t in self.tracks.items()}


def _true_gammas(cfg: ExperimentConfig, rsus, rng) -> dict[int, float]:
    g = cfg.channel.gamma
    draws = rng.uniform(g - cfg.gamma_spread, g + cfg.gamma_spread, size=len(rsus))
    return {r.id: float(np.clip(v, GAMMA_MIN, GAMMA_MAX)) for r, v in zip(rsus, draws)}


def _estimated_gammas(cfg, rsus, true_g, rng) -> tuple[dict[int, float], int]:
    fallback = cfg.baseline_gamma
    if not cfg.estimator.gamma_correction:
        return {r.id: fallback for r in rsus}, 0
    out, failures = {}, 0
    for r in rsus:
        obs = simulate_anchor_observations(rsus, r.id, cfg.channel, rng, cfg.estimator.n_anchors, true_g)
        try:
            out[r.id] = estimate_gamma(r.id, obs, cfg.channel.p0, r.position, cfg.channel.d0).gamma_hat
        except GammaUnavailableError:
            out[r.id] = fallback
            failures += 1
    return out, failures


def simulate_epochs(cfg: ExperimentConfig, rsus, traj: Trajectory, meas_rng, true_g) -> tuple[list[MatchedEpoch], dict]:
    """Measurements for every sample time, matched into epochs (model convention)."""
    ch_diag = ChannelDiagnostics()
    records = []
    for t in traj.times:
        records.extend(simulate_epoch(rsus, traj.position_at, float(t), cfg.channel, meas_rng, gammas=true_g, diagnostics=ch_diag))
    if cfg.channel.negate_path_loss:
        records = [replace(m, power=float(to_model_convention(m.power, cfg.channel.p0, True))) for m in records]
    epochs, mdiag = match_epochs(records, rsus, min_rsus=3, dt=traj.dt)
    diag = {
        "records": len(records),
        "epochs": len(epochs),
        "dropped_groups": mdiag.dropped_groups,
        "clamped": ch_diag.clamped,
    }
    return epochs, diag


def _time_index(times: np.ndarray, dt: float) -> dict[int, int]:
    return {int(math.floor(t / dt + 0.5)): k for k, t in enumerate(times)}


def simulate_run(cfg: ExperimentConfig, run: int, sweep_value=None) -> RunResult:
    """Execute one seeded run of every configured method."""
    env_rng, anchor_rng, meas_rng = run_seeds(cfg.seed, run)
    rsus, traj = build_scenario(cfg)
    true_g = _true_gammas(cfg, rsus, env_rng)
    gamma_hat, gamma_failures = _estimated_gammas(cfg, rsus, true_g, anchor_rng)
    epochs, diag = simulate_epochs(cfg, rsus, traj, meas_rng, true_g)

    times = traj.times
    truths = traj.position_at(times)
    index = _time_index(times, traj.dt)
    k_of = [index[int(math.floor(e.t / traj.dt + 0.5))] for e in epochs]
    nan = np.full((len(times), 2), np.nan)
    tracks: dict[str, MethodTrack] = {}
    methods = set(cfg.methods)

    if methods & {"cv2x_loca", "sdp"}:
        inputs = [
            EstimatorInputs(e, cfg.channel.p0, cfg.channel.d0, [gamma_hat[i] for i in e.rsu_ids], cfg.estimator.penalty)
            for e in epochs
        ]
        est = cfg.estimator
        fixes = coarse_fix_batch(inputs, est.tol, est.max_iter, est.gap_threshold) if inputs else []
        per_time: list[PositionFix | None] = [None] * len(times)
        coarse = nan.copy()
        for k, f in zip(k_of, fixes):
            if f.usable:
                per_time[k] = f
                coarse[k] = f.theta_hat
        if "sdp" in methods:
            tracks["sdp"] = MethodTrack(times, coarse, truths)
        if "cv2x_loca" in methods:
            tracks["cv2x_loca"] = MethodTrack(times, run_filter(per_time, times, cfg.tracking), truths)
        statuses = [f.status for f in fixes]
        diag.update(
            fixes=sum(f is not None for f in per_time),
            low_confidence=sum(f.low_confidence for f in fixes),
            not_optimal=sum(s != "optimal" for s in statuses),
            mean_rank1_gap=float(np.mean([f.rank1_gap for f in fixes])) if fixes else math.nan,
        )

    g_base = cfg.baseline_gamma
    for m in ("ml_true", "wcl", "lls", "wlls"):
        if m not in methods:
            continue
        out = nan.copy()
        for k, e in zip(k_of, epochs):
            try:
                if m == "ml_true":
                    fx = baselines.ml_true(e, cfg.channel, truths[k], gamma=g_base)
                elif m == "wcl":
                    fx = baselines.wcl(e, cfg.channel, gamma=g_base)
                elif m == "lls":
                    fx = baselines.lls(e, cfg.channel, gamma=g_base)
                else:
                    fx = baselines.wlls(e, cfg.channel, gamma=g_base)
            except DomainError:
                continue
            if np.all(np.isfinite(fx.theta_hat)):
                out[k] = fx.theta_hat
        tracks[m] = MethodTrack(times, out, truths)

    heard = sorted({i for e in epochs for i in e.rsu_ids})
    if heard:
        diag["gamma_abs_err"] = float(np.mean([abs(gamma_hat[i] - true_g[i]) for i in heard]))
    diag["gamma_failures"] = gamma_failures
    return RunResult(run, sweep_value, {m: tracks[m] for m in cfg.methods if m in tracks}, diag)


def _task(args) -> RunResult:
    cfg, run, value = args
    try:
        return simulate_run(cfg, run, value)
    except RsulocError as exc:
        raise RunError(cfg.name, run, exc) from exc
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise RunError(cfg.name, run, exc) from exc


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]

    @property
    def sweep_parameter(self) -> str | None:
        return self.config.sweep.parameter if self.config.sweep else None

    def sweep_values(self) -> list:
        return list(self.config.sweep.values) if self.config.sweep else [None]

    def select(self, sweep_value=None) -> list[RunResult]:
        return [r for r in self.runs if r.sweep_value == sweep_value]

    def ale(self, method: str, sweep_value=None) -> np.ndarray:
        """Per-run ALE (NaN when the method produced no output in a run)."""
        out = []
        for r in self.select(sweep_value):
            rep = r.tracks[method].report()
            out.append(rep.ale if rep else math.nan)
        return np.array(out)

    def pooled_report(self, method: str, sweep_value=None) -> ErrorReport | None:
        """One report over all epochs of all runs."""
        est, tru = [], []
        for r in self.select(sweep_value):
            t = r.tracks[method]
            ok = np.all(np.isfinite(t.estimates), axis=1)
            est.append(t.estimates[ok])
            tru.append(t.truths[ok])
        if not est or sum(len(e) for e in est) == 0:
            return None
        return compute_report(np.concatenate(est), np.concatenate(tru))

    def reports(self) -> dict[tuple[str, object], ErrorReport | None]:
        return {(m, v): self.pooled_report(m, v) for v in self.sweep_values() for m in self.config.methods}

    def rows(self) -> list[dict]:
        """Per-run report rows in (sweep value, run, method) order."""
        rows = []
        param = self.sweep_parameter
        for r in self.runs:
            for m in self.config.methods:
                rep = r.tracks[m].report()
                extra = {"n": rep.n if rep else 0}
                if param is not None:
                    extra.update(sweep_param=param, sweep_value=r.sweep_value)
                if rep is None:
                    row = {"method": m, "scenario": self.config.name, "run": r.run, **extra}
                    row.update({k: math.nan for k in ("ale", "rmse", "mae", "mape", "p50_long", "p90_long")})
                else:
                    row = report_row(rep, m, self.config.name, r.run, extra)
                rows.append(row)
        return rows

    def summary_rows(self) -> list[dict]:
        rows = []
        param = self.sweep_parameter
        for v in self.sweep_values():
            for m in self.config.methods:
                ale = self.ale(m, v)
                pooled = self.pooled_report(m, v)
                row = {
                    "method": m,
                    "scenario": self.config.name,
                    "runs": len(ale),
                    "ale_mean": float(np.nanmean(ale)) if np.isfinite(ale).any() else math.nan,
                    "ale_std": float(np.nanstd(ale)) if np.isfinite(ale).any() else math.nan,
                }
                for key in ("rmse", "mae", "mape"):
                    row[key] = getattr(pooled, key) if pooled else math.nan
                row["p50_long"] = pooled.percentile(0.5) if pooled else math.nan
                row["p90_long"] = pooled.percentile(0.9) if pooled else math.nan
                if param is not None:
                    row.update(sweep_param=param, sweep_value=v)
                rows.append(row)
        return rows


def _tasks(cfg: ExperimentConfig) -> list[tuple]:
    if cfg.sweep is None:
        return [(cfg, r, None) for r in range(cfg.runs)]
    return [(cfg.with_override(cfg.sweep.parameter, v), r, v) for v in cfg.sweep.values for r in range(cfg.runs)]


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """All runs of a config (and of every sweep value), in a fixed order.

    Raises:
        RunError: naming the scenario and run of the first failing run.
    """
    tasks = _tasks(cfg)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_task(t) for t in tasks]
    return ExperimentResult(cfg, results)


def bench(cfg: ExperimentConfig, n_solves: int = 100) -> dict:
    """Mean wall time of single-epoch coarse fixes on simulated epochs.

    Also reports the per-epoch cost when the same epochs are solved as one
    batch, which is how experiments run.
    """
    _, anchor_rng, meas_rng = run_seeds(cfg.seed, 0)
    rsus, traj = build_scenario(cfg)
    epochs, _ = simulate_epochs(cfg, rsus, traj, meas_rng, None)
    if not epochs:
        raise DomainError("no epochs with at least 3 RSUs to benchmark")
    chosen = [epochs[i % len(epochs)] for i in range(n_solves)]
    g = cfg.baseline_gamma
    inputs = [EstimatorInputs(e, cfg.channel.p0, cfg.channel.d0, g, cfg.estimator.penalty) for e in chosen]
    est = cfg.estimator
    coarse_fix(inputs[0], est.tol, est.max_iter)  # warm-up
    times = []
    for x in inputs:
        t0 = time.perf_counter()
        coarse_fix(x, est.tol, est.max_iter, est.gap_threshold)
        times.append(time.perf_counter() - t0)
    t0 = time.perf_counter()
    coarse_fix_batch(inputs, est.tol, est.max_iter, est.gap_threshold)
    batch = (time.perf_counter() - t0) / len(inputs)
    ms = np.array(times) * 1e3
    return {
        "scenario": cfg.name,
        "n_solves": n_solves,
        "mean_ms": float(ms.mean()),
        "median_ms": float(np.median(ms)),
        "max_ms": float(ms.max()),
        "batched_mean_ms": batch * 1e3,
    }


def road_box(cfg: ExperimentConfig) -> GridBox:
    """The road surface (or, for geometry cases, a box around RSUs and vehicle)."""
    if cfg.geometry is not None:
        case = geometry_case(cfg.geometry.layout)
        pts = np.vstack([[r.position for r in case.rsus], case.vehicle])
        lo, hi = pts.min(axis=0) - 10.0, pts.max(axis=0) + 10.0
        return GridBox(lo[0], hi[0], lo[1], hi[1])
    return GridBox(0.0, cfg.road.segment_length, 0.0, cfg.road.dr3)


def oracle_compare(cfg: ExperimentConfig, n_epochs: int = 100, step: float = 0.25) -> list[dict]:
    """Relaxation objective versus the grid minimum of the non-convex objective.

    Epochs are drawn from consecutive runs with the configured (nominal)
    exponent. Each row carries both objectives, the lower-bound margin and
    the errors of both positions.
    """
    rows: list[dict] = []
    box = road_box(cfg)
    run = 0
    while len(rows) < n_epochs:
        _, _, meas_rng = run_seeds(cfg.seed, run)
        rsus, traj = build_scenario(cfg)
        epochs, _ = simulate_epochs(cfg, rsus, traj, meas_rng, None)
        stride = max(1, len(epochs) // max(1, n_epochs))
        for e in epochs[::stride]:
            if len(rows) >= n_epochs:
                break
            x = EstimatorInputs(e, cfg.channel.p0, cfg.channel.d0, cfg.channel.gamma, cfg.estimator.penalty)
            sol = solve_sdp(build_sdp(x), cfg.estimator.tol, cfg.estimator.max_iter)
            g_pt, g_val = grid_argmin(nonconvex_objective, x, box, step)
            truth = traj.position_at(e.t)
            rows.append(
                {
                    "scenario": cfg.name,
                    "run": run,
                    "t": e.t,
                    "sdp_objective": sol.objective,
                    "grid_objective": g_val,
                    "margin": g_val - sol.objective,
                    "lower_bound_ok": bool(sol.objective <= g_val + 1e-5),
                    "sdp_error": float(np.linalg.norm(sol.theta_hat - truth)),
                    "grid_error": float(np.linalg.norm(g_pt - truth)),
                    "status": sol.status,
                }
            )
        run += 1
    return rows


def trajectory_rows(result: ExperimentResult, run: int = 0) -> Iterable[dict]:
    """Per-epoch truth and estimates of one run for every sweep value."""
    for r in result.runs:
        if r.run != run:
            continue
        for m, t in r.tracks.items():
            for k in range(len(t.times)):
                yield {
                    "sweep_value": r.sweep_value,
                    "method": m,
                    "t": float(t.times[k]),
                    "x_true": float(t.truths[k, 0]),
                    "y_true": float(t.truths[k, 1]),
                    "x_est": float(t.estimates[k, 0]),
                    "y_est": float(t.estimates[k, 1]),
                }
