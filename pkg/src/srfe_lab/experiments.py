"""Benchmark experiment drivers.

Four studies on a fixed three-mode Gaussian target: objective comparison
(exp1), interpolation-weight sweep with repeated trials (exp2), weight
schedules (exp3), and contamination robustness (exp4).  Each driver
trains the diagonal-Gaussian model for every cell, evaluates it, writes
one CSV, and hands the rows back for programmatic use.

Cells are independent given their seeds, so they run on a small thread
pool; results are assembled in a fixed order afterwards, which keeps the
CSVs byte-identical across runs with the same seed.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .evaluation import EvalConfig, EvalMetrics, evaluate
from .gaussians import ContaminatedMixture, GaussianMixture
from .training import TauSchedule, TrainConfig, TrainResult, train

TARGET_MEANS = ((-3.0, 0.0), (3.0, 0.0), (0.0, 4.0))
TARGET_VARIANCE = 0.5
TARGET_WEIGHTS = (0.3, 0.3, 0.4)

EXP1_TAUS = (0.1, 0.3, 0.5, 0.7, 0.9)
EXP2_TAUS = tuple(round(0.1 * k, 1) for k in range(1, 10))
EXP4_TAUS = (0.01, 0.5, 0.99)
EXP4_WEIGHTS = (0.0, 0.1, 0.2, 0.3)

CSV_HEADER = ("method", "tau", "schedule", "outlier_weight", "mode_coverage",
              "ess", "entropy_error", "test_log_lik", "final_loss", "trial",
              "seed")


def benchmark_target() -> GaussianMixture:
    """The shared three-mode target all four experiments fit."""
    return GaussianMixture(means=np.array(TARGET_MEANS),
                           variance=TARGET_VARIANCE,
                           weights=np.array(TARGET_WEIGHTS))


@dataclass(frozen=True)
class RunConfig:
    """Experiment settings; None fields fall back to per-experiment defaults."""
    seed: int = 0
    iterations: int | None = None
    batch_size: int | None = None
    learning_rate: float | None = None
    tau_grid: tuple[float, ...] | None = None
    trials: int | None = None
    outlier_weights: tuple[float, ...] | None = None
    out_dir: str = "results"
    dump_loss: bool = False


@dataclass(frozen=True)
class ResultRow:
    method: str
    tau: float | None
    schedule: str | None
    outlier_weight: float | None
    metrics: EvalMetrics
    final_loss: float
    trial: int
    seed: int


@dataclass(frozen=True)
class AggregateRow:
    tau: float
    mean: EvalMetrics
    std: EvalMetrics


@dataclass(frozen=True)
class ExperimentResult:
    rows: list[ResultRow]
    aggregate: list[AggregateRow] | None
    histories: dict[str, np.ndarray]


_FAILED = EvalMetrics(mode_coverage=-1, ess=math.nan, entropy_error=math.nan,
                      test_log_lik=math.nan)


@dataclass(frozen=True)
class _Cell:
    label: str
    method: str
    tau: float | None
    schedule_name: str | None
    outlier_weight: float | None
    train_cfg: TrainConfig
    target: object


def _run_cell(cell: _Cell, modes: GaussianMixture) -> tuple[ResultRow, np.ndarray]:
    try:
        result: TrainResult = train(cell.target, cell.train_cfg)
    except (RuntimeError, FloatingPointError):
        # keep the sweep going; NaNs flag the failed cell in the CSV
        row = ResultRow(cell.method, cell.tau, cell.schedule_name,
                        cell.outlier_weight, _FAILED, math.nan, 0,
                        cell.train_cfg.seed)
        return row, np.empty(0)
    metrics = evaluate(result.model, cell.target, modes,
                       EvalConfig(seed=cell.train_cfg.seed))
    row = ResultRow(cell.method, cell.tau, cell.schedule_name,
                    cell.outlier_weight, metrics,
                    float(result.loss_history[-1]), 0, cell.train_cfg.seed)
    return row, np.asarray(result.loss_history)


def _max_workers() -> int:
    env = os.environ.get("SRFE_LAB_THREADS")
    if env:
        n = int(env)
        if n > 0:
            return n
    return os.cpu_count() or 1


def _execute(cells: list[_Cell], cfg: RunConfig, modes: GaussianMixture,
             csv_name: str, trial_of: dict[str, int] | None = None
             ) -> ExperimentResult:
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = [pool.submit(_run_cell, c, modes) for c in cells]
        outcomes = [f.result() for f in futures]

    rows: list[ResultRow] = []
    histories: dict[str, np.ndarray] = {}
    for cell, (row, history) in zip(cells, outcomes):
        trial = (trial_of or {}).get(cell.label, 0)
        rows.append(replace(row, trial=trial))
        histories[cell.label] = history

    os.makedirs(cfg.out_dir, exist_ok=True)
    write_rows(os.path.join(cfg.out_dir, csv_name), rows)
    if cfg.dump_loss:
        stem = csv_name.rsplit(".", 1)[0]
        for label, history in histories.items():
            dump_history(os.path.join(cfg.out_dir, f"{stem}_loss_{label}.csv"),
                         history)
    return ExperimentResult(rows=rows, aggregate=None, histories=histories)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_rows(path: str, rows: list[ResultRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            m = r.metrics
            writer.writerow([
                r.method, _fmt(r.tau), _fmt(r.schedule), _fmt(r.outlier_weight),
                r.metrics.mode_coverage, _fmt(m.ess), _fmt(m.entropy_error),
                _fmt(m.test_log_lik), _fmt(r.final_loss), r.trial, r.seed,
            ])


def dump_history(path: str, history: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "loss"))
        for step, loss in enumerate(history, start=1):
            writer.writerow((step, _fmt(float(loss))))


def _train_cfg(cfg: RunConfig, objective: str, schedule: TauSchedule,
               seed: int, default_iterations: int = 2000) -> TrainConfig:
    return TrainConfig(
        objective=objective,
        schedule=schedule,
        iterations=cfg.iterations if cfg.iterations is not None else default_iterations,
        batch_size=cfg.batch_size if cfg.batch_size is not None else 5000,
        learning_rate=cfg.learning_rate if cfg.learning_rate is not None else 0.05,
        seed=seed,
    )


def run_exp1(cfg: RunConfig) -> ExperimentResult:
    """Objective comparison: forward KL, reverse KL, and the interpolated
    loss across a small weight grid, one run each."""
    target = benchmark_target()
    taus = cfg.tau_grid if cfg.tau_grid is not None else EXP1_TAUS
    cells = [
        _Cell("forward_kl", "forward_kl", None, None, None,
              _train_cfg(cfg, "forward_kl", TauSchedule.fixed(0.5), cfg.seed),
              target),
        _Cell("reverse_kl", "reverse_kl", None, None, None,
              _train_cfg(cfg, "reverse_kl", TauSchedule.fixed(0.5), cfg.seed),
              target),
    ]
    for tau in taus:
        cells.append(_Cell(f"srfe_tau_{tau:g}", "srfe", float(tau), None, None,
                           _train_cfg(cfg, "srfe", TauSchedule.fixed(tau), cfg.seed),
                           target))
    return _execute(cells, cfg, target, "exp1.csv")


def run_exp2(cfg: RunConfig) -> ExperimentResult:
    """Weight sweep with repeated trials; per-trial rows plus per-weight
    mean/std aggregates."""
    target = benchmark_target()
    taus = cfg.tau_grid if cfg.tau_grid is not None else EXP2_TAUS
    trials = cfg.trials if cfg.trials is not None else 3
    cells = []
    trial_of = {}
    for tau in taus:
        for trial in range(trials):
            label = f"srfe_tau_{tau:g}_trial_{trial}"
            trial_of[label] = trial
            cells.append(_Cell(label, "srfe", float(tau), None, None,
                               _train_cfg(cfg, "srfe", TauSchedule.fixed(tau),
                                          cfg.seed + trial),
                               target))
    result = _execute(cells, cfg, target, "exp2_trials.csv", trial_of)

    aggregate = []
    for tau in taus:
        group = [r.metrics for r in result.rows if r.tau == float(tau)]
        stacked = np.array([[m.mode_coverage, m.ess, m.entropy_error,
                             m.test_log_lik] for m in group])
        mean = stacked.mean(axis=0)
        std = stacked.std(axis=0)
        aggregate.append(AggregateRow(
            tau=float(tau),
            mean=EvalMetrics(float(mean[0]), float(mean[1]), float(mean[2]),
                             float(mean[3])),
            std=EvalMetrics(float(std[0]), float(std[1]), float(std[2]),
                            float(std[3]))))
    _write_aggregate(os.path.join(cfg.out_dir, "exp2_aggregate.csv"), aggregate)
    return replace(result, aggregate=aggregate)


def _write_aggregate(path: str, aggregate: list[AggregateRow]) -> None:
    header = ("tau", "mode_coverage_mean", "mode_coverage_std", "ess_mean",
              "ess_std", "entropy_error_mean", "entropy_error_std",
              "test_log_lik_mean", "test_log_lik_std")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for a in aggregate:
            writer.writerow([
                _fmt(a.tau),
                _fmt(a.mean.mode_coverage), _fmt(a.std.mode_coverage),
                _fmt(a.mean.ess), _fmt(a.std.ess),
                _fmt(a.mean.entropy_error), _fmt(a.std.entropy_error),
                _fmt(a.mean.test_log_lik), _fmt(a.std.test_log_lik),
            ])


def exp3_schedules() -> list[TauSchedule]:
    return [
        TauSchedule.fixed(0.5),
        TauSchedule.fixed(0.99),
        TauSchedule.fixed(0.01),
        TauSchedule.linear(0.3, 0.9),
        TauSchedule.linear(0.9, 0.3),
        TauSchedule.stepwise(),
    ]


def run_exp3(cfg: RunConfig) -> ExperimentResult:
    """Schedule comparison; loss histories are kept for every cell because
    the instability contrast lives in the trajectory, not the final row."""
    target = benchmark_target()
    cells = [
        _Cell(sched.describe(), "srfe", None, sched.describe(), None,
              _train_cfg(cfg, "srfe", sched, cfg.seed), target)
        for sched in exp3_schedules()
    ]
    return _execute(cells, cfg, target, "exp3.csv")


def run_exp4(cfg: RunConfig) -> ExperimentResult:
    """Contamination robustness: outlier box mass from 0 to 0.3 against
    three interpolation weights, shorter runs."""
    base = benchmark_target()
    taus = cfg.tau_grid if cfg.tau_grid is not None else EXP4_TAUS
    weights = cfg.outlier_weights if cfg.outlier_weights is not None else EXP4_WEIGHTS
    cells = []
    for w in weights:
        target = ContaminatedMixture(base=base, outlier_weight=float(w))
        for tau in taus:
            cells.append(_Cell(
                f"w_{w:g}_tau_{tau:g}", "srfe", float(tau), None, float(w),
                _train_cfg(cfg, "srfe", TauSchedule.fixed(tau), cfg.seed,
                           default_iterations=1500),
                target))
    return _execute(cells, cfg, base, "exp4.csv")


def density_grid(dist, bounds: tuple[float, float, float, float],
                 resolution: int) -> np.ndarray:
    """Exact log densities on a rectangular grid.

    Returns an (resolution^2, 3) array of (x, y, log_density) rows, x
    varying fastest.  Bounds are (x_low, x_high, y_low, y_high).
    """
    x0, x1, y0, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bounds must satisfy x_low < x_high and y_low < y_high")
    if resolution < 2:
        raise ValueError("resolution must be at least 2 per axis")
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return np.column_stack([points, dist.log_prob(points)])
