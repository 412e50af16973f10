"""Static Monte-Carlo and tracking experiments with CSV output.

Output files (UTF-8, header row, fixed column order):

``run_XXX.csv``
    run, iteration, objective, rel_mse_vs_oracle, rel_mse_vs_generative,
    stationarity_residual, scalars_up, scalars_down, errata
``aggregate.csv``
    iteration, min, median, max  (of rel_mse_vs_oracle over runs)
``bandwidth.csv``
    run, iteration, updating_node, scalars_up, scalars_down, bytes_up, bytes_down
``tracking.csv``
    iteration, t_i, w_true, proj_estimate, proj_oracle, rel_mse_vs_oracle
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .datagen import (NOISE_STD, StaticScenario, TrackingScenario, initial_filter,
                      projection_coefficient, sample_window, weight_at)
from .engine import DasfEngine, global_problem
from .errors import ConfigurationError
from .netsim import compression_ratio, write_trace_csv
from .problem import NetworkLayout, ProblemInstance
from .solver import SolverOptions, solve, stationarity_residual

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "OracleResult",
    "central_oracle",
    "run_static",
    "run_tracking",
    "run_experiment",
    "load_config",
    "derive_seed",
]

ORACLE_TOLERANCE = 1e-10
ORACLE_GATE = 1e-6
FULL_RUNS = 100

RUN_COLUMNS = ("run", "iteration", "objective", "rel_mse_vs_oracle",
               "rel_mse_vs_generative", "stationarity_residual",
               "scalars_up", "scalars_down", "errata")
AGGREGATE_COLUMNS = ("iteration", "min", "median", "max")
BANDWIDTH_COLUMNS = ("run", "iteration", "updating_node", "scalars_up",
                     "scalars_down", "bytes_up", "bytes_down")
TRACKING_COLUMNS = ("iteration", "t_i", "w_true", "proj_estimate", "proj_oracle",
                    "rel_mse_vs_oracle")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "static"
    K: int = 10
    M_k: int = 10
    Q: int = 1
    lam: float = 1.0
    n_samples: int = 1000
    noise_std: float = NOISE_STD
    runs: int = 20
    iterations: Optional[int] = None
    mode: str = "batch"
    seed: int = 0
    max_iterations: int = 5000
    tolerance: float = 1e-9
    step_ratio: float = 1.0
    equilibrate: bool = True
    cache_gamma: bool = False
    output: str = "results"
    bytes_per_scalar: int = 8
    workers: int = 1
    trace: bool = False

    def __post_init__(self):
        if self.experiment not in ("static", "tracking", "custom"):
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        if self.mode not in ("batch", "adaptive"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        for name in ("K", "M_k", "Q", "n_samples", "runs", "max_iterations",
                     "bytes_per_scalar", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.iterations is not None and self.iterations < 0:
            raise ConfigurationError("iterations must be nonnegative")
        if self.lam < 0 or not self.noise_std > 0 or not self.tolerance > 0:
            raise ConfigurationError("need lambda >= 0, noise_std > 0, tolerance > 0")

    @property
    def layout(self):
        return NetworkLayout.uniform(self.K, self.M_k, self.Q)

    @property
    def instance(self):
        return ProblemInstance(self.layout, self.lam)

    @property
    def solver_options(self):
        return SolverOptions(self.max_iterations, self.tolerance, self.step_ratio,
                             equilibrate=self.equilibrate)

    @property
    def n_iterations(self):
        if self.iterations is not None:
            return self.iterations
        return 540 if self.experiment == "tracking" else 5 * self.K


# config-file layout: section -> {file key: field name}
_CONFIG_KEYS = {
    "network": {"K": "K", "M_k": "M_k", "Q": "Q"},
    "problem": {"lambda": "lam", "noise_std": "noise_std", "n_samples": "n_samples"},
    "solver": {"max_iterations": "max_iterations", "tolerance": "tolerance",
               "step_ratio": "step_ratio", "equilibrate": "equilibrate"},
    "experiment": {"experiment": "experiment", "runs": "runs",
                   "iterations": "iterations", "mode": "mode", "seed": "seed",
                   "cache_gamma": "cache_gamma", "output": "output",
                   "bytes_per_scalar": "bytes_per_scalar", "workers": "workers",
                   "trace": "trace"},
}


def _convert(name, raw):
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if kind in ("int", "Optional[int]"):
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config(text, base=None):
    """Parse ``key = value`` sections into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from None
    values = {}
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _CONFIG_KEYS[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            name = _CONFIG_KEYS[section][key]
            values[name] = _convert(name, raw.strip())
    return replace(base or ExperimentConfig(), **values)


def load_config(path, base=None):
    return parse_config(Path(path).read_text(encoding="utf-8"), base)


def derive_seed(seed, run):
    """Per-run seed, independent of how runs are scheduled."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(1000, int(run)))
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class OracleResult:
    X: np.ndarray
    residual: float
    gradient_scale: float
    iterations: int

    @property
    def valid(self):
        return self.residual <= ORACLE_GATE * (1.0 + self.gradient_scale)


def central_oracle(batch, inst, options=None):
    """Fusion-center solution of the full problem on one window."""
    base = options or SolverOptions()
    opts = replace(base, tolerance=min(base.tolerance, ORACLE_TOLERANCE),
                   max_iterations=max(base.max_iterations, 100_000), warm_start=None)
    gp = global_problem(batch, inst)
    X, report = solve(gp, opts)
    residual = stationarity_residual(X, gp)
    scale = float(np.max(np.abs(gp.smooth_gradient(X))))
    return OracleResult(X, residual, scale, report.iterations)


def _rel_mse(X, ref):
    denom = float(np.sum(ref ** 2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum((np.asarray(X) - ref) ** 2) / denom)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _static_run(cfg, run):
    """One Monte-Carlo run; returns (run rows, bandwidth rows, trace, ledger)."""
    inst, opts = cfg.instance, cfg.solver_options
    seed = derive_seed(cfg.seed, run)
    scenario = StaticScenario(cfg.layout, seed, cfg.n_samples, cfg.noise_std)
    truth = scenario.ground_truth
    T = cfg.n_iterations
    oracles = {}

    def oracle(window):
        if window not in oracles:
            oracles[window] = central_oracle(batch_for(window), inst, opts)
        return oracles[window]

    batches = {}

    def batch_for(window):
        if window not in batches:
            batches.clear()
            batches[window] = sample_window(scenario, window)
        return batches[window]

    def row(j, X, window, up, down):
        b = batch_for(window)
        orc = oracle(window)
        gp = global_problem(b, inst)
        errata = "" if orc.valid else "oracle_residual_gate_failed"
        return (run, j, inst.objective(X, b), _rel_mse(X, orc.X), _rel_mse(X, truth),
                stationarity_residual(X, gp), up, down, errata)

    X0 = initial_filter(cfg.layout, seed)
    rows = [row(0, X0, 1, 0, 0)]
    bandwidth = []
    engine = DasfEngine(inst, X0, cfg.n_samples, opts, cfg.cache_gamma)
    for i in range(T):
        window = 1 if cfg.mode == "batch" else i + 1
        rec = engine.step(batch_for(window))
        rows.append(row(i + 1, rec.X, window, rec.scalars_up, rec.scalars_down))
        bandwidth.append((run, i, rec.updating_node, rec.scalars_up, rec.scalars_down,
                          rec.scalars_up * cfg.bytes_per_scalar,
                          rec.scalars_down * cfg.bytes_per_scalar))
    trace = engine.network.transport.trace if cfg.trace else []
    return rows, bandwidth, trace, engine.ledger


def run_static(cfg):
    """Monte-Carlo convergence study.

    Returns a dict with the per-run rows, the aggregate rows and the written
    paths.  ``cfg.workers > 1`` runs Monte-Carlo repetitions in separate
    processes; seeds depend on the run index only, so the output does not
    change.
    """
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    runs = range(cfg.runs)
    if cfg.workers > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_static_run, [cfg] * cfg.runs, runs))
    else:
        results = [_static_run(cfg, r) for r in runs]

    paths = []
    all_rows, all_bw = [], []
    ratios = []
    for r, (rows, bw, trace, ledger) in zip(runs, results):
        path = out / f"run_{r:03d}.csv"
        _write_csv(path, RUN_COLUMNS, rows)
        paths.append(path)
        all_rows.append(rows)
        all_bw.extend(bw)
        if cfg.trace:
            write_trace_csv(trace, out / f"trace_{r:03d}.csv")
        if len(ledger):
            ratios.append(compression_ratio(ledger))

    errors = np.array([[row[3] for row in rows] for rows in all_rows])
    aggregate = [(j, float(np.min(errors[:, j])), float(np.median(errors[:, j])),
                  float(np.max(errors[:, j]))) for j in range(errors.shape[1])]
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, aggregate)
    _write_csv(out / "bandwidth.csv", BANDWIDTH_COLUMNS, all_bw)
    return {"runs": all_rows, "aggregate": aggregate, "paths": paths,
            "compression_ratio": float(np.mean(ratios)) if ratios else float("nan")}


def run_tracking(cfg):
    """Single adaptive run tracking ``w(t) X_A + (1 - w(t)) X_B``.

    Row ``j`` reports ``X^j``, which was computed from window ``j`` (generated
    at ``t_j = j / 180``).  Row 0 is the random start; it has no window, so
    its oracle columns are ``nan``.
    """
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    inst, opts = cfg.instance, cfg.solver_options
    scenario = TrackingScenario(cfg.layout, cfg.seed, cfg.n_samples, cfg.noise_std)
    anchors = scenario.anchors
    X0 = initial_filter(cfg.layout, cfg.seed)
    engine = DasfEngine(inst, X0, cfg.n_samples, opts, cfg.cache_gamma, cfg.workers)
    nan = float("nan")
    rows = [(0, 0.0, weight_at(0), projection_coefficient(X0, anchors), nan, nan)]
    for i in range(cfg.n_iterations):
        j = i + 1
        batch = sample_window(scenario, j)
        rec = engine.step(batch)
        orc = central_oracle(batch, inst, opts)
        rows.append((j, j / 180.0, weight_at(j), projection_coefficient(rec.X, anchors),
                     projection_coefficient(orc.X, anchors), _rel_mse(rec.X, orc.X)))
    path = out / "tracking.csv"
    _write_csv(path, TRACKING_COLUMNS, rows)
    if cfg.trace:
        write_trace_csv(engine.network.transport.trace, out / "trace_tracking.csv")
    return {"rows": rows, "paths": [path]}


def run_experiment(cfg):
    if cfg.experiment == "tracking":
        if cfg.mode != "adaptive":
            cfg = replace(cfg, mode="adaptive")
        return run_tracking(cfg)
    return run_static(cfg)
