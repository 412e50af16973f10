"""Round-robin NS-DASF driver over the simulated network."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .dasf import apply_update, assemble_local, extract
from .datagen import initial_filter, sample_window
from .errors import ConfigurationError
from .netsim import SimulatedNetwork
from .problem import FilterMatrix, SignalBatch
from .solver import CompositeProblem, SolveReport, SolverOptions, solve, stationarity_residual

logger = logging.getLogger(__name__)

__all__ = ["IterationRecord", "DasfEngine", "run", "global_problem"]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class IterationRecord:
    """Telemetry of the update from ``X^i`` to ``X^{i+1}``."""

    iteration: int
    updating_node: int
    window_index: int
    objective_before: float
    objective_after: float
    stationarity: float
    scalars_up: int
    scalars_down: int
    solver: SolveReport
    X: np.ndarray
    rank_deficient: tuple = ()


def global_problem(batch, inst):
    """The full ``M``-dimensional problem on one window as a :class:`CompositeProblem`."""
    return CompositeProblem(batch.Y, batch.desired, inst.gamma, inst.lam)


class DasfEngine:
    """Single-owner NS-DASF state: network, current updating node, iteration.

    Parameters
    ----------
    inst : ProblemInstance
    X0 : array_like
        Initial filter.
    n_samples : int
        Samples per window.
    options : SolverOptions, optional
        Options of the local solver; ``warm_start`` is overridden each step.
    cache_gamma : bool
    workers : int
    """

    def __init__(self, inst, X0, n_samples, options=None, cache_gamma=False, workers=1):
        self.inst = inst
        self.options = options or SolverOptions()
        self.network = SimulatedNetwork(inst, X0, n_samples, cache_gamma, workers)
        self.q = 0
        self.iteration = 0
        self._warned = set()

    @property
    def X(self):
        return self.network.X

    @property
    def ledger(self):
        return self.network.ledger

    def _check_rank(self, X, q):
        deficient = []
        for k, X_k in enumerate(X.blocks()):
            if k == q:
                continue
            s = np.linalg.svd(X_k, compute_uv=False)
            if s[-1] <= RANK_TOL * max(s[0], np.finfo(float).tiny):
                deficient.append(k)
                if k not in self._warned:
                    self._warned.add(k)
                    logger.warning("block of node %d is rank deficient; "
                                   "its column space can no longer grow", k)
        return tuple(deficient)

    def step(self, batch):
        """Run one iteration on ``batch``; state is untouched if anything fails."""
        inst, q, i = self.inst, self.q, self.iteration
        X = self.X
        deficient = self._check_rank(X, q)
        before = inst.objective(X, batch)
        mark = self.network.mark()
        try:
            views, raw_q, up = self.network.deliver_round(q, batch, i)
            lp = assemble_local(q, views, raw_q, batch.desired, inst,
                                window_index=batch.window_index)
            opts = replace(self.options, warm_start=lp.warm_start(X.block(q)))
            solution, report = solve(lp.composite, opts)
            bundle = extract(solution, lp, batch.window_index)
            X_new = apply_update(X, bundle, q)
        except Exception:
            self.network.rollback(mark)
            raise
        down = self.network.disseminate(bundle, q, i, up)
        # nodes apply the same products as apply_update
        X_net = self.X.entries
        assert np.array_equal(X_net, X_new.entries)

        if inst.has_identity_gamma:
            station = stationarity_residual(X_net, global_problem(batch, inst))
        else:
            station = float("nan")
        record = IterationRecord(
            iteration=i, updating_node=q, window_index=batch.window_index,
            objective_before=before, objective_after=inst.objective(X_net, batch),
            stationarity=station, scalars_up=up, scalars_down=down,
            solver=report, X=X_net.copy(), rank_deficient=deficient)
        self.q = (q + 1) % inst.layout.K
        self.iteration = i + 1
        return record


def run(source, inst, iterations, mode="batch", seed=None, options=None,
        cache_gamma=False, X0=None, workers=1):
    """Run ``iterations`` NS-DASF steps.

    Parameters
    ----------
    source : StaticScenario, TrackingScenario or SignalBatch
        Where windows come from.  A fixed ``SignalBatch`` only supports batch
        mode.
    inst : ProblemInstance
    iterations : int
    mode : {"batch", "adaptive"}
        Batch mode reuses window 1 at every step; adaptive mode consumes
        window ``i + 1`` at step ``i``.
    seed : int, optional
        Seed of the random initial filter; defaults to the scenario seed.
    X0 : array_like, optional
        Explicit initial filter, overriding ``seed``.

    Returns
    -------
    list of IterationRecord
    """
    if iterations < 1:
        raise ConfigurationError("need at least one iteration")
    if mode not in ("batch", "adaptive"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if isinstance(source, SignalBatch):
        if mode != "batch":
            raise ConfigurationError("a fixed batch only supports batch mode")
        fixed = source
        n_samples = source.N
    else:
        fixed = sample_window(source, 1) if mode == "batch" else None
        n_samples = source.n_samples
    if X0 is None:
        if seed is None:
            seed = getattr(source, "seed", 0)
        X0 = initial_filter(inst.layout, seed)
    engine = DasfEngine(inst, X0, n_samples, options, cache_gamma, workers)
    records = []
    for i in range(iterations):
        batch = fixed if fixed is not None else sample_window(source, i + 1)
        records.append(engine.step(batch))
    return records
