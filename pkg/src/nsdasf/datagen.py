"""Seeded synthetic scenarios for the sparse Wiener filtering experiments.

Every random quantity is drawn from its own counter-based substream
(``SeedSequence(seed, spawn_key=...)``) so that any window can be generated
on its own, in any order, and always comes out identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateInputError
from .problem import NetworkLayout, SignalBatch

__all__ = [
    "StaticScenario",
    "TrackingScenario",
    "substream",
    "sparse_ground_truth",
    "sample_window",
    "weight_at",
    "projection_coefficient",
    "save_matrix",
    "load_matrix",
    "save_scenario",
]

NOISE_STD = math.sqrt(0.1)
TRACKING_RATE = 180.0

# substream keys
_GROUND_TRUTH = 0
_WINDOW = 1
_INIT = 2


def substream(seed, *key):
    """Independent generator for ``(seed, key)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def sparse_ground_truth(layout, rng):
    """``M x Q`` matrix with ``ceil(M/10)`` standard normal entries per column."""
    M, Q = layout.M, layout.Q
    nnz = math.ceil(M / 10)
    X = np.zeros((M, Q))
    for c in range(Q):
        rows = rng.choice(M, size=nnz, replace=False)
        X[rows, c] = rng.standard_normal(nnz)
    return X


@dataclass(frozen=True)
class StaticScenario:
    """Stationary data ``d(t) = X_gt^T y(t) + n(t)``."""

    layout: NetworkLayout
    seed: int
    n_samples: int = 1000
    noise_std: float = NOISE_STD

    def __post_init__(self):
        if self.n_samples < 1 or not self.noise_std > 0:
            raise ConfigurationError("need n_samples >= 1 and noise_std > 0")

    @property
    def ground_truth(self):
        return sparse_ground_truth(self.layout, substream(self.seed, _GROUND_TRUTH))

    def truth_at(self, i):
        return self.ground_truth


@dataclass(frozen=True)
class TrackingScenario:
    """Ground truth sliding along the line between two sparse anchors.

    Window ``i`` is generated with ``w(t_i) X_A + (1 - w(t_i)) X_B`` where
    ``w(t) = t cos(t^4)`` and ``t_i = i / 180``.
    """

    layout: NetworkLayout
    seed: int
    n_samples: int = 1000
    noise_std: float = NOISE_STD

    def __post_init__(self):
        if self.n_samples < 1 or not self.noise_std > 0:
            raise ConfigurationError("need n_samples >= 1 and noise_std > 0")

    @property
    def anchors(self):
        X_A = sparse_ground_truth(self.layout, substream(self.seed, _GROUND_TRUTH, 0))
        X_B = sparse_ground_truth(self.layout, substream(self.seed, _GROUND_TRUTH, 1))
        return X_A, X_B

    def truth_at(self, i):
        X_A, X_B = self.anchors
        w = weight_at(i)
        return w * X_A + (1.0 - w) * X_B


def sample_window(s, i):
    """Draw window ``i`` (``i >= 1``) of a static or tracking scenario."""
    if i < 1:
        raise ConfigurationError(f"window index must be >= 1, got {i}")
    layout = s.layout
    rng = substream(s.seed, _WINDOW, int(i))
    Y = rng.standard_normal((layout.M, s.n_samples))
    noise = s.noise_std * rng.standard_normal((layout.Q, s.n_samples))
    D = s.truth_at(i).T @ Y + noise
    return SignalBatch.from_stacked(Y, D, layout, window_index=int(i))


def initial_filter(layout, seed):
    """Seeded i.i.d. standard normal starting point ``X^0``."""
    return substream(seed, _INIT).standard_normal((layout.M, layout.Q))


def weight_at(i):
    """Interpolation weight ``t cos(t^4)`` at ``t = i / 180``."""
    if i < 0:
        raise ConfigurationError("iteration must be nonnegative")
    t = i / TRACKING_RATE
    return t * math.cos(t ** 4)


def projection_coefficient(X, anchors):
    """Coordinate of ``X`` along the line from ``X_B`` (0) to ``X_A`` (1)."""
    X_A, X_B = (np.asarray(a, dtype=float) for a in anchors)
    diff = X_A - X_B
    denom = float(np.sum(diff * diff))
    if denom == 0.0:
        raise DegenerateInputError("anchors coincide")
    X = np.asarray(X, dtype=float).reshape(diff.shape)
    return float(np.sum((X - X_B) * diff) / denom)


def save_matrix(path, A, seed):
    """Write ``A`` row-major as CSV with a ``# rows,cols,seed`` header."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    header = f"rows={A.shape[0]},cols={A.shape[1]},seed={int(seed)}"
    np.savetxt(path, A, delimiter=",", fmt="%.17g", header=header)


def load_matrix(path):
    """Inverse of :func:`save_matrix`; returns ``(A, seed)``."""
    with open(path) as fh:
        header = fh.readline().lstrip("#").strip()
    meta = dict(item.split("=") for item in header.split(","))
    rows, cols = int(meta["rows"]), int(meta["cols"])
    A = np.loadtxt(path, delimiter=",", ndmin=2).reshape(rows, cols)
    return A, int(meta["seed"])


def save_scenario(s, directory, windows=(1,)):
    """Dump ground truth (or anchors) and the requested windows to CSV files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(s, TrackingScenario):
        X_A, X_B = s.anchors
        save_matrix(directory / "anchor_a.csv", X_A, s.seed)
        save_matrix(directory / "anchor_b.csv", X_B, s.seed)
    else:
        save_matrix(directory / "ground_truth.csv", s.ground_truth, s.seed)
    for i in windows:
        batch = sample_window(s, i)
        save_matrix(directory / f"window_{i}_y.csv", batch.Y, s.seed)
        save_matrix(directory / f"window_{i}_d.csv", batch.desired, s.seed)
