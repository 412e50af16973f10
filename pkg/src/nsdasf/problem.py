"""Spatial filtering problem family and the sparse multichannel Wiener filter.

Problems in the family have the form::

    min_X  f(X^T y) + sum_k g_k(X_k^T Gamma_k)

where ``X`` is an ``M x Q`` network-wide filter split row-wise into one block
per node.  The shipped instance uses the sample-average least-squares loss::

    f(X^T Y) = (1/N) ||X^T Y - D||_F^2,    g_k(.) = lambda * ||.||_{1,1}

Samples are stored as columns throughout (``Y`` is ``M x N``).
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericError

__all__ = [
    "NetworkLayout",
    "FilterMatrix",
    "SignalBatch",
    "ProblemFamily",
    "ProblemInstance",
    "objective",
    "smooth_value",
    "smooth_gradient",
    "regularizer_blocks",
]


@dataclass(frozen=True)
class NetworkLayout:
    """Sizes of a fully-connected network of ``K`` nodes.

    Parameters
    ----------
    channel_counts : sequence of int
        ``M_k``, the number of sensor channels at each node.
    Q : int
        Number of output channels of the filter.
    regularizer_widths : sequence of int, optional
        ``L_k``, the column count of each ``Gamma_k``.  Defaults to
        ``channel_counts`` (identity regularizer blocks).
    """

    channel_counts: tuple
    Q: int
    regularizer_widths: Optional[tuple] = None

    def __post_init__(self):
        counts = tuple(int(m) for m in self.channel_counts)
        if not counts or any(m <= 0 for m in counts):
            raise ConfigurationError(f"channel counts must be positive, got {counts}")
        if int(self.Q) <= 0:
            raise ConfigurationError(f"Q must be positive, got {self.Q}")
        if self.Q > min(counts):
            raise ConfigurationError(
                f"Q={self.Q} exceeds the smallest node channel count {min(counts)}"
            )
        widths = counts if self.regularizer_widths is None else tuple(
            int(w) for w in self.regularizer_widths)
        if len(widths) != len(counts) or any(w <= 0 for w in widths):
            raise ConfigurationError(f"invalid regularizer widths {widths}")
        object.__setattr__(self, "channel_counts", counts)
        object.__setattr__(self, "Q", int(self.Q))
        object.__setattr__(self, "regularizer_widths", widths)

    @classmethod
    def uniform(cls, K, M_k, Q):
        return cls((M_k,) * K, Q)

    @property
    def K(self):
        return len(self.channel_counts)

    @property
    def M(self):
        return sum(self.channel_counts)

    @property
    def L(self):
        return sum(self.regularizer_widths)

    @property
    def offsets(self):
        return tuple(np.concatenate([[0], np.cumsum(self.channel_counts)[:-1]]).tolist())

    def rows(self, k):
        """Row slice of node ``k``'s block in the stacked filter or signal."""
        start = self.offsets[k]
        return slice(start, start + self.channel_counts[k])

    def split(self, A):
        """Split the rows of ``A`` into per-node blocks."""
        A = np.asarray(A)
        if A.shape[0] != self.M:
            raise ConfigurationError(f"expected {self.M} rows, got {A.shape[0]}")
        return [A[self.rows(k)] for k in range(self.K)]


@dataclass(frozen=True)
class FilterMatrix:
    """Network-wide filter ``X`` with its block partition."""

    entries: np.ndarray
    layout: NetworkLayout

    def __post_init__(self):
        X = np.array(self.entries, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape != (self.layout.M, self.layout.Q):
            raise ConfigurationError(
                f"filter shape {X.shape} does not match layout "
                f"({self.layout.M}, {self.layout.Q})"
            )
        if not np.all(np.isfinite(X)):
            raise NumericError("filter has non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "entries", X)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def block(self, k):
        return self.entries[self.layout.rows(k)]

    def blocks(self):
        return self.layout.split(self.entries)

    @classmethod
    def from_blocks(cls, blocks, layout):
        return cls(np.vstack(blocks), layout)


@dataclass(frozen=True)
class SignalBatch:
    """One window of ``N`` samples for every node, plus the desired signal.

    ``per_node_samples[k]`` is ``M_k x N`` and ``desired`` is ``Q x N``.
    Window ``i`` covers sample times ``(i-1)N, ..., iN-1``.
    """

    per_node_samples: tuple
    desired: np.ndarray
    window_index: int = 1

    def __post_init__(self):
        samples = tuple(np.asarray(y, dtype=float) for y in self.per_node_samples)
        desired = np.atleast_2d(np.asarray(self.desired, dtype=float))
        if not samples:
            raise ConfigurationError("a batch needs at least one node")
        n = desired.shape[1]
        if any(y.ndim != 2 or y.shape[1] != n for y in samples):
            raise ConfigurationError("all nodes and the desired signal must share N")
        if n < 1:
            raise ConfigurationError("a batch needs at least one sample")
        if self.window_index < 1:
            raise ConfigurationError(f"window index must be >= 1, got {self.window_index}")
        if not (all(np.all(np.isfinite(y)) for y in samples)
                and np.all(np.isfinite(desired))):
            raise NumericError("batch has non-finite samples")
        object.__setattr__(self, "per_node_samples", samples)
        object.__setattr__(self, "desired", desired)

    @classmethod
    def from_stacked(cls, Y, D, layout, window_index=1):
        return cls(tuple(layout.split(Y)), D, window_index)

    @property
    def N(self):
        return self.desired.shape[1]

    @property
    def Y(self):
        return np.vstack(self.per_node_samples)

    @property
    def sample_range(self):
        i, n = self.window_index, self.N
        return ((i - 1) * n, i * n - 1)


class ProblemFamily(abc.ABC):
    """Smooth loss of ``X^T y`` plus a node-separable convex regularizer."""

    layout: NetworkLayout

    @abc.abstractmethod
    def smooth_value(self, X, batch):
        ...

    @abc.abstractmethod
    def smooth_gradient(self, X, batch):
        ...

    @abc.abstractmethod
    def regularizer_block(self, k, X_k):
        """``g_k(X_k^T Gamma_k)`` for node ``k``."""

    def regularizer_blocks(self, X):
        X = _as_array(X)
        return [self.regularizer_block(k, X_k)
                for k, X_k in enumerate(self.layout.split(X))]

    def objective(self, X, batch):
        return self.smooth_value(X, batch) + sum(self.regularizer_blocks(X))


@dataclass(frozen=True)
class ProblemInstance(ProblemFamily):
    """Sparse multichannel Wiener filter: least squares plus weighted l1.

    ``constraint_hooks`` holds optional per-node feasibility predicates.  They
    are carried for completeness but the shipped instance is unconstrained.
    """

    layout: NetworkLayout
    lam: float = 1.0
    gamma_blocks: Optional[tuple] = None
    constraint_hooks: Optional[Sequence[Callable]] = field(default=None, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigurationError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.gamma_blocks is None:
            gammas = tuple(np.eye(m) for m in self.layout.channel_counts)
        else:
            gammas = tuple(np.asarray(g, dtype=float) for g in self.gamma_blocks)
        shapes = tuple(zip(self.layout.channel_counts, self.layout.regularizer_widths))
        if tuple(g.shape for g in gammas) != shapes:
            raise ConfigurationError(
                f"gamma block shapes {[g.shape for g in gammas]} do not match {shapes}")
        if self.constraint_hooks is not None and len(self.constraint_hooks) != self.layout.K:
            raise ConfigurationError("need one constraint hook per node")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "gamma_blocks", gammas)

    @property
    def gamma(self):
        """Block-diagonal ``M x L`` regularizer matrix."""
        from scipy.linalg import block_diag
        return block_diag(*self.gamma_blocks)

    @property
    def has_identity_gamma(self):
        return all(g.shape[0] == g.shape[1] and np.array_equal(g, np.eye(g.shape[0]))
                   for g in self.gamma_blocks)

    def smooth_value(self, X, batch):
        X, Y, D = _checked(X, batch, self.layout)
        return float(np.sum((X.T @ Y - D) ** 2) / batch.N)

    def smooth_gradient(self, X, batch):
        X, Y, D = _checked(X, batch, self.layout)
        return (2.0 / batch.N) * (Y @ (Y.T @ X - D.T))

    def regularizer_block(self, k, X_k):
        return self.lam * float(np.sum(np.abs(np.asarray(X_k).T @ self.gamma_blocks[k])))


def _as_array(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def _checked(X, batch, layout=None):
    X = _as_array(X)
    Y, D = batch.Y, batch.desired
    if X.shape[0] != Y.shape[0] or X.shape[1] != D.shape[0]:
        raise ConfigurationError(
            f"filter {X.shape} incompatible with samples {Y.shape} / desired {D.shape}")
    if layout is not None and X.shape[0] != layout.M:
        raise ConfigurationError(f"filter has {X.shape[0]} rows, layout has M={layout.M}")
    if not np.all(np.isfinite(X)):
        raise NumericError("filter has non-finite entries")
    return X, Y, D


def objective(X, batch, inst):
    """``(1/N) ||X^T Y - D||_F^2 + lambda ||X^T Gamma||_{1,1}``."""
    return inst.objective(X, batch)


def smooth_value(X, batch):
    X, Y, D = _checked(X, batch)
    return float(np.sum((X.T @ Y - D) ** 2) / batch.N)


def smooth_gradient(X, batch):
    """Gradient ``(2/N) Y (Y^T X - D^T)`` of the least-squares term."""
    X, Y, D = _checked(X, batch)
    return (2.0 / batch.N) * (Y @ (Y.T @ X - D.T))


def regularizer_blocks(X, inst):
    """Per-node regularizer values; their sum is the full regularizer."""
    X = _as_array(X)
    if X.shape != (inst.layout.M, inst.layout.Q):
        raise ConfigurationError(f"filter shape {X.shape} does not match layout")
    return inst.regularizer_blocks(X)
