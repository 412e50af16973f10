"""Building blocks of one NS-DASF iteration.

At iteration ``i`` with updating node ``q``, every other node ``k`` compresses
its samples to ``z_k = X_k^T y_k`` and its regularizer block to
``F_k = X_k^T Gamma_k``.  Node ``q`` stacks these with its raw samples into a
local problem of dimension ``M_q + (K-1) Q``::

    Xbar = [G_1; ...; X_q; ...; G_K]
    z    = [z_1; ...; y_q; ...; z_K]
    F    = BlkDiag(F_1, ..., Gamma_q, ..., F_K)

solves it, keeps ``X_q`` and sends every ``G_k`` back so node ``k`` can set
``X_k <- X_k G_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericError, ProtocolError, StalenessError
from .problem import FilterMatrix
from .solver import CompositeProblem

__all__ = [
    "CompressedView",
    "BlockSpec",
    "LocalProblem",
    "UpdateBundle",
    "compress",
    "assemble_local",
    "extract",
    "apply_update",
]


@dataclass(frozen=True)
class CompressedView:
    node: int
    z_samples: np.ndarray
    f_block: np.ndarray
    window_index: int = 1

    @property
    def Q(self):
        return self.z_samples.shape[0]

    @property
    def N(self):
        return self.z_samples.shape[1]


def compress(X_k, batch_k, gamma_k, node=0, window_index=1):
    """Compressed samples ``X_k^T y_k`` and regularizer block ``X_k^T Gamma_k``."""
    X_k = np.atleast_2d(np.asarray(X_k, dtype=float))
    batch_k = np.asarray(batch_k, dtype=float)
    gamma_k = np.asarray(gamma_k, dtype=float)
    if X_k.shape[0] != batch_k.shape[0] or X_k.shape[0] != gamma_k.shape[0]:
        raise ConfigurationError(
            f"block {X_k.shape} incompatible with samples {batch_k.shape} "
            f"or gamma {gamma_k.shape}")
    return CompressedView(node, X_k.T @ batch_k, X_k.T @ gamma_k, window_index)


@dataclass(frozen=True)
class BlockSpec:
    node: int
    start: int
    stop: int
    role: str  # "raw" for the updating node, "compressed" otherwise

    @property
    def rows(self):
        return slice(self.start, self.stop)


@dataclass(frozen=True)
class LocalProblem:
    composite: CompositeProblem
    block_layout: tuple
    updating_node: int

    @property
    def M_tilde(self):
        return self.composite.dim[0]

    def spec(self, k):
        return self.block_layout[k]

    def warm_start(self, X_q):
        """Point with every ``G_k = I`` and node ``q``'s rows set to ``X_q``.

        Mapped back through :func:`apply_update` it reproduces the current
        network-wide filter exactly.
        """
        Q = self.composite.dim[1]
        blocks = [np.asarray(X_q, dtype=float) if b.role == "raw" else np.eye(Q)
                  for b in self.block_layout]
        return np.vstack(blocks)


@dataclass(frozen=True)
class UpdateBundle:
    new_block_q: np.ndarray
    update_matrices: Mapping[int, np.ndarray]
    window_index: int = 1

    def __post_init__(self):
        mats = [self.new_block_q, *self.update_matrices.values()]
        if not all(np.all(np.isfinite(m)) for m in mats):
            raise NumericError("update bundle has non-finite entries")


def assemble_local(q, views, raw_q, desired, inst, window_index=None):
    """Stack compressed views and node ``q``'s raw data into a local problem.

    Parameters
    ----------
    q : int
        Updating node.
    views : mapping or iterable of CompressedView
        One view for every node except ``q``.
    raw_q : ndarray
        ``M_q x N`` samples of node ``q``.
    desired : ndarray
        ``Q x N`` desired signal of the same window.
    inst : ProblemInstance
    window_index : int, optional
        Window the data belongs to; views from any other window are stale.
    """
    layout = inst.layout
    K, Q = layout.K, layout.Q
    if not 0 <= q < K:
        raise ConfigurationError(f"node {q} outside 0..{K - 1}")
    if isinstance(views, Mapping):
        view_list = list(views.values())
    else:
        view_list = list(views)
    by_node = {}
    for v in view_list:
        if v.node in by_node:
            raise ProtocolError(f"duplicate view from node {v.node}")
        by_node[v.node] = v
    expected = set(range(K)) - {q}
    if set(by_node) != expected:
        missing = sorted(expected - set(by_node))
        extra = sorted(set(by_node) - expected)
        raise ProtocolError(f"views missing from {missing}, unexpected from {extra}")
    windows = {v.window_index for v in view_list}
    if window_index is not None:
        windows.add(window_index)
    if len(windows) > 1:
        raise StalenessError(f"views span windows {sorted(windows)}")

    raw_q = np.asarray(raw_q, dtype=float)
    desired = np.atleast_2d(np.asarray(desired, dtype=float))
    N = desired.shape[1]
    if raw_q.shape != (layout.channel_counts[q], N):
        raise ConfigurationError(f"raw samples of node {q} have shape {raw_q.shape}")

    data_rows, reg_blocks, specs = [], [], []
    start = 0
    for k in range(K):
        if k == q:
            data_rows.append(raw_q)
            reg_blocks.append(inst.gamma_blocks[q])
            role, height = "raw", layout.channel_counts[q]
        else:
            v = by_node[k]
            if v.z_samples.shape != (Q, N):
                raise ConfigurationError(
                    f"view from node {k} has shape {v.z_samples.shape}, expected {(Q, N)}")
            if v.f_block.shape != (Q, layout.regularizer_widths[k]):
                raise ConfigurationError(f"F block from node {k} has shape {v.f_block.shape}")
            data_rows.append(v.z_samples)
            reg_blocks.append(v.f_block)
            role, height = "compressed", Q
        specs.append(BlockSpec(k, start, start + height, role))
        start += height

    composite = CompositeProblem(np.vstack(data_rows), desired,
                                 scipy.linalg.block_diag(*reg_blocks), inst.lam)
    return LocalProblem(composite, tuple(specs), q)


def extract(solution, lp, window_index=1):
    """Split a local solution into ``X_q`` and the update matrices ``G_k``."""
    solution = np.asarray(solution, dtype=float)
    if solution.ndim == 1:
        solution = solution[:, None]
    if solution.shape != lp.composite.dim:
        raise ConfigurationError(
            f"solution shape {solution.shape} does not match {lp.composite.dim}")
    new_q = None
    updates = {}
    for b in lp.block_layout:
        if b.role == "raw":
            new_q = solution[b.rows].copy()
        else:
            updates[b.node] = solution[b.rows].copy()
    return UpdateBundle(new_q, updates, window_index)


def apply_update(X, bundle, q):
    """Replace block ``q`` and right-multiply every other block by its ``G_k``."""
    layout = X.layout
    blocks = []
    for k, X_k in enumerate(X.blocks()):
        if k == q:
            new = np.asarray(bundle.new_block_q, dtype=float)
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                new = X_k @ bundle.update_matrices[k]
        if new.shape != X_k.shape:
            raise ConfigurationError(f"updated block {k} has shape {new.shape}")
        blocks.append(new)
    entries = np.vstack(blocks)
    if not np.all(np.isfinite(entries)):
        raise NumericError("update produced non-finite filter entries")
    return FilterMatrix(entries, layout)
