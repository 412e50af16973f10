"""In-memory fully-connected sensor network with exact traffic accounting.

Each :class:`SensorNode` owns its filter block, its regularizer block and the
samples of the current window.  Messages travel through a synchronous,
lossless :class:`Transport` that only counts scalars and never looks at what
they mean.  The unit of accounting is one real scalar.

With ``cache_gamma`` enabled, nodes remember the ``F_k`` blocks they have
received and keep them current from the broadcast update matrices
(``F_k <- G_k^T F_k``).  The updating node broadcasts its own new ``F_q``.
After one full round the uplink then carries compressed samples only.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dasf import CompressedView, compress
from .errors import ConfigurationError, DegenerateInputError, ProtocolError
from .problem import FilterMatrix

__all__ = [
    "MessageKind",
    "Message",
    "BandwidthLedger",
    "Transport",
    "SensorNode",
    "SimulatedNetwork",
    "compression_ratio",
    "write_trace_csv",
    "BROADCAST",
]

BROADCAST = -1


class MessageKind(str, Enum):
    COMPRESSED_DATA = "CompressedData"
    F_BLOCK = "FBlock"
    UPDATE_MATRIX = "UpdateMatrix"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    source: int
    destination: int
    payload: np.ndarray = field(repr=False)
    window_index: int
    iteration: int
    about: int = -1  # node whose block an UpdateMatrix/FBlock refers to

    @property
    def payload_values(self):
        return int(np.asarray(self.payload).size)


@dataclass
class BandwidthLedger:
    """Per-iteration uplink/downlink scalar counts.

    ``centralized_baseline`` is what a fusion center would ingest per window
    (``N * M`` scalars).
    """

    centralized_baseline: int
    K: int
    per_iteration: list = field(default_factory=list)

    def record(self, iteration, up, down):
        self.per_iteration.append((int(iteration), int(up), int(down)))

    @property
    def total_up(self):
        return sum(u for _, u, _ in self.per_iteration)

    @property
    def total_down(self):
        return sum(d for _, _, d in self.per_iteration)

    def __len__(self):
        return len(self.per_iteration)


def compression_ratio(ledger):
    """Raw-forwarding traffic of the ``K-1`` non-sink nodes over NS-DASF traffic."""
    if not ledger.per_iteration:
        raise DegenerateInputError("empty ledger")
    mean_total = (ledger.total_up + ledger.total_down) / len(ledger.per_iteration)
    return ledger.centralized_baseline * (ledger.K - 1) / ledger.K / mean_total


class Transport:
    """Synchronous lossless delivery; keeps a full trace of every message."""

    def __init__(self, K):
        self.K = K
        self.trace = []
        self._inbox = {k: [] for k in range(K)}

    def send(self, msg):
        if not 0 <= msg.source < self.K:
            raise ProtocolError(f"unknown source {msg.source}")
        if msg.destination == BROADCAST:
            targets = [k for k in range(self.K) if k != msg.source]
        elif 0 <= msg.destination < self.K and msg.destination != msg.source:
            targets = [msg.destination]
        else:
            raise ProtocolError(f"invalid destination {msg.destination}")
        self.trace.append(msg)
        for k in targets:
            self._inbox[k].append(msg)

    def collect(self, node):
        """Drain ``node``'s inbox, ordered by sender then send order."""
        msgs = self._inbox[node]
        self._inbox[node] = []
        return sorted(msgs, key=lambda m: m.source)

    def mark(self):
        return len(self.trace)

    def rollback(self, mark):
        del self.trace[mark:]
        for k in range(self.K):
            self._inbox[k] = []


class SensorNode:
    """A node's local state: filter block, regularizer block, current window."""

    def __init__(self, index, block, gamma):
        self.index = index
        self.block = np.array(block, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.samples = None
        self.window_index = None
        self.f_cache = {}

    def observe(self, batch):
        self.samples = batch.per_node_samples[self.index]
        self.window_index = batch.window_index

    def compressed_view(self):
        if self.samples is None:
            raise ProtocolError(f"node {self.index} has no data")
        return compress(self.block, self.samples, self.gamma,
                        node=self.index, window_index=self.window_index)


class SimulatedNetwork:
    """Nodes plus transport plus ledger for one NS-DASF run.

    Parameters
    ----------
    inst : ProblemInstance
    X0 : array_like
        Initial network-wide filter.
    n_samples : int
        Window length, used for the fusion-center baseline.
    cache_gamma : bool
        Share ``F_k`` once and keep it current instead of resending it.
    workers : int
        Threads used to compute the compressed views of a round.
    """

    def __init__(self, inst, X0, n_samples, cache_gamma=False, workers=1):
        self.inst = inst
        self.layout = inst.layout
        X0 = FilterMatrix(X0, self.layout)
        self.nodes = [SensorNode(k, X0.block(k), inst.gamma_blocks[k])
                      for k in range(self.layout.K)]
        self.transport = Transport(self.layout.K)
        self.ledger = BandwidthLedger(n_samples * self.layout.M, self.layout.K)
        self.cache_gamma = cache_gamma
        self.workers = max(1, int(workers))

    @property
    def X(self):
        return FilterMatrix.from_blocks([n.block for n in self.nodes], self.layout)

    def deliver_round(self, q, window, iteration):
        """Aggregation phase: every node but ``q`` sends its compressed view.

        Returns
        -------
        views : dict
            ``CompressedView`` per node ``k != q``, as reconstructed at ``q``.
        raw_q : ndarray
            Node ``q``'s own samples.
        scalars_up : int
            Scalars carried by this phase.
        """
        K = self.layout.K
        for node in self.nodes:
            node.observe(window)
        senders = [n for n in self.nodes if n.index != q]
        if self.workers > 1 and len(senders) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                computed = list(pool.map(SensorNode.compressed_view, senders))
        else:
            computed = [n.compressed_view() for n in senders]

        sink = self.nodes[q]
        mark = self.transport.mark()
        for view in computed:
            k = view.node
            self.transport.send(Message(MessageKind.COMPRESSED_DATA, k, q, view.z_samples,
                                        view.window_index, iteration))
            if not (self.cache_gamma and k in sink.f_cache):
                self.transport.send(Message(MessageKind.F_BLOCK, k, q, view.f_block,
                                            view.window_index, iteration, about=k))

        z, f = {}, {}
        for msg in self.transport.collect(q):
            if msg.kind is MessageKind.COMPRESSED_DATA:
                if msg.source in z:
                    raise ProtocolError(f"duplicate samples from node {msg.source}")
                z[msg.source] = (msg.payload, msg.window_index)
            elif msg.kind is MessageKind.F_BLOCK:
                f[msg.source] = msg.payload
        views = {}
        for k in range(K):
            if k == q:
                continue
            if k not in z:
                raise ProtocolError(f"no data from node {k}")
            if k in f:
                f_block = f[k]
                if self.cache_gamma:
                    sink.f_cache[k] = f_block
            elif self.cache_gamma and k in sink.f_cache:
                f_block = sink.f_cache[k]
            else:
                raise ProtocolError(f"no F block for node {k}")
            views[k] = CompressedView(k, z[k][0], f_block, z[k][1])
        up = sum(m.payload_values for m in self.transport.trace[mark:])
        return views, sink.samples, up

    def disseminate(self, bundle, q, iteration, scalars_up):
        """Solution-update phase: send every ``G_k`` and apply all updates."""
        window = bundle.window_index
        mark = self.transport.mark()
        for k, G in sorted(bundle.update_matrices.items()):
            dest = BROADCAST if self.cache_gamma else k
            self.transport.send(Message(MessageKind.UPDATE_MATRIX, q, dest, G,
                                        window, iteration, about=k))
        sink = self.nodes[q]
        sink.block = np.array(bundle.new_block_q, dtype=float)
        if self.cache_gamma and self.layout.K > 1:
            self.transport.send(Message(MessageKind.F_BLOCK, q, BROADCAST,
                                        sink.block.T @ sink.gamma, window, iteration,
                                        about=q))
        for node in self.nodes:
            for msg in self.transport.collect(node.index):
                if msg.kind is MessageKind.UPDATE_MATRIX:
                    if msg.about == node.index:
                        node.block = node.block @ msg.payload
                    elif msg.about in node.f_cache:
                        node.f_cache[msg.about] = msg.payload.T @ node.f_cache[msg.about]
                elif msg.kind is MessageKind.F_BLOCK:
                    node.f_cache[msg.about] = msg.payload
        # the updating node applies the same right-multiplications to its cache
        if self.cache_gamma:
            for k, G in bundle.update_matrices.items():
                if k in sink.f_cache:
                    sink.f_cache[k] = G.T @ sink.f_cache[k]
        down = sum(m.payload_values for m in self.transport.trace[mark:])
        self.ledger.record(iteration, scalars_up, down)
        return down

    def mark(self):
        return self.transport.mark()

    def rollback(self, mark):
        self.transport.rollback(mark)


TRACE_COLUMNS = ("iteration", "kind", "source", "destination", "scalars", "window_index")


def write_trace_csv(trace, path):
    """Dump a message trace; broadcast destinations are written as ``*``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for m in trace:
            dest = "*" if m.destination == BROADCAST else m.destination
            w.writerow((m.iteration, m.kind.value, m.source, dest,
                        m.payload_values, m.window_index))
