import csv

import numpy as np
import pytest

from nsdasf.datagen import StaticScenario, sample_window
from nsdasf.engine import DasfEngine, run
from nsdasf.errors import DegenerateInputError, ProtocolError
from nsdasf.netsim import (BROADCAST, BandwidthLedger, Message, MessageKind,
                           SimulatedNetwork, Transport, compression_ratio, write_trace_csv)
from nsdasf.problem import NetworkLayout, ProblemInstance
from nsdasf.solver import SolverOptions

DEFAULT_RATIO = 9.891196834817013  # 90000 / 9099, evaluated with mpmath


@pytest.fixture(scope="module")
def default_setup():
    layout = NetworkLayout.uniform(10, 10, 1)
    inst = ProblemInstance(layout)
    scenario = StaticScenario(layout, seed=5)
    return layout, inst, scenario


def test_deliver_round_default_sizes(default_setup):
    layout, inst, scenario = default_setup
    batch = sample_window(scenario, 1)
    net = SimulatedNetwork(inst, np.ones((100, 1)), 1000)
    views, raw_q, up = net.deliver_round(3, batch, 0)
    assert up == 9 * (1000 + 10) == 9090
    assert sorted(views) == [k for k in range(10) if k != 3]
    np.testing.assert_array_equal(raw_q, batch.per_node_samples[3])
    kinds = [m.kind for m in net.transport.trace]
    assert kinds.count(MessageKind.COMPRESSED_DATA) == 9
    assert kinds.count(MessageKind.F_BLOCK) == 9
    assert all(m.destination == 3 for m in net.transport.trace)
    assert net.ledger.centralized_baseline == 100_000


def test_default_ledger_and_ratio(default_setup):
    layout, inst, scenario = default_setup
    engine = DasfEngine(inst, np.ones((100, 1)), 1000)
    batch = sample_window(scenario, 1)
    for _ in range(3):
        engine.step(batch)
    assert engine.ledger.per_iteration == [(0, 9090, 9), (1, 9090, 9), (2, 9090, 9)]
    assert compression_ratio(engine.ledger) == pytest.approx(DEFAULT_RATIO, rel=1e-15)


def test_two_nodes_message_pattern():
    layout = NetworkLayout.uniform(2, 3, 1)
    inst = ProblemInstance(layout)
    scenario = StaticScenario(layout, seed=0, n_samples=50)
    engine = DasfEngine(inst, np.ones((6, 1)), 50)
    engine.step(sample_window(scenario, 1))
    kinds = [(m.kind, m.source, m.destination) for m in engine.network.transport.trace]
    assert kinds == [(MessageKind.COMPRESSED_DATA, 1, 0), (MessageKind.F_BLOCK, 1, 0),
                     (MessageKind.UPDATE_MATRIX, 0, 1)]


def test_conservation_and_payload_sizes(default_setup):
    layout, inst, scenario = default_setup
    engine = DasfEngine(inst, np.ones((100, 1)), 1000)
    batch = sample_window(scenario, 1)
    for _ in range(4):
        engine.step(batch)
    trace = engine.network.transport.trace
    sizes = {MessageKind.COMPRESSED_DATA: 1000, MessageKind.F_BLOCK: 10,
             MessageKind.UPDATE_MATRIX: 1}
    assert all(m.payload_values == sizes[m.kind] for m in trace)
    ledger = engine.ledger
    assert sum(m.payload_values for m in trace) == ledger.total_up + ledger.total_down


def test_no_compression_ratio_below_one():
    # Q = M_k: every node forwards as much as its raw data plus F blocks
    layout = NetworkLayout.uniform(3, 2, 2)
    ledger = BandwidthLedger(100 * layout.M, layout.K)
    ledger.record(0, 2 * (2 * 100 + 2 * 2), 2 * 4)
    assert compression_ratio(ledger) < 1


def test_ratio_increases_towards_per_node_limit():
    ratios = []
    for N in (10 ** 3, 10 ** 5, 10 ** 7):
        ledger = BandwidthLedger(N * 100, 10)
        ledger.record(0, 9 * (N + 10), 9)
        ratios.append(compression_ratio(ledger))
    assert ratios[0] < ratios[1] < ratios[2] < 10
    assert ratios[2] == pytest.approx(10, rel=1e-5)


def test_empty_ledger():
    with pytest.raises(DegenerateInputError):
        compression_ratio(BandwidthLedger(10, 2))


def test_cache_gamma_traffic_and_equivalence(default_setup):
    layout, inst, scenario = default_setup
    opts = SolverOptions(tolerance=1e-12, max_iterations=50_000)
    plain = run(scenario, inst, 25, options=opts)
    cached = run(scenario, inst, 25, options=opts, cache_gamma=True)
    ups = [r.scalars_up for r in cached]
    assert ups[0] == 9090
    # node q already holds the F blocks of the nodes that updated before it
    assert ups[:10] == [9000 + 10 * (9 - q) for q in range(10)]
    assert all(u == 9000 for u in ups[10:])
    assert all(r.scalars_down == 9 + 10 for r in cached)
    for a, b in zip(plain, cached):
        np.testing.assert_allclose(b.X, a.X, rtol=1e-9, atol=1e-12)


def test_transport_rejects_bad_routes():
    t = Transport(3)
    with pytest.raises(ProtocolError):
        t.send(Message(MessageKind.F_BLOCK, 0, 0, np.ones(2), 1, 0))
    with pytest.raises(ProtocolError):
        t.send(Message(MessageKind.F_BLOCK, 5, 1, np.ones(2), 1, 0))
    t.send(Message(MessageKind.F_BLOCK, 2, BROADCAST, np.ones(2), 1, 0))
    assert [len(t.collect(k)) for k in range(3)] == [1, 1, 0]


def test_missing_node_data():
    layout = NetworkLayout.uniform(3, 2, 1)
    net = SimulatedNetwork(ProblemInstance(layout), np.ones((6, 1)), 10)
    with pytest.raises(ProtocolError):
        net.nodes[1].compressed_view()


def test_trace_csv(tmp_path, default_setup):
    layout, inst, scenario = default_setup
    engine = DasfEngine(inst, np.ones((100, 1)), 1000, cache_gamma=True)
    engine.step(sample_window(scenario, 1))
    path = tmp_path / "trace.csv"
    write_trace_csv(engine.network.transport.trace, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "kind", "source", "destination", "scalars", "window_index"]
    assert rows[1] == ["0", "CompressedData", "1", "0", "1000", "1"]
    assert rows[-1][1:4] == ["FBlock", "0", "*"]
    assert sum(int(r[4]) for r in rows[1:]) == 9090 + 19


def test_trace_identical_across_runs_and_workers(default_setup):
    layout, inst, scenario = default_setup
    batch = sample_window(scenario, 1)
    traces = []
    for workers in (1, 4, 1):
        engine = DasfEngine(inst, np.ones((100, 1)), 1000, workers=workers)
        for _ in range(3):
            engine.step(batch)
        traces.append([(m.kind, m.source, m.destination, m.payload.tobytes())
                       for m in engine.network.transport.trace])
    assert traces[0] == traces[1] == traces[2]
