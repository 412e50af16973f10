import numpy as np
import pytest

from nsdasf.datagen import StaticScenario, initial_filter, sample_window
from nsdasf.engine import DasfEngine, global_problem, run
from nsdasf.errors import ConfigurationError, DivergenceError
from nsdasf.experiments import central_oracle
from nsdasf.problem import NetworkLayout, ProblemInstance
from nsdasf.solver import SolverOptions, solve

TIGHT = SolverOptions(tolerance=1e-12, max_iterations=100_000)


@pytest.fixture(scope="module")
def default_net():
    layout = NetworkLayout.uniform(10, 10, 1)
    return layout, ProblemInstance(layout)


def test_single_node_equals_central_solve():
    layout = NetworkLayout((6,), 1)
    inst = ProblemInstance(layout, 0.5)
    scenario = StaticScenario(layout, seed=2, n_samples=200)
    batch = sample_window(scenario, 1)
    X0 = initial_filter(layout, 2)
    rec = DasfEngine(inst, X0, 200, TIGHT).step(batch)
    ref, _ = solve(global_problem(batch, inst), SolverOptions(
        tolerance=1e-12, max_iterations=100_000, warm_start=X0))
    np.testing.assert_allclose(rec.X, ref, rtol=1e-12, atol=1e-14)
    assert rec.updating_node == 0 and rec.scalars_up == 0 and rec.scalars_down == 0


def test_batch_mode_monotone(default_net):
    layout, inst = default_net
    for seed in range(3):
        records = run(StaticScenario(layout, seed), inst, 20)
        for r in records:
            assert r.objective_after <= r.objective_before + 1e-8 * (1 + abs(r.objective_before))


def test_fixed_point_at_central_solution(default_net):
    layout, inst = default_net
    scenario = StaticScenario(layout, 11)
    batch = sample_window(scenario, 1)
    X_star = central_oracle(batch, inst).X
    rec = run(batch, inst, 1, X0=X_star, options=TIGHT)[0]
    assert np.linalg.norm(rec.X - X_star) <= 1e-5 * np.linalg.norm(X_star)


def test_round_robin_order_and_counters(default_net):
    layout, inst = default_net
    records = run(StaticScenario(layout, 1), inst, 23)
    assert [r.updating_node for r in records] == [i % 10 for i in range(23)]
    assert [r.iteration for r in records] == list(range(23))
    assert all(r.window_index == 1 for r in records)


def test_error_decreases_over_full_rounds(default_net):
    layout, inst = default_net
    scenario = StaticScenario(layout, 3)
    X_star = central_oracle(sample_window(scenario, 1), inst).X
    records = run(scenario, inst, 20)
    X0 = initial_filter(layout, scenario.seed)
    err = [np.sum((X - X_star) ** 2) / np.sum(X_star ** 2)
           for X in (X0, records[9].X, records[19].X)]
    assert err[0] > err[1] > err[2]


def test_deterministic(default_net):
    layout, inst = default_net
    a = run(StaticScenario(layout, 4), inst, 12, mode="adaptive")
    b = run(StaticScenario(layout, 4), inst, 12, mode="adaptive")
    assert all(x.X.tobytes() == y.X.tobytes() and x.objective_after == y.objective_after
               for x, y in zip(a, b))


def test_adaptive_consumes_fresh_windows(default_net):
    layout, inst = default_net
    records = run(StaticScenario(layout, 4), inst, 5, mode="adaptive")
    assert [r.window_index for r in records] == [1, 2, 3, 4, 5]


def test_adaptive_close_to_batch_on_stationary_data(default_net):
    # error against the population minimizer soft(X_gt, lam/2); see README
    layout, inst = default_net
    T = 30
    ratios = []
    for seed in range(10):
        scenario = StaticScenario(layout, 100 + seed)
        gt = scenario.ground_truth
        pop = np.sign(gt) * np.maximum(np.abs(gt) - inst.lam / 2, 0)
        errs = []
        for mode in ("batch", "adaptive"):
            X = run(scenario, inst, T, mode=mode)[-1].X
            errs.append(np.sum((X - pop) ** 2) / np.sum(pop ** 2))
        ratios.append(errs[1] / errs[0])
    assert np.median(ratios) <= 10


def test_run_validation(default_net):
    layout, inst = default_net
    batch = sample_window(StaticScenario(layout, 0), 1)
    with pytest.raises(ConfigurationError):
        run(batch, inst, 0)
    with pytest.raises(ConfigurationError):
        run(batch, inst, 2, mode="adaptive")
    with pytest.raises(ConfigurationError):
        run(batch, inst, 2, mode="online")


def test_state_unchanged_when_solver_fails(default_net, monkeypatch):
    layout, inst = default_net
    batch = sample_window(StaticScenario(layout, 0), 1)
    engine = DasfEngine(inst, initial_filter(layout, 0), 1000)
    engine.step(batch)
    before = (engine.X.entries.copy(), engine.q, engine.iteration,
              len(engine.network.transport.trace), len(engine.ledger))

    def boom(*args, **kwargs):
        raise DivergenceError(7)

    monkeypatch.setattr("nsdasf.engine.solve", boom)
    with pytest.raises(DivergenceError):
        engine.step(batch)
    after = (engine.X.entries, engine.q, engine.iteration,
             len(engine.network.transport.trace), len(engine.ledger))
    np.testing.assert_array_equal(after[0], before[0])
    assert after[1:] == before[1:]


def test_rank_deficiency_is_logged(default_net, caplog):
    layout, inst = default_net
    X0 = initial_filter(layout, 0)
    X0[10:20] = 0.0
    engine = DasfEngine(inst, X0, 1000)
    with caplog.at_level("WARNING", logger="nsdasf.engine"):
        rec = engine.step(sample_window(StaticScenario(layout, 0), 1))
    assert 1 in rec.rank_deficient
    assert "rank deficient" in caplog.text
    # a zero block stays zero until its own node updates
    assert not np.any(rec.X[10:20])
