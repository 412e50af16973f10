import csv
import math

import numpy as np
import pytest

from nsdasf.cli import main
from nsdasf.datagen import (StaticScenario, TrackingScenario, projection_coefficient,
                            sample_window, weight_at)
from nsdasf.errors import ConfigurationError
from nsdasf.experiments import (ExperimentConfig, central_oracle, derive_seed, parse_config,
                                run_experiment)
from nsdasf.problem import NetworkLayout, ProblemInstance
from nsdasf.solver import soft_threshold

SMALL = dict(K=3, M_k=3, n_samples=100, runs=2, iterations=6)


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_zero_iterations_single_row(tmp_path):
    cfg = ExperimentConfig(**{**SMALL, "runs": 1, "iterations": 0}, output=str(tmp_path))
    result = run_experiment(cfg)
    rows = _read(result["paths"][0])
    assert len(rows) == 2 and rows[1][:2] == ["0", "0"]
    assert math.isnan(result["compression_ratio"])


def test_output_files(tmp_path):
    cfg = ExperimentConfig(**SMALL, output=str(tmp_path), trace=True)
    result = run_experiment(cfg)
    agg = _read(tmp_path / "aggregate.csv")
    assert agg[0] == ["iteration", "min", "median", "max"]
    assert len(agg) == 1 + 7 and all(len(r) == 4 for r in agg)
    run0 = _read(tmp_path / "run_000.csv")
    assert run0[0][-1] == "errata" and len(run0) == 8
    assert all(r[-1] == "" for r in run0[1:])
    bw = _read(tmp_path / "bandwidth.csv")
    assert len(bw) == 1 + 2 * 6
    assert bw[1][3:] == ["206", "2", "1648", "16"]
    assert (tmp_path / "trace_001.csv").exists()
    assert result["compression_ratio"] == pytest.approx(900 * 2 / 3 / 208)


def test_byte_identical_outputs(tmp_path):
    outputs = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / str(i)
        run_experiment(ExperimentConfig(**SMALL, seed=3, output=str(out), workers=workers))
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1] == outputs[2]


def test_seed_derivation():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert len({derive_seed(0, r) for r in range(50)}) == 50
    assert derive_seed(0, 1) != derive_seed(1, 1)


def test_parse_config():
    cfg = parse_config("""
[network]
K = 4
[problem]
lambda = 0.5
[solver]
equilibrate = no
[experiment]
experiment = tracking
iterations = 12
""")
    assert (cfg.K, cfg.lam, cfg.equilibrate, cfg.experiment, cfg.iterations) == (
        4, 0.5, False, "tracking", 12)
    for bad in ("[network]\nK_typo = 3", "[extra]\nx = 1", "[network]\nK = three",
                "[experiment]\nmode = online", "[solver]\nequilibrate = maybe",
                "K = 3"):
        with pytest.raises(ConfigurationError):
            parse_config(bad)


def test_default_iterations():
    assert ExperimentConfig().n_iterations == 50
    assert ExperimentConfig(experiment="tracking").n_iterations == 540


def test_cli(tmp_path, capsys):
    conf = tmp_path / "c.ini"
    conf.write_text("[network]\nK = 3\nM_k = 3\n[problem]\nn_samples = 60\n")
    out = tmp_path / "out"
    code = main(["run", "--config", str(conf), "--runs", "1", "--iterations", "3",
                 "--out", str(out), "--cache-gamma"])
    assert code == 0
    assert str(out / "run_000.csv") in capsys.readouterr().out
    rows = _read(out / "bandwidth.csv")
    assert [r[3] for r in rows[1:]] == ["126", "123", "120"]


def test_cli_errors(tmp_path, capsys):
    conf = tmp_path / "bad.ini"
    conf.write_text("[network]\nwidth = 3\n")
    assert main(["run", "--config", str(conf)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--mode", "online"])


def test_oracle_edge_cases():
    layout = NetworkLayout.uniform(2, 3, 1)
    batch = sample_window(StaticScenario(layout, 0, n_samples=200), 1)
    Y, D = batch.Y, batch.desired
    ls = np.linalg.solve(Y @ Y.T, Y @ D.T)
    res = central_oracle(batch, ProblemInstance(layout, 0.0))
    np.testing.assert_allclose(res.X, ls, rtol=1e-9, atol=1e-12)
    lam_max = np.max(np.abs(2 / 200 * Y @ D.T))
    res = central_oracle(batch, ProblemInstance(layout, lam_max * 1.001))
    assert np.max(np.abs(res.X)) <= 1e-8 and res.valid
    res = central_oracle(batch, ProblemInstance(layout, 1.0))
    assert res.valid and res.residual <= 1e-8


def test_tracking_rows(tmp_path):
    cfg = ExperimentConfig(experiment="tracking", iterations=30, output=str(tmp_path))
    rows = run_experiment(cfg)["rows"]
    assert len(rows) == 31
    assert rows[0][0] == 0 and math.isnan(rows[0][4]) and math.isnan(rows[0][5])
    lines = _read(tmp_path / "tracking.csv")
    assert lines[0] == ["iteration", "t_i", "w_true", "proj_estimate", "proj_oracle",
                        "rel_mse_vs_oracle"]
    assert float(lines[-1][1]) == pytest.approx(30 / 180)
    # after one full round the estimate sits next to the oracle
    assert all(abs(r[3] - r[4]) < 0.05 for r in rows[11:])


def test_tracking_oracle_follows_shrunk_truth():
    # the l1 oracle tracks the soft-thresholded truth, not the truth itself
    layout = NetworkLayout.uniform(10, 10, 1)
    inst = ProblemInstance(layout)
    s = TrackingScenario(layout, 0)
    for i in (1, 60, 120, 180):
        orc = central_oracle(sample_window(s, i), inst)
        pop = soft_threshold(s.truth_at(i), inst.lam / 2)
        assert abs(projection_coefficient(orc.X, s.anchors)
                   - projection_coefficient(pop, s.anchors)) <= 0.05


@pytest.mark.xfail(strict=True, reason="l1 shrinkage moves the oracle's projection "
                   "away from the generating weight by more than 0.05")
def test_tracking_oracle_follows_generating_weight():
    layout = NetworkLayout.uniform(10, 10, 1)
    inst = ProblemInstance(layout)
    s = TrackingScenario(layout, 0)
    for i in (1, 60, 120, 180):
        orc = central_oracle(sample_window(s, i), inst)
        assert abs(projection_coefficient(orc.X, s.anchors) - weight_at(i)) <= 0.05
