"""
Convergence on stationary data
==============================

Ten nodes with ten channels each estimate a sparse filter.  Every run starts
from a random filter; we track the relative error against the fusion-center
solution and plot the median over Monte-Carlo runs.

Pass a directory as the first argument to choose where the CSV files go.
"""

import sys
from pathlib import Path

import numpy as np

from nsdasf.experiments import ExperimentConfig, run_experiment

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/static")
cfg = ExperimentConfig(runs=20, iterations=50, output=str(out))
result = run_experiment(cfg)

aggregate = np.array(result["aggregate"])
for row in aggregate[::10]:
    print(f"iteration {int(row[0]):3d}: median rel. error {row[2]:.3e} "
          f"(min {row[1]:.1e}, max {row[3]:.1e})")
print("compression ratio vs. raw forwarding:", result["compression_ratio"])

###############################################################################
# The same data in adaptive mode: every iteration sees a fresh window, so the
# error settles at the level of the window-to-window fluctuation of the
# optimum instead of going to zero.
adaptive = run_experiment(ExperimentConfig(runs=20, iterations=50, mode="adaptive",
                                           output=str(out / "adaptive")))
adaptive_agg = np.array(adaptive["aggregate"])
print("adaptive median error after 50 iterations:", adaptive_agg[-1, 2])

###############################################################################
# Plot when matplotlib is around.
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for agg, label in ((aggregate, "batch"), (adaptive_agg, "adaptive")):
        floor = np.maximum(agg[:, 1:], 1e-18)
        ax.semilogy(agg[:, 0], floor[:, 1], label=f"{label} median")
        ax.fill_between(agg[:, 0], floor[:, 0], floor[:, 2], alpha=0.2)
    for r in range(1, 6):
        ax.axvline(10 * r, color="0.8", lw=0.5)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative MSE vs. central solution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "convergence.png", dpi=120)
    print("wrote", out / "convergence.png")
