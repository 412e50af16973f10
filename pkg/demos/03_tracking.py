"""
Tracking a drifting filter
==========================

The generating filter moves along the line between two sparse anchors,
``w(t) X_A + (1 - w(t)) X_B`` with ``w(t) = t cos(t^2)``.  The network sees
one fresh window per iteration, 180 iterations per unit of time.  Projecting
both the network estimate and the per-window central solution onto the
anchor line gives one number per iteration to compare.
"""

import sys
from pathlib import Path

import numpy as np

from nsdasf.experiments import ExperimentConfig, run_experiment

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/tracking")
rows = np.array(run_experiment(ExperimentConfig(experiment="tracking",
                                                output=str(out)))["rows"][1:])
it, t, w, est, orc = rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4]

# The drift speeds up as t grows, and one round of ten iterations is no longer
# short compared to how fast the optimum moves.
for lo, hi in ((1, 180), (181, 360), (361, 540)):
    sel = (it >= lo) & (it <= hi)
    print(f"iterations {lo:3d}-{hi:3d}: mean |estimate - central| = "
          f"{np.abs(est - orc)[sel].mean():.4f}")
print("correlation of the two projections:", np.corrcoef(est, orc)[0, 1])

###############################################################################
# The central solution does not follow the generating weight exactly: the l1
# penalty shrinks every entry, and small entries of the drifting filter are
# cut to zero, which moves the projection.
print("mean |central - w| over the first 180 iterations:",
      np.abs(orc - w)[:180].mean())

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, w, "k:", label="generating weight")
    ax.plot(t, orc, label="central solution")
    ax.plot(t, est, label="network estimate")
    ax.set_xlabel("t")
    ax.set_ylabel("projection onto anchor line")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "tracking.png", dpi=120)
    print("wrote", out / "tracking.png")
