"""
One distributed iteration, step by step
=======================================

A small network of three nodes, two channels each, fuses its channels into a
single output.  We walk through what the updating node receives, the reduced
problem it solves and how the other nodes apply the result, and we check
that the whole network's objective went down.
"""

import numpy as np

from nsdasf import FilterMatrix, NetworkLayout, ProblemInstance, SignalBatch
from nsdasf.dasf import apply_update, assemble_local, compress, extract
from nsdasf.solver import SolverOptions, solve

rng = np.random.default_rng(1)
layout = NetworkLayout((2, 2, 2), Q=1)
inst = ProblemInstance(layout, lam=0.5)

# Samples are columns.  The desired signal is a sparse mix of the channels.
N = 200
Y = rng.standard_normal((layout.M, N))
mix = np.array([[1.5], [0.0], [0.0], [-2.0], [0.0], [0.7]])
D = mix.T @ Y + 0.3 * rng.standard_normal((1, N))
batch = SignalBatch.from_stacked(Y, D, layout)

X = FilterMatrix(rng.standard_normal((layout.M, 1)), layout)
print("objective at the random start:", inst.objective(X, batch))

###############################################################################
# Node 1 updates.  Nodes 0 and 2 send a one-row compressed signal and their
# one-entry regularizer block instead of their two raw channels.
q = 1
views = {k: compress(X.block(k), batch.per_node_samples[k], inst.gamma_blocks[k], node=k)
         for k in (0, 2)}
for k, v in views.items():
    print(f"node {k} sends z of shape {v.z_samples.shape} and F of shape {v.f_block.shape}")

###############################################################################
# The local problem has M_q + (K - 1) Q = 2 + 2 = 4 variables.
lp = assemble_local(q, views, batch.per_node_samples[q], batch.desired, inst)
print("local dimension:", lp.M_tilde)
for b in lp.block_layout:
    print(f"  rows {b.start}:{b.stop} belong to node {b.node} ({b.role})")

# Starting from G_k = 1 and the current X_q reproduces the current filter,
# so the local solution can only improve on it.
warm = lp.warm_start(X.block(q))
Xbar, report = solve(lp.composite, SolverOptions(tolerance=1e-12, max_iterations=50_000,
                                                  warm_start=warm))
print(f"local solve: {report.iterations} iterations, converged={report.converged}")

###############################################################################
# Node 1 keeps its new block and sends every other node its scalar G_k.
bundle = extract(Xbar, lp)
X_new = apply_update(X, bundle, q)
for k, G in bundle.update_matrices.items():
    print(f"node {k} rescales its block by {G[0, 0]:+.4f}")
print("objective after the update:", inst.objective(X_new, batch))
print("local objective at its solution:", lp.composite.objective(Xbar))
