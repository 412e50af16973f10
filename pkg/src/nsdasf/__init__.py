"""Distributed l1-regularized spatial filtering over a simulated sensor network."""

from .dasf import (CompressedView, LocalProblem, UpdateBundle, apply_update,
                   assemble_local, compress, extract)
from .datagen import (StaticScenario, TrackingScenario, projection_coefficient,
                      sample_window, weight_at)
from .engine import DasfEngine, IterationRecord, global_problem, run
from .errors import *  # noqa: F401,F403
from .experiments import ExperimentConfig, central_oracle, run_static, run_tracking
from .netsim import BandwidthLedger, SimulatedNetwork, compression_ratio
from .problem import (FilterMatrix, NetworkLayout, ProblemInstance, SignalBatch,
                      objective, regularizer_blocks, smooth_gradient)
from .solver import (CompositeProblem, SolverOptions, operator_norm, soft_threshold,
                     solve, stationarity_residual)

__version__ = "0.1.0"
