"""Chambolle-Pock solver for l1-regularized least-squares spatial filters.

Solves::

    min_X  (1/N) ||X^T Z - T||_F^2 + lam * ||X^T F||_{1,1}

with ``Z`` an ``M x N`` data matrix, ``T`` a ``Q x N`` target and ``F`` an
``M x L`` (possibly non-identity, block-diagonal) regularizer operator.

The l1 term is dualized through ``F``; the quadratic term stays on the primal
side, where its proximal map is a linear solve with a Cholesky factor computed
once per problem.  Only the sufficient statistics ``Z Z^T`` and ``Z T^T``
enter the iteration, so its cost does not grow with ``N``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (ConfigurationError, DegenerateInputError, DivergenceError,
                     NumericError, UnsupportedConfigurationError)

logger = logging.getLogger(__name__)

__all__ = [
    "CompositeProblem",
    "SolverOptions",
    "SolveReport",
    "operator_norm",
    "soft_threshold",
    "solve",
    "stationarity_residual",
]

STEP_MARGIN = 0.99


@dataclass(frozen=True)
class CompositeProblem:
    """Data of ``min_X (1/N)||X^T Z - T||_F^2 + lam ||X^T F||_{1,1}``."""

    data_operator: np.ndarray
    target: np.ndarray
    reg_operator: np.ndarray
    lam: float

    def __post_init__(self):
        Z = np.asarray(self.data_operator, dtype=float)
        T = np.atleast_2d(np.asarray(self.target, dtype=float))
        F = np.asarray(self.reg_operator, dtype=float)
        if Z.ndim != 2 or F.ndim != 2:
            raise ConfigurationError("operators must be matrices")
        if Z.shape[0] != F.shape[0]:
            raise ConfigurationError(
                f"operator row counts differ: {Z.shape[0]} vs {F.shape[0]}")
        if T.shape[1] != Z.shape[1]:
            raise ConfigurationError(
                f"target has {T.shape[1]} samples, data has {Z.shape[1]}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigurationError(f"lambda must be finite and >= 0, got {self.lam}")
        if not all(np.all(np.isfinite(A)) for A in (Z, T, F)):
            raise NumericError("problem data has non-finite entries")
        object.__setattr__(self, "data_operator", Z)
        object.__setattr__(self, "target", T)
        object.__setattr__(self, "reg_operator", F)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self):
        return self.data_operator.shape[0], self.target.shape[0]

    @property
    def n_samples(self):
        return self.data_operator.shape[1]

    def objective(self, X):
        X = _as_filter(X, self.dim)
        Z, T, F = self.data_operator, self.target, self.reg_operator
        return float(np.sum((X.T @ Z - T) ** 2) / self.n_samples
                     + self.lam * np.sum(np.abs(X.T @ F)))

    def smooth_gradient(self, X):
        X = _as_filter(X, self.dim)
        Z, T = self.data_operator, self.target
        return (2.0 / self.n_samples) * (Z @ (Z.T @ X - T.T))

    def has_identity_reg(self):
        F = self.reg_operator
        return F.shape[0] == F.shape[1] and np.array_equal(F, np.eye(F.shape[0]))


@dataclass(frozen=True)
class SolverOptions:
    """Iteration budget and step-size settings.

    ``step_ratio`` is ``sigma / tau``; both steps are scaled so that
    ``tau * sigma * ||F||^2 = 0.99^2``.  ``overrelaxation`` is reserved: the
    extrapolation always uses ``theta = 1``.  ``equilibrate`` rescales every
    row of the problem to unit size before iterating (see :func:`solve`).
    """

    max_iterations: int = 5000
    tolerance: float = 1e-9
    step_ratio: float = 1.0
    warm_start: Optional[np.ndarray] = None
    overrelaxation: float = 1.0
    equilibrate: bool = True

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ConfigurationError("max_iterations must be positive")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if not self.step_ratio > 0:
            raise ConfigurationError("step_ratio must be positive")
        if not 1.0 <= self.overrelaxation <= 2.0:
            raise ConfigurationError("overrelaxation must lie in [1, 2]")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    objective: float
    converged: bool


def soft_threshold(v, t):
    """Entrywise ``sign(v) * max(|v| - t, 0)``."""
    if np.any(np.asarray(t) < 0):
        raise ConfigurationError("threshold must be nonnegative")
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def operator_norm(K, max_iterations=200, rtol=1e-6, seed=0):
    """Largest singular value of ``K`` by power iteration on ``K^T K``.

    The returned value is inflated by a relative ``1e-6`` so that step sizes
    derived from it stay on the safe side.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if not np.any(K):
        raise DegenerateInputError("operator norm of a zero matrix")
    v = np.random.default_rng(seed).standard_normal(K.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iterations):
        w = K.T @ (K @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            # start vector in the null space; restart along the largest column
            v = np.zeros(K.shape[1])
            v[np.argmax(np.linalg.norm(K, axis=0))] = 1.0
            continue
        new = np.sqrt(norm_w)
        v = w / norm_w
        if abs(new - estimate) <= rtol * new:
            estimate = new
            break
        estimate = new
    # Rayleigh quotient of the final vector never overestimates; take the max
    estimate = max(estimate, np.linalg.norm(K @ v))
    return float(estimate * (1.0 + 1e-6))


def solve(p, opts=None):
    """Minimize a :class:`CompositeProblem` with Chambolle-Pock.

    Parameters
    ----------
    p : CompositeProblem
    opts : SolverOptions, optional

    Returns
    -------
    X : ndarray
        ``M x Q`` approximate minimizer.
    report : SolveReport

    Notes
    -----
    The iteration is::

        P <- clip(P + sigma F^T Xbar, -lam, lam)
        X+ <- (I + tau R)^{-1} (X - tau F P + tau S)
        Xbar <- 2 X+ - X

    with ``R = (2/N) Z Z^T`` and ``S = (2/N) Z T^T``.  It stops when
    ``||X+ - X||_F / max(1, ||X+||_F) <= tolerance``.  The primal iterate
    starts at ``opts.warm_start`` (zero if absent) and the dual at zero.

    With ``opts.equilibrate`` the iteration runs on ``U = diag(d)^{-1} X``
    where ``d`` normalizes each row of ``Z`` and ``F``; the stopping test is
    then applied to ``U``.  Compressed rows of a local problem can be many
    orders of magnitude smaller than raw rows, and without this change of
    variables the iterates crawl along those directions.

    For ``lam = 0`` the l1 term vanishes and the minimizer of the normal
    equations closest to the warm start is returned directly.
    """
    opts = opts or SolverOptions()
    M, Q = p.dim
    N = p.n_samples
    Z, F = p.data_operator, p.reg_operator
    if opts.warm_start is None:
        X = np.zeros((M, Q))
    else:
        X = _as_filter(opts.warm_start, (M, Q)).copy()
        if not np.all(np.isfinite(X)):
            raise NumericError("warm start has non-finite entries")

    if p.lam == 0.0 or not np.any(F):
        # the l1 term is inactive: take the least-squares solution nearest X0
        R = (2.0 / N) * (Z @ Z.T)
        S = (2.0 / N) * (Z @ p.target.T)
        step, *_ = np.linalg.lstsq(R, S - R @ X, rcond=None)
        X = X + step
        return X, SolveReport(1, 0.0, p.objective(X), True)

    # substitute X = diag(d) U so that every row of (Z, F) has unit scale
    d = _row_scaling(Z, F) if opts.equilibrate else np.ones(M)
    Zs, Fs = d[:, None] * Z, d[:, None] * F
    U = X / d[:, None]
    R = (2.0 / N) * (Zs @ Zs.T)
    S = (2.0 / N) * (Zs @ p.target.T)

    norm_F = operator_norm(Fs)
    root = np.sqrt(opts.step_ratio)
    tau = STEP_MARGIN / (norm_F * root)
    sigma = STEP_MARGIN * root / norm_F
    factor = scipy.linalg.cho_factor(np.eye(M) + tau * R)
    tau_S = tau * S

    P = np.zeros((F.shape[1], Q))
    U_bar = U.copy()
    residual = np.inf
    j = 0
    for j in range(1, opts.max_iterations + 1):
        P = np.clip(P + sigma * (Fs.T @ U_bar), -p.lam, p.lam)
        U_new = scipy.linalg.cho_solve(factor, U - tau * (Fs @ P) + tau_S)
        if not np.all(np.isfinite(U_new)):
            raise DivergenceError(j)
        residual = np.linalg.norm(U_new - U) / max(1.0, np.linalg.norm(U_new))
        U_bar = 2.0 * U_new - U
        U = U_new
        if residual <= opts.tolerance:
            break
    X = d[:, None] * U
    converged = residual <= opts.tolerance
    if not converged:
        logger.debug("solver stopped at budget %d with residual %.3e", j, residual)
    return X, SolveReport(j, float(residual), p.objective(X), converged)


def _row_scaling(Z, F):
    """Per-row factors ``1 / max(rms(Z_m), ||F_m||)``; all-zero rows keep 1."""
    scale = np.maximum(np.linalg.norm(Z, axis=1) / np.sqrt(Z.shape[1]),
                       np.linalg.norm(F, axis=1))
    d = np.ones_like(scale)
    nonzero = scale > 0
    d[nonzero] = 1.0 / scale[nonzero]
    return d


def stationarity_residual(X, p, zero_tol=None):
    """Violation of ``0 in grad + lam * d||X||_1`` for an identity ``F``.

    Entries with ``|X_mq| <= zero_tol`` count as zero, where ``zero_tol``
    defaults to ``1e-8 * (1 + max|X|)``.  The result is the largest violation
    over all entries and is zero exactly at stationary points.
    """
    if not p.has_identity_reg():
        raise UnsupportedConfigurationError(
            "stationarity residual needs an identity regularizer operator")
    X = _as_filter(X, p.dim)
    G = p.smooth_gradient(X)
    if zero_tol is None:
        zero_tol = 1e-8 * (1.0 + np.max(np.abs(X)))
    support = np.abs(X) > zero_tol
    violation = np.where(support,
                         np.abs(G + p.lam * np.sign(X)),
                         np.maximum(np.abs(G) - p.lam, 0.0))
    return float(np.max(violation))


def _as_filter(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape != tuple(dim):
        raise ConfigurationError(f"expected filter of shape {dim}, got {X.shape}")
    return X
