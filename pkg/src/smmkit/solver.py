"""SMO solver for the soft-margin SVM dual over a precomputed Gram matrix.

Solves::

    max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

Each step updates the maximal violating pair (first-order working-set
selection) with an exact clipped line search.  Ties between equally violating
indices are broken by a seeded random permutation, so results are
deterministic for a given seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import ConvergenceWarning, DegenerateLabels

_TAU = 1e-12

STATUS_CONVERGED = 0
STATUS_MAX_ITERS = 1
STATUS_STALLED = 2


@dataclass(frozen=True)
class SolverParams:
    """``max_passes`` bounds consecutive zero-length steps before giving up;
    ``max_iters=None`` means ``max(10**6, 100 * m)``."""

    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 10
    max_iters: int | None = None

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass
class SolveResult:
    alpha: np.ndarray
    bias: float
    objective: float
    n_iter: int
    converged: bool
    kkt_gap: float
    min_increment: float


@numba.njit(cache=True)
def _smo_core(K, y, C, tol, max_iter, order, max_stall):
    m = K.shape[0]
    alpha = np.zeros(m)
    grad = -np.ones(m)  # gradient of 1/2 a^T Q a - e^T a
    n_iter = 0
    stall = 0
    status = STATUS_MAX_ITERS
    min_inc = np.inf
    gap = np.inf
    while n_iter < max_iter:
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for t in order:
            v = -y[t] * grad[t]
            up = (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0)
            low = (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C)
            if up and v > gmax:
                gmax = v
                i = t
            if low and v < gmin:
                gmin = v
                j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap <= tol:
            status = STATUS_CONVERGED
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0.0:
            eta = _TAU
        step = gap / eta
        # moving a_i by y_i*step and a_j by -y_j*step keeps sum a y fixed
        if y[i] > 0:
            step = min(step, C - alpha[i])
        else:
            step = min(step, alpha[i])
        if y[j] > 0:
            step = min(step, alpha[j])
        else:
            step = min(step, C - alpha[j])
        inc = step * gap - 0.5 * eta * step * step
        if inc < min_inc:
            min_inc = inc
        if step <= 0.0:
            stall += 1
            if stall >= max_stall:
                status = STATUS_STALLED
                break
            n_iter += 1
            continue
        stall = 0
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box so bound membership tests stay exact
        for t in (i, j):
            if alpha[t] < 1e-14 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1.0 - 1e-14):
                alpha[t] = C
        for t in range(m):
            grad[t] += y[t] * step * (K[t, i] - K[t, j])
        n_iter += 1
    return alpha, grad, n_iter, status, min_inc, gap


def dual_objective(K, y, alpha) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def compute_bias(grad, y, alpha, C) -> float:
    """Mean of ``y_i - sum_j a_j y_j K_ij`` over free vectors; otherwise the
    midpoint of the interval allowed by the KKT conditions."""
    b_vals = -y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(b_vals[free]))
    at_zero = alpha <= 0
    at_c = alpha >= C
    lower = ((y > 0) & at_zero) | ((y < 0) & at_c)
    upper = ((y > 0) & at_c) | ((y < 0) & at_zero)
    lo = b_vals[lower].max() if np.any(lower) else None
    hi = b_vals[upper].min() if np.any(upper) else None
    if lo is None and hi is None:
        return 0.0
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def smo_solve(K, labels, params: SolverParams = SolverParams(), seed: int = 0,
              debug: bool = False) -> SolveResult:
    """Solve the C-SVM dual for Gram ``K`` and labels in {+1, -1}.

    If the iteration budget runs out the last iterate is returned with
    ``converged=False`` and a :class:`ConvergenceWarning`.  With ``debug`` the
    per-step dual increments are checked to be non-negative.
    """
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(labels, dtype=float).ravel()
    m = y.shape[0]
    if K.shape != (m, m):
        raise ValueError(f"Gram shape {K.shape} does not match {m} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    if np.all(y > 0) or np.all(y < 0):
        raise DegenerateLabels("both classes are required for training")
    asym = np.max(np.abs(K - K.T))
    if asym > 1e-10 * max(1.0, np.max(np.abs(K))):
        raise ValueError(f"Gram matrix is not symmetric (max asymmetry {asym:.3e})")
    max_iters = params.max_iters if params.max_iters is not None else max(10 ** 6, 100 * m)
    order = np.random.default_rng(seed).permutation(m)
    alpha, grad, n_iter, status, min_inc, gap = _smo_core(
        K, y, float(params.C), float(params.tol), int(max_iters), order, int(params.max_passes))
    converged = status == STATUS_CONVERGED
    if not converged:
        warnings.warn(f"SMO stopped after {n_iter} iterations with KKT gap {gap:.3e} "
                      f"(tol {params.tol:g})", ConvergenceWarning, stacklevel=2)
    if debug and n_iter and min_inc < -1e-12 * max(1.0, abs(dual_objective(K, y, alpha))):
        raise AssertionError(f"dual objective decreased by {-min_inc:.3e} in one step")
    bias = compute_bias(grad, y, alpha, params.C)
    return SolveResult(alpha, bias, dual_objective(K, y, alpha), int(n_iter), converged,
                       float(gap), float(min_inc))


def kkt_violation(K, y, alpha, bias, C) -> float:
    """Largest violation of the soft-margin KKT conditions, measured on margins."""
    margins = y * (K @ (alpha * y) + bias)
    free = (alpha > 0) & (alpha < C)
    v = np.zeros_like(margins)
    v[alpha <= 0] = np.maximum(0.0, 1.0 - margins[alpha <= 0])
    v[alpha >= C] = np.maximum(0.0, margins[alpha >= C] - 1.0)
    v[free] = np.abs(margins[free] - 1.0)
    return float(v.max())
