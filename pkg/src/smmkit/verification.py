"""Numerical checks of the risk-deviation bound

    |E_P[l(y, f(x))] - l(y, E_P[f(x)])| <= 2 * C_l * C_f * sigma

for hinge loss (``C_l = 1``), where ``C_f`` is a Lipschitz constant of the
decision function on points and ``sigma = sqrt(trace(cov P))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import NoClosedForm, UnsupportedKernel
from .kernels import RBFKernel
from .measures import Dirac, Distribution, LabeledMeasureSet, sample, total_std
from .model import TrainedSMM, decision, decision_at_points

# Absolute slack for comparisons that are exact in real arithmetic.
FP_SLACK = 1e-12


@dataclass(frozen=True)
class LipschitzBudget:
    C_f: float
    C_ell: float
    sigma: float

    def __post_init__(self):
        if min(self.C_f, self.C_ell, self.sigma) < 0:
            raise ValueError("Lipschitz constants and sigma must be non-negative")

    @property
    def bound(self):
        return 2.0 * self.C_ell * self.C_f * self.sigma


def hinge(y, t):
    return np.maximum(0.0, 1.0 - np.asarray(y) * np.asarray(t))


HINGE_LIPSCHITZ = 1.0


def lipschitz_bound_rkhs(model: TrainedSMM) -> float:
    """Lipschitz constant of ``x -> f(delta_x)`` for a level-1 RBF model.

    ``|d/dt exp(-gamma t^2 / 2)|`` peaks at ``sqrt(gamma) e^{-1/2}``; smoothing
    by a distribution can only lower it, so the coefficient mass times that
    peak bounds the gradient norm everywhere.
    """
    k = model.config.embedding
    if not isinstance(k, RBFKernel) or model.level2 is not None:
        raise UnsupportedKernel("the Lipschitz bound needs a level-1 model with an RBF embedding")
    if len(model.coef) == 0:
        return 0.0
    dim = model.support_distributions[0].dim
    return float(np.sum(np.abs(model.coef)) * math.sqrt(k.gamma) * math.exp(-0.5)
                 * k.norm_factor(dim))


@dataclass
class RiskDeviationReport:
    lhs: float
    rhs: float
    stderr: float
    holds: bool
    expected_loss: float
    loss_of_expectation: float
    mean_decision: float
    exact_mean: bool

    def to_dict(self):
        return asdict(self)


def _mean_decision(model, P, fx):
    """``E_P[f]``: exact via the mean embedding for level-1 models."""
    if model.level2 is None:
        try:
            return decision(model, P), True
        except NoClosedForm:
            pass
    return float(np.mean(fx)), False


def risk_deviation_check(P: Distribution, y: float, model: TrainedSMM, n: int = 2000,
                         rng: np.random.Generator | None = None,
                         C_f: float | None = None) -> RiskDeviationReport:
    """Monte-Carlo check of the bound for one distribution and label."""
    if rng is None:
        rng = np.random.default_rng(0)
    if C_f is None:
        C_f = lipschitz_bound_rkhs(model)
    rhs = LipschitzBudget(C_f, HINGE_LIPSCHITZ, total_std(P)).bound
    if isinstance(P, Dirac):
        f = float(decision_at_points(model, P.point[None, :])[0])
        loss = float(hinge(y, f))
        return RiskDeviationReport(0.0, rhs, 0.0, True, loss, loss, f, True)
    if n < 2:
        raise ValueError("need at least two draws")
    X = sample(P, n, rng)
    fx = decision_at_points(model, X)
    losses = hinge(y, fx)
    e_loss = float(losses.mean())
    stderr = float(losses.std(ddof=1) / math.sqrt(n))
    e_f, exact = _mean_decision(model, P, fx)
    if not exact:
        stderr += HINGE_LIPSCHITZ * float(fx.std(ddof=1) / math.sqrt(n))
    loss_e = float(hinge(y, e_f))
    lhs = abs(e_loss - loss_e)
    holds = lhs <= rhs + 3.0 * stderr + FP_SLACK * max(1.0, abs(e_loss))
    return RiskDeviationReport(lhs, rhs, stderr, bool(holds), e_loss, loss_e, e_f, exact)


def empirical_risks(data: LabeledMeasureSet, model: TrainedSMM, n_per_dist: int = 1000,
                    rng: np.random.Generator | None = None, C_f: float | None = None) -> dict:
    """Sampled risk ``(1/m) sum_i E_{P_i} l(y_i, f(x))`` next to the embedding
    risk ``(1/m) sum_i l(y_i, E_{P_i} f)``, with per-distribution bound checks."""
    if rng is None:
        rng = np.random.default_rng(0)
    if n_per_dist < 1:
        raise ValueError("n_per_dist must be >= 1")
    if C_f is None:
        C_f = lipschitz_bound_rkhs(model)
    r_emp, r_mu, rows = [], [], []
    for P, y in zip(data.distributions, data.labels):
        if isinstance(P, Dirac):
            f = float(decision_at_points(model, P.point[None, :])[0])
            a = b = float(hinge(y, f))
            se = 0.0
        else:
            fx = decision_at_points(model, sample(P, n_per_dist, rng))
            losses = hinge(y, fx)
            a = float(losses.mean())
            se = float(losses.std(ddof=1) / math.sqrt(n_per_dist)) if n_per_dist > 1 else 0.0
            e_f, exact = _mean_decision(model, P, fx)
            if not exact and n_per_dist > 1:
                se += float(fx.std(ddof=1) / math.sqrt(n_per_dist))
            b = float(hinge(y, e_f))
        budget = 2.0 * HINGE_LIPSCHITZ * C_f * total_std(P)
        dev = abs(a - b)
        r_emp.append(a)
        r_mu.append(b)
        rows.append({"deviation": dev, "budget": budget, "stderr": se,
                     "within": bool(dev <= budget + 3.0 * se + FP_SLACK * max(1.0, a))})
    m = len(rows)
    R_emp = float(np.mean(r_emp))
    R_mu = float(np.mean(r_mu))
    total_budget = float(np.mean([r["budget"] for r in rows]))
    total_se = float(np.sqrt(np.sum(np.square([r["stderr"] for r in rows]))) / m)
    return {
        "R_emp": R_emp,
        "R_mu_emp": R_mu,
        "budget": total_budget,
        "holds": bool(abs(R_emp - R_mu) <= total_budget + 3.0 * total_se
                      + FP_SLACK * max(1.0, R_emp)),
        "per_distribution": rows,
    }
