"""Support measure machines: an SVM trained on distributions through their
expected kernel, optionally wrapped in a level-2 kernel.

The decision function is ``f(P) = sum_i a_i y_i K(P_i, P) + b`` over the
support distributions.  With Dirac inputs this is exactly the standard SVM.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GramNotPSD
from .expected import ExpectedKernelConfig, GramMatrix, cross_gram, gram, self_kernels
from .kernels import parse_kernel
from .level2 import Level2Kernel, level2_from_gram, parse_level2
from .measures import Dirac, Distribution, LabeledMeasureSet, from_dict, to_dict
from .solver import SolveResult, SolverParams, smo_solve

PSD_REL_TOL = 1e-9


@dataclass(frozen=True)
class TrainedSMM:
    support: np.ndarray
    alpha: np.ndarray
    coef: np.ndarray
    bias: float
    support_distributions: list
    config: ExpectedKernelConfig
    level2: Level2Kernel | None = None
    support_self: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def C(self):
        return self.metadata.get("C")


def min_eigenvalue(G) -> float:
    return float(np.linalg.eigvalsh(G)[0])


def is_psd(G, rel_tol=PSD_REL_TOL) -> bool:
    scale = max(float(np.max(np.abs(np.diag(G)))), np.finfo(float).tiny)
    return min_eigenvalue(G) >= -rel_tol * scale


def build_gram(cfg: ExpectedKernelConfig, dists, level2: Level2Kernel | None = None) -> GramMatrix:
    """Level-1 Gram (with the configured diagonal correction), or the level-2
    Gram built from the uncorrected level-1 matrix."""
    if level2 is None:
        return gram(cfg, dists)
    base = gram(cfg.without_correction(), dists)
    return GramMatrix(level2_from_gram(level2, base.values), base.config, base.source, level2=level2)


def ensure_psd(G: GramMatrix) -> GramMatrix:
    """Return ``G`` unchanged if PSD, else once-jittered; raise if still not PSD."""
    if is_psd(G.values):
        return G
    fixed = G.repaired()
    if is_psd(fixed.values):
        return fixed
    raise GramNotPSD(f"Gram matrix is not PSD after jitter (min eigenvalue "
                     f"{min_eigenvalue(fixed.values):.3e})")


def train(data: LabeledMeasureSet, cfg: ExpectedKernelConfig, level2: Level2Kernel | None = None,
          params: SolverParams = SolverParams(), seed: int = 0) -> TrainedSMM:
    G = ensure_psd(build_gram(cfg, data.distributions, level2))
    res = smo_solve(G.values, data.labels, params, seed=seed)
    self_k = self_kernels(cfg, data.distributions) if level2 is not None else None
    return _package(res, data, cfg, level2, self_k, params, seed, G.jitter)


def _package(res: SolveResult, data, cfg, level2, self_k, params, seed, jitter):
    sv = np.flatnonzero(res.alpha > 0)
    return TrainedSMM(
        support=sv,
        alpha=res.alpha[sv],
        coef=res.alpha[sv] * data.labels[sv],
        bias=res.bias,
        support_distributions=[data.distributions[i] for i in sv],
        config=cfg,
        level2=level2,
        support_self=None if self_k is None else self_k[sv],
        metadata={
            "seed": seed, "C": params.C, "tol": params.tol, "objective": res.objective,
            "n_iter": res.n_iter, "converged": res.converged, "jitter": jitter,
            "n_train": len(data),
        },
    )


def kernel_to_support(model: TrainedSMM, dists) -> np.ndarray:
    """Matrix of (level-1 or level-2) kernel values between supports and ``dists``."""
    dists = list(dists)
    if not model.support_distributions:
        return np.zeros((0, len(dists)))
    if model.level2 is None:
        return cross_gram(model.config, model.support_distributions, dists)
    cfg = model.config.without_correction()
    kpq = cross_gram(cfg, model.support_distributions, dists)
    kqq = self_kernels(cfg, dists)
    return model.level2.apply(kpq, model.support_self[:, None], kqq[None, :])


def decision_function(model: TrainedSMM, dists) -> np.ndarray:
    Kx = kernel_to_support(model, dists)
    return model.coef @ Kx + model.bias


def decision(model: TrainedSMM, P: Distribution) -> float:
    return float(decision_function(model, [P])[0])


def decision_at_points(model: TrainedSMM, X) -> np.ndarray:
    """Decision values at points, i.e. on Dirac measures."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return decision_function(model, [Dirac(x) for x in X])


def sign(scores) -> np.ndarray:
    """Sign with ties mapped to +1."""
    return np.where(np.asarray(scores) >= 0, 1.0, -1.0)


def predict(model: TrainedSMM, dists) -> np.ndarray:
    return sign(decision_function(model, dists))


def accuracy(model: TrainedSMM, data: LabeledMeasureSet) -> float:
    return float(np.mean(predict(model, data.distributions) == data.labels))


# --- persistence ------------------------------------------------------------------


def model_to_dict(model: TrainedSMM) -> dict:
    cfg = model.config
    return {
        "embedding": cfg.embedding.spec,
        "diagonal_correction": bool(cfg.diagonal_correction),
        "empirical_fallback": bool(cfg.empirical_fallback),
        "fallback_samples": cfg.fallback_samples,
        "fallback_seed": cfg.fallback_seed,
        "level2": None if model.level2 is None else model.level2.spec,
        "support": model.support.tolist(),
        "alpha": model.alpha.tolist(),
        "coef": model.coef.tolist(),
        "bias": model.bias,
        "support_self": None if model.support_self is None else model.support_self.tolist(),
        "support_distributions": [to_dict(P) for P in model.support_distributions],
        "metadata": model.metadata,
    }


def model_from_dict(data: dict) -> TrainedSMM:
    cfg = ExpectedKernelConfig(
        parse_kernel(data["embedding"]),
        diagonal_correction=data.get("diagonal_correction"),
        empirical_fallback=data.get("empirical_fallback", False),
        fallback_samples=data.get("fallback_samples", 2000),
        fallback_seed=data.get("fallback_seed", 0),
    )
    level2 = parse_level2(data["level2"]) if data.get("level2") else None
    support_self = data.get("support_self")
    return TrainedSMM(
        support=np.asarray(data["support"], dtype=int),
        alpha=np.asarray(data["alpha"], dtype=float),
        coef=np.asarray(data["coef"], dtype=float),
        bias=float(data["bias"]),
        support_distributions=[from_dict(p) for p in data["support_distributions"]],
        config=cfg,
        level2=level2,
        support_self=None if support_self is None else np.asarray(support_self, dtype=float),
        metadata=dict(data.get("metadata", {})),
    )


def save_model(model: TrainedSMM, path) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, indent=1)


def load_model(path) -> TrainedSMM:
    with open(path) as f:
        return model_from_dict(json.load(f))
