"""Flex-SVM: an SVM on points whose kernel smooths each point by its own
Gaussian.

With smoothing densities ``g(x_i, .) = N(x_i, S_i)`` the kernel

    K_g(x_i, x_j) = E[k(u, v)],  u ~ N(x_i, S_i),  v ~ N(x_j, S_j)

is the expected kernel between the two Gaussians, so a linear SMM on
``{N(x_i, S_i)}`` and an SVM on ``{x_i}`` with ``K_g`` solve the same dual
problem.  For the RBF kernel and equal isotropic smoothers ``s I`` this is a
plain RBF kernel with widened bandwidth, scaled by a constant; see
:func:`composed_rbf`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expected import ExpectedKernelConfig, cross_gram, expected_kernel, gram
from .kernels import EmbeddingKernel, RBFKernel
from .measures import Dirac, Gaussian, LabeledMeasureSet, check_covariance
from .model import decision_function, train
from .solver import SolverParams, smo_solve


@dataclass(frozen=True)
class SmoothingFamily:
    """Per-example Gaussian smoothers.

    Either ``variances`` (isotropic, one ``sigma_i^2`` per example) or
    ``covariances`` (one full matrix per example) is given.
    """

    variances: np.ndarray | None = None
    covariances: np.ndarray | None = None

    def __post_init__(self):
        if (self.variances is None) == (self.covariances is None):
            raise ValueError("give exactly one of variances or covariances")
        if self.variances is not None:
            v = np.asarray(self.variances, dtype=float).ravel()
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("smoother variances must be finite and >= 0")
            object.__setattr__(self, "variances", v)
        else:
            c = np.asarray(self.covariances, dtype=float)
            if c.ndim != 3 or c.shape[1] != c.shape[2]:
                raise ValueError(f"covariances must be (m, d, d), got {c.shape}")
            c = np.array([check_covariance(s, c.shape[1]) for s in c])
            object.__setattr__(self, "covariances", c)

    def __len__(self):
        return len(self.variances if self.variances is not None else self.covariances)

    def cov(self, i, dim):
        if self.variances is not None:
            return self.variances[i] * np.eye(dim)
        return self.covariances[i]

    def measures(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self) != X.shape[0]:
            raise ValueError(f"{len(self)} smoothers for {X.shape[0]} points")
        return [Gaussian(x, self.cov(i, X.shape[1])) for i, x in enumerate(X)]

    @classmethod
    def isotropic(cls, variances):
        return cls(variances=variances)

    @classmethod
    def zeros(cls, m):
        return cls(variances=np.zeros(m))


def _config(k):
    return ExpectedKernelConfig(k, diagonal_correction=False)


def flex_kernel(k: EmbeddingKernel, fam: SmoothingFamily, i, j, xi, xj,
                fam_j: SmoothingFamily | None = None) -> float:
    """``K_g(x_i, x_j)`` with smoother ``i`` of ``fam`` and smoother ``j`` of
    ``fam_j`` (defaults to ``fam``)."""
    fam_j = fam if fam_j is None else fam_j
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    P = Gaussian(xi, fam.cov(i, xi.size))
    Q = Gaussian(xj, fam_j.cov(j, xj.size))
    return expected_kernel(_config(k), P, Q, same_index=False)


def flex_gram(k: EmbeddingKernel, fam: SmoothingFamily, X) -> np.ndarray:
    """Gram of ``K_g`` evaluated entry by entry as a kernel on points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            G[i, j] = G[j, i] = flex_kernel(k, fam, i, j, X[i], X[j])
    return G


def flex_cross(k, fam, X, probe_fam, probes) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    out = np.empty((X.shape[0], probes.shape[0]))
    for i in range(X.shape[0]):
        for j in range(probes.shape[0]):
            out[i, j] = flex_kernel(k, fam, i, j, X[i], probes[j], fam_j=probe_fam)
    return out


def composed_rbf(k: RBFKernel, variance: float, dim: int):
    """Scale and widened kernel with ``K_g = scale * k'`` when every smoother is
    ``variance * I``: bandwidth ``1/gamma`` grows by ``2 * variance``."""
    if not isinstance(k, RBFKernel):
        raise TypeError("composed bandwidth is defined for the RBF kernel")
    g = k.gamma
    scale = (1.0 + 2.0 * g * variance) ** (-dim / 2.0)
    widened = RBFKernel(g / (1.0 + 2.0 * g * variance), normalized=k.normalized)
    if k.normalized:
        # normalized kernels already carry the density factor for their own gamma
        scale = 1.0
    return scale, widened


@dataclass
class FlexSVM:
    """An SVM on points trained with a precomputed ``K_g`` Gram."""

    X: np.ndarray
    y: np.ndarray
    kernel: EmbeddingKernel
    family: SmoothingFamily
    coef: np.ndarray
    bias: float
    objective: float

    def decision(self, probes, probe_family: SmoothingFamily | None = None, pairwise=False):
        """Decision values at probe points; ``pairwise`` evaluates ``K_g`` one
        entry at a time instead of through the batched Gram path."""
        probes = np.atleast_2d(np.asarray(probes, dtype=float))
        pf = probe_family or SmoothingFamily.zeros(probes.shape[0])
        if pairwise:
            Kx = flex_cross(self.kernel, self.family, self.X, pf, probes)
        else:
            Kx = cross_gram(_config(self.kernel), self.family.measures(self.X), pf.measures(probes))
        return self.coef @ Kx + self.bias


def fit_flex_svm(X, y, fam, k, params=SolverParams(), seed=0, G=None) -> FlexSVM:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if G is None:
        G = gram(_config(k), fam.measures(X)).values
    res = smo_solve(G, y, params, seed=seed)
    return FlexSVM(X, y, k, fam, res.alpha * y, res.bias, res.objective)


def verify_equivalence(X, y, fam: SmoothingFamily, k: EmbeddingKernel, params=SolverParams(),
                       probes=None, seed=0, gram_tol=1e-8, decision_tol=1e-5) -> dict:
    """Train a linear SMM on ``N(x_i, S_i)`` and a Flex-SVM on ``x_i`` and compare.

    Reports the largest Gram and probe-decision differences and both dual
    objectives.  Probes are evaluated as points (zero smoother).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if probes is None:
        probes = X
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    data = LabeledMeasureSet(fam.measures(X), y)
    cfg = _config(k)

    G_smm = gram(cfg, data.distributions).values
    G_flex = flex_gram(k, fam, X)
    smm = train(data, cfg, params=params, seed=seed)
    flex = fit_flex_svm(X, y, fam, k, params, seed=seed, G=G_flex)

    d_smm = decision_function(smm, [Dirac(p) for p in probes])
    d_flex = flex.decision(probes, pairwise=True)
    gram_diff = float(np.max(np.abs(G_smm - G_flex)))
    dec_diff = float(np.max(np.abs(d_smm - d_flex)))
    return {
        "n_train": int(X.shape[0]),
        "n_probes": int(probes.shape[0]),
        "kernel": k.spec,
        "gram_max_abs_diff": gram_diff,
        "decision_max_abs_diff": dec_diff,
        "objective_smm": smm.metadata["objective"],
        "objective_flex": flex.objective,
        "gram_ok": gram_diff <= gram_tol,
        "decision_ok": dec_diff <= decision_tol,
        "passed": gram_diff <= gram_tol and dec_diff <= decision_tol,
    }


def outlier_influence(X, y, k, outlier, variances, probes, params=SolverParams(), seed=0):
    """Mean absolute size of the term example ``outlier`` contributes to the
    probe decisions, ``|a_o y_o K_g(x_o, p)|``, for each smoother variance in
    ``variances``.  All other examples keep zero smoothers; probes are points.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    probe_fam = SmoothingFamily.zeros(probes.shape[0])
    out = []
    for v in variances:
        var = np.zeros(X.shape[0])
        var[outlier] = v
        fam = SmoothingFamily(variances=var)
        model = fit_flex_svm(X, y, fam, k, params, seed)
        src = [Gaussian(X[outlier], fam.cov(outlier, X.shape[1]))]
        row = cross_gram(_config(k), src, probe_fam.measures(probes))[0]
        out.append(float(np.mean(np.abs(model.coef[outlier] * row))))
    return np.array(out)
