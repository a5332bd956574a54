"""Level-2 kernels: nonlinear kernels applied on top of mean embeddings.

A level-2 kernel only needs the three inner products ``<mu_P, mu_Q>``,
``<mu_P, mu_P>`` and ``<mu_Q, mu_Q>``.  These are always taken without the
linear-kernel diagonal correction, otherwise a distribution would sit at a
non-zero RKHS distance from itself.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .exceptions import NegativeSquaredDistance
from .expected import ExpectedKernelConfig, GramMatrix, gram
from .kernels import _parse_params, fmt_float

NEGATIVE_DISTANCE_TOL = 1e-6


@dataclass(frozen=True)
class Level2Linear:
    def apply(self, kpq, kpp, kqq):
        return np.asarray(kpq, dtype=float)

    @property
    def spec(self):
        return "l2:linear"


@dataclass(frozen=True)
class Level2Polynomial:
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if int(self.degree) != self.degree or not 1 <= self.degree <= 8:
            raise ValueError(f"polynomial degree must be an integer in 1..8, got {self.degree}")
        if self.offset < 0:
            raise ValueError("polynomial offset must be >= 0")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "offset", float(self.offset))

    def apply(self, kpq, kpp, kqq):
        return (np.asarray(kpq, dtype=float) + self.offset) ** self.degree

    @property
    def spec(self):
        return f"l2:poly:d={self.degree},c={fmt_float(self.offset)}"


@dataclass(frozen=True)
class Level2RBF:
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))

    def apply(self, kpq, kpp, kqq):
        dist = rkhs_sq_distance(kpq, kpp, kqq)
        return np.exp(-0.5 * self.gamma * dist)

    @property
    def spec(self):
        return f"l2:rbf:gamma={fmt_float(self.gamma)}"


Level2Kernel = Union[Level2Linear, Level2Polynomial, Level2RBF]


def rkhs_sq_distance(kpq, kpp, kqq):
    """``||mu_P - mu_Q||^2`` from inner products, with round-off clamped at zero."""
    kpq = np.asarray(kpq, dtype=float)
    dist = np.asarray(kpp, dtype=float) - 2.0 * kpq + np.asarray(kqq, dtype=float)
    worst = float(np.min(dist)) if dist.size else 0.0
    if worst < -NEGATIVE_DISTANCE_TOL:
        raise NegativeSquaredDistance(
            f"squared RKHS distance {worst:.3e} is negative; inputs are not from one consistent Gram")
    return np.maximum(dist, 0.0)


def level2_eval(K2: Level2Kernel, kpq, kpp, kqq):
    out = K2.apply(kpq, kpp, kqq)
    return float(out) if np.ndim(out) == 0 else out


def level2_from_gram(K2: Level2Kernel, G: np.ndarray) -> np.ndarray:
    """Apply ``K2`` entrywise to an uncorrected level-1 Gram matrix."""
    diag = np.diag(G)
    out = K2.apply(G, diag[:, None], diag[None, :])
    return np.triu(out) + np.triu(out, 1).T


def level2_gram(cfg: ExpectedKernelConfig, K2: Level2Kernel, dists) -> GramMatrix:
    base = gram(cfg.without_correction(), dists)
    return replace(base, values=level2_from_gram(K2, base.values), level2=K2)


def parse_level2(spec: str) -> Level2Kernel:
    """Parse ``"l2:linear"``, ``"l2:poly:d=3,c=1"`` or ``"l2:rbf:gamma=0.1"``."""
    text = spec.strip()
    if text.lower().startswith("l2:"):
        text = text[3:]
    name, _, rest = text.partition(":")
    params = _parse_params(rest)
    name = name.lower()
    if name in ("linear", "lin"):
        return Level2Linear()
    if name in ("poly", "polynomial"):
        return Level2Polynomial(int(params.get("d", 2)), float(params.get("c", 1.0)))
    if name == "rbf":
        return Level2RBF(float(params.get("gamma", 1.0)))
    raise ValueError(f"unknown level-2 kernel spec {spec!r}")
