"""Embedding kernels on the input space.

Note the RBF convention: ``exp(-gamma / 2 * ||x - z||^2)``.  Many libraries
(scikit-learn among them) use ``exp(-gamma * ||x - z||^2)``; a gamma taken
from such a library must be doubled before it is used here.

The normalized RBF multiplies by ``(gamma / (2 pi)) ** (d / 2)``, which turns
the kernel into the Gaussian density with covariance ``I / gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import DimensionMismatch

# Rows of the pairwise block are chunked so no temporary exceeds this many floats.
_BLOCK_FLOATS = 4_000_000


@dataclass(frozen=True)
class LinearKernel:
    def block(self, X, Z):
        return _inner(X, Z)

    @property
    def spec(self):
        return "linear"


@dataclass(frozen=True)
class PolynomialKernel:
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if int(self.degree) != self.degree or not 1 <= self.degree <= 8:
            raise ValueError(f"polynomial degree must be an integer in 1..8, got {self.degree}")
        if self.offset < 0:
            raise ValueError(f"polynomial offset must be >= 0, got {self.offset}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "offset", float(self.offset))

    def block(self, X, Z):
        return (_inner(X, Z) + self.offset) ** self.degree

    @property
    def spec(self):
        return f"poly:d={self.degree},c={fmt_float(self.offset)}"


@dataclass(frozen=True)
class RBFKernel:
    gamma: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))

    def norm_factor(self, dim):
        if not self.normalized:
            return 1.0
        return (self.gamma / (2.0 * math.pi)) ** (dim / 2.0)

    def block(self, X, Z):
        val = np.exp(-0.5 * self.gamma * _sqdist(X, Z))
        if self.normalized:
            val *= self.norm_factor(X.shape[1])
        return val

    @property
    def spec(self):
        return f"{'nrbf' if self.normalized else 'rbf'}:gamma={fmt_float(self.gamma)}"


EmbeddingKernel = Union[LinearKernel, PolynomialKernel, RBFKernel]


def fmt_float(x):
    """Shortest round-tripping text for a float, without a trailing ``.0``."""
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def _inner(X, Z):
    # Elementwise product-sum rather than BLAS so every entry is computed the
    # same way regardless of block shape.
    return (X[:, None, :] * Z[None, :, :]).sum(axis=-1)


def _sqdist(X, Z):
    diff = X[:, None, :] - Z[None, :, :]
    return (diff * diff).sum(axis=-1)


def kernel_block(k: EmbeddingKernel, X, Z) -> np.ndarray:
    """Matrix of ``k(x_i, z_j)`` for row-stacked points ``X`` and ``Z``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"dimensions {X.shape[1]} and {Z.shape[1]} differ")
    rows = max(1, _BLOCK_FLOATS // max(1, Z.shape[0] * X.shape[1]))
    if X.shape[0] <= rows:
        return k.block(X, Z)
    return np.vstack([k.block(X[s:s + rows], Z) for s in range(0, X.shape[0], rows)])


def eval_base(k: EmbeddingKernel, x, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if x.shape != z.shape:
        raise DimensionMismatch(f"dimensions {x.shape} and {z.shape} differ")
    return float(kernel_block(k, x[None, :], z[None, :])[0, 0])


def pairwise_gram(k: EmbeddingKernel, points) -> np.ndarray:
    """Symmetric Gram matrix of ``k`` over a list of points."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("need at least one point")
    G = kernel_block(k, X, X)
    return np.triu(G) + np.triu(G, 1).T


def parse_kernel(spec: str) -> EmbeddingKernel:
    """Parse ``"linear"``, ``"poly:d=2,c=1"``, ``"rbf:gamma=0.25"`` or ``"nrbf:gamma=0.25"``."""
    name, _, rest = spec.strip().partition(":")
    params = _parse_params(rest)
    name = name.lower()
    if name in ("linear", "lin"):
        return LinearKernel()
    if name in ("poly", "polynomial"):
        return PolynomialKernel(int(params.pop("d", 2)), float(params.pop("c", 1.0)))
    if name in ("rbf", "nrbf"):
        return RBFKernel(float(params.pop("gamma", 1.0)), normalized=(name == "nrbf"))
    raise ValueError(f"unknown kernel spec {spec!r}")


def _parse_params(text):
    params = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"malformed kernel parameter {item!r}")
        params[key.strip()] = value.strip()
    return params
