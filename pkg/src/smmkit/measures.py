"""Probability distributions used as training examples.

Four variants are supported:

* :class:`Dirac` -- a point mass.
* :class:`Gaussian` -- a multivariate normal given by mean and covariance.
* :class:`MomentOnly` -- an arbitrary law known only through its first two
  moments.  Only kernels whose expectation depends on those moments can be
  evaluated against it.
* :class:`Empirical` -- a weighted sample, e.g. a histogram over codewords.

All values are immutable after construction; their arrays are flagged
read-only so they can be shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import DimensionMismatch, NotPSD

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_point(x, name="point"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def check_covariance(cov, dim):
    """Validate and symmetrize a covariance matrix.

    Returns ``(A + A.T) / 2``.  Raises :class:`NotPSD` if the smallest
    eigenvalue is below ``-1e-9``.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (dim, dim):
        raise DimensionMismatch(f"covariance shape {cov.shape} does not match dimension {dim}")
    if not np.all(np.isfinite(cov)):
        raise ValueError("covariance has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
        raise NotPSD("covariance is not symmetric")
    cov = 0.5 * (cov + cov.T)
    lam = float(np.linalg.eigvalsh(cov)[0])
    if lam < -PSD_TOL:
        raise NotPSD(f"covariance is not positive semi-definite (min eigenvalue {lam:.3e})", lam)
    return cov


@dataclass(frozen=True, eq=False)
class Dirac:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _frozen(_as_point(self.point)))

    @property
    def dim(self):
        return self.point.shape[0]


@dataclass(frozen=True, eq=False)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_point(self.mean, "mean")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(check_covariance(self.cov, mean.size)))

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class MomentOnly:
    """A distribution of unknown shape with the given mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_point(self.mean, "mean")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(check_covariance(self.cov, mean.size)))

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class Empirical:
    """Weighted sample. Weights are normalized to sum to one on construction;
    omitted weights mean uniform."""

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise DimensionMismatch(f"points must be an (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points have non-finite entries")
        n = pts.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != (n,):
                raise DimensionMismatch(f"{w.size} weights for {n} points")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and non-negative")
            total = w.sum()
            if total <= 0:
                raise ValueError("weights sum to zero")
            w = w / total
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]


Distribution = Union[Dirac, Gaussian, MomentOnly, Empirical]


def make_gaussian(mean, cov) -> Gaussian:
    return Gaussian(mean, cov)


def make_moment(mean, cov) -> MomentOnly:
    return MomentOnly(mean, cov)


def make_dirac(point) -> Dirac:
    return Dirac(point)


def make_empirical(points, weights=None) -> Empirical:
    return Empirical(points, weights)


def moments(P: Distribution):
    """Mean vector and covariance matrix of ``P``.

    Empirical covariances are the weighted second central moment without
    bias correction.
    """
    if isinstance(P, Dirac):
        return P.point.copy(), np.zeros((P.dim, P.dim))
    if isinstance(P, (Gaussian, MomentOnly)):
        return P.mean.copy(), P.cov.copy()
    if isinstance(P, Empirical):
        w = P.weights
        mean = w @ P.points
        centered = P.points - mean
        cov = (centered * w[:, None]).T @ centered
        return mean, 0.5 * (cov + cov.T)
    raise TypeError(f"not a distribution: {type(P).__name__}")


def total_std(P: Distribution) -> float:
    """Square root of the trace of the covariance."""
    _, cov = moments(P)
    return float(np.sqrt(max(np.trace(cov), 0.0)))


def cholesky_with_jitter(cov, retries=3):
    """Lower Cholesky factor of a PSD matrix, adding diagonal jitter on failure.

    The first retry adds ``1e-10 * trace / d`` to the diagonal; each further
    retry multiplies the jitter by ten.  A zero matrix factors to zero.
    """
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    tr = float(np.trace(cov))
    if tr == 0.0 and not np.any(cov):
        return np.zeros_like(cov)
    if tr < 0:
        lam = float(np.linalg.eigvalsh(cov)[0])
        raise NotPSD(f"matrix has negative trace (min eigenvalue {lam:.3e})", lam)
    jitter = 1e-10 * tr / d
    for _ in range(retries):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    lam = float(np.linalg.eigvalsh(cov)[0])
    raise NotPSD(f"Cholesky failed after jitter (min eigenvalue {lam:.3e})", lam)


def sample(P: Distribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. points from ``P`` as an ``(n, d)`` array.

    Moment-only distributions are sampled as the Gaussian with the same
    mean and covariance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(P, Dirac):
        return np.tile(P.point, (n, 1))
    if isinstance(P, (Gaussian, MomentOnly)):
        L = cholesky_with_jitter(P.cov)
        z = rng.standard_normal((n, P.dim))
        return P.mean + z @ L.T
    if isinstance(P, Empirical):
        idx = rng.choice(P.size, size=n, p=P.weights)
        return P.points[idx].copy()
    raise TypeError(f"not a distribution: {type(P).__name__}")


def dirac_at_mean(P: Distribution) -> Dirac:
    return Dirac(moments(P)[0])


@dataclass
class LabeledMeasureSet:
    distributions: list
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        self.distributions = list(self.distributions)
        y = np.asarray(self.labels, dtype=float).ravel()
        if y.shape[0] != len(self.distributions):
            raise DimensionMismatch(
                f"{len(self.distributions)} distributions but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        self.labels = y
        if self.distributions:
            d = self.distributions[0].dim
            for P in self.distributions:
                if P.dim != d:
                    raise DimensionMismatch("distributions have mixed dimensions")

    def __len__(self):
        return len(self.distributions)

    @property
    def dim(self):
        return self.distributions[0].dim

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return LabeledMeasureSet([self.distributions[i] for i in idx], self.labels[idx])

    def to_dict(self):
        return {
            "distributions": [to_dict(P) for P in self.distributions],
            "labels": [int(v) for v in self.labels],
        }

    @classmethod
    def from_dict(cls, data):
        return cls([from_dict(p) for p in data["distributions"]], data["labels"])


def to_dict(P: Distribution) -> dict:
    """JSON-ready representation of a distribution."""
    if isinstance(P, Dirac):
        return {"type": "dirac", "point": P.point.tolist()}
    if isinstance(P, Gaussian):
        return {"type": "gaussian", "mean": P.mean.tolist(), "cov": P.cov.tolist()}
    if isinstance(P, MomentOnly):
        return {"type": "moment", "mean": P.mean.tolist(), "cov": P.cov.tolist()}
    if isinstance(P, Empirical):
        return {"type": "empirical", "points": P.points.tolist(), "weights": P.weights.tolist()}
    raise TypeError(f"not a distribution: {type(P).__name__}")


def from_dict(data: dict) -> Distribution:
    kind = data.get("type")
    if kind == "dirac":
        return Dirac(data["point"])
    if kind == "gaussian":
        return Gaussian(data["mean"], data["cov"])
    if kind == "moment":
        return MomentOnly(data["mean"], data["cov"])
    if kind == "empirical":
        return Empirical(data["points"], data.get("weights"))
    raise ValueError(f"unknown distribution type {kind!r}")


def distributions_from_list(items: Sequence[dict]) -> list:
    return [from_dict(x) for x in items]
