"""Expected kernels between distributions.

``K(P, Q) = E[k(x, z)]`` with ``x ~ P`` and ``z ~ Q`` independent, i.e. the
RKHS inner product of the two mean embeddings.  Analytic forms are used for

* the linear kernel with any distribution that has moments,
* polynomial kernels of degree 1 and 2 with any distribution that has
  moments (both only depend on the first two moments),
* the cubic polynomial and Gaussian RBF kernels with Gaussian distributions.

Dirac and empirical distributions are handled as weighted point sets: the
expectation becomes a weighted double sum over the atoms, or, against a
Gaussian, the weighted average of the closed-form embedding at the atoms.
A Dirac and a one-point empirical distribution take exactly the same code
path and therefore give bitwise identical values.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DimensionMismatch, NoClosedForm, SingularSolve
from .kernels import EmbeddingKernel, LinearKernel, PolynomialKernel, RBFKernel, kernel_block
from .measures import Dirac, Distribution, Empirical, Gaussian, MomentOnly, moments, sample

_PAIR_CHUNK = 8192
_DIRECT_LIMIT = 4_000_000
_TAYLOR_MAX_TERMS = 2000


@dataclass(frozen=True)
class ExpectedKernelConfig:
    """How expected kernels are evaluated.

    ``diagonal_correction`` adds ``trace(cov_i)`` to same-index entries, as in
    the analytic linear-kernel form ``m_i^T m_j + delta_ij tr(S_i)``.  It
    defaults to on for the linear kernel and cannot be enabled for others.

    With ``empirical_fallback`` a Gaussian that has no closed form under the
    embedding kernel is replaced by ``fallback_samples`` draws.  The draws are
    seeded from ``fallback_seed`` and the distribution's parameters, so the
    same distribution always gets the same sample.
    """

    embedding: EmbeddingKernel
    diagonal_correction: bool | None = None
    empirical_fallback: bool = False
    fallback_samples: int = 2000
    fallback_seed: int = 0

    def __post_init__(self):
        linear = isinstance(self.embedding, LinearKernel)
        if self.diagonal_correction is None:
            object.__setattr__(self, "diagonal_correction", linear)
        elif self.diagonal_correction and not linear:
            raise ValueError("diagonal correction is only defined for the linear embedding kernel")

    def without_correction(self) -> "ExpectedKernelConfig":
        if not self.diagonal_correction:
            return self
        return replace(self, diagonal_correction=False)


@dataclass
class GramMatrix:
    """Symmetric matrix of expected-kernel values.

    ``source[i, j]`` records how each entry was obtained: ``"closed-form"``,
    ``"empirical[n=..,m=..]"``, ``"mixed[n=..]"`` (closed form averaged over
    atoms), with a ``fallback-`` prefix when sampled stand-ins were used.
    ``jitter`` is the diagonal shift added by :meth:`repaired`.
    """

    values: np.ndarray
    config: ExpectedKernelConfig
    source: np.ndarray
    jitter: float = 0.0
    level2: object = None

    @property
    def size(self):
        return self.values.shape[0]

    def repaired(self) -> "GramMatrix":
        eps = 1e-8 * float(np.mean(np.diag(self.values)))
        return replace(self, values=self.values + eps * np.eye(self.size), jitter=self.jitter + eps)

    def provenance(self) -> dict:
        labels, counts = np.unique(self.source.astype(str), return_counts=True)
        info = {
            "embedding": self.config.embedding.spec,
            "diagonal_correction": bool(self.config.diagonal_correction),
            "empirical_fallback": bool(self.config.empirical_fallback),
            "jitter": self.jitter,
            "sources": {str(a): int(b) for a, b in zip(labels, counts)},
            "entry_sources": self.source.astype(str).tolist(),
        }
        if self.level2 is not None:
            info["level2"] = self.level2.spec
        return info


# --- closed forms -------------------------------------------------------------------


def has_closed_form(k: EmbeddingKernel, P: Distribution) -> bool:
    """Whether ``P`` (Gaussian or moment-only) has an analytic embedding under ``k``."""
    gaussian = isinstance(P, Gaussian)
    if isinstance(k, LinearKernel):
        return True
    if isinstance(k, PolynomialKernel):
        return k.degree <= 2 or (k.degree == 3 and gaussian)
    if isinstance(k, RBFKernel):
        return gaussian
    return False


def _closed_form_pairs(k, ma, Sa, mb, Sb):
    """Expected kernel for stacked pairs ``(ma[p], Sa[p])``, ``(mb[p], Sb[p])``.

    ``Sa``/``Sb`` may be ``None`` for zero covariance.
    """
    if isinstance(k, LinearKernel):
        return (ma * mb).sum(axis=1)
    if isinstance(k, PolynomialKernel):
        a = (ma * mb).sum(axis=1) + k.offset
        if k.degree == 1:
            return a
        var = np.zeros_like(a)
        if Sa is not None and Sb is not None:
            var += (Sa * Sb).sum(axis=(1, 2))
        if Sb is not None:
            var += np.einsum("pi,pij,pj->p", ma, Sb, ma)
        if Sa is not None:
            var += np.einsum("pi,pij,pj->p", mb, Sa, mb)
        if k.degree == 2:
            return a * a + var
        cross = np.zeros_like(a)
        if Sa is not None and Sb is not None:
            # m_a^T S_b S_a m_b
            cross = (np.einsum("pij,pj->pi", Sb, ma) * np.einsum("pij,pj->pi", Sa, mb)).sum(axis=1)
        return a ** 3 + 6.0 * cross + 3.0 * a * var
    if isinstance(k, RBFKernel):
        d = ma.shape[1]
        A = np.broadcast_to(np.eye(d) / k.gamma, (ma.shape[0], d, d)).copy()
        if Sa is not None:
            A += Sa
        if Sb is not None:
            A += Sb
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise SingularSolve("covariance sum is not positive definite") from exc
        v = np.linalg.solve(L, (ma - mb)[:, :, None])[:, :, 0]
        quad = (v * v).sum(axis=1)
        # |gamma S_a + gamma S_b + I| = gamma^d |A|
        logdet = d * math.log(k.gamma) + 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        return np.exp(-0.5 * quad - 0.5 * logdet) * k.norm_factor(d)
    raise NoClosedForm(f"no closed form for kernel {k!r}")


def _closed_form_at_points(k, m, S, X):
    """Closed-form mean embedding of N(m, S) (or moments) at each row of ``X``."""
    if isinstance(k, LinearKernel):
        return (X * m).sum(axis=1)
    if isinstance(k, PolynomialKernel):
        a = (X * m).sum(axis=1) + k.offset
        if k.degree == 1:
            return a
        var = np.einsum("qi,ij,qj->q", X, S, X)
        if k.degree == 2:
            return a * a + var
        return a ** 3 + 3.0 * a * var
    if isinstance(k, RBFKernel):
        d = m.shape[0]
        A = S + np.eye(d) / k.gamma
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise SingularSolve("covariance is not positive semi-definite") from exc
        v = np.linalg.solve(L, (X - m).T)
        quad = (v * v).sum(axis=0)
        logdet = d * math.log(k.gamma) + 2.0 * float(np.log(np.diag(L)).sum())
        return np.exp(-0.5 * quad - 0.5 * logdet) * k.norm_factor(d)
    raise NoClosedForm(f"no closed form for kernel {k!r}")


# --- weighted point sets -------------------------------------------------------------


def _rbf_taylor_1d(gamma, points, weights, X):
    """Weighted 1-D Gaussian sum via the expansion
    exp(-(u - v)^2 / 2) = sum_k phi_k(u) phi_k(v),  phi_k(u) = e^{-u^2/2} u^k / sqrt(k!).

    Every term is bounded by one, so there is no cancellation trouble; the
    series is cut where the tail is below 2^-K.  Returns ``None`` if the
    points are too spread out for a reasonable number of terms.
    """
    x = points[:, 0]
    z = X[:, 0]
    lo = min(x.min(), z.min())
    hi = max(x.max(), z.max())
    s = math.sqrt(gamma)
    u = s * (x - 0.5 * (lo + hi))
    v = s * (z - 0.5 * (lo + hi))
    U = 0.5 * s * (hi - lo)
    nterms = int(math.ceil(2.0 * math.e * U * U + 60.0))
    if nterms > _TAYLOR_MAX_TERMS:
        return None
    phi = np.exp(-0.5 * u * u)
    coef = np.empty(nterms)
    for j in range(nterms):
        coef[j] = weights @ phi
        phi = phi * (u / math.sqrt(j + 1))
    psi = np.exp(-0.5 * v * v)
    out = np.zeros_like(v)
    for j in range(nterms):
        out += coef[j] * psi
        psi = psi * (v / math.sqrt(j + 1))
    return out


def _poly_moment_tensors(k, points, weights, X):
    """sum_r w_r (<x_r, z> + c)^p expanded binomially into weighted moment tensors."""
    p, c = k.degree, k.offset
    out = np.full(X.shape[0], weights.sum() * c ** p)
    if p >= 1:
        T1 = weights @ points
        out += p * c ** (p - 1) * (X @ T1)
    if p >= 2:
        T2 = (points * weights[:, None]).T @ points
        out += math.comb(p, 2) * c ** (p - 2) * np.einsum("qi,ij,qj->q", X, T2, X)
    if p >= 3:
        T3 = np.einsum("n,ni,nj,nk->ijk", weights, points, points, points, optimize=True)
        out += np.einsum("qi,qj,qk,ijk->q", X, X, X, T3, optimize=True)
    return out


def empirical_embedding(k: EmbeddingKernel, points, weights, X) -> np.ndarray:
    """``sum_r w_r k(x_r, z)`` for every row ``z`` of ``X``.

    Small problems are evaluated directly.  Large ones use exact
    rearrangements where available: the weighted mean for the linear kernel,
    moment tensors for polynomials up to degree 3, and a truncated series for
    the 1-D Gaussian kernel.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if points.shape[1] != X.shape[1]:
        raise DimensionMismatch(f"dimensions {points.shape[1]} and {X.shape[1]} differ")
    n, q = points.shape[0], X.shape[0]
    if n * q > _DIRECT_LIMIT:
        if isinstance(k, LinearKernel):
            return X @ (weights @ points)
        if isinstance(k, PolynomialKernel) and k.degree <= 3:
            return _poly_moment_tensors(k, points, weights, X)
        if isinstance(k, RBFKernel) and X.shape[1] == 1:
            out = _rbf_taylor_1d(k.gamma, points, weights, X)
            if out is not None:
                return out * k.norm_factor(1)
    cols = max(1, _DIRECT_LIMIT // n)
    if q <= cols:
        return weights @ kernel_block(k, points, X)
    return np.concatenate([weights @ kernel_block(k, points, X[s:s + cols])
                           for s in range(0, q, cols)])


def empirical_expected_kernel(k: EmbeddingKernel, P: Empirical, Q: Empirical) -> float:
    """Weighted double sum ``sum_rs w_r v_s k(x_r, z_s)``."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions {P.dim} and {Q.dim} differ")
    mu = empirical_embedding(k, P.points, P.weights, Q.points)
    return float(Q.weights @ mu)


# --- dispatch -----------------------------------------------------------------------


@dataclass
class _Atoms:
    points: np.ndarray
    weights: np.ndarray
    fallback: bool = False


@dataclass
class _Moment:
    mean: np.ndarray
    cov: np.ndarray


def _fallback_sample(cfg, P):
    digest = zlib.crc32(P.mean.tobytes() + P.cov.tobytes())
    rng = np.random.default_rng([cfg.fallback_seed, digest])
    pts = sample(P, cfg.fallback_samples, rng)
    return _Atoms(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]), fallback=True)


def _resolve(cfg: ExpectedKernelConfig, P: Distribution):
    if isinstance(P, Dirac):
        return _Atoms(P.point[None, :], np.ones(1))
    if isinstance(P, Empirical):
        return _Atoms(P.points, P.weights)
    if isinstance(P, (Gaussian, MomentOnly)):
        if has_closed_form(cfg.embedding, P):
            return _Moment(P.mean, P.cov)
        if cfg.empirical_fallback and isinstance(P, Gaussian):
            return _fallback_sample(cfg, P)
        raise NoClosedForm(
            f"{type(P).__name__} has no closed-form embedding under {cfg.embedding.spec}"
            + ("" if cfg.empirical_fallback else "; enable empirical_fallback to sample it"))
    raise TypeError(f"not a distribution: {type(P).__name__}")


def _label(a, b):
    if isinstance(a, _Moment) and isinstance(b, _Moment):
        return "closed-form"
    prefix = "fallback-" if getattr(a, "fallback", False) or getattr(b, "fallback", False) else ""
    if isinstance(a, _Atoms) and isinstance(b, _Atoms):
        return f"{prefix}empirical[n={a.points.shape[0]},m={b.points.shape[0]}]"
    atoms = a if isinstance(a, _Atoms) else b
    return f"{prefix}mixed[n={atoms.points.shape[0]}]"


def _stack_atoms(items, idx):
    pts = np.vstack([items[i].points for i in idx])
    w = np.concatenate([items[i].weights for i in idx])
    sizes = np.array([items[i].points.shape[0] for i in idx])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return pts, w, starts


def _cross(cfg, A, B, symmetric):
    """Values and provenance of K(A_i, B_j).  With ``symmetric`` (A is B) only
    the upper triangle is guaranteed to be filled."""
    k = cfg.embedding
    dims = {P.dim for P in A} | {P.dim for P in B}
    if len(dims) != 1:
        raise DimensionMismatch(f"distributions have mixed dimensions {sorted(dims)}")
    ra = [_resolve(cfg, P) for P in A]
    rb = ra if symmetric else [_resolve(cfg, P) for P in B]
    p, q = len(ra), len(rb)
    G = np.zeros((p, q))
    src = np.empty((p, q), dtype=object)
    a_mom = [i for i, r in enumerate(ra) if isinstance(r, _Moment)]
    a_atm = [i for i, r in enumerate(ra) if isinstance(r, _Atoms)]
    b_mom = [j for j, r in enumerate(rb) if isinstance(r, _Moment)]
    b_atm = [j for j, r in enumerate(rb) if isinstance(r, _Atoms)]

    # moment x moment
    if symmetric:
        pairs = [(i, j) for n, i in enumerate(a_mom) for j in a_mom[n:]]
    else:
        pairs = [(i, j) for i in a_mom for j in b_mom]
    for s in range(0, len(pairs), _PAIR_CHUNK):
        chunk = np.array(pairs[s:s + _PAIR_CHUNK])
        I, J = chunk[:, 0], chunk[:, 1]
        ma = np.array([ra[i].mean for i in I])
        mb = np.array([rb[j].mean for j in J])
        Sa = np.array([ra[i].cov for i in I])
        Sb = np.array([rb[j].cov for j in J])
        G[I, J] = _closed_form_pairs(k, ma, Sa, mb, Sb)
        src[I, J] = "closed-form"

    # atoms x atoms
    if a_atm and b_atm:
        Z, wz, starts = _stack_atoms(rb, b_atm)
        for i in a_atm:
            mu = empirical_embedding(k, ra[i].points, ra[i].weights, Z)
            vals = np.add.reduceat(mu * wz, starts)
            G[i, b_atm] = vals
            for j in b_atm:
                src[i, j] = _label(ra[i], rb[j])

    # moment rows x atom columns, and atom rows x moment columns
    if b_atm and a_mom:
        Z, wz, starts = _stack_atoms(rb, b_atm)
        for i in a_mom:
            mu = _closed_form_at_points(k, ra[i].mean, ra[i].cov, Z)
            G[i, b_atm] = np.add.reduceat(mu * wz, starts)
            for j in b_atm:
                src[i, j] = _label(ra[i], rb[j])
    if a_atm and b_mom:
        X, wx, starts = _stack_atoms(ra, a_atm)
        for j in b_mom:
            mu = _closed_form_at_points(k, rb[j].mean, rb[j].cov, X)
            G[a_atm, j] = np.add.reduceat(mu * wx, starts)
            for i in a_atm:
                src[i, j] = _label(ra[i], rb[j])
    return G, src


def expected_kernel(cfg: ExpectedKernelConfig, P: Distribution, Q: Distribution,
                    same_index: bool = False) -> float:
    """``K(P, Q) = E[k(x, z)]``, plus ``tr(cov_P)`` when ``same_index`` and the
    diagonal correction is on."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions {P.dim} and {Q.dim} differ")
    G, _ = _cross(cfg, [P], [Q], symmetric=False)
    val = float(G[0, 0])
    if same_index and cfg.diagonal_correction:
        val += float(np.trace(moments(P)[1]))
    return val


def gram(cfg: ExpectedKernelConfig, dists) -> GramMatrix:
    """Gram matrix over a list of distributions; diagonal entries are same-index."""
    dists = list(dists)
    if not dists:
        raise ValueError("need at least one distribution")
    G, src = _cross(cfg, dists, dists, symmetric=True)
    G = np.triu(G) + np.triu(G, 1).T
    src = np.where(np.triu(np.ones(G.shape, dtype=bool)), src, src.T)
    if cfg.diagonal_correction:
        G[np.diag_indices_from(G)] += [np.trace(moments(P)[1]) for P in dists]
    if not np.all(np.isfinite(G)):
        raise ValueError("Gram matrix has non-finite entries")
    return GramMatrix(G, cfg, src)


def cross_gram(cfg: ExpectedKernelConfig, A, B) -> np.ndarray:
    """``K(A_i, B_j)`` for two lists, never treated as same-index."""
    A, B = list(A), list(B)
    if not A or not B:
        return np.zeros((len(A), len(B)))
    return _cross(cfg, A, B, symmetric=False)[0]


def self_kernels(cfg: ExpectedKernelConfig, dists) -> np.ndarray:
    """``K(P, P)`` for each distribution, without the diagonal correction."""
    cfg = cfg.without_correction()
    return np.array([expected_kernel(cfg, P, P) for P in dists])


def mean_embedding(cfg: ExpectedKernelConfig, P: Distribution, X) -> np.ndarray:
    """Mean embedding ``mu_P(x) = E_{z~P} k(z, x)`` at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != P.dim:
        raise DimensionMismatch(f"dimensions {P.dim} and {X.shape[1]} differ")
    r = _resolve(cfg, P)
    if isinstance(r, _Atoms):
        return empirical_embedding(cfg.embedding, r.points, r.weights, X)
    return _closed_form_at_points(cfg.embedding, r.mean, r.cov, X)


def mean_embedding_eval(cfg: ExpectedKernelConfig, P: Distribution, x) -> float:
    return expected_kernel(cfg, P, Dirac(x), same_index=False)
