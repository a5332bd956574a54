"""Synthetic benchmark: Gaussian-distribution classification tasks, grid
cross-validation, baselines and experiment reports.

Random streams.  Every repetition ``r`` of an experiment with root seed ``s``
draws from independent generators built as
``SeedSequence(s, spawn_key=(r, stream))`` with ``stream`` one of
:data:`STREAM_TASK`, :data:`STREAM_FOLDS`, :data:`STREAM_SOLVER` and
:data:`STREAM_VIRTUAL`.  Repetitions can therefore run in any order, or in
parallel, and still reproduce the same report.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConvergenceWarning
from .expected import ExpectedKernelConfig, GramMatrix, cross_gram, gram
from .kernels import LinearKernel, PolynomialKernel, RBFKernel
from .level2 import Level2Polynomial, Level2RBF, level2_from_gram
from .measures import (Dirac, Gaussian, LabeledMeasureSet, check_covariance, cholesky_with_jitter,
                       dirac_at_mean, moments, sample)
from .model import decision_at_points, ensure_psd, sign, train
from .solver import SolverParams, smo_solve

STREAM_TASK, STREAM_FOLDS, STREAM_SOLVER, STREAM_VIRTUAL = 0, 1, 2, 3

EMBEDDINGS = ("lin", "poly2", "poly3", "rbf", "nrbf")
LEVEL2 = ("lin", "poly", "rbf")


def substream(seed: int, rep: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, stream)))


def substream_int(seed: int, rep: int, stream: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(rep, stream))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# --- data generation -------------------------------------------------------------------


def sample_wishart(scale, df: int, rng: np.random.Generator) -> np.ndarray:
    """One Wishart(scale, df) draw by the Bartlett decomposition."""
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    d = scale.shape[0]
    scale = check_covariance(scale, d)
    if df < d:
        raise ValueError(f"degrees of freedom {df} must be >= dimension {d}")
    L = cholesky_with_jitter(scale)
    A = np.zeros((d, d))
    A[np.diag_indices(d)] = np.sqrt(rng.chisquare(df - np.arange(d)))
    low = np.tril_indices(d, -1)
    A[low] = rng.standard_normal(len(low[0]))
    LA = L @ A
    W = LA @ LA.T
    return 0.5 * (W + W.T)


def _as_vec(v, d):
    a = np.asarray(v, dtype=float)
    return np.full(d, float(a)) if a.ndim == 0 else a.reshape(d)


def _as_mat(v, d):
    a = np.asarray(v, dtype=float)
    return float(a) * np.eye(d) if a.ndim == 0 else a.reshape(d, d)


def _jsonable(v):
    return v.tolist() if isinstance(v, np.ndarray) else v


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Two classes of Gaussians.  Scalars for the mean and matrix fields mean
    a constant vector or a multiple of the identity."""

    dim: int = 10
    mean_pos: object = 1.0
    mean_neg: object = 2.0
    mean_cov: object = 0.5
    wishart_scale_pos: object = 0.6
    wishart_scale_neg: object = 1.2
    wishart_df: int = 10
    n_train_pos: int = 500
    n_train_neg: int = 500
    n_test_pos: int = 100
    n_test_neg: int = 100
    seed: int = 0

    def __post_init__(self):
        counts = (self.n_train_pos, self.n_train_neg, self.n_test_pos, self.n_test_neg)
        if min(counts) < 1:
            raise ValueError("all class counts must be >= 1")
        if self.wishart_df < self.dim:
            raise ValueError("Wishart degrees of freedom must be >= dim")

    @classmethod
    def desk(cls, **kw):
        base = dict(n_train_pos=100, n_train_neg=100, n_test_pos=50, n_test_neg=50)
        base.update(kw)
        return cls(**base)

    def to_dict(self):
        return {k: _jsonable(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def _class_draws(spec, mean, scale, n, rng):
    d = spec.dim
    L = cholesky_with_jitter(check_covariance(_as_mat(spec.mean_cov, d), d))
    means = _as_vec(mean, d) + rng.standard_normal((n, d)) @ L.T
    W = _as_mat(scale, d)
    return [Gaussian(m, sample_wishart(W, spec.wishart_df, rng)) for m in means]


def generate_task(spec: SyntheticTaskSpec, rng: np.random.Generator | None = None):
    """``(train, test)`` sets, positives first.  Without ``rng`` the stream is
    ``default_rng(spec.seed)``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    pos = _class_draws(spec, spec.mean_pos, spec.wishart_scale_pos,
                       spec.n_train_pos + spec.n_test_pos, rng)
    neg = _class_draws(spec, spec.mean_neg, spec.wishart_scale_neg,
                       spec.n_train_neg + spec.n_test_neg, rng)
    train_set = LabeledMeasureSet(
        pos[:spec.n_train_pos] + neg[:spec.n_train_neg],
        [1.0] * spec.n_train_pos + [-1.0] * spec.n_train_neg)
    test_set = LabeledMeasureSet(
        pos[spec.n_train_pos:] + neg[spec.n_train_neg:],
        [1.0] * spec.n_test_pos + [-1.0] * spec.n_test_neg)
    return train_set, test_set


def figure1_task() -> LabeledMeasureSet:
    """Seven 2-D Gaussians with distinct shapes: three positive, four negative."""
    specs = [
        ((-4.0, 2.0), [[1.0, 0.3], [0.3, 0.5]], 1.0),
        ((0.0, 4.0), [[0.3, 0.0], [0.0, 1.5]], 1.0),
        ((4.0, 2.0), [[0.8, -0.4], [-0.4, 0.8]], 1.0),
        ((-4.0, -3.0), [[0.5, 0.0], [0.0, 0.5]], -1.0),
        ((-1.0, -1.0), [[1.2, 0.5], [0.5, 0.6]], -1.0),
        ((2.5, -2.0), [[0.4, 0.1], [0.1, 1.0]], -1.0),
        ((5.0, -4.5), [[1.0, 0.0], [0.0, 0.3]], -1.0),
    ]
    return LabeledMeasureSet([Gaussian(m, S) for m, S, _ in specs], [y for *_, y in specs])


# --- grids and folds -------------------------------------------------------------------


def _pow2(lo, hi, step=1):
    return tuple(2.0 ** e for e in range(lo, hi + 1, step))


@dataclass(frozen=True)
class CVGrid:
    C: tuple = _pow2(-3, 7)
    gammas: tuple = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
    level2_gammas: tuple = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
    level2_degrees: tuple = (2, 3, 4, 5, 6)
    folds: int = 10

    def __post_init__(self):
        for name in ("C", "gammas", "level2_gammas", "level2_degrees"):
            vals = tuple(float(v) if name != "level2_degrees" else int(v)
                         for v in getattr(self, name))
            if not vals:
                raise ValueError(f"grid list {name} is empty")
            object.__setattr__(self, name, tuple(sorted(vals)))
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    @classmethod
    def desk(cls, **kw):
        base = dict(C=_pow2(-3, 7, 2), gammas=(1e-3, 1e-2, 1e-1, 1.0),
                    level2_gammas=(1e-2, 1e-1, 1.0, 1e1), level2_degrees=(2, 3), folds=5)
        base.update(kw)
        return cls(**base)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def stratified_folds(labels, k: int, rng: np.random.Generator) -> list:
    """Validation index sets; each class is shuffled and dealt round-robin."""
    y = np.asarray(labels)
    fold_of = np.empty(len(y), dtype=int)
    for cls in (1.0, -1.0):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls:+.0f} has {len(idx)} examples, fewer than {k} folds")
        fold_of[rng.permutation(idx)] = np.arange(len(idx)) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


# --- kernel combinations ---------------------------------------------------------------


@dataclass(frozen=True)
class Combo:
    embedding: str
    level2: str

    def __post_init__(self):
        if self.embedding not in EMBEDDINGS:
            raise ValueError(f"unknown embedding family {self.embedding!r}; use one of {EMBEDDINGS}")
        if self.level2 not in LEVEL2:
            raise ValueError(f"unknown level-2 family {self.level2!r}; use one of {LEVEL2}")

    @classmethod
    def parse(cls, text: str):
        emb, sep, l2 = text.strip().lower().partition("/")
        return cls(emb, l2 if sep else "lin")

    @property
    def name(self):
        return f"{self.embedding}/{self.level2}"

    def embedding_params(self, grid):
        return grid.gammas if self.embedding in ("rbf", "nrbf") else (None,)

    def level2_params(self, grid):
        if self.level2 == "poly":
            return grid.level2_degrees
        if self.level2 == "rbf":
            return grid.level2_gammas
        return (None,)

    def kernel(self, p):
        if self.embedding == "lin":
            return LinearKernel()
        if self.embedding in ("poly2", "poly3"):
            return PolynomialKernel(int(self.embedding[-1]), 1.0)
        return RBFKernel(p, normalized=self.embedding == "nrbf")

    def level2_kernel(self, q):
        """``None`` for the linear level-2 kernel: that is the plain level-1 machine."""
        if self.level2 == "poly":
            return Level2Polynomial(q, 1.0)
        if self.level2 == "rbf":
            return Level2RBF(q)
        return None

    def config(self, p):
        return ExpectedKernelConfig(self.kernel(p))


def parse_combos(text) -> list:
    if isinstance(text, str):
        text = text.split(",")
    return [Combo.parse(t) for t in text if t.strip()]


def _psd(G):
    """``G`` itself when PSD, else jittered once (raises if that fails)."""
    return ensure_psd(GramMatrix(G, None, None)).values


class _Design:
    """Kernel matrices for one model family over ``n_dist`` distributions.

    ``fit[p]`` is the Gram over fitting items, ``evals[p]`` the kernel between
    fitting items and every distribution.  ``groups[i]`` is the distribution a
    fitting item came from, so folds can drop whole distributions.
    """

    def __init__(self, fit, evals, groups, fit_labels):
        self.fit = fit
        self.evals = evals
        self.groups = np.asarray(groups)
        self.fit_labels = np.asarray(fit_labels, dtype=float)


def _smm_design(combo: Combo, grid: CVGrid, dists, n_fit, labels) -> _Design:
    fit, evals = {}, {}
    for p in combo.embedding_params(grid):
        cfg = combo.config(p)
        if combo.level2 == "lin":
            G = gram(cfg, dists).values
        else:
            base = gram(cfg.without_correction(), dists).values
        for q in combo.level2_params(grid):
            if combo.level2 != "lin":
                G = level2_from_gram(combo.level2_kernel(q), base)
            fitG = _psd(G[:n_fit, :n_fit].copy())
            fit[(p, q)] = fitG
            evals[(p, q)] = G[:n_fit, :]
    return _Design(fit, evals, np.arange(n_fit), labels[:n_fit])


def _point_design(kernel_name: str, grid: CVGrid, points, groups, fit_labels, eval_points) -> _Design:
    """SVM on points with an RBF (or linear) kernel, evaluated at ``eval_points``."""
    combo = Combo(kernel_name, "lin")
    fit, evals = {}, {}
    fit_d = [Dirac(x) for x in points]
    eval_d = [Dirac(x) for x in eval_points]
    for p in combo.embedding_params(grid):
        cfg = ExpectedKernelConfig(combo.kernel(p), diagonal_correction=False)
        fit[(p, None)] = _psd(gram(cfg, fit_d).values)
        evals[(p, None)] = cross_gram(cfg, fit_d, eval_d)
    return _Design(fit, evals, groups, fit_labels)


def _fit_predict(design, key, C, fit_mask, cols, seed, tol):
    Kf = design.fit[key][np.ix_(fit_mask, fit_mask)]
    y = design.fit_labels[fit_mask]
    res = smo_solve(Kf, y, SolverParams(C=C, tol=tol), seed=seed)
    coef = res.alpha * y
    return coef @ design.evals[key][np.ix_(fit_mask, cols)] + res.bias, res.converged


def _cv(design: _Design, labels, folds, grid, combo_params, seed, tol=1e-3):
    """Return ``(best_key, best_C, cv_accuracy, n_unconverged)``."""
    best, n_bad = None, 0
    n = sum(len(f) for f in folds)
    for C in grid.C:
        for key in combo_params:
            correct = 0
            for f in folds:
                fit_mask = ~np.isin(design.groups, f)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ConvergenceWarning)
                    scores, ok = _fit_predict(design, key, C, fit_mask, f, seed, tol)
                n_bad += not ok
                correct += int(np.sum(sign(scores) == labels[f]))
            acc = correct / n
            if best is None or acc > best[2]:
                best = (key, C, acc)
    return best + (n_bad,)


def _keys(combo, grid):
    return [(p, q) for p in combo.embedding_params(grid) for q in combo.level2_params(grid)]


def _describe(key, C, acc):
    p, q = key
    return {"C": C, "embedding_param": p, "level2_param": q, "cv_accuracy": acc}


def run_cv(data: LabeledMeasureSet, grid: CVGrid, combo, rng: np.random.Generator,
           seed: int = 0) -> tuple:
    """Grid search with stratified folds.

    Grid points are visited with C ascending, then the embedding parameter,
    then the level-2 parameter, and the first maximum wins.
    """
    combo = Combo.parse(combo) if isinstance(combo, str) else combo
    folds = stratified_folds(data.labels, grid.folds, rng)
    design = _smm_design(combo, grid, data.distributions, len(data), data.labels)
    key, C, acc, _ = _cv(design, data.labels, folds, grid, _keys(combo, grid), seed)
    return _describe(key, C, acc), acc


# --- experiments -----------------------------------------------------------------------


@dataclass
class ExperimentReport:
    spec: dict
    grid: dict
    seed: int
    repetitions: int
    results: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        """Deterministic content only; wall-clock timings live in :meth:`timing_dict`."""
        return {"spec": self.spec, "grid": self.grid, "seed": self.seed,
                "repetitions": self.repetitions, "results": self.results}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def timing_dict(self):
        return {"seed": self.seed, "timings": self.timings}

    def mean(self, name):
        return self.results[name]["mean"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["combo", "mean", "std"] + [f"rep{r}" for r in range(self.repetitions)])
        for name, res in self.results.items():
            w.writerow([name, repr(res["mean"]), repr(res["std"])]
                       + [repr(a) for a in res["accuracies"]])
        return buf.getvalue()


def _summary(accs, chosen, unconverged):
    a = np.asarray(accs, dtype=float)
    return {
        "accuracies": [float(x) for x in a],
        "mean": float(a.mean()),
        "std": float(a.std(ddof=1)) if len(a) > 1 else 0.0,
        "chosen": chosen,
        "cv_unconverged_fits": int(unconverged),
    }


def virtual_samples(data: LabeledMeasureSet, n_virtual: int, rng, at_mean=False):
    """Pool ``n_virtual`` draws per distribution; ``at_mean`` places every draw at the mean."""
    pts, groups, labels = [], [], []
    for i, (P, y) in enumerate(zip(data.distributions, data.labels)):
        X = np.tile(moments(P)[0], (n_virtual, 1)) if at_mean else sample(P, n_virtual, rng)
        pts.append(X)
        groups += [i] * n_virtual
        labels += [y] * n_virtual
    return np.vstack(pts), np.array(groups), np.array(labels)


def _evaluate(design, labels_all, n_train, folds, grid, keys, seed):
    y_tr = labels_all[:n_train]
    key, C, acc, bad = _cv(design, y_tr, folds, grid, keys, seed)
    cols = np.arange(n_train, len(labels_all))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        scores, ok = _fit_predict(design, key, C, np.ones(len(design.groups), bool), cols, seed, 1e-3)
    test_acc = float(np.mean(sign(scores) == labels_all[cols]))
    return test_acc, _describe(key, C, acc), bad + (not ok)


def run_experiment(spec: SyntheticTaskSpec, combos, repetitions: int = 10, seed: int = 0,
                   grid: CVGrid | None = None, baselines: bool = True, baseline_kernel: str = "rbf",
                   n_virtual: int = 5, virtual_at_mean: bool = False,
                   progress=None) -> ExperimentReport:
    """Per repetition: fresh task, grid CV on the training set, refit, test accuracy.

    Baselines (when enabled) use the same grid: an SVM on the distribution
    means and an SVM on ``n_virtual`` pooled draws per training distribution
    (folds keep all draws of a distribution together).  Both predict at the
    test means.  ``virtual_at_mean`` places every virtual draw at its mean.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    grid = grid or CVGrid.desk()
    combos = parse_combos(combos) if not isinstance(combos, list) or isinstance(combos[0], str) \
        else combos
    names = [c.name for c in combos]
    if baselines:
        names += ["svm_means", "asvm"]
    accs = {n: [] for n in names}
    chosen = {n: [] for n in names}
    bad = {n: 0 for n in names}
    timings = {"generate": 0.0, "total": 0.0}
    t_all = time.perf_counter()
    for rep in range(repetitions):
        t0 = time.perf_counter()
        train_set, test_set = generate_task(spec, substream(seed, rep, STREAM_TASK))
        timings["generate"] += time.perf_counter() - t0
        folds = stratified_folds(train_set.labels, grid.folds, substream(seed, rep, STREAM_FOLDS))
        solver_seed = substream_int(seed, rep, STREAM_SOLVER)
        dists = train_set.distributions + test_set.distributions
        labels = np.concatenate([train_set.labels, test_set.labels])
        n_tr = len(train_set)
        for combo in combos:
            t0 = time.perf_counter()
            design = _smm_design(combo, grid, dists, n_tr, labels)
            acc, ch, nb = _evaluate(design, labels, n_tr, folds, grid, _keys(combo, grid), solver_seed)
            accs[combo.name].append(acc)
            chosen[combo.name].append(ch)
            bad[combo.name] += nb
            timings[combo.name] = timings.get(combo.name, 0.0) + time.perf_counter() - t0
        if baselines:
            means = np.array([moments(P)[0] for P in dists])
            keys = [(p, None) for p in Combo(baseline_kernel, "lin").embedding_params(grid)]
            t0 = time.perf_counter()
            d = _point_design(baseline_kernel, grid, means[:n_tr], np.arange(n_tr), labels[:n_tr], means)
            acc, ch, nb = _evaluate(d, labels, n_tr, folds, grid, keys, solver_seed)
            accs["svm_means"].append(acc)
            chosen["svm_means"].append(ch)
            bad["svm_means"] += nb
            timings["svm_means"] = timings.get("svm_means", 0.0) + time.perf_counter() - t0
            t0 = time.perf_counter()
            X, groups, ylab = virtual_samples(train_set, n_virtual, substream(seed, rep, STREAM_VIRTUAL),
                                              at_mean=virtual_at_mean)
            d = _point_design(baseline_kernel, grid, X, groups, ylab, means)
            acc, ch, nb = _evaluate(d, labels, n_tr, folds, grid, keys, solver_seed)
            accs["asvm"].append(acc)
            chosen["asvm"].append(ch)
            bad["asvm"] += nb
            timings["asvm"] = timings.get("asvm", 0.0) + time.perf_counter() - t0
        if progress:
            progress(rep, {n: accs[n][-1] for n in names})
    timings["total"] = time.perf_counter() - t_all
    results = {n: _summary(accs[n], chosen[n], bad[n]) for n in names}
    if baselines:
        results["asvm"]["n_virtual"] = n_virtual
    return ExperimentReport(spec.to_dict(), grid.to_dict(), seed, repetitions, results, timings)


def write_report(report: ExperimentReport, path, csv_path=None) -> None:
    """JSON report at ``path``, timings at ``<stem>.timing.json``, optional CSV."""
    path = str(path)
    with open(path, "w") as f:
        f.write(report.to_json())
    stem = path[:-5] if path.endswith(".json") else path
    with open(stem + ".timing.json", "w") as f:
        json.dump(report.timing_dict(), f, indent=1)
    if csv_path:
        with open(csv_path, "w") as f:
            f.write(report.to_csv())


# --- decision boundaries ---------------------------------------------------------------


def boundary_grid(model, xlim, ylim, n: int = 50) -> np.ndarray:
    """``(n*n, 3)`` rows ``x, y, f(delta_(x,y))`` on a regular lattice."""
    xs = np.linspace(xlim[0], xlim[1], n)
    ys = np.linspace(ylim[0], ylim[1], n)
    XX, YY = np.meshgrid(xs, ys)
    P = np.column_stack([XX.ravel(), YY.ravel()])
    return np.column_stack([P, decision_at_points(model, P)])


def write_boundary_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["x", "y", "decision"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def lattice_limits(data: LabeledMeasureSet, pad: float = 3.0):
    lo = np.full(2, np.inf)
    hi = np.full(2, -np.inf)
    for P in data.distributions:
        m, S = moments(P)
        s = pad * np.sqrt(np.diag(S))
        lo = np.minimum(lo, m - s - 0.5)
        hi = np.maximum(hi, m + s + 0.5)
    return (lo[0], hi[0]), (lo[1], hi[1])


def boundary_for_task(data: LabeledMeasureSet, combo="rbf/lin", gamma=0.25, C=2.0 ** 7,
                      level2_param=None, n=50, seed=0):
    """Train one model on a 2-D task and return its lattice of decision values."""
    if data.dim != 2:
        raise ValueError("boundary lattices need 2-D distributions")
    combo = Combo.parse(combo) if isinstance(combo, str) else combo
    model = train(data, combo.config(gamma), combo.level2_kernel(level2_param),
                  SolverParams(C=C), seed=seed)
    xlim, ylim = lattice_limits(data)
    return model, boundary_grid(model, xlim, ylim, n)


def experiment_boundary(spec: SyntheticTaskSpec, report: ExperimentReport, combo, n: int = 50):
    """Lattice of decision values for the repetition-0 model of ``combo``,
    refit with the hyperparameters CV chose (2-D tasks only)."""
    combo = Combo.parse(combo) if isinstance(combo, str) else combo
    train_set, _ = generate_task(spec, substream(report.seed, 0, STREAM_TASK))
    ch = report.results[combo.name]["chosen"][0]
    _, rows = boundary_for_task(train_set, combo, ch["embedding_param"], ch["C"],
                                ch["level2_param"], n=n,
                                seed=substream_int(report.seed, 0, STREAM_SOLVER))
    return rows


def dirac_means(data: LabeledMeasureSet) -> LabeledMeasureSet:
    return LabeledMeasureSet([dirac_at_mean(P) for P in data.distributions], data.labels)


__all__ = [
    "CVGrid", "Combo", "ExperimentReport", "SyntheticTaskSpec", "boundary_for_task",
    "experiment_boundary",
    "boundary_grid", "dirac_means", "figure1_task", "generate_task",
    "parse_combos", "run_cv", "run_experiment", "sample_wishart", "stratified_folds",
    "substream", "virtual_samples", "write_boundary_csv", "write_report",
]
