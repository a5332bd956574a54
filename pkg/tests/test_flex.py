import math

import numpy as np
import pytest

from smmkit import (LinearKernel, PolynomialKernel, RBFKernel, SmoothingFamily, SolverParams,
                    composed_rbf, eval_base, fit_flex_svm, flex_gram, flex_kernel,
                    smo_solve, verify_equivalence)
from smmkit.flex import flex_cross, outlier_influence
from smmkit.kernels import kernel_block, pairwise_gram


def _points(rng, m=20, d=2):
    X = rng.standard_normal((m, d))
    y = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    return X, y


@pytest.mark.parametrize("k", [RBFKernel(0.7), LinearKernel(), PolynomialKernel(2), PolynomialKernel(3)])
def test_zero_smoothers_give_base_kernel(k, rng):
    fam = SmoothingFamily.zeros(2)
    xi, xj = rng.standard_normal(3), rng.standard_normal(3)
    assert flex_kernel(k, fam, 0, 1, xi, xj) == pytest.approx(eval_base(k, xi, xj), abs=1e-12)


def test_isotropic_1d_bandwidth_composition():
    # base bandwidth sigma^2 = 2 (gamma = 1/2), smoother variance 0.3 on both points
    s2, v, xi, xj = 2.0, 0.3, 0.4, -1.1
    fam = SmoothingFamily(variances=[v, v])
    val = flex_kernel(RBFKernel(1 / s2), fam, 0, 1, [xi], [xj])
    formula = math.exp(-(xi - xj) ** 2 / (2 * (s2 + 2 * v))) * math.sqrt(s2 / (s2 + 2 * v))
    assert val == pytest.approx(formula, rel=1e-14)
    # adaptive 2-D quadrature of the smoothed kernel
    assert val == pytest.approx(0.569000230405076, abs=1e-13)


def test_linear_smoothing_is_transparent(rng):
    fam = SmoothingFamily(variances=[0.5, 2.0])
    xi, xj = rng.standard_normal(3), rng.standard_normal(3)
    assert flex_kernel(LinearKernel(), fam, 0, 1, xi, xj) == pytest.approx(xi @ xj, abs=1e-14)


def test_full_covariance_family(rng):
    covs = np.array([np.eye(2) * 0.2, [[0.5, 0.1], [0.1, 0.3]]])
    fam = SmoothingFamily(covariances=covs)
    X = rng.standard_normal((2, 2))
    G = flex_gram(RBFKernel(1.0), fam, X)
    assert G[0, 1] == G[1, 0]
    with pytest.raises(ValueError):
        SmoothingFamily(variances=[1.0], covariances=covs)
    with pytest.raises(ValueError):
        SmoothingFamily(variances=[-1.0])


def test_equivalence_report(rng):
    X, y = _points(rng)
    fam = SmoothingFamily(variances=rng.uniform(0.0, 0.5, 20))
    rep = verify_equivalence(X, y, fam, RBFKernel(1.0), SolverParams(C=1.0),
                             probes=rng.uniform(-2, 2, (30, 2)))
    assert rep["gram_max_abs_diff"] <= 1e-12
    assert rep["decision_max_abs_diff"] <= 1e-5
    assert rep["passed"]
    assert rep["objective_smm"] == pytest.approx(rep["objective_flex"], rel=1e-10)


def test_equal_smoothers_equal_wider_plain_svm(rng):
    X, y = _points(rng)
    k, s = RBFKernel(1.5), 0.2
    fam = SmoothingFamily(variances=np.full(20, s))
    scale, wide = composed_rbf(k, s, 2)
    np.testing.assert_allclose(flex_gram(k, fam, X), scale * pairwise_gram(wide, X), rtol=1e-13)
    params = SolverParams(C=1.0)
    flex = fit_flex_svm(X, y, fam, k, params)
    ref = smo_solve(scale * pairwise_gram(wide, X), y, params)
    probes = rng.uniform(-2, 2, (25, 2))
    f_ref = (ref.alpha * y) @ (scale * kernel_block(wide, X, probes)) + ref.bias
    f_flex = flex.decision(probes, SmoothingFamily(variances=np.full(25, s)))
    np.testing.assert_allclose(f_flex, f_ref, atol=1e-6)


def test_composed_rbf_normalized_scale_one():
    scale, wide = composed_rbf(RBFKernel(2.0, normalized=True), 0.5, 3)
    assert scale == 1.0
    assert wide.gamma == pytest.approx(2.0 / 3.0) and wide.normalized
    with pytest.raises(TypeError):
        composed_rbf(LinearKernel(), 0.1, 2)


def test_flex_gram_psd(rng):
    for _ in range(5):
        X = rng.standard_normal((15, 3))
        fam = SmoothingFamily(variances=rng.uniform(0, 1, 15))
        G = flex_gram(RBFKernel(0.8), fam, X)
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] >= -1e-9 * np.max(np.diag(G))


def test_dirac_limit_recovers_svm(rng):
    X, y = _points(rng)
    k = RBFKernel(1.0)
    params = SolverParams(C=1.0)
    flex = fit_flex_svm(X, y, SmoothingFamily.zeros(20), k, params)
    ref = smo_solve(pairwise_gram(k, X), y, params)
    probes = rng.uniform(-2, 2, (25, 2))
    f_ref = (ref.alpha * y) @ kernel_block(k, X, probes) + ref.bias
    np.testing.assert_allclose(flex.decision(probes), f_ref, atol=1e-6)


def test_pairwise_and_batched_decisions_agree(rng):
    X, y = _points(rng, 12)
    fam = SmoothingFamily(variances=rng.uniform(0, 0.5, 12))
    flex = fit_flex_svm(X, y, fam, RBFKernel(1.0))
    probes = rng.standard_normal((7, 2))
    np.testing.assert_allclose(flex.decision(probes), flex.decision(probes, pairwise=True), atol=1e-14)
    K = flex_cross(RBFKernel(1.0), fam, X, SmoothingFamily.zeros(7), probes)
    assert K.shape == (12, 7)


def test_outlier_influence_decreases_with_smoothing():
    variances = [0.0, 0.5, 2.0, 8.0, 32.0, 128.0]
    curves = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(-1.5, 0.6, (12, 2)), rng.normal(1.5, 0.6, (12, 2))])
        y = np.repeat([1.0, -1.0], 12)
        X[0] = [2.0, 2.0]  # positive example deep in the negative cloud
        probes = rng.uniform(-3, 3, (40, 2))
        curves.append(outlier_influence(X, y, RBFKernel(1.0), 0, variances, probes,
                                        SolverParams(C=10.0), seed=seed))
    curves = np.array(curves)
    mean_curve = curves.mean(axis=0)
    assert np.all(np.diff(mean_curve) < 0)
    assert np.all(curves[:, -1] < curves[:, 0])
