import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import smmkit.expected as ex
from smmkit import (Dirac, DimensionMismatch, Empirical, ExpectedKernelConfig, Gaussian,
                    LinearKernel, MomentOnly, NoClosedForm, PolynomialKernel, RBFKernel, eval_base,
                    expected_kernel, gram, mean_embedding, mean_embedding_eval, sample)
from smmkit.expected import cross_gram, empirical_embedding, empirical_expected_kernel, self_kernels

from conftest import random_gaussian
from oracles import gauss_hermite_expectation, linear_pair, poly_pair, rbf_pair

LIN = ExpectedKernelConfig(LinearKernel())
LIN_OFF = ExpectedKernelConfig(LinearKernel(), diagonal_correction=False)
RBF1 = ExpectedKernelConfig(RBFKernel(1.0))
POLY2 = ExpectedKernelConfig(PolynomialKernel(2, 1.0))
POLY3 = ExpectedKernelConfig(PolynomialKernel(3, 1.0))
ALL = [LIN_OFF, POLY2, POLY3, RBF1, ExpectedKernelConfig(RBFKernel(0.5, normalized=True))]

# a pair with non-commuting covariances; expectations frozen from
# Gauss-Hermite quadrature (exact for these polynomial degrees)
M1, M2 = np.array([1.0, 0.5]), np.array([-0.3, 0.8])
S1 = np.array([[1.0, 0.6], [0.6, 0.5]])
S2 = np.array([[0.4, -0.2], [-0.2, 0.9]])


def test_correction_defaults():
    assert LIN.diagonal_correction is True
    assert RBF1.diagonal_correction is False
    with pytest.raises(ValueError):
        ExpectedKernelConfig(RBFKernel(1.0), diagonal_correction=True)


def test_linear_off_diagonal():
    P = Gaussian([1, 2], np.eye(2))
    Q = Gaussian([0, 1], 2 * np.eye(2))
    assert expected_kernel(LIN, P, Q) == 2


def test_linear_same_index_correction():
    P = Gaussian([1, 2], np.eye(2))
    assert expected_kernel(LIN, P, P, same_index=True) == 7
    assert expected_kernel(LIN_OFF, P, P, same_index=True) == 5
    assert expected_kernel(LIN, P, P, same_index=False) == 5


def test_rbf_1d_example_exact_and_monte_carlo():
    P = Gaussian([0.0], [[0.5]])
    Q = Gaussian([1.0], [[0.5]])
    val = expected_kernel(RBF1, P, Q)
    # two-dimensional adaptive quadrature gave 0.5506953149031838
    assert val == pytest.approx(math.exp(-0.25) / math.sqrt(2), rel=1e-14)
    assert val == pytest.approx(0.5506953149031838, abs=1e-13)
    rng = np.random.default_rng(0)
    n = 10 ** 6
    x = sample(P, n, rng)[:, 0]
    z = sample(Q, n, rng)[:, 0]
    vals = np.exp(-0.5 * (x - z) ** 2)
    assert abs(vals.mean() - val) <= 3 * vals.std() / math.sqrt(n)


def test_rbf_dirac_limit_equals_base():
    for cfg in (RBF1, POLY2, POLY3, LIN_OFF):
        P = Gaussian([0.3, -1.0], np.zeros((2, 2)))
        Q = Gaussian([1.2, 0.4], np.zeros((2, 2)))
        assert expected_kernel(cfg, P, Q) == pytest.approx(
            eval_base(cfg.embedding, P.mean, Q.mean), abs=1e-12)


def test_poly2_dirac_limit():
    P = Dirac([1.0, 2.0])
    Q = Dirac([0.5, -1.0])
    assert expected_kernel(POLY2, P, Q) == (1.0 * 0.5 - 2.0 + 1) ** 2


@pytest.mark.parametrize("cfg,oracle,value", [
    (LIN_OFF, linear_pair, 0.1000000000000001),
    (POLY2, poly_pair(2), 2.366999999999999),
    (POLY3, poly_pair(3), 5.803099999999998),
])
def test_polynomial_rows_match_quadrature(cfg, oracle, value):
    P, Q = Gaussian(M1, S1), Gaussian(M2, S2)
    assert expected_kernel(cfg, P, Q) == pytest.approx(value, abs=1e-12)
    assert expected_kernel(cfg, Q, P) == pytest.approx(value, abs=1e-12)


def test_cubic_cross_term_order_matters():
    """With non-commuting covariances the cross term is m_i' S_j S_i m_j."""
    a = M1 @ M2 + 1
    var = np.sum(S1 * S2) + M1 @ S2 @ M1 + M2 @ S1 @ M2
    right = a ** 3 + 6 * M1 @ S2 @ S1 @ M2 + 3 * a * var
    swapped = a ** 3 + 6 * M1 @ S1 @ S2 @ M2 + 3 * a * var
    assert right == pytest.approx(5.803099999999998, abs=1e-12)
    assert abs(swapped - right) > 0.1


def test_rbf_row_matches_quadrature():
    cfg = ExpectedKernelConfig(RBFKernel(0.7))
    # 40-node tensor Gauss-Hermite rule (30 nodes agrees to 3e-15)
    assert expected_kernel(cfg, Gaussian(M1, S1), Gaussian(M2, S2)) == pytest.approx(
        0.3627796795913328, abs=1e-12)


def test_quadrature_oracle_random_pairs(rng):
    for _ in range(5):
        P, Q = random_gaussian(rng, 2, 0.5), random_gaussian(rng, 2, 0.5)
        for cfg, f in ((POLY2, poly_pair(2)), (POLY3, poly_pair(3)), (LIN_OFF, linear_pair)):
            ref = gauss_hermite_expectation(f, [P.mean, Q.mean], [P.cov, Q.cov], 4)
            assert expected_kernel(cfg, P, Q) == pytest.approx(ref, rel=1e-11, abs=1e-11)
        # the Gaussian integrand is not polynomial; 24 nodes give about 1e-9
        ref = gauss_hermite_expectation(rbf_pair(1.0), [P.mean, Q.mean], [P.cov, Q.cov], 24)
        assert expected_kernel(RBF1, P, Q) == pytest.approx(ref, abs=1e-8)


def test_normalized_rbf_scales_closed_form(rng):
    P, Q = random_gaussian(rng, 3), random_gaussian(rng, 3)
    k = RBFKernel(0.8, normalized=True)
    plain = expected_kernel(ExpectedKernelConfig(RBFKernel(0.8)), P, Q)
    assert expected_kernel(ExpectedKernelConfig(k), P, Q) == pytest.approx(
        plain * k.norm_factor(3), rel=1e-14)


def test_empirical_examples():
    x, z = np.array([0.3, -0.2]), np.array([1.0, 0.5])
    k = RBFKernel(1.3)
    assert empirical_expected_kernel(k, Empirical([x]), Empirical([z])) == pytest.approx(
        eval_base(k, x, z), abs=0)
    P = Empirical([[0.0], [2.0]])
    assert empirical_expected_kernel(LinearKernel(), P, P) == 1.0


def test_empirical_uniform_equals_double_mean(rng):
    X, Z = rng.standard_normal((7, 2)), rng.standard_normal((5, 2))
    k = PolynomialKernel(3, 0.5)
    direct = np.mean([[eval_base(k, a, b) for b in Z] for a in X])
    assert empirical_expected_kernel(k, Empirical(X), Empirical(Z)) == pytest.approx(direct, rel=1e-13)


def test_empirical_converges_to_closed_form():
    rng = np.random.default_rng(5)
    P = Gaussian([0.0, 0.5], [[0.5, 0.1], [0.1, 0.3]])
    Q = Gaussian([0.4, -0.2], [[0.2, 0.0], [0.0, 0.6]])
    n = 10 ** 4
    Ph, Qh = Empirical(sample(P, n, rng)), Empirical(sample(Q, n, rng))
    # unnormalized RBF has range [0, 1]
    assert abs(empirical_expected_kernel(RBFKernel(1.0), Ph, Qh) - expected_kernel(RBF1, P, Q)) \
        <= 5 / math.sqrt(n)


def test_mixed_empirical_gaussian_is_average_of_embeddings(rng):
    P = random_gaussian(rng, 2)
    pts = rng.standard_normal((6, 2))
    w = rng.uniform(0.1, 1, 6)
    E = Empirical(pts, w)
    expect = float(E.weights @ mean_embedding(RBF1, P, pts))
    assert expected_kernel(RBF1, P, E) == pytest.approx(expect, rel=1e-14)
    assert expected_kernel(RBF1, E, P) == pytest.approx(expect, rel=1e-14)


@pytest.mark.parametrize("cfg", ALL)
def test_dirac_equals_singleton_empirical_bitwise(cfg, rng):
    x = rng.standard_normal(3)
    others = [random_gaussian(rng, 3), Dirac(rng.standard_normal(3)),
              Empirical(rng.standard_normal((4, 3)), rng.uniform(0.1, 1, 4))]
    for Q in others:
        assert expected_kernel(cfg, Dirac(x), Q) == expected_kernel(cfg, Empirical([x]), Q)
        assert expected_kernel(cfg, Q, Dirac(x)) == expected_kernel(cfg, Q, Empirical([x]))


@pytest.mark.parametrize("cfg", ALL)
def test_zero_covariance_gaussian_equals_dirac(cfg, rng):
    m = rng.standard_normal(2)
    for Q in (random_gaussian(rng, 2), Dirac(rng.standard_normal(2))):
        assert expected_kernel(cfg, Gaussian(m, np.zeros((2, 2))), Q) == pytest.approx(
            expected_kernel(cfg, Dirac(m), Q), abs=1e-12)


@pytest.mark.parametrize("cfg", ALL)
def test_symmetry(cfg, rng):
    for _ in range(5):
        dists = [random_gaussian(rng, 2), Dirac(rng.standard_normal(2)),
                 Empirical(rng.standard_normal((3, 2)))]
        for P in dists:
            for Q in dists:
                assert expected_kernel(cfg, P, Q) == pytest.approx(expected_kernel(cfg, Q, P),
                                                                    abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 1000))
def test_mixture_linearity(alpha, seed):
    rng = np.random.default_rng(seed)
    x, z = rng.standard_normal(2), rng.standard_normal(2)
    Q = random_gaussian(rng, 2)
    if alpha in (0.0, 1.0):
        return
    mix = Empirical([x, z], [alpha, 1 - alpha])
    lhs = expected_kernel(RBF1, mix, Q)
    rhs = alpha * expected_kernel(RBF1, Dirac(x), Q) + (1 - alpha) * expected_kernel(RBF1, Dirac(z), Q)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_no_closed_form_and_fallback():
    P = MomentOnly([0.0], [[1.0]])
    with pytest.raises(NoClosedForm):
        expected_kernel(RBF1, P, P)
    with pytest.raises(NoClosedForm):
        expected_kernel(POLY3, P, Dirac([1.0]))
    # degree <= 2 only depends on moments
    assert expected_kernel(POLY2, P, Dirac([1.0])) == pytest.approx((0 + 1) ** 2 + 1.0)
    G = Gaussian([0.0], [[1.0]])
    cfg = ExpectedKernelConfig(PolynomialKernel(4, 1.0), empirical_fallback=True, fallback_samples=4000)
    v1 = expected_kernel(cfg, G, Dirac([0.5]))
    v2 = expected_kernel(cfg, G, Dirac([0.5]))
    assert v1 == v2
    # E(0.5 z + 1)^4 with z ~ N(0,1): 1 + 6*0.25 + 3*0.0625 = 2.6875
    assert v1 == pytest.approx(2.6875, rel=0.1)
    g = gram(cfg, [G, Dirac([0.5])])
    assert g.source[0, 1].startswith("fallback-")


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        expected_kernel(RBF1, Dirac([0.0]), Dirac([0.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        gram(RBF1, [Dirac([0.0]), Dirac([0.0, 1.0])])


def test_gram_examples(rng):
    x = rng.standard_normal(2)
    np.testing.assert_array_equal(gram(RBF1, [Dirac(x)]).values, [[1.0]])
    P = random_gaussian(rng, 2)
    G = gram(RBF1, [P, P]).values
    assert np.ptp(G) == 0.0


def test_gram_entries_and_provenance(rng):
    dists = [random_gaussian(rng, 2), Dirac(rng.standard_normal(2)), Empirical(rng.standard_normal((3, 2)))]
    G = gram(LIN, dists)
    for i, P in enumerate(dists):
        for j, Q in enumerate(dists):
            assert G.values[i, j] == pytest.approx(expected_kernel(LIN, P, Q, same_index=i == j), abs=1e-12)
    assert G.source[0, 0] == "closed-form"
    assert G.source[1, 2] == "empirical[n=1,m=3]"
    assert G.source[0, 2].startswith("mixed")
    info = G.provenance()
    assert info["embedding"] == "linear" and info["diagonal_correction"] is True
    assert sum(info["sources"].values()) == 9


def test_gram_symmetric_psd_random(rng):
    for cfg in ALL:
        dists = [random_gaussian(rng, 3, 0.5) for _ in range(10)]
        G = gram(cfg, dists).values
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] >= -1e-9 * np.max(np.diag(G))


def test_cross_gram_and_self_kernels(rng):
    A = [random_gaussian(rng, 2) for _ in range(3)]
    B = [Dirac(rng.standard_normal(2)) for _ in range(4)]
    K = cross_gram(LIN, A, B)
    assert K.shape == (3, 4)
    np.testing.assert_allclose(self_kernels(LIN, A), [expected_kernel(LIN_OFF, P, P) for P in A])


def test_mean_embedding_examples():
    z, x = np.array([0.2, 0.7]), np.array([1.0, -0.4])
    assert mean_embedding_eval(RBF1, Dirac(z), x) == eval_base(RBFKernel(1.0), z, x)
    P = Gaussian([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
    assert mean_embedding_eval(LIN, P, x) == pytest.approx(P.mean @ x)
    # integral of N(z; 0, 1) exp(-z^2 / 2) dz by adaptive quadrature: 0.7071067811865475
    val = mean_embedding_eval(RBF1, Gaussian([0.0], [[1.0]]), [0.0])
    assert val == pytest.approx(0.7071067811865475, abs=1e-14)


def test_mean_embedding_vectorized_matches_scalar(rng):
    for cfg in ALL:
        P = random_gaussian(rng, 2)
        X = rng.standard_normal((5, 2))
        np.testing.assert_allclose(mean_embedding(cfg, P, X),
                                   [mean_embedding_eval(cfg, P, x) for x in X], rtol=1e-13)


@pytest.mark.parametrize("k", [LinearKernel(), PolynomialKernel(2, 1.0), PolynomialKernel(3, 0.7),
                               RBFKernel(0.9), RBFKernel(3.0, normalized=True)])
def test_fast_paths_match_direct_sum(k, rng, monkeypatch):
    d = 1
    pts = rng.standard_normal((300, d)) * 1.5
    w = rng.uniform(0, 1, 300)
    w /= w.sum()
    X = rng.standard_normal((200, d))
    direct = w @ np.array([[eval_base(k, p, x) for x in X] for p in pts])
    monkeypatch.setattr(ex, "_DIRECT_LIMIT", 10)
    fast = empirical_embedding(k, pts, w, X)
    np.testing.assert_allclose(fast, direct, rtol=1e-12, atol=1e-12)


def test_poly_fast_path_multivariate(rng, monkeypatch):
    k = PolynomialKernel(3, 1.0)
    pts, X = rng.standard_normal((50, 3)), rng.standard_normal((40, 3))
    w = np.full(50, 1 / 50)
    direct = w @ np.array([[eval_base(k, p, x) for x in X] for p in pts])
    monkeypatch.setattr(ex, "_DIRECT_LIMIT", 10)
    np.testing.assert_allclose(empirical_embedding(k, pts, w, X), direct, rtol=1e-12)
