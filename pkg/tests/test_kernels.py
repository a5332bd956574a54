import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smmkit import DimensionMismatch, LinearKernel, PolynomialKernel, RBFKernel, eval_base, parse_kernel
from smmkit.kernels import kernel_block, pairwise_gram

KERNELS = [LinearKernel(), PolynomialKernel(2, 1.0), PolynomialKernel(3, 0.5),
           RBFKernel(0.7), RBFKernel(2.0, normalized=True)]


def test_examples():
    assert eval_base(LinearKernel(), [1, 1], [1, 1]) == 2
    assert eval_base(RBFKernel(1.0), [0.3, -2], [0.3, -2]) == 1
    assert eval_base(PolynomialKernel(2, 1), [1, 0], [0, 1]) == 1


def test_rbf_convention_half_gamma():
    # exp(-gamma/2 * |x-z|^2) with |x-z|^2 = 4
    assert eval_base(RBFKernel(0.5), [0.0], [2.0]) == pytest.approx(math.exp(-1.0))


def test_normalized_rbf_is_gaussian_density():
    k = RBFKernel(2.0, normalized=True)
    # density of N(0, I/2) in 2-D at x - z = (1, 0)
    dens = (2.0 / (2 * math.pi)) * math.exp(-0.5 * 2.0 * 1.0)
    assert eval_base(k, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(dens, rel=1e-14)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_base(LinearKernel(), [1, 2], [1, 2, 3])


def test_invalid_parameters():
    with pytest.raises(ValueError):
        RBFKernel(0.0)
    with pytest.raises(ValueError):
        PolynomialKernel(9)
    with pytest.raises(ValueError):
        PolynomialKernel(2, -1.0)


def test_pairwise_gram_examples():
    np.testing.assert_array_equal(pairwise_gram(RBFKernel(1.0), [[0.2, 0.3]]), [[1.0]])
    np.testing.assert_array_equal(pairwise_gram(LinearKernel(), np.eye(2)), np.eye(2))


def test_random_rbf_gram_psd(rng):
    G = pairwise_gram(RBFKernel(1.0), rng.standard_normal((5, 3)))
    assert np.linalg.eigvalsh(G)[0] >= -1e-10


@pytest.mark.parametrize("k", KERNELS)
def test_gram_psd_and_symmetric(k, rng):
    for _ in range(10):
        n = int(rng.integers(1, 21))
        X = rng.standard_normal((n, 3))
        G = pairwise_gram(k, X)
        np.testing.assert_array_equal(G, G.T)
        assert np.linalg.eigvalsh(G)[0] >= -1e-9 * np.max(np.diag(G))


vec = arrays(np.float64, 3, elements=st.floats(-5, 5))


@settings(max_examples=60, deadline=None)
@given(vec, vec)
def test_symmetry_exact(x, z):
    for k in KERNELS:
        assert eval_base(k, x, z) == eval_base(k, z, x)


@settings(max_examples=60, deadline=None)
@given(vec, vec, vec)
def test_rbf_shift_invariance(x, z, t):
    k = RBFKernel(0.8)
    assert eval_base(k, x + t, z + t) == pytest.approx(eval_base(k, x, z), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(vec, vec)
def test_unnormalized_rbf_range(x, z):
    v = eval_base(RBFKernel(0.3), x, z)
    assert 0.0 < v <= 1.0


def test_chunked_block_matches_unchunked(rng, monkeypatch):
    import smmkit.kernels as kmod
    X = rng.standard_normal((37, 4))
    Z = rng.standard_normal((11, 4))
    full = kernel_block(RBFKernel(0.4), X, Z)
    monkeypatch.setattr(kmod, "_BLOCK_FLOATS", 50)
    np.testing.assert_array_equal(kernel_block(RBFKernel(0.4), X, Z), full)


@pytest.mark.parametrize("text,expected", [
    ("linear", LinearKernel()),
    ("poly:d=2,c=1", PolynomialKernel(2, 1.0)),
    ("poly:d=3,c=0.5", PolynomialKernel(3, 0.5)),
    ("rbf:gamma=0.25", RBFKernel(0.25)),
    ("nrbf:gamma=0.25", RBFKernel(0.25, normalized=True)),
])
def test_parse_and_spec_roundtrip(text, expected):
    k = parse_kernel(text)
    assert k == expected
    assert k.spec == text
    assert parse_kernel(k.spec) == k


def test_spec_keeps_precision():
    k = RBFKernel(0.123456789012345)
    assert parse_kernel(k.spec) == k


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_kernel("sigmoid")
    with pytest.raises(ValueError):
        parse_kernel("rbf:gamma")
