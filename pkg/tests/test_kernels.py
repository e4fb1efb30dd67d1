import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linpess import _kernels_py as py
from linpess import kernels

try:
    from linpess import _kernels as cy
except ImportError:  # extension not built
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def _path_inputs(seed, S=3, A=2, B=2, H=4):
    rng = np.random.default_rng(seed)
    init = _cdf(rng.dirichlet(np.ones(S)))
    act = _cdf(rng.dirichlet(np.ones(A), size=(H, S)))
    opp = _cdf(rng.dirichlet(np.ones(B), size=(H, S)))
    trans = _cdf(rng.dirichlet(np.ones(S), size=(H, S, A * B)))
    return init, act, opp, trans


def test_uniforms_in_unit_interval_and_counter_based():
    ids = np.arange(1000, dtype=np.int64)
    u = py.uniforms(5, ids, 2, 1)
    assert u.min() >= 0 and u.max() < 1
    np.testing.assert_array_equal(u[10:20], py.uniforms(5, ids[10:20], 2, 1))
    assert not np.array_equal(u, py.uniforms(6, ids, 2, 1))
    assert not np.array_equal(u, py.uniforms(5, ids, 2, 2))


def test_uniforms_look_uniform():
    u = py.uniforms(1, np.arange(200_000, dtype=np.int64), 0, 3)
    hist = np.histogram(u, bins=10, range=(0, 1))[0]
    expected = u.size / 10
    chi2 = ((hist - expected) ** 2 / expected).sum()
    assert chi2 < 30  # 9 dof, p ~ 4e-4


@needs_cy
def test_backends_bit_identical_uniforms():
    ids = np.arange(5000, dtype=np.int64)
    for h, slot in [(0, 0), (3, 5), (7, 2)]:
        assert np.array_equal(py.uniforms(11, ids, h, slot), cy.uniforms(11, ids, h, slot))


@needs_cy
@pytest.mark.parametrize("with_opponent", [False, True])
def test_backends_bit_identical_paths(with_opponent):
    init, act, opp, trans = _path_inputs(3)
    if not with_opponent:
        trans = np.ascontiguousarray(trans[:, :, ::2])
        opp = None
    ids = np.arange(3000, dtype=np.int64)
    a = py.sample_paths(9, ids, init, act, opp, trans)
    b = cy.sample_paths(9, ids, init, act, opp, trans)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@needs_cy
@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 60), d=st.integers(1, 6), m=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_backends_bit_identical_gram(n, d, m, seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(n, d))
    y = rng.normal(size=(n, m))
    w = rng.uniform(0.1, 1.0, size=n)
    G1, r1 = py.gram_rhs(phi, y, w)
    G2, r2 = cy.gram_rhs(phi, y, w)
    assert np.array_equal(G1, G2) and np.array_equal(r1, r2)


@needs_cy
@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 6), n=st.integers(1, 6), seed=st.integers(0, 10**6))
def test_backends_bit_identical_simplex(m, n, seed):
    P = np.random.default_rng(seed).uniform(1.0, 3.0, size=(m, n))
    z1, d1, k1 = py.simplex_game(P)
    z2, d2, k2 = cy.simplex_game(P)
    assert k1 == k2 and np.array_equal(z1, z2) and np.array_equal(d1, d2)


def test_gram_matches_numpy():
    rng = np.random.default_rng(0)
    phi, y, w = rng.normal(size=(50, 4)), rng.normal(size=(50, 2)), rng.uniform(0.2, 1, size=50)
    G, rhs = kernels.gram_rhs(phi, y, w)
    np.testing.assert_allclose(G, phi.T @ (w[:, None] * phi), atol=1e-12)
    np.testing.assert_allclose(rhs, phi.T @ (w[:, None] * y), atol=1e-12)


def test_sample_paths_follow_transition_law():
    init, act, _, trans = _path_inputs(4, B=1)
    ids = np.arange(100_000, dtype=np.int64)
    x, a, b, xn = kernels.sample_paths(2, ids, init, act, None, trans)
    assert np.all(b == 0)
    assert np.array_equal(x[:, 1:], xn[:, :-1])
    p_init = np.diff(np.concatenate([[0.0], init]))
    freq = np.bincount(x[:, 0], minlength=3) / ids.size
    se = np.sqrt(p_init * (1 - p_init) / ids.size)
    assert np.all(np.abs(freq - p_init) <= 4 * se + 1e-12)


def test_backend_flag_is_reported():
    assert kernels.BACKEND in ("cython", "python")
