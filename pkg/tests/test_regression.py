import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linpess.regression import elliptical_norm, elliptical_norms, weighted_ridge
from linpess.variance import VarianceEstimator, eval_variance_estimator, fit_variance_estimator

from oracles import ridge_normal_equations


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 40), d=st.integers(1, 6), seed=st.integers(0, 10**6), lam=st.floats(0.01, 5.0))
def test_closed_form_matches_normal_equations(n, d, seed, lam):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(n, d)) / np.sqrt(d)
    y = rng.normal(size=n) * 3
    s2 = rng.uniform(1, 9, size=n)
    fit = weighted_ridge(phi, y, lam, s2)
    ref = ridge_normal_equations(phi, y, lam, s2)
    assert np.max(np.abs(fit.w - ref)) <= 1e-8 * max(1.0, np.abs(ref).max())


def test_multi_target_shares_covariance():
    rng = np.random.default_rng(0)
    phi, Y = rng.normal(size=(30, 3)), rng.normal(size=(30, 2))
    both = weighted_ridge(phi, Y, 0.5)
    for j in range(2):
        single = weighted_ridge(phi, Y[:, j], 0.5)
        np.testing.assert_allclose(both.w[:, j], single.w, atol=1e-13)
        np.testing.assert_array_equal(both.cov, single.cov)


def test_empty_design_gives_zero_weights():
    fit = weighted_ridge(np.zeros((0, 3)), np.zeros(0), 1.0)
    assert np.all(fit.w == 0)
    assert abs(elliptical_norm(fit, np.array([1.0, 0, 0])) - 1.0) < 1e-15


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lam": 0.0},
        {"lam": -1.0},
        {"sigma2": np.full(4, 0.5)},
        {"y": np.array([1.0, np.nan, 0, 0])},
    ],
)
def test_rejects_invalid_inputs(kwargs):
    args = {"phi": np.eye(4)[:, :2], "y": np.zeros(4), "lam": 1.0, "sigma2": None}
    args.update(kwargs)
    with pytest.raises(ValueError):
        weighted_ridge(**args)


def test_elliptical_norm_matches_inverse():
    rng = np.random.default_rng(2)
    phi = rng.normal(size=(40, 4))
    fit = weighted_ridge(phi, rng.normal(size=40), 0.3, rng.uniform(1, 4, size=40))
    probes = rng.normal(size=(2, 5, 4))
    inv = np.linalg.inv(fit.cov)
    expect = np.sqrt(np.einsum("...i,ij,...j->...", probes, inv, probes))
    np.testing.assert_allclose(elliptical_norms(fit, probes), expect, rtol=1e-12)
    with pytest.raises(ValueError):
        elliptical_norms(fit, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), H=st.integers(1, 6))
def test_variance_estimator_range(seed, H):
    rng = np.random.default_rng(seed)
    est = VarianceEstimator(rng.normal(size=4) * 50, rng.normal(size=4) * 10, H)
    out = eval_variance_estimator(est, rng.normal(size=(100, 4)))
    assert out.min() >= 1.0 and out.max() <= H * H


def test_variance_estimator_clips_before_subtracting():
    est = VarianceEstimator(np.array([100.0]), np.array([-5.0]), 3)
    # second moment clipped to 9, first moment clipped to 0
    assert est(np.array([[1.0]]))[0] == 9.0


def test_fit_variance_recovers_constant_target():
    from linpess.data import collect, split_four_way
    from conftest import small_mdp
    from linpess.model import uniform_policy

    inst, _, _ = small_mdp(0)
    ds = collect(inst, uniform_policy(3, 3, 2), 4000, 0)
    d0p = split_four_way(ds)[3]
    est = fit_variance_estimator(d0p, inst.features, 0, np.full(3, 2.0), 1e-3, inst.H)
    np.testing.assert_allclose(est(inst.features), 1.0)
