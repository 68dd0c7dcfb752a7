import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from npl_mmd import GAndK, MMDPosteriorBootstrap, NPLWeightedLikelihood


def _fast(**kw):
    return MMDPosteriorBootstrap(n_bootstrap=6, steps=60, n_resample=32, random_state=4, **kw)


def test_params_round_trip_through_clone():
    est = _fast(alpha=2.0, kernel=0.7)
    params = clone(est).get_params()
    assert params["alpha"] == 2.0 and params["kernel"] == 0.7 and params["n_bootstrap"] == 6
    est.set_params(steps=10)
    assert est.steps == 10


def test_fit_gaussian_location():
    X = np.random.default_rng(0).normal([1.0, -1.0], 1.0, (80, 2))
    est = _fast().fit(X)
    assert est.thetas_.shape == (6, 2) and est.n_features_in_ == 2
    assert np.all(np.abs(est.posterior_mean_ - [1.0, -1.0]) < 0.5)
    assert est.summary()["B"] == 6
    assert est.sample(50, random_state=0).shape == (50, 2)
    assert est.score(X) <= 0.05


def test_fit_is_reproducible_with_random_state():
    X = np.random.default_rng(1).normal(size=(40, 1))
    a, b = _fast().fit(X), _fast().fit(X)
    np.testing.assert_array_equal(a.thetas_, b.thetas_)


def test_simulator_output_dim_checked():
    with pytest.raises(ValueError):
        _fast(simulator=GAndK()).fit(np.zeros((10, 2)))


def test_unfitted_summary_raises():
    with pytest.raises(NotFittedError):
        _fast().summary()


def test_wll_estimator():
    X = np.random.default_rng(2).normal(3.0, 1.0, (100, 1))
    est = NPLWeightedLikelihood(n_bootstrap=200, random_state=0).fit(X)
    assert abs(est.posterior_mean_[0] - X.mean()) < 0.05
    assert clone(est).get_params()["n_bootstrap"] == 200
