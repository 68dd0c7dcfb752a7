import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from conftest import three_se
from oracles import gaussian_mmd2
from npl_mmd.kernels import (GaussianKernel, kernel_eval, median_heuristic, mmd2_between_measures,
                             mmd2_grad_u, mmd2_u, mmd2_weighted)
from npl_mmd.measures import WeightedMeasure
from npl_mmd.simulators import GAndK, GaussianLocation, ToggleSwitch

MIXTURE = [1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000]


def loop_mmd2_u(xs, ys, k):
    n, m = len(xs), len(ys)
    a = sum(k(xs[i], xs[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    b = sum(k(x, y) for x in xs for y in ys) / (n * m)
    c = sum(k(ys[i], ys[j]) for i in range(m) for j in range(m) if i != j) / (m * (m - 1))
    return a - 2 * b + c


# -- kernel evaluation ------------------------------------------------------
def test_kernel_examples():
    k = GaussianKernel(math.sqrt(2))
    assert kernel_eval(k, [0.3], [0.3]) == 1.0
    assert kernel_eval(k, [0.0], [2.0]) == pytest.approx(math.exp(-1), rel=1e-15)
    assert kernel_eval(GaussianKernel.mixture(MIXTURE), [1.0, 2.0], [1.0, 2.0]) == 11.0


def test_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        GaussianKernel(0.0)
    with pytest.raises(ValueError):
        GaussianKernel([1.0, -1.0])
    with pytest.raises(ValueError, match="dimension"):
        kernel_eval(GaussianKernel(1.0), [0.0, 1.0], [0.0])


@given(hnp.arrays(float, (2, 3), elements=st.floats(-100, 100)),
       st.floats(0.01, 100.0), st.booleans())
def test_symmetry_and_bounds(xy, l, mixture):
    k = GaussianKernel([l, 3 * l] if mixture else l)
    a, b = kernel_eval(k, xy[0], xy[1]), kernel_eval(k, xy[1], xy[0])
    assert a == b
    assert 0 <= a <= k.bound


def test_gradient_is_analytic():
    k = GaussianKernel([0.7, 2.0])
    x, y = np.array([0.3, -0.4]), np.array([1.0, 0.2])
    h = 1e-6
    fd = [(kernel_eval(k, x + e, y) - kernel_eval(k, x - e, y)) / (2 * h) for e in np.eye(2) * h]
    np.testing.assert_allclose(k.grad1(x, y), fd, rtol=1e-7)


# -- median heuristic -------------------------------------------------------
def test_median_heuristic_examples():
    assert median_heuristic([0.0, 1.0]) == 1.0
    assert median_heuristic([0.0, 1.0, 3.0]) == 2.0
    with pytest.raises(ValueError, match="degenerate"):
        median_heuristic([5.0, 5.0, 5.0])
    with pytest.raises(ValueError):
        median_heuristic([1.0])


# -- U-statistic ------------------------------------------------------------
def test_mmd2_u_examples():
    assert mmd2_u([0.0, 0.0], [0.0, 0.0], GaussianKernel(1.0)) == 0.0
    val = mmd2_u([0.0, 2.0], [0.0, 2.0], GaussianKernel(math.sqrt(2)))
    assert val == pytest.approx(math.exp(-1) - 1, abs=1e-12)


def test_mmd2_u_matches_loops(rng):
    xs, ys = rng.normal(size=(7, 2)), rng.normal(1, 1, size=(5, 2))
    k = GaussianKernel([0.5, 2.0])
    assert mmd2_u(xs, ys, k) == pytest.approx(loop_mmd2_u(xs, ys, lambda a, b: kernel_eval(k, a, b)),
                                              rel=1e-12)


def test_mmd2_u_needs_two_points():
    with pytest.raises(ValueError):
        mmd2_u([0.0], [0.0, 1.0], GaussianKernel(1.0))
    with pytest.raises(ValueError):
        mmd2_u([[0.0, 1.0], [1.0, 1.0]], [0.0, 1.0], GaussianKernel(1.0))


def test_mmd2_u_unbiased_against_closed_form(rng):
    k = GaussianKernel(1.0)
    reps = [mmd2_u(rng.normal(0, 1, 2000), rng.normal(1, 1, 2000), k) for _ in range(50)]
    target = gaussian_mmd2(1.0, 1.0, 1)
    assert abs(np.mean(reps) - target) <= three_se(reps)


def test_block_size_does_not_change_result(rng):
    xs, ys = rng.normal(size=(1500, 2)), rng.normal(0.3, 1, size=(1100, 2))
    k = GaussianKernel(0.8)
    ref = mmd2_u(xs, ys, k, block_size=4096)
    for block in (1, 7, 256, 1000):
        assert mmd2_u(xs, ys, k, block_size=block) == pytest.approx(ref, rel=1e-10)


def test_infinite_points_interact_with_nothing():
    k = GaussianKernel(1.0)
    xs = np.array([[0.0], [1.0], [np.inf]])
    ys = np.array([[0.5], [2.0]])
    expected = loop_mmd2_u(xs, ys, lambda a, b: 0.0 if np.isinf(a).any() or np.isinf(b).any()
                           else kernel_eval(k, a, b))
    assert mmd2_u(xs, ys, k) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError, match="NaN"):
        mmd2_u([[0.0], [np.nan]], ys, k)


# -- weighted forms ---------------------------------------------------------
def test_weighted_single_atom():
    m = WeightedMeasure([[0.4]], [1.0])
    assert mmd2_weighted(m, [[0.4], [0.4]], GaussianKernel(1.0)) == 0.0


def test_weighted_uniform_is_v_form(rng):
    z, ys = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    k = GaussianKernel(1.3)
    kk = lambda a, b: kernel_eval(k, a, b)
    v_first = sum(kk(a, b) for a in z for b in z) / 25
    cross = sum(kk(a, b) for a in z for b in ys) / 25
    third = sum(kk(ys[i], ys[j]) for i in range(5) for j in range(5) if i != j) / 20
    got = mmd2_weighted(WeightedMeasure.empirical(z), ys, k)
    assert got == pytest.approx(v_first - 2 * cross + third, rel=1e-12)


@settings(max_examples=1000)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32), st.floats(0.1, 10))
def test_between_measures_nonnegative(n1, n2, seed, l):
    r = np.random.default_rng(seed)
    p = WeightedMeasure(r.normal(size=(n1, 2)), r.dirichlet(np.ones(n1)))
    q = WeightedMeasure(r.normal(size=(n2, 2)), r.dirichlet(np.ones(n2)))
    assert mmd2_between_measures(p, q, GaussianKernel(l)) >= -1e-12


# -- gradient U-statistic ---------------------------------------------------
def test_gradient_symmetry_cancels():
    theta, c = 0.5, 0.8
    g = mmd2_grad_u(np.array([theta]), np.array([[-c], [c]]), np.array([[theta - c], [theta + c]]),
                    GaussianLocation(1), GaussianKernel(1.0))
    assert abs(g[0]) < 1e-15


def test_gradient_points_back_towards_data(rng):
    ys = rng.normal(size=(20, 1))
    g = mmd2_grad_u(np.array([ys.max() + 1.5]), rng.normal(size=(30, 1)), ys,
                    GaussianLocation(1), GaussianKernel(1.0))
    assert g[0] > 0


def test_gradient_needs_two_latents():
    with pytest.raises(ValueError):
        mmd2_grad_u(np.zeros(1), np.zeros((1, 1)), np.zeros((3, 1)),
                    GaussianLocation(1), GaussianKernel(1.0))


def _fd_check(sim, theta, us, ys, kernel, h=1e-5):
    g = mmd2_grad_u(theta, us, ys, sim, kernel)
    fd = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h * max(1.0, abs(theta[k]))
        fd[k] = (mmd2_u(sim.simulate(theta + e, us), ys, kernel)
                 - mmd2_u(sim.simulate(theta - e, us), ys, kernel)) / (2 * e[k])
    return np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-12)


def test_gradient_matches_fd_gaussian_location():
    r = np.random.default_rng(11)
    sim = GaussianLocation(3)
    errs = []
    for _ in range(100):
        theta = r.uniform(-2, 2, 3)
        ys = r.normal(size=(int(r.integers(2, 20)), 3))
        us = sim.sample_latent(r, int(r.integers(2, 20)))
        errs.append(_fd_check(sim, theta, us, ys, GaussianKernel(r.uniform(0.5, 3))))
    assert max(errs) <= 1e-4


def test_gradient_matches_fd_gandk():
    r = np.random.default_rng(12)
    sim = GAndK()
    errs = []
    for _ in range(100):
        theta = np.array([r.uniform(1, 5), r.uniform(0.5, 2), r.uniform(-1.5, 1.5),
                          r.uniform(-1.5, 0.0)])
        ys = sim.sample(np.array([3, 1, 1, -math.log(2)]), int(r.integers(2, 20)), r)
        us = sim.sample_latent(r, int(r.integers(2, 20)))
        errs.append(_fd_check(sim, theta, us, ys, GaussianKernel(r.uniform(0.5, 3))))
    assert max(errs) <= 1e-4


def test_gradient_matches_fd_toggle_switch():
    r = np.random.default_rng(13)
    sim = ToggleSwitch()
    theta0 = np.array([22.0, 12.0, 4.0, 4.5, 325.0, 0.25, 0.15])
    errs = []
    for _ in range(100):
        theta = theta0 * r.uniform(0.8, 1.2, 7)
        ys = sim.sample(theta0, 6, r)
        us = sim.sample_latent(r, 4)
        errs.append(_fd_check(sim, theta, us, ys, GaussianKernel([100.0, 400.0])))
    assert max(errs) <= 1e-4
