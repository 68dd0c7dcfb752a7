"""Generative models ``x = G_theta(u)`` and contaminated data generators.

Each simulator is written once against the :mod:`forward_ad` function
namespace, so the same code yields plain outputs for float parameters and
exact parameter Jacobians when ``theta`` is a :class:`~.forward_ad.Dual`.

Broadcasting convention: ``theta`` has shape (..., p) and ``u`` has shape
(..., latent_dim); their leading axes broadcast. ``simulate(theta, u)`` for
theta (p,) and u (M, latent_dim) returns (M, output_dim).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import forward_ad as fad
from .exceptions import SimulationError
from .forward_ad import Dual
from .measures import Dataset
from .utils import check_rng, open_uniform


class Simulator:
    name = "simulator"
    param_dim: int
    latent_dim: int
    output_dim: int

    def sample_latent(self, rng, size):
        raise NotImplementedError

    def _generate(self, theta, u):
        raise NotImplementedError

    def _check(self, theta, u):
        if np.shape(fad.value_of(theta))[-1:] != (self.param_dim,):
            raise ValueError(
                f"{self.name}: theta must have trailing dimension {self.param_dim}")
        if np.shape(u)[-1:] != (self.latent_dim,):
            raise ValueError(
                f"{self.name}: latent must have trailing dimension {self.latent_dim}")

    def simulate(self, theta, u):
        if not isinstance(theta, Dual):
            theta = np.asarray(theta, dtype=float)
        u = np.asarray(u, dtype=float)
        self._check(theta, u)
        return self._generate(theta, u)

    def simulate_with_jacobian(self, theta, u):
        """Outputs (..., d) and Jacobians d output / d theta of shape (..., d, p)."""
        out = self.simulate(Dual.variables(theta), u)
        return out.value, out.partials

    def sample(self, theta, size, rng=None):
        rng = check_rng(rng)
        return self.simulate(theta, self.sample_latent(rng, size))

    def default_init(self):
        return None

    def prior_sampler(self):
        return None


class GaussianLocation(Simulator):
    """``G_theta(u) = theta + u`` with ``u ~ N(0, I_d)``."""

    name = "gaussian"

    def __init__(self, dim=4):
        self.param_dim = self.latent_dim = self.output_dim = int(dim)

    def sample_latent(self, rng, size):
        return rng.standard_normal((size, self.latent_dim))

    def _generate(self, theta, u):
        return theta + u

    def default_init(self):
        return np.zeros(self.param_dim)


class GAndK(Simulator):
    """g-and-k quantile distribution, theta = (a, b, g, log k).

    The kurtosis exponent is ``exp(theta[3])`` so the fourth coordinate is
    unconstrained.
    """

    name = "gandk"
    param_dim = 4
    latent_dim = 2
    output_dim = 1

    def sample_latent(self, rng, size):
        return open_uniform(rng, (size, 2))

    def _generate(self, theta, u):
        u1, u2 = u[..., 0], u[..., 1]
        if np.any(~((u > 0) & (u < 1))):
            raise ValueError("g-and-k latents must lie in (0, 1)")
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        a, b, g, log_k = theta[..., 0], theta[..., 1], theta[..., 2], theta[..., 3]
        # (1 - e^{-gz}) / (1 + e^{-gz}) == tanh(gz / 2)
        skew = 1.0 + 0.8 * fad.tanh(0.5 * (g * z))
        kurt = fad.exp(fad.exp(log_k) * np.log1p(z * z))
        out = a + b * skew * kurt * z
        return out[..., None]

    def default_init(self):
        return np.full(4, 5.0)

    def prior_sampler(self):
        return uniform_prior(np.zeros(4), np.full(4, 10.0))


# Uniform restart prior: wide boxes around the usual toggle-switch regime.
TOGGLE_PRIOR_LOW = np.array([0.0, 0.0, 0.0, 0.0, 250.0, 0.0, 0.0])
TOGGLE_PRIOR_HIGH = np.array([50.0, 50.0, 5.0, 5.0, 450.0, 0.5, 0.4])


class ToggleSwitch(Simulator):
    """Two-gene toggle switch observed through a truncated-normal transform.

    theta = (alpha1, alpha2, beta1, beta2, mu, sigma, gamma). The latent
    vector holds ``2 * steps + 1`` uniforms: one pair per state update and a
    final one for the observation.
    """

    name = "toggleswitch"
    param_dim = 7
    output_dim = 1

    def __init__(self, steps=300, state_floor=1e-6, prob_clip=1e-12):
        self.steps = int(steps)
        self.latent_dim = 2 * self.steps + 1
        self.state_floor = state_floor
        self.prob_clip = prob_clip

    def sample_latent(self, rng, size):
        return open_uniform(rng, (size, self.latent_dim))

    def _truncnorm_quantile(self, lower, u):
        """Phi^-1(Phi(lower) + u (1 - Phi(lower))), argument clamped."""
        c = fad.normal_cdf(lower)
        q = c + u * (1.0 - c)
        return fad.normal_quantile(fad.clip(q, self.prob_clip, 1.0 - self.prob_clip))

    def _generate(self, theta, u):
        if np.any(~((u > 0) & (u < 1))):
            raise SimulationError("toggle-switch latents must lie in (0, 1)")
        a1, a2, b1, b2 = (theta[..., k] for k in range(4))
        mu, sigma, gamma = theta[..., 4], theta[..., 5], theta[..., 6]
        if np.any(fad.value_of(mu) <= 0) or np.any(fad.value_of(sigma) <= 0):
            raise SimulationError("toggle-switch needs mu > 0 and sigma > 0")

        # The state recursion only involves the first four parameters: run it
        # with 4-wide tangents and map back through their Jacobian afterwards.
        dyn_jac = None
        if isinstance(theta, Dual) and theta.width > 4:
            dyn_jac = theta.partials[..., :4, :]
            a1, a2, b1, b2 = (Dual.variables(theta.value[..., :4])[..., k]
                              for k in range(4))

        floor = self.state_floor
        v = w = 10.0
        for t in range(self.steps):
            # both updates read the states of step t
            v_pow = fad.exp(b2 * fad.log(v))
            w_pow = fad.exp(b1 * fad.log(w))
            v_tilde = v + a1 / (1.0 + w_pow) - (1.0 + 0.03 * v)
            w_tilde = w + a2 / (1.0 + v_pow) - (1.0 + 0.03 * w)
            v = v_tilde + 0.5 * self._truncnorm_quantile(-2.0 * v_tilde, u[..., 2 * t])
            w = w_tilde + 0.5 * self._truncnorm_quantile(-2.0 * w_tilde, u[..., 2 * t + 1])
            if not (np.all(np.isfinite(fad.value_of(v)))
                    and np.all(np.isfinite(fad.value_of(w)))):
                raise SimulationError("non-finite toggle-switch state", step=t + 1)
            v = fad.clip(v, lower=floor)
            w = fad.clip(w, lower=floor)

        if dyn_jac is not None:
            v = Dual(v.value, np.einsum("...k,...kp->...p", v.partials, dyn_jac))

        v_gamma = fad.exp(gamma * fad.log(v))
        scale = mu * sigma / v_gamma
        loc = mu + v
        out = self._truncnorm_quantile(-loc / scale, u[..., 2 * self.steps]) * scale + loc
        if not np.all(np.isfinite(fad.value_of(out))):
            raise SimulationError("non-finite toggle-switch output", step=self.steps)
        return out[..., None]

    def prior_sampler(self):
        return uniform_prior(TOGGLE_PRIOR_LOW, TOGGLE_PRIOR_HIGH)


def uniform_prior(low, high):
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def sampler(rng, size):
        return rng.uniform(low, high, size=(size, low.size))

    return sampler


def gaussian_location_simulate(theta, u):
    theta = np.asarray(theta, dtype=float)
    return GaussianLocation(theta.shape[-1]).simulate(theta, u)


def gandk_simulate(theta, u):
    return GAndK().simulate(theta, u)[..., 0]


def toggle_switch_simulate(theta, u, T_steps=300):
    return ToggleSwitch(T_steps).simulate(theta, u)[..., 0]


# -- contaminated data ------------------------------------------------------
_MODELS = ("none", "gaussian-mixture", "gnk-shift", "cauchy-noise", "cauchy-data")


@dataclass(frozen=True)
class ContaminationSpec:
    """How the observed sample deviates from the model at ``true_theta``.

    gaussian-mixture: each point independently drawn at ``outlier_theta``
        (default all 20s) with probability ``epsilon``.
    gnk-shift: ``2 * floor(epsilon * n / 2)`` points shifted, half by
        ``+shift`` and half by ``-shift``.
    cauchy-noise: ``floor(epsilon * n)`` points get additive
        Cauchy(``location``, ``scale``) noise.
    cauchy-data: all points Cauchy(true_theta, ``scale``); nothing is masked.
    """

    model: str = "none"
    epsilon: float = 0.0
    n: int = 200
    outlier_theta: float = 20.0
    shift: float = 50.0
    location: float = 0.0
    scale: float = 10.0

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"unknown contamination model {self.model!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if self.n < 2:
            raise ValueError("n must be at least 2")


def _count(x):
    return int(math.floor(x + 1e-9))


def _cauchy(rng, size):
    return np.tan(np.pi * (open_uniform(rng, size) - 0.5))


def generate_dataset(spec, true_theta, rng, simulator=None):
    rng = check_rng(rng)
    theta0 = np.atleast_1d(np.asarray(true_theta, dtype=float))
    n = spec.n
    mask = np.zeros(n, dtype=bool)

    if spec.model == "cauchy-data":
        points = theta0 + spec.scale * _cauchy(rng, (n, theta0.size))
        return Dataset(points, mask)

    if simulator is None:
        simulator = {"gaussian-mixture": lambda: GaussianLocation(theta0.size),
                     "gnk-shift": GAndK,
                     "cauchy-noise": ToggleSwitch}.get(spec.model, None)
        if simulator is None:
            raise ValueError("a simulator is required for this contamination model")
        simulator = simulator()
    points = np.array(simulator.sample(theta0, n, rng))

    if spec.model == "gaussian-mixture":
        mask = rng.random(n) < spec.epsilon
        k = int(mask.sum())
        if k:
            outlier = np.full(theta0.size, spec.outlier_theta)
            points[mask] = simulator.sample(outlier, k, rng)
    elif spec.model == "gnk-shift":
        half = _count(spec.epsilon * n / 2.0)
        idx = rng.choice(n, size=2 * half, replace=False)
        points[idx[:half]] += spec.shift
        points[idx[half:]] -= spec.shift
        mask[idx] = True
    elif spec.model == "cauchy-noise":
        k = _count(spec.epsilon * n)
        idx = rng.choice(n, size=k, replace=False)
        points[idx] += spec.location + spec.scale * _cauchy(rng, (k, points.shape[1]))
        mask[idx] = True
    return Dataset(points, mask)
