"""Weighted empirical measures and Dirichlet-process posterior sampling."""
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .utils import check_int, check_points, check_positive

Centering = Union[str, Callable[[np.random.Generator, int], np.ndarray]]


def _freeze(arr):
    arr = np.array(arr, dtype=arr.dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class WeightedMeasure:
    """Discrete probability measure: ``sum_i weights[i] * delta(atoms[i])``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = check_points(self.atoms, "atoms")
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights")
        if np.any(~(weights >= 0)):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", _freeze(atoms))
        object.__setattr__(self, "weights", _freeze(weights))

    @classmethod
    def empirical(cls, points):
        points = check_points(points)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @property
    def size(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]

    def mean(self):
        return self.weights @ self.atoms


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    contamination_mask: np.ndarray = None

    def __post_init__(self):
        points = check_points(self.points)
        mask = self.contamination_mask
        if mask is None:
            mask = np.zeros(points.shape[0], dtype=bool)
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape[0] != points.shape[0]:
            raise ValueError("contamination mask length differs from point count")
        object.__setattr__(self, "points", _freeze(points))
        object.__setattr__(self, "contamination_mask", _freeze(mask))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class DPConfig:
    """Prior ``DP(alpha, F)`` truncated to ``T`` pseudo-atoms.

    ``centering="empirical-normal"`` means F = Normal(data mean, diag(data var)).
    Otherwise pass ``centering(rng, T) -> (T, d) array``.
    """

    alpha: float = 0.0
    T: int = 100
    centering: Centering = field(default="empirical-normal")

    def __post_init__(self):
        check_positive(self.alpha, "alpha", strict=False)
        check_int(self.T, "T")
        if isinstance(self.centering, str) and self.centering != "empirical-normal":
            raise ValueError(f"unknown centering {self.centering!r}")


def sample_dirichlet(concentrations, rng):
    """One draw from ``Dir(concentrations)``.

    Gamma variates are generated in log space; shapes below one use
    Gamma(a) = Gamma(a + 1) * U**(1/a) so tiny shapes such as 1e-5 neither
    underflow the normaliser nor stall a rejection sampler.
    """
    a = np.asarray(concentrations, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("need at least one concentration")
    if np.any(~(a > 0)) or np.any(~np.isfinite(a)):
        raise ValueError("Dirichlet concentrations must be positive and finite")
    small = a < 1.0
    log_g = np.log(rng.gamma(np.where(small, a + 1.0, a)))
    if np.any(small):
        u = 1.0 - rng.random(int(small.sum()))  # (0, 1]
        log_g[small] += np.log(u) / a[small]
    log_g -= log_g.max()
    w = np.exp(log_g)
    return w / w.sum()


def _empirical_normal(points):
    mean = points.mean(axis=0)
    std = points.std(axis=0)

    def sampler(rng, T):
        return mean + std * rng.standard_normal((T, points.shape[1]))

    return sampler


def sample_dp_measure(data, cfg, rng):
    """Approximate posterior DP draw (data atoms first, then pseudo-atoms).

    With ``alpha == 0`` this is the Bayesian bootstrap: Dir(1, ..., 1) on the
    observed points and no pseudo-atoms.
    """
    points = data.points if isinstance(data, Dataset) else check_points(data)
    if points.shape[0] == 0:
        raise ValueError("dataset is empty")
    n = points.shape[0]
    if cfg.alpha == 0:
        return WeightedMeasure(points, sample_dirichlet(np.ones(n), rng))
    centering = cfg.centering
    if isinstance(centering, str):
        centering = _empirical_normal(points)
    pseudo = np.asarray(centering(rng, cfg.T), dtype=float).reshape(cfg.T, -1)
    if pseudo.shape[1] != points.shape[1]:
        raise ValueError("centering sampler returned the wrong dimension")
    conc = np.concatenate([np.ones(n), np.full(cfg.T, cfg.alpha / cfg.T)])
    return WeightedMeasure(np.vstack([points, pseudo]), sample_dirichlet(conc, rng))


def resample_indices(weights, N, rng):
    cdf = np.cumsum(weights)
    idx = np.searchsorted(cdf, rng.random(N) * cdf[-1], side="right")
    return np.minimum(idx, len(cdf) - 1)


def resample(measure, N, rng):
    """``N`` i.i.d. draws from a weighted measure (multinomial on the atoms)."""
    check_int(N, "N", minimum=2)
    return measure.atoms[resample_indices(measure.weights, N, rng)]


def sample_gem_weights(alpha_prime, K, rng):
    """First ``K`` stick-breaking weights of GEM(alpha_prime)."""
    check_positive(alpha_prime, "alpha_prime")
    check_int(K, "K")
    beta = rng.beta(1.0, alpha_prime, size=K)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - beta)[:-1]])
    return beta * remaining
