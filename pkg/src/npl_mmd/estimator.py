"""scikit-learn style front end for the posterior bootstrap."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .engine import (BootstrapConfig, mmd_posterior_bootstrap, npl_wll_gaussian,
                     posterior_summary, resolve_kernel)
from .kernels import mmd2_u
from .measures import Dataset, DPConfig
from .optimizer import OptimConfig
from .simulators import GaussianLocation
from .utils import check_points, check_rng


def _master_seed(random_state):
    if random_state is None:
        return int(np.random.default_rng().integers(2 ** 63))
    return int(random_state)


class MMDPosteriorBootstrap(BaseEstimator):
    """Posterior over simulator parameters from DP-weighted MMD minimisation.

    Parameters
    ----------
    simulator : Simulator
        Generative model ``G_theta(u)``.
    n_bootstrap : int
        Number of posterior draws B.
    alpha, truncation, centering :
        DP prior concentration, number of pseudo-atoms T and centering
        measure. ``alpha=0`` is the Bayesian bootstrap.
    kernel : "median", float, sequence of floats or GaussianKernel
        Lengthscale(s) of the Gaussian kernel.
    learning_rate, steps, optimizer, n_resample, n_latent, objective,
    restarts, lower, upper :
        Passed on to :class:`~npl_mmd.optimizer.OptimConfig`.
    theta_init : array-like, optional
        Start of every optimisation (simulator default when omitted).
    chunk_size, n_jobs, strict, random_state :
        Batching, parallel width, fail-fast switch and master seed.

    Attributes
    ----------
    posterior_ : PosteriorSample
    thetas_ : ndarray of shape (n_bootstrap, param_dim)
    posterior_mean_ : ndarray of shape (param_dim,)
    kernel_ : GaussianKernel
    """

    def __init__(self, simulator=None, n_bootstrap=512, alpha=0.0, truncation=100,
                 centering="empirical-normal", kernel="median", optimizer="adam",
                 learning_rate=0.1, steps=1000, n_resample=None, n_latent=None,
                 objective="resample", restarts=None, lower=None, upper=None,
                 theta_init=None, chunk_size=32, n_jobs=1, strict=False,
                 random_state=None):
        self.simulator = simulator
        self.n_bootstrap = n_bootstrap
        self.alpha = alpha
        self.truncation = truncation
        self.centering = centering
        self.kernel = kernel
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.steps = steps
        self.n_resample = n_resample
        self.n_latent = n_latent
        self.objective = objective
        self.restarts = restarts
        self.lower = lower
        self.upper = upper
        self.theta_init = theta_init
        self.chunk_size = chunk_size
        self.n_jobs = n_jobs
        self.strict = strict
        self.random_state = random_state

    def _simulator(self, n_features):
        return self.simulator if self.simulator is not None else GaussianLocation(n_features)

    def _config(self, X):
        return BootstrapConfig(
            B=self.n_bootstrap,
            dp=DPConfig(alpha=float(self.alpha), T=self.truncation, centering=self.centering),
            optim=OptimConfig(
                method=self.optimizer, learning_rate=self.learning_rate, steps=self.steps,
                n_resample=self.n_resample, n_latent=self.n_latent,
                objective=self.objective,
                restarts=None if self.restarts is None else tuple(self.restarts),
                lower=None if self.lower is None else tuple(np.atleast_1d(self.lower)),
                upper=None if self.upper is None else tuple(np.atleast_1d(self.upper))),
            kernel=resolve_kernel(self.kernel, X),
            master_seed=_master_seed(self.random_state), n_jobs=self.n_jobs,
            chunk_size=self.chunk_size, strict=self.strict)

    def fit(self, X, y=None, contamination_mask=None):
        X = check_points(X, "X")
        sim = self._simulator(X.shape[1])
        if X.shape[1] != sim.output_dim:
            raise ValueError(
                f"X has {X.shape[1]} features but the simulator outputs {sim.output_dim}")
        cfg = self._config(X)
        self.kernel_ = cfg.kernel
        self.simulator_ = sim
        self.posterior_ = mmd_posterior_bootstrap(
            Dataset(X, contamination_mask), sim, cfg, theta_init=self.theta_init)
        self.thetas_ = self.posterior_.thetas
        self.losses_ = self.posterior_.losses
        self.failed_ = self.posterior_.failed
        self.posterior_mean_ = self.thetas_.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def summary(self):
        check_is_fitted(self, "posterior_")
        return posterior_summary(self.posterior_)

    def sample(self, n_samples=1000, random_state=None):
        """Simulate from the model at the posterior mean."""
        check_is_fitted(self, "posterior_mean_")
        return self.simulator_.sample(self.posterior_mean_, n_samples, check_rng(random_state))

    def score(self, X, y=None, n_samples=2000, random_state=0):
        """Negative MMD^2 between ``X`` and simulations at the posterior mean."""
        X = check_points(X, "X", min_count=2, dim=self.n_features_in_)
        return -mmd2_u(X, self.sample(n_samples, random_state), self.kernel_)


class NPLWeightedLikelihood(BaseEstimator):
    """NPL posterior bootstrap for a Gaussian location model (closed form)."""

    def __init__(self, n_bootstrap=512, alpha=0.0, truncation=100,
                 centering="empirical-normal", random_state=None):
        self.n_bootstrap = n_bootstrap
        self.alpha = alpha
        self.truncation = truncation
        self.centering = centering
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_points(X, "X")
        cfg = BootstrapConfig(B=self.n_bootstrap,
                              dp=DPConfig(float(self.alpha), self.truncation, self.centering),
                              master_seed=_master_seed(self.random_state))
        self.posterior_ = npl_wll_gaussian(Dataset(X), cfg)
        self.thetas_ = self.posterior_.thetas
        self.posterior_mean_ = self.thetas_.mean(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def summary(self):
        check_is_fitted(self, "posterior_")
        return posterior_summary(self.posterior_)
