"""The MMD posterior bootstrap loop and the weighted log-likelihood baseline."""
import os
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .exceptions import DivergedOptimisationError
from .kernels import GaussianKernel, median_heuristic
from .measures import Dataset, DPConfig, sample_dp_measure
from .optimizer import OptimConfig, minimize_batch
from .utils import check_int, mix_seed

SUMMARY_QUANTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class BootstrapConfig:
    """Inputs of the bootstrap loop.

    ``kernel=None`` picks a Gaussian kernel by the median heuristic on the
    data. ``chunk_size`` fixes how draws are batched; it is part of the
    numerical recipe, whereas ``n_jobs`` only decides where chunks run and
    never changes the output.
    """

    B: int = 512
    dp: DPConfig = field(default_factory=DPConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    kernel: Optional[GaussianKernel] = None
    master_seed: int = 0
    n_jobs: int = 1
    chunk_size: int = 32
    strict: bool = False

    def __post_init__(self):
        check_int(self.B, "B")
        check_int(self.chunk_size, "chunk_size")
        check_int(self.n_jobs, "n_jobs", minimum=0)
        check_int(self.master_seed, "master_seed", minimum=0)


@dataclass
class PosteriorSample:
    thetas: np.ndarray
    losses: np.ndarray
    seeds: np.ndarray
    failed_steps: np.ndarray          # -1 where the optimisation succeeded
    initial_losses: np.ndarray = None
    config: dict = field(default_factory=dict)

    @property
    def B(self):
        return self.thetas.shape[0]

    @property
    def failed(self):
        return self.failed_steps >= 0

    @property
    def mean(self):
        return self.thetas.mean(axis=0)


def _snapshot(obj):
    if is_dataclass(obj):
        return {k: _snapshot(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _snapshot(v) for k, v in obj.items()}
    if isinstance(obj, GaussianKernel):
        return obj.to_dict()
    if isinstance(obj, (list, tuple)):
        return [_snapshot(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if callable(obj):
        return getattr(obj, "__name__", repr(obj))
    return obj


def _chunks(B, size):
    return [np.arange(s, min(s + size, B)) for s in range(0, B, size)]


def _resolve_jobs(n_jobs):
    return os.cpu_count() or 1 if n_jobs == 0 else n_jobs


def _run_chunk(indices, seeds, data, simulator, kernel, cfg, theta_init, prior_sampler):
    # one BLAS thread per chunk keeps results independent of the worker layout
    with threadpool_limits(limits=1):
        rngs = [np.random.default_rng(int(seeds[j])) for j in indices]
        measures = [sample_dp_measure(data, cfg.dp, rng) for rng in rngs]
        inits = [theta_init] * len(indices)
        results = minimize_batch(simulator, measures, kernel, cfg.optim, inits, rngs,
                                 prior_sampler=prior_sampler)
    return indices, results


def _as_dataset(data):
    return data if isinstance(data, Dataset) else Dataset(data)


def resolve_kernel(kernel, points):
    if kernel is None or (isinstance(kernel, str) and kernel == "median"):
        return GaussianKernel(median_heuristic(points))
    if isinstance(kernel, GaussianKernel):
        return kernel
    return GaussianKernel(kernel)


def mmd_posterior_bootstrap(data, simulator, cfg, theta_init=None, prior_sampler=None):
    """Draw ``cfg.B`` posterior samples of theta.

    Draw ``j`` seeds its own generator with ``mix_seed(master_seed, j)``,
    samples a DP posterior measure and minimises the MMD to it. Draws whose
    optimisation diverges are kept and flagged in ``failed_steps`` (or raise
    when ``cfg.strict``).
    """
    data = _as_dataset(data)
    if data.n == 0:
        raise ValueError("dataset is empty")
    kernel = resolve_kernel(cfg.kernel, data.points)
    if cfg.optim.restarts is None:
        if theta_init is None:
            theta_init = simulator.default_init()
        if theta_init is None:
            raise ValueError("theta_init is required for this simulator")
        theta_init = np.asarray(theta_init, dtype=float).ravel()
        if theta_init.size != simulator.param_dim:
            raise ValueError("theta_init does not match the simulator's parameter dimension")
    seeds = np.array([mix_seed(cfg.master_seed, j) for j in range(cfg.B)], dtype=np.uint64)
    chunks = _chunks(cfg.B, cfg.chunk_size)
    args = (seeds, data, simulator, kernel, cfg, theta_init, prior_sampler)

    n_jobs = _resolve_jobs(cfg.n_jobs)
    if n_jobs == 1 or len(chunks) == 1:
        outputs = [_run_chunk(c, *args) for c in chunks]
    else:
        outputs = Parallel(n_jobs=n_jobs)(delayed(_run_chunk)(c, *args) for c in chunks)

    p = simulator.param_dim
    thetas = np.empty((cfg.B, p))
    losses = np.empty(cfg.B)
    initial = np.empty(cfg.B)
    failed = np.full(cfg.B, -1)
    for indices, results in outputs:
        for j, res in zip(indices, results):
            thetas[j] = res.theta_hat
            losses[j] = res.final_loss
            initial[j] = res.initial_loss
            if res.failed:
                failed[j] = res.failed_step
    if cfg.strict and np.any(failed >= 0):
        j = int(np.flatnonzero(failed >= 0)[0])
        raise DivergedOptimisationError(int(failed[j]), f"bootstrap draw {j} diverged")

    config = _snapshot(cfg)
    config["kernel"] = kernel.to_dict()
    config["simulator"] = simulator.name
    return PosteriorSample(thetas, losses, seeds, failed, initial, config)


def npl_wll_gaussian(data, cfg):
    """NPL with the Gaussian log-likelihood: each draw is the DP-weighted mean."""
    data = _as_dataset(data)
    seeds = np.array([mix_seed(cfg.master_seed, j) for j in range(cfg.B)], dtype=np.uint64)
    d = data.dim
    thetas = np.empty((cfg.B, d))
    losses = np.empty(cfg.B)
    for j in range(cfg.B):
        measure = sample_dp_measure(data, cfg.dp, np.random.default_rng(int(seeds[j])))
        thetas[j] = measure.weights @ measure.atoms
        resid = measure.atoms - thetas[j]
        # weighted negative log-likelihood of N(theta, I)
        losses[j] = 0.5 * measure.weights @ np.sum(resid * resid, axis=1) \
            + 0.5 * d * np.log(2 * np.pi)
    config = _snapshot(cfg)
    config["method"] = "npl-wll"
    return PosteriorSample(thetas, losses, seeds, np.full(cfg.B, -1), None, config)


def posterior_summary(sample):
    thetas = np.asarray(sample.thetas if isinstance(sample, PosteriorSample) else sample)
    q = np.percentile(thetas, SUMMARY_QUANTILES, axis=0)
    out = {
        "B": int(thetas.shape[0]),
        "mean": thetas.mean(axis=0).tolist(),
        "sd": thetas.std(axis=0).tolist(),
        "quantiles": {f"q{k:02d}": q[i].tolist() for i, k in enumerate(SUMMARY_QUANTILES)},
    }
    if isinstance(sample, PosteriorSample):
        out["n_failed"] = int(sample.failed.sum())
        out["failed_indices"] = np.flatnonzero(sample.failed).tolist()
    return out
