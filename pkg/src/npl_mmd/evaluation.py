"""Experiment presets, error metrics, the generalisation bound and sweeps."""
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .engine import (BootstrapConfig, mmd_posterior_bootstrap, npl_wll_gaussian,
                     resolve_kernel)
from .kernels import GaussianKernel, mmd2_u
from .measures import DPConfig
from .optimizer import OptimConfig
from .simulators import ContaminationSpec, GAndK, GaussianLocation, ToggleSwitch, generate_dataset
from .utils import check_int, check_rng, mix_seed

TOGGLE_LENGTHSCALES = (1, 10, 20, 40, 80, 100, 130, 200, 400, 800, 1000)
# data and bootstrap streams derive from the same seed through distinct salts
_DATA_SALT = 0xD47A


@dataclass(frozen=True)
class ModelPreset:
    name: str
    make_simulator: object
    theta_true: tuple
    contamination: str
    n: int
    kernel: object
    learning_rate: float
    steps: int
    restarts: Optional[tuple] = None
    lower: Optional[tuple] = None
    contamination_kwargs: dict = field(default_factory=dict)


PRESETS = {
    "gaussian": ModelPreset(
        "gaussian", lambda: GaussianLocation(4), (1.0, 1.0, 1.0, 1.0),
        "gaussian-mixture", 200, "median", 0.1, 1000),
    "gandk": ModelPreset(
        "gandk", GAndK, (3.0, 1.0, 1.0, -math.log(2.0)),
        "gnk-shift", 2 ** 11, 0.15, 0.1, 1000),
    "toggleswitch": ModelPreset(
        "toggleswitch", ToggleSwitch, (22.0, 12.0, 4.0, 4.5, 325.0, 0.25, 0.15),
        "cauchy-noise", 2000, TOGGLE_LENGTHSCALES, 0.04, 2000, restarts=(500, 3),
        # mu and sigma must stay positive for the simulator to be defined
        lower=(1e-3,) * 7),
    "cauchy-data": ModelPreset(
        "cauchy-data", lambda: GaussianLocation(1), (1.0,),
        "cauchy-data", 200, "median", 0.1, 1000,
        contamination_kwargs={"scale": 1.0}),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment; ``None`` fields fall back to the model preset."""

    model: str = "gaussian"
    n: Optional[int] = None
    epsilon: float = 0.0
    alpha: float = 0.0
    T: Optional[int] = None          # defaults to n
    B: int = 512
    steps: Optional[int] = None
    learning_rate: Optional[float] = None
    kernel: object = None            # "median", a lengthscale, "mixture" or a list
    seed: int = 0
    threads: int = 1
    objective: str = "resample"
    method: str = "mmd"              # or "wll" (Gaussian location only)
    n_resample: Optional[int] = None
    n_latent: Optional[int] = None
    restarts: Optional[tuple] = None
    chunk_size: int = 32

    def __post_init__(self):
        if self.model not in PRESETS:
            raise ValueError(f"unknown model {self.model!r}; choose from {sorted(PRESETS)}")
        if self.method not in ("mmd", "wll"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "wll" and self.model not in ("gaussian", "cauchy-data"):
            raise ValueError("method 'wll' needs a Gaussian location model")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        if self.n is not None:
            check_int(self.n, "n", minimum=2)
        check_int(self.B, "B")

    @property
    def preset(self):
        return PRESETS[self.model]

    def resolved(self):
        """Copy with every preset-dependent field filled in."""
        p = self.preset
        n = p.n if self.n is None else self.n
        kernel = p.kernel if self.kernel is None else self.kernel
        if isinstance(kernel, str) and kernel == "mixture":
            kernel = TOGGLE_LENGTHSCALES
        restarts = p.restarts if self.restarts is None else self.restarts
        if restarts is not None and tuple(restarts)[0] == 0:
            restarts = None
        return replace(
            self, n=n, T=n if self.T is None else self.T,
            steps=p.steps if self.steps is None else self.steps,
            learning_rate=p.learning_rate if self.learning_rate is None else self.learning_rate,
            kernel=kernel, restarts=restarts)


@dataclass
class ExperimentResult:
    run_id: str
    model: str
    n: int
    epsilon: float
    alpha: float
    T: int
    B: int
    lengthscales: list
    nmse: float
    model_mmd: Optional[float]
    wall_time_seconds: float
    theta_hat: list = field(default_factory=list)
    n_failed: int = 0

    def to_dict(self):
        return asdict(self)


def nmse(theta_hat, theta_true):
    """Squared error of the estimate divided by the squared norm of the truth."""
    theta_hat = np.asarray(theta_hat, dtype=float).ravel()
    theta_true = np.asarray(theta_true, dtype=float).ravel()
    if theta_hat.shape != theta_true.shape:
        raise ValueError(f"dimension mismatch: {theta_hat.shape} vs {theta_true.shape}")
    denom = float(theta_true @ theta_true)
    if denom == 0.0:
        raise ValueError("nmse is undefined for a zero true parameter")
    diff = theta_hat - theta_true
    return float(diff @ diff) / denom


def model_mmd2(theta_hat, theta_true, simulator, kernel, sample_size=15000, rng=None):
    """Raw (unclipped) U-statistic MMD^2 between P_theta_hat and P_theta_true."""
    check_int(sample_size, "sample_size", minimum=2)
    rng = check_rng(rng)
    xs = simulator.sample(np.asarray(theta_hat, dtype=float), sample_size, rng)
    ys = simulator.sample(np.asarray(theta_true, dtype=float), sample_size, rng)
    return mmd2_u(xs, ys, kernel)


def estimate_model_mmd(theta_hat, theta_true, simulator, kernel, sample_size=15000, rng=None):
    return math.sqrt(max(0.0, model_mmd2(theta_hat, theta_true, simulator, kernel,
                                         sample_size, rng)))


def theorem1_bound(n, alpha):
    """Excess of the posterior-expected MMD bound over inf_theta MMD(P*, P_theta)."""
    check_int(n, "n")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")
    a = float(alpha)
    s = a + n
    return (2.0 / math.sqrt(n)
            + 2.0 * math.sqrt((2.0 * (n - 1) + a * (a + 1)) / (s * (s + 1)))
            + 2.0 * math.sqrt(a * (1 + a) / (s * (s + 1))))


def bootstrap_config(cfg, kernel):
    return BootstrapConfig(
        B=cfg.B,
        dp=DPConfig(alpha=float(cfg.alpha), T=int(cfg.T)),
        optim=OptimConfig(
            learning_rate=float(cfg.learning_rate), steps=int(cfg.steps),
            n_resample=cfg.n_resample, n_latent=cfg.n_latent, objective=cfg.objective,
            restarts=None if cfg.restarts is None else tuple(cfg.restarts),
            lower=cfg.preset.lower),
        kernel=kernel, master_seed=int(cfg.seed), n_jobs=int(cfg.threads),
        chunk_size=int(cfg.chunk_size))


def make_dataset(cfg):
    cfg = cfg.resolved()
    p = cfg.preset
    spec = ContaminationSpec(p.contamination, cfg.epsilon, cfg.n, **p.contamination_kwargs)
    rng = np.random.default_rng(mix_seed(int(cfg.seed), _DATA_SALT))
    return generate_dataset(spec, p.theta_true, rng, simulator=p.make_simulator())


def run_experiment(cfg, data=None, model_mmd_samples=None):
    """Generate data (unless given), run the posterior bootstrap and score it.

    Returns ``(posterior_sample, ExperimentResult)``. ``model_mmd_samples``
    turns on the MMD between the fitted and the true model.
    """
    cfg = cfg.resolved()
    start = time.perf_counter()
    if data is None:
        data = make_dataset(cfg)
    sim = cfg.preset.make_simulator()
    kernel = resolve_kernel(cfg.kernel, data.points)
    bcfg = bootstrap_config(cfg, kernel)
    if cfg.method == "wll":
        sample = npl_wll_gaussian(data, bcfg)
    else:
        sample = mmd_posterior_bootstrap(data, sim, bcfg)
    theta_hat = sample.thetas.mean(axis=0)
    theta_true = np.asarray(cfg.preset.theta_true)
    mmd = None
    if model_mmd_samples:
        rng = np.random.default_rng(mix_seed(int(cfg.seed), _DATA_SALT + 1))
        mmd = estimate_model_mmd(theta_hat, theta_true, sim, kernel, model_mmd_samples, rng)
    result = ExperimentResult(
        run_id=f"{cfg.model}-n{cfg.n}-eps{cfg.epsilon:g}-seed{cfg.seed}",
        model=cfg.model, n=cfg.n, epsilon=cfg.epsilon, alpha=cfg.alpha, T=cfg.T, B=cfg.B,
        lengthscales=list(kernel.lengthscales), nmse=nmse(theta_hat, theta_true),
        model_mmd=mmd, wall_time_seconds=time.perf_counter() - start,
        theta_hat=theta_hat.tolist(), n_failed=int(sample.failed.sum()))
    return sample, result


def default_bound_grid(points=5, low=250, high=4000):
    return [int(round(v)) for v in np.geomspace(low, high, points)]


def bound_check_experiment(n_grid=None, runs=10, cfg=None, sample_size=15000):
    """sqrt of the run-averaged MMD^2 between the fitted and true g-and-k.

    Every run draws fresh clean data (epsilon = alpha = 0). The per-run raw
    U-statistics are averaged before the square root, so estimator noise
    cancels instead of being clipped run by run.
    """
    if cfg is None:
        cfg = ExperimentConfig(model="gandk")
    n_grid = default_bound_grid() if n_grid is None else list(n_grid)
    if not n_grid:
        raise ValueError("n_grid is empty")
    check_int(runs, "runs")
    base = replace(cfg, epsilon=0.0, alpha=0.0)
    rows = []
    for n in n_grid:
        check_int(n, "n", minimum=2)
        sq = []
        for r in range(runs):
            run_cfg = replace(base, n=int(n), T=None,
                              seed=mix_seed(int(base.seed), int(n) * 1000 + r) >> 1).resolved()
            sample, result = run_experiment(run_cfg)
            sim = run_cfg.preset.make_simulator()
            kernel = GaussianKernel(result.lengthscales)
            rng = np.random.default_rng(mix_seed(int(run_cfg.seed), _DATA_SALT + 2))
            sq.append(model_mmd2(result.theta_hat, run_cfg.preset.theta_true,
                                 sim, kernel, sample_size, rng))
        rows.append({"n": int(n), "mmd_estimate": math.sqrt(max(0.0, float(np.mean(sq)))),
                     "bound_2_over_sqrt_n": 2.0 / math.sqrt(n)})
    return rows


SWEEP_PARAMETERS = ("alpha", "T", "lengthscale")


def hyperparameter_sweep(parameter, grid, cfg=None):
    """Posterior-mean NMSE for each value of one DP or kernel hyperparameter.

    All grid points share the dataset and the master seed of ``cfg``.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    grid = list(grid)
    if not grid:
        raise ValueError("grid is empty")
    cfg = (cfg or ExperimentConfig(model="gandk")).resolved()
    data = make_dataset(cfg)
    rows = []
    for value in grid:
        if parameter == "alpha":
            point = replace(cfg, alpha=float(value))
        elif parameter == "T":
            point = replace(cfg, T=int(value))
        else:
            point = replace(cfg, kernel=float(value))
        _, result = run_experiment(point, data=data)
        rows.append({"value": value, "nmse": result.nmse})
    return rows
