"""Stochastic-gradient minimisation of MMD^2(P, P_theta).

The public functions optimise a single parameter vector. Internally every
routine runs a *batch* of independent rows (bootstrap draws, restart
candidates) in lockstep; each row owns its RNG stream and its target
measure, so a row's trajectory does not depend on which other rows share
its batch.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .exceptions import DivergedOptimisationError, SimulationError
from .kernels import _block_sum, _mmd2_grad_batch, _mmd2_batch, mmd2_u, mmd2_weighted, sqdist
from .measures import WeightedMeasure, resample_indices
from .utils import check_int, check_positive, check_rng

MAX_DEFAULT_RESAMPLE = 1024


@dataclass(frozen=True)
class OptimConfig:
    """Settings for one MMD minimisation.

    ``n_resample`` (N) and ``n_latent`` (M) default to min(#atoms, 1024) and
    N. ``objective="weighted"`` replaces per-step resampling of the target
    with the exact weighted sum over all atoms. ``restarts=(R, keep)`` scores
    R prior draws and optimises from the ``keep`` best. ``lower``/``upper``
    are optional box constraints applied after every step.
    """

    method: str = "adam"
    learning_rate: float = 0.1
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    n_resample: Optional[int] = None
    n_latent: Optional[int] = None
    objective: str = "resample"
    restarts: Optional[Tuple[int, int]] = None
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    record_trace: bool = False
    eval_factor: int = 4

    def __post_init__(self):
        if self.method not in ("adam", "sgd"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.objective not in ("resample", "weighted"):
            raise ValueError(f"unknown objective {self.objective!r}")
        check_positive(self.learning_rate, "learning_rate")
        check_int(self.steps, "steps")
        if self.n_resample is not None:
            check_int(self.n_resample, "n_resample", minimum=2)
        if self.n_latent is not None:
            check_int(self.n_latent, "n_latent", minimum=2)
        if self.restarts is not None:
            R, keep = self.restarts
            check_int(R, "restart candidates")
            check_int(keep, "restarts kept")
            if keep > R:
                raise ValueError("cannot keep more restarts than candidates")
        check_int(self.eval_factor, "eval_factor")

    def sizes(self, n_atoms):
        N = self.n_resample or max(2, min(n_atoms, MAX_DEFAULT_RESAMPLE))
        M = self.n_latent or N
        return N, M


@dataclass
class OptimResult:
    theta_hat: np.ndarray
    final_loss: float
    initial_loss: float = float("nan")
    trace: Optional[np.ndarray] = None
    steps_taken: int = 0
    failed_step: Optional[int] = None
    theta_init: Optional[np.ndarray] = None

    @property
    def failed(self):
        return self.failed_step is not None


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(state, grad, theta, learning_rate=0.1, beta1=0.9, beta2=0.999,
              eps_hat=1e-8):
    """One bias-corrected Adam update. Returns ``(theta_new, state_new)``."""
    grad = np.asarray(grad, dtype=float)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    theta_new = np.asarray(theta, dtype=float) - learning_rate * m_hat / (np.sqrt(v_hat) + eps_hat)
    return theta_new, AdamState(m, v, t)


def sgd_step(grad, theta, learning_rate=0.1):
    return np.asarray(theta, dtype=float) - learning_rate * np.asarray(grad, dtype=float)


# -- batched core -----------------------------------------------------------
@dataclass
class _Rows:
    atoms: np.ndarray            # (R, K, d)
    weights: np.ndarray          # (R, K)
    theta: np.ndarray            # (R, p)
    rngs: list
    failed_step: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.failed_step is None:
            self.failed_step = np.full(len(self.rngs), -1)


def _stack_measures(measures):
    K = max(m.size for m in measures)
    d = measures[0].dim
    atoms = np.zeros((len(measures), K, d))
    weights = np.zeros((len(measures), K))
    for r, m in enumerate(measures):
        atoms[r, :m.size] = m.atoms
        weights[r, :m.size] = m.weights
    return atoms, weights


def _simulate_rows(simulator, theta, u, alive):
    """Jacobian simulation for all rows; rows that raise are reported as None."""
    try:
        return simulator.simulate_with_jacobian(theta[:, None, :], u), None
    except (SimulationError, ValueError, FloatingPointError):
        pass
    R = theta.shape[0]
    G = np.full(u.shape[:2] + (simulator.output_dim,), np.nan)
    J = np.full(G.shape + (simulator.param_dim,), np.nan)
    bad = np.zeros(R, dtype=bool)
    for r in np.flatnonzero(alive):
        try:
            G[r], J[r] = simulator.simulate_with_jacobian(theta[r], u[r])
        except (SimulationError, ValueError, FloatingPointError):
            bad[r] = True
    return (G, J), bad


def _evaluate_loss(simulator, kernel, cfg, atoms, weights, theta, rng, N, M):
    """Loss at ``theta`` on a fresh, larger draw (eval_factor * N, eval_factor * M)."""
    f = cfg.eval_factor
    u = simulator.sample_latent(rng, f * M)
    try:
        with np.errstate(all="ignore"):
            G = simulator.simulate(theta, u)
    except (SimulationError, ValueError):
        return float("nan")
    if np.any(np.isnan(G)):
        return float("nan")
    keep = weights > 0
    measure = WeightedMeasure(atoms[keep], weights[keep] / weights[keep].sum())
    if cfg.objective == "weighted":
        return float(mmd2_weighted(measure, G, kernel))
    ys = measure.atoms[resample_indices(measure.weights, f * N, rng)]
    return float(mmd2_u(ys, G, kernel))


def _run_rows(simulator, kernel, cfg, rows):
    """Optimise all rows for ``cfg.steps`` steps; returns a list of OptimResult."""
    R, K, d = rows.atoms.shape
    p = simulator.param_dim
    N, M = cfg.sizes(int((rows.weights > 0).sum(axis=1).max()))
    theta = np.array(rows.theta, dtype=float).reshape(R, p)
    theta_init = theta.copy()
    lower = None if cfg.lower is None else np.asarray(cfg.lower, dtype=float)
    upper = None if cfg.upper is None else np.asarray(cfg.upper, dtype=float)

    initial = [_evaluate_loss(simulator, kernel, cfg, rows.atoms[r], rows.weights[r],
                              theta[r], rows.rngs[r], N, M) for r in range(R)]

    state = AdamState.zeros((R, p))
    failed = rows.failed_step
    trace = np.full((R, cfg.steps), np.nan) if cfg.record_trace else None
    cdfs = np.cumsum(rows.weights, axis=1)
    weighted = cfg.objective == "weighted"
    row_idx = np.arange(R)[:, None]

    for step in range(cfg.steps):
        alive = failed < 0
        if not alive.any():
            break
        u = np.empty((R, M, simulator.latent_dim))
        if not weighted:
            idx = np.empty((R, N), dtype=np.intp)
        for r in range(R):
            rng = rows.rngs[r]
            u[r] = simulator.sample_latent(rng, M)
            if not weighted:
                draws = rng.random(N) * cdfs[r, -1]
                idx[r] = np.minimum(np.searchsorted(cdfs[r], draws, side="right"), K - 1)
        if weighted:
            Y, yw = rows.atoms, rows.weights
        else:
            Y, yw = rows.atoms[row_idx, idx], None

        with np.errstate(all="ignore"):
            (G, J), bad = _simulate_rows(simulator, theta, u, alive)
            grad = _mmd2_grad_batch(G, J, Y, kernel, yw)
            if trace is not None:
                trace[:, step] = _mmd2_batch(G, Y, kernel, yw)
        newly = alive & ~np.all(np.isfinite(grad), axis=1)
        if bad is not None:
            newly |= alive & bad
        failed[newly] = step
        grad[~(failed < 0)] = 0.0

        if cfg.method == "adam":
            theta_new, state = adam_step(state, grad, theta, cfg.learning_rate,
                                         cfg.beta1, cfg.beta2, cfg.eps_hat)
        else:
            theta_new = sgd_step(grad, theta, cfg.learning_rate)
        if lower is not None or upper is not None:
            theta_new = np.clip(theta_new, lower, upper)
        alive = failed < 0
        theta[alive] = theta_new[alive]

    results = []
    for r in range(R):
        final = _evaluate_loss(simulator, kernel, cfg, rows.atoms[r], rows.weights[r],
                               theta[r], rows.rngs[r], N, M)
        fs = int(failed[r]) if failed[r] >= 0 else None
        if fs is None and not np.isfinite(final):
            fs = cfg.steps
        results.append(OptimResult(
            theta_hat=theta[r].copy(), final_loss=final, initial_loss=initial[r],
            trace=None if trace is None else trace[r],
            steps_taken=cfg.steps if fs is None else fs,
            failed_step=fs, theta_init=theta_init[r]))
    return results


def _score_candidates(simulator, kernel, measure, candidates, u, block=64):
    """mmd2_weighted(measure, G_theta(u)) for every candidate theta."""
    z, w = measure.atoms, measure.weights
    self_term = float(w @ (kernel.gram(z, z) @ w)) if z.shape[0] <= 4096 else None
    if self_term is None:
        self_term = _block_sum(kernel, z, z, 2048, w, w)
    M = u.shape[0]
    scores = np.empty(len(candidates))
    for start in range(0, len(candidates), block):
        cand = candidates[start:start + block]
        with np.errstate(all="ignore"):
            try:
                G = simulator.simulate(cand[:, None, :], u[None])
            except (SimulationError, ValueError):
                G = np.stack([_safe_simulate(simulator, c, u) for c in cand])
            Kgg = kernel._from_sqdist(sqdist(G, G))
            model = (Kgg.sum(axis=(-1, -2)) - M * kernel.bound) / (M * (M - 1))
            cross = (kernel._from_sqdist(sqdist(G, z[None])) @ w).sum(axis=-1) / M
        s = self_term - 2.0 * cross + model
        scores[start:start + block] = np.where(np.isfinite(s), s, np.inf)
    return scores


def _safe_simulate(simulator, theta, u):
    try:
        return simulator.simulate(theta, u)
    except (SimulationError, ValueError):
        return np.full((u.shape[0], simulator.output_dim), np.nan)


def _restart_inits(simulator, kernel, cfg, measure, prior_sampler, rng):
    R, keep = cfg.restarts
    candidates = np.asarray(prior_sampler(rng, R), dtype=float).reshape(R, -1)
    _, M = cfg.sizes(measure.size)
    u = simulator.sample_latent(rng, M)
    scores = _score_candidates(simulator, kernel, measure, candidates, u)
    best = np.argsort(scores, kind="stable")[:keep]
    return candidates[best]


def _best_of(results):
    ok = [r for r in results if not r.failed and np.isfinite(r.final_loss)]
    pool = ok or results
    return min(pool, key=lambda r: r.final_loss if np.isfinite(r.final_loss) else np.inf)


def minimize_batch(simulator, measures, kernel, cfg, theta_inits, rngs,
                   prior_sampler=None):
    """Optimise one target measure per entry; returns one OptimResult each.

    With ``cfg.restarts`` set, each entry is expanded into ``keep`` rows
    started from its best-scoring prior draws, and the row with the lowest
    final loss is returned.
    """
    if cfg.restarts is None:
        atoms, weights = _stack_measures(measures)
        inits = np.array([np.asarray(t, dtype=float) for t in theta_inits])
        return _run_rows(simulator, kernel, cfg, _Rows(atoms, weights, inits, list(rngs)))

    if prior_sampler is None:
        prior_sampler = simulator.prior_sampler()
    if prior_sampler is None:
        raise ValueError("random restarts need a prior sampler")
    keep = cfg.restarts[1]
    row_measures, row_inits, row_rngs = [], [], []
    for measure, rng in zip(measures, rngs):
        inits = _restart_inits(simulator, kernel, cfg, measure, prior_sampler, rng)
        for init, child in zip(inits, rng.spawn(keep)):
            row_measures.append(measure)
            row_inits.append(init)
            row_rngs.append(child)
    atoms, weights = _stack_measures(row_measures)
    results = _run_rows(simulator, kernel, cfg,
                        _Rows(atoms, weights, np.array(row_inits), row_rngs))
    return [_best_of(results[i * keep:(i + 1) * keep]) for i in range(len(measures))]


def minimize_mmd(simulator, measure, kernel, cfg, theta_init, rng=None):
    """Minimise MMD^2(measure, P_theta) by stochastic gradient steps.

    Every step draws fresh latents and (unless ``objective="weighted"``) a
    fresh multinomial resample of the target. Raises
    :class:`DivergedOptimisationError` if the gradient becomes non-finite.
    """
    rng = check_rng(rng)
    theta_init = np.asarray(theta_init, dtype=float).ravel()
    if theta_init.size != simulator.param_dim:
        raise ValueError(
            f"theta_init has {theta_init.size} entries, simulator expects {simulator.param_dim}")
    [result] = minimize_batch(simulator, [measure], kernel, replace(cfg, restarts=None),
                              [theta_init], [rng])
    if result.failed:
        raise DivergedOptimisationError(result.failed_step)
    return result


def random_restart_minimize(simulator, measure, kernel, cfg, prior_sampler, rng=None):
    """Score ``R`` prior draws with the exact weighted loss, optimise from the
    ``keep`` best and return the run with the smallest final loss."""
    rng = check_rng(rng)
    if cfg.restarts is None:
        cfg = replace(cfg, restarts=(500, 3))
    [result] = minimize_batch(simulator, [measure], kernel, cfg, [None], [rng],
                              prior_sampler=prior_sampler)
    if result.failed:
        raise DivergedOptimisationError(result.failed_step)
    return result
