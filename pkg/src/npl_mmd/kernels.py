"""Gaussian-family kernels and MMD^2 estimators.

All estimators take point sets shaped (n, d). The private ``_*_batch``
helpers accept arbitrary leading batch axes and are what the optimiser
calls in its inner loop.
"""
import math

import numpy as np
from scipy.spatial.distance import pdist

from .utils import check_points

# Row-block size for gram matrices that would otherwise not fit in memory.
DEFAULT_BLOCK = 2048


class GaussianKernel:
    """Sum of Gaussian kernels ``sum_i exp(-|x - y|^2 / (2 l_i^2))``.

    A single lengthscale gives the usual Gaussian kernel (bounded by 1);
    several give the unweighted mixture, bounded by the number of components.
    """

    def __init__(self, lengthscale):
        ls = np.atleast_1d(np.asarray(lengthscale, dtype=float)).ravel()
        if ls.size == 0 or np.any(~(ls > 0)) or np.any(~np.isfinite(ls)):
            raise ValueError(f"lengthscales must be positive, got {lengthscale!r}")
        self.lengthscales = tuple(float(v) for v in ls)
        self._inv2l2 = 0.5 / ls ** 2
        self._invl2 = 1.0 / ls ** 2

    @classmethod
    def mixture(cls, lengthscales):
        return cls(lengthscales)

    @property
    def is_mixture(self):
        return len(self.lengthscales) > 1

    @property
    def bound(self):
        """Value of k(x, x), the kernel's supremum."""
        return float(len(self.lengthscales))

    def __repr__(self):
        if self.is_mixture:
            return f"GaussianKernel(lengthscale={list(self.lengthscales)})"
        return f"GaussianKernel(lengthscale={self.lengthscales[0]!r})"

    def __eq__(self, other):
        return (isinstance(other, GaussianKernel)
                and self.lengthscales == other.lengthscales)

    def __hash__(self):
        return hash(self.lengthscales)

    def to_dict(self):
        return {"type": "gaussian", "lengthscales": list(self.lengthscales)}

    # -- evaluation -------------------------------------------------------
    def _from_sqdist(self, sq):
        # huge distances overflow -c * sq to -inf, and exp(-inf) == 0 is right
        with np.errstate(over="ignore"):
            out = np.exp(-self._inv2l2[0] * sq)
            for c in self._inv2l2[1:]:
                out += np.exp(-c * sq)
        return out

    def _from_sqdist_with_grad(self, sq):
        """Return (K, W) with grad_x k(x, y) = -(x - y) * W(x, y)."""
        with np.errstate(over="ignore"):
            e = np.exp(-self._inv2l2[0] * sq)
            if not self.is_mixture:
                return e, e * self._invl2[0]
            K = e.copy()
            W = e * self._invl2[0]
            for c, w in zip(self._inv2l2[1:], self._invl2[1:]):
                e = np.exp(-c * sq)
                K += e
                W += w * e
        return K, W

    def gram(self, x, y):
        return self._from_sqdist(sqdist(x, y))

    def __call__(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
        return float(self._from_sqdist(np.sum((x - y) ** 2)))

    def grad1(self, x, y):
        """Gradient of k(x, y) in its first argument."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
        _, W = self._from_sqdist_with_grad(np.sum((x - y) ** 2))
        return -(x - y) * W


# beyond this magnitude the norm expansion loses too many digits
_EXPANSION_LIMIT = 1e4


def _expanded_sqdist(x, y):
    # |x|^2 + |y|^2 - 2 x.y; rounding can dip below zero
    xx = np.sum(x * x, axis=-1)[..., :, None]
    yy = np.sum(y * y, axis=-1)[..., None, :]
    d2 = xx + yy - 2.0 * (x @ np.swapaxes(y, -1, -2))
    return np.maximum(d2, 0.0, out=d2)


def _expandable(x, y):
    """Per batch row: is the norm expansion accurate enough?"""
    if x.shape[-1] == 1:
        return np.zeros(x.shape[:-2], dtype=bool)
    return np.maximum(np.abs(x).max(axis=(-2, -1), initial=0.0),
                      np.abs(y).max(axis=(-2, -1), initial=0.0)) < _EXPANSION_LIMIT


def _diff_sqdist(x, y):
    diff = x[..., :, None, :] - y[..., None, :, :]
    return diff, np.einsum("...k,...k->...", diff, diff)


def sqdist(x, y):
    """Pairwise squared distances for (..., n, d) and (..., m, d) arrays.

    The fast norm expansion is used for batch rows of moderate magnitude,
    explicit differences otherwise; each row is decided on its own.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if x.shape[-1] == 1:
            diff = x[..., :, None, 0] - y[..., None, :, 0]
            return diff * diff
        expand = _expandable(x, y)
        if np.all(expand):
            return _expanded_sqdist(x, y)
        sq = _diff_sqdist(x, y)[1]
        if np.any(expand):
            sq = np.where(expand[..., None, None], _expanded_sqdist(x, y), sq)
        return sq


def kernel_eval(kernel, x, y):
    return kernel(x, y)


def median_heuristic(points):
    """Lengthscale sqrt(median_{i<j} |x_i - x_j|^2)."""
    pts = check_points(points, min_count=2)
    med = float(np.median(pdist(pts, "sqeuclidean")))
    if med <= 0:
        raise ValueError("median heuristic is degenerate: median pairwise distance is 0")
    return float(np.sqrt(med))


# -- block sums -------------------------------------------------------------
def _block_sum(kernel, x, y, block, weights_x=None, weights_y=None):
    """sum_{i,j} wx_i wy_j k(x_i, y_j), computed in row blocks of x."""
    parts = []
    for start in range(0, x.shape[0], block):
        K = kernel.gram(x[start:start + block], y)
        if weights_y is not None:
            rows = K @ weights_y
        else:
            rows = K.sum(axis=1)
        if weights_x is not None:
            parts.append(float(weights_x[start:start + block] @ rows))
        else:
            parts.append(float(rows.sum()))
    # exact accumulation across blocks keeps results block-size independent
    return math.fsum(parts)


def _offdiag_mean(kernel, x, block, n=None):
    n = x.shape[0] if n is None else n
    return (_block_sum(kernel, x, x, block) - x.shape[0] * kernel.bound) / (n * (n - 1))


def _sample(points, name, dim=None):
    """Validate a sample; points at +-inf are split off (they interact with nothing)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    finite = np.all(np.isfinite(arr), axis=1)
    check_points(arr[finite] if finite.any() else np.zeros((0, arr.shape[1])),
                 name, min_count=0, dim=dim)
    if arr.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 points, got {arr.shape[0]}")
    return arr[finite], arr.shape[0]


def mmd2_u(xs, ys, kernel, block_size=DEFAULT_BLOCK):
    """Unbiased U-statistic estimate of MMD^2 between two samples.

    Can be negative. ``block_size`` only bounds memory: results agree across
    block sizes to rounding error.
    """
    xs, n = _sample(xs, "xs")
    ys, m = _sample(ys, "ys", dim=xs.shape[1])
    return (_offdiag_mean(kernel, xs, block_size, n)
            - 2.0 * _block_sum(kernel, xs, ys, block_size) / (n * m)
            + _offdiag_mean(kernel, ys, block_size, m))


def mmd2_weighted(measure, ys, kernel, block_size=DEFAULT_BLOCK):
    """MMD^2 between a weighted measure (exact) and a sample ``ys`` (U-form)."""
    z, w = measure.atoms, measure.weights
    ys, m = _sample(ys, "ys", dim=z.shape[1])
    return (_block_sum(kernel, z, z, block_size, w, w)
            - 2.0 * _block_sum(kernel, z, ys, block_size, weights_x=w) / m
            + _offdiag_mean(kernel, ys, block_size, m))


def mmd2_between_measures(p, q, kernel, block_size=DEFAULT_BLOCK):
    """Exact squared RKHS distance between two weighted measures (>= 0 up to rounding)."""
    if p.dim != q.dim:
        raise ValueError("measures live in different dimensions")
    return (_block_sum(kernel, p.atoms, p.atoms, block_size, p.weights, p.weights)
            - 2.0 * _block_sum(kernel, p.atoms, q.atoms, block_size, p.weights, q.weights)
            + _block_sum(kernel, q.atoms, q.atoms, block_size, q.weights, q.weights))


# -- batched inner-loop helpers --------------------------------------------
# outputs beyond this magnitude count as infinitely far: their differences
# could overflow and turn zero kernel weights into nan
_FAR = 1e300


def _pair_terms(x, y):
    """Squared distances plus what ``_grad_sum`` needs, for (..., n, d), (..., m, d).

    Returns ``(sq, diff, expand)``: ``diff`` is None when every batch row
    uses the norm expansion, and ``expand`` flags the rows that do.
    """
    expand = _expandable(x, y)
    with np.errstate(over="ignore", invalid="ignore"):
        if np.all(expand):
            return _expanded_sqdist(x, y), None, expand
        diff, sq = _diff_sqdist(x, y)
        if np.any(expand):
            sq = np.where(expand[..., None, None], _expanded_sqdist(x, y), sq)
    return sq, diff, expand


def _grad_sum(x, y, W, diff=None, expand=None):
    """sum_j grad_1 k(x_i, y_j) with row weights folded into W; shape (..., n, d)."""
    if diff is None:
        return -(x * W.sum(axis=-1)[..., None] - W @ y)
    out = -np.einsum("...ijk,...ij->...ik", diff, W)
    if expand is not None and np.any(expand):
        with np.errstate(all="ignore"):
            alt = -(x * W.sum(axis=-1)[..., None] - W @ y)
        out = np.where(expand[..., None, None], alt, out)
    return out


def _mmd2_grad_batch(G, J, Y, kernel, y_weights=None):
    """Gradient U-statistic for batches.

    G: (..., M, d) simulator outputs, J: (..., M, d, p) their parameter
    Jacobians, Y: (..., N, d) target points with optional weights (..., N)
    (uniform 1/N when omitted). Returns (..., p).

    Outputs that overflowed (or nearly so) are infinitely far from
    everything, so their kernel weights are exactly zero; they are masked
    out rather than allowed to produce inf * 0. A NaN output makes the whole
    row's gradient NaN.
    """
    M = G.shape[-2]
    broken = np.isnan(G).any(axis=(-1, -2))
    far = ~np.all(np.abs(G) < _FAR, axis=-1)
    if far.any():
        G = np.where(far[..., None], 0.0, G)
    sq, diff, expand = _pair_terms(G, G)
    if far.any():
        sq[far] = np.inf
        sq[np.broadcast_to(far[..., None, :], sq.shape)] = np.inf
    _, Wgg = kernel._from_sqdist_with_grad(sq)
    # the j == j' terms vanish because x - x = 0
    g_model = _grad_sum(G, G, Wgg, diff, expand) * (2.0 / (M * (M - 1)))
    sq, diff, expand = _pair_terms(G, Y)
    if far.any():
        sq[far] = np.inf
    _, Wgy = kernel._from_sqdist_with_grad(sq)
    if y_weights is None:
        Wgy = Wgy * (1.0 / Y.shape[-2])
    else:
        Wgy = Wgy * y_weights[..., None, :]
    g_data = _grad_sum(G, Y, Wgy, diff, expand) * (2.0 / M)
    dG = g_model - g_data
    if not np.all(np.isfinite(J)):
        # an overflowed Jacobian entry only matters where its sample interacts
        J = np.where(dG[..., None] == 0.0, 0.0, J)
    out = np.einsum("...mdp,...md->...p", J, dG)
    if broken.any():
        out[broken] = np.nan
    return out


def _mmd2_batch(G, Y, kernel, y_weights=None):
    """U-statistic MMD^2 per batch row (weighted V-form on the Y side if weighted)."""
    M = G.shape[-2]
    Kgg = kernel.gram(G, G)
    model = (Kgg.sum(axis=(-1, -2)) - M * kernel.bound) / (M * (M - 1))
    Kgy = kernel.gram(G, Y)
    Kyy = kernel.gram(Y, Y)
    if y_weights is None:
        N = Y.shape[-2]
        cross = Kgy.sum(axis=(-1, -2)) / (M * N)
        data = (Kyy.sum(axis=(-1, -2)) - N * kernel.bound) / (N * (N - 1))
    else:
        cross = (Kgy @ y_weights[..., :, None])[..., 0].sum(axis=-1) / M
        data = np.einsum("...i,...ij,...j->...", y_weights, Kyy, y_weights)
    return model - 2.0 * cross + data


def mmd2_grad_u(theta, us, ys, simulator, kernel):
    """Unbiased gradient of the MMD^2 U-statistic with respect to ``theta``."""
    us = np.asarray(us, dtype=float)
    if us.ndim == 1:
        us = us[:, None] if simulator.latent_dim == 1 else us[None, :]
    if us.shape[0] < 2:
        raise ValueError(f"need at least 2 latent draws, got {us.shape[0]}")
    ys = check_points(ys, "ys", dim=simulator.output_dim)
    G, J = simulator.simulate_with_jacobian(theta, us)
    return _mmd2_grad_batch(G, J, ys, kernel)
