"""Input validation helpers shared by the estimators and the functional API."""
import numbers

import numpy as np

_MASK64 = (1 << 64) - 1


def check_points(points, name="points", min_count=1, dim=None):
    """Return ``points`` as a float array of shape (n, d).

    One-dimensional input is read as n scalar observations.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise ValueError(f"{name} must be 1-d or 2-d, got shape {arr.shape}")
    if arr.shape[0] < min_count:
        raise ValueError(
            f"{name} needs at least {min_count} point(s), got {arr.shape[0]}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real, got {value!r}")
    if (strict and value <= 0) or (not strict and value < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_rng(random_state):
    """Accept ``None``, an int seed or a ``Generator``; return a ``Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def mix_seed(master_seed, index):
    """SplitMix64 finaliser applied to ``master_seed + (index + 1) * golden``.

    A bijection of the 64-bit input, so distinct indices never collide and the
    per-task seed does not depend on which worker runs the task.
    """
    z = (int(master_seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def open_uniform(rng, size):
    """Uniform draws on the open interval (0, 1)."""
    k = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
    return (k + 0.5) * (1.0 / (1 << 53))
