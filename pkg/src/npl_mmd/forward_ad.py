"""Vectorised forward-mode automatic differentiation.

A :class:`Dual` carries a value array of shape ``S`` and a tangent array of
shape ``S + (p,)``: one partial derivative per parameter, for every element.
With ``S == ()`` this is the textbook dual number; the array form lets a
simulator push a whole batch of latent draws through the chain rule at once.

The module-level functions (:func:`exp`, :func:`log`, ...) accept either plain
arrays or duals, so model code is written once and evaluated both ways.
"""
import numpy as np
from scipy import special as _sp

from .special import std_normal_cdf, std_normal_pdf, std_normal_quantile

_TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


class Dual:
    __slots__ = ("value", "partials")
    __array_ufunc__ = None  # ndarray <op> Dual defers to the reflected Dual method

    def __init__(self, value, partials):
        value = np.asarray(value, dtype=float)
        partials = np.asarray(partials, dtype=float)
        if partials.shape[:-1] != value.shape:
            partials = np.broadcast_to(partials, value.shape + partials.shape[-1:])
        self.value = value
        self.partials = partials

    @classmethod
    def variables(cls, theta):
        """Seed unit tangents: d theta_k / d theta_k = 1."""
        theta = np.asarray(theta, dtype=float)
        p = theta.shape[-1]
        return cls(theta, np.broadcast_to(np.eye(p), theta.shape + (p,)))

    @classmethod
    def constant(cls, value, width):
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (width,)))

    @property
    def width(self):
        return self.partials.shape[-1]

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Dual(value={self.value!r}, partials={self.partials!r})"

    def __len__(self):
        return len(self.value)

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        if Ellipsis not in key:
            key = key + (Ellipsis,)
        return Dual(self.value[key], self.partials[key + (slice(None),)])

    def _check(self, other):
        if other.width != self.width:
            raise ValueError(
                f"tangent width mismatch: {self.width} vs {other.width}")

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            self._check(other)
            return Dual(self.value + other.value, self.partials + other.partials)
        value = self.value + other
        return Dual(value, self.partials)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            self._check(other)
            return Dual(self.value - other.value, self.partials - other.partials)
        return Dual(self.value - other, self.partials)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, Dual):
            self._check(other)
            return Dual(self.value * other.value,
                        self.partials * other.value[..., None]
                        + other.partials * self.value[..., None])
        other = np.asarray(other, dtype=float)
        return Dual(self.value * other, self.partials * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            self._check(other)
            value = self.value / other.value
            return Dual(value,
                        (self.partials - value[..., None] * other.partials)
                        / other.value[..., None])
        other = np.asarray(other, dtype=float)
        return Dual(self.value / other, self.partials / other[..., None])

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=float)
        value = other / self.value
        return Dual(value, -(value / self.value)[..., None] * self.partials)

    def __pow__(self, exponent):
        if isinstance(exponent, Dual):
            return exp(exponent * log(self))
        exponent = np.asarray(exponent, dtype=float)
        value = self.value ** exponent
        deriv = exponent * self.value ** (exponent - 1.0)
        return Dual(value, deriv[..., None] * self.partials)

    def __rpow__(self, base):
        # constant base, dual exponent: b**x = exp(x log b)
        return exp(self * np.log(np.asarray(base, dtype=float)))


def _unary(x, value, deriv):
    return Dual(value, deriv[..., None] * x.partials)


def _domain_error(name, values, mask):
    offending = np.asarray(values)[mask].flat[0]
    raise ValueError(f"{name}: argument {offending!r} outside the domain")


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return _unary(x, v, v)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        bad = ~(x.value > 0)
        if np.any(bad):
            _domain_error("log", x.value, bad)
        return _unary(x, np.log(x.value), 1.0 / x.value)
    x = np.asarray(x, dtype=float)
    bad = ~(x > 0)
    if np.any(bad):
        _domain_error("log", x, bad)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        bad = ~(x.value >= 0)
        if np.any(bad):
            _domain_error("sqrt", x.value, bad)
        v = np.sqrt(x.value)
        with np.errstate(divide="ignore"):
            return _unary(x, v, 0.5 / v)
    x = np.asarray(x, dtype=float)
    bad = ~(x >= 0)
    if np.any(bad):
        _domain_error("sqrt", x, bad)
    return np.sqrt(x)


def cos(x):
    if isinstance(x, Dual):
        return _unary(x, np.cos(x.value), -np.sin(x.value))
    return np.cos(x)


def sin(x):
    if isinstance(x, Dual):
        return _unary(x, np.sin(x.value), np.cos(x.value))
    return np.sin(x)


def tanh(x):
    if isinstance(x, Dual):
        v = np.tanh(x.value)
        return _unary(x, v, 1.0 - v * v)
    return np.tanh(x)


def power(x, exponent):
    """``x ** exponent`` for a real exponent (either argument may be dual)."""
    if isinstance(x, Dual) or isinstance(exponent, Dual):
        if isinstance(x, Dual):
            return x ** exponent
        return exponent.__rpow__(x)
    return np.power(x, exponent)


def erf(x):
    if isinstance(x, Dual):
        v = _sp.erf(x.value)
        return _unary(x, v, _TWO_OVER_SQRT_PI * np.exp(-x.value * x.value))
    return _sp.erf(x)


def normal_cdf(x):
    if isinstance(x, Dual):
        return _unary(x, std_normal_cdf(x.value), std_normal_pdf(x.value))
    return std_normal_cdf(x)


def normal_quantile(p):
    """Phi^-1 with derivative 1 / phi(Phi^-1(p))."""
    if isinstance(p, Dual):
        v = np.asarray(std_normal_quantile(p.value))
        return _unary(p, v, 1.0 / std_normal_pdf(v))
    return std_normal_quantile(p)


def clip(x, lower=None, upper=None):
    """Clamp the value; the derivative is zero wherever a bound is active."""
    if isinstance(x, Dual):
        v = x.value
        active = np.zeros(v.shape, dtype=bool)
        if lower is not None:
            active |= v < lower
        if upper is not None:
            active |= v > upper
        if not active.any():
            return x
        return Dual(np.clip(v, lower, upper),
                    np.where(active[..., None], 0.0, x.partials))
    return np.clip(x, lower, upper)


def value_of(x):
    return x.value if isinstance(x, Dual) else np.asarray(x, dtype=float)


def stack(items, axis=-1):
    """``np.stack`` for a mix of duals and plain arrays."""
    duals = [it for it in items if isinstance(it, Dual)]
    if not duals:
        return np.stack([np.asarray(it, dtype=float) for it in items], axis=axis)
    width = duals[0].width
    shape = np.broadcast_shapes(*(np.shape(value_of(it)) for it in items))
    values, partials = [], []
    for it in items:
        if isinstance(it, Dual):
            if it.width != width:
                raise ValueError("tangent width mismatch in stack")
            values.append(np.broadcast_to(it.value, shape))
            partials.append(np.broadcast_to(it.partials, shape + (width,)))
        else:
            values.append(np.broadcast_to(np.asarray(it, dtype=float), shape))
            partials.append(np.zeros(shape + (width,)))
    if axis < 0:
        axis_p = axis - 1
    else:
        axis_p = axis
    return Dual(np.stack(values, axis=axis), np.stack(partials, axis=axis_p))


def gradient(f, theta):
    """Gradient of a scalar function ``f`` at ``theta`` by forward mode."""
    theta = np.asarray(theta, dtype=float)
    out = f(Dual.variables(theta))
    if not isinstance(out, Dual):
        return np.zeros_like(theta)
    if out.value.ndim != 0:
        raise ValueError("gradient() needs a scalar-valued function")
    return np.array(out.partials, dtype=float)
