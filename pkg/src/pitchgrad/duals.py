"""Forward-mode automatic differentiation with dual-number scalars.

A :class:`Dual` carries a value together with one directional derivative
with respect to a single seeded parameter.  Payloads are 64-bit floats or
numpy float64 arrays of identical shape; array payloads apply the same
rules elementwise, so a whole waveform or spectrogram grid is
differentiated in one pass.

The derivative channel of a constant is kept as the Python float ``0.0``
("lazy zero").  All operations preserve that representation, so pipelines
over constant signals never pay for derivative arithmetic.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Dual",
    "ComplexDual",
    "sin",
    "cos",
    "exp",
    "log",
    "log2",
    "log10",
    "sqrt",
    "absolute",
    "power",
    "magnitude",
    "dsum",
    "has_zero_der",
]

_LN2 = float(np.log(2.0))
_LN10 = float(np.log(10.0))


def _coerce(x):
    if type(x) is float:
        return x
    if isinstance(x, np.ndarray):
        return x if x.dtype == np.float64 else x.astype(np.float64)
    return float(x)


def _is_zero(x) -> bool:
    return type(x) is float and x == 0.0


def _zadd(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _zsub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return -b
    return a - b


def _zmul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


def _zneg(a):
    return 0.0 if _is_zero(a) else -a


class Dual:
    """Value plus one directional derivative (forward-mode seed)."""

    __slots__ = ("val", "der")

    def __init__(self, val, der=0.0):
        self.val = _coerce(val)
        self.der = _coerce(der) if not _is_zero(der) else 0.0

    def __repr__(self):
        return f"Dual({self.val!r}, der={self.der!r})"

    # arithmetic -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, _zadd(self.der, other.der))
        return Dual(self.val + _coerce(other), self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, _zsub(self.der, other.der))
        return Dual(self.val - _coerce(other), self.der)

    def __rsub__(self, other):
        return Dual(_coerce(other) - self.val, _zneg(self.der))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                _zadd(_zmul(self.val, other.der), _zmul(self.der, other.val)),
            )
        c = _coerce(other)
        return Dual(self.val * c, _zmul(self.der, c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Dual):
            other = Dual(other)
        bv = other.val
        if np.ndim(bv) == 0:
            if bv == 0.0:
                raise ZeroDivisionError("dual division by zero value")
        elif not np.all(bv != 0.0):
            raise ZeroDivisionError("dual division by zero value")
        num = _zsub(_zmul(self.der, bv), _zmul(self.val, other.der))
        return Dual(self.val / bv, num / (bv * bv) if not _is_zero(num) else 0.0)

    def __rtruediv__(self, other):
        return Dual(other) / self

    def __neg__(self):
        return Dual(-self.val, _zneg(self.der))

    def __abs__(self):
        return absolute(self)

    def __pow__(self, p):
        return power(self, p)


class ComplexDual:
    """Complex value whose real and imaginary parts are duals."""

    __slots__ = ("re", "im")

    def __init__(self, re: Dual, im: Dual):
        self.re = re
        self.im = im

    def __repr__(self):
        return f"ComplexDual(re={self.re!r}, im={self.im!r})"


# elementary functions -------------------------------------------------


def sin(x: Dual) -> Dual:
    return Dual(np.sin(x.val), _zmul(np.cos(x.val), x.der))


def cos(x: Dual) -> Dual:
    return Dual(np.cos(x.val), _zneg(_zmul(np.sin(x.val), x.der)))


def exp(x: Dual) -> Dual:
    e = np.exp(x.val)
    return Dual(e, _zmul(e, x.der))


def _check_positive(val, what):
    if np.ndim(val) == 0:
        if val <= 0.0:
            raise ValueError(f"{what} requires a positive value, got {val!r}")
    elif not np.all(val > 0.0):
        raise ValueError(f"{what} requires positive values")


def log(x: Dual) -> Dual:
    _check_positive(x.val, "log")
    der = x.der if _is_zero(x.der) else x.der / x.val
    return Dual(np.log(x.val), der)


def log2(x: Dual) -> Dual:
    _check_positive(x.val, "log2")
    der = x.der if _is_zero(x.der) else x.der / (x.val * _LN2)
    return Dual(np.log2(x.val), der)


def log10(x: Dual) -> Dual:
    _check_positive(x.val, "log10")
    der = x.der if _is_zero(x.der) else x.der / (x.val * _LN10)
    return Dual(np.log10(x.val), der)


def sqrt(x: Dual) -> Dual:
    """Square root with derivative 0 at 0 (subgradient convention)."""
    v = x.val
    if np.ndim(v) == 0:
        if v < 0.0:
            raise ValueError(f"sqrt of negative value {v!r}")
        s = float(np.sqrt(v))
        if _is_zero(x.der) or s == 0.0:
            return Dual(s, 0.0)
        return Dual(s, x.der / (2.0 * s))
    if not np.all(v >= 0.0):
        raise ValueError("sqrt of negative values")
    s = np.sqrt(v)
    if _is_zero(x.der):
        return Dual(s, 0.0)
    return Dual(s, np.where(s > 0.0, x.der / np.where(s > 0.0, 2.0 * s, 1.0), 0.0))


def absolute(x: Dual) -> Dual:
    """|x| with derivative 0 at 0 (subgradient convention)."""
    return Dual(np.abs(x.val), _zmul(np.sign(x.val), x.der))


def power(x: Dual, p: float) -> Dual:
    """x**p for a real constant exponent."""
    p = float(p)
    v = np.power(x.val, p)
    if _is_zero(x.der):
        return Dual(v, 0.0)
    return Dual(v, p * np.power(x.val, p - 1.0) * x.der)


def magnitude(z: ComplexDual) -> Dual:
    """sqrt(re**2 + im**2); returns derivative 0 where the value is 0."""
    mag = np.sqrt(z.re.val * z.re.val + z.im.val * z.im.val)
    num = _zadd(_zmul(z.re.val, z.re.der), _zmul(z.im.val, z.im.der))
    if _is_zero(num):
        return Dual(mag, 0.0)
    if np.ndim(mag) == 0:
        return Dual(mag, num / mag if mag > 0.0 else 0.0)
    return Dual(mag, np.where(mag > 0.0, num / np.where(mag > 0.0, mag, 1.0), 0.0))


def dsum(x: Dual, axis=None) -> Dual:
    """Sum of a dual array over the given axis (None sums everything)."""
    val = np.sum(x.val, axis=axis)
    if _is_zero(x.der):
        return Dual(val if axis is not None else float(val), 0.0)
    der = np.sum(np.broadcast_to(x.der, np.shape(x.val)), axis=axis)
    if axis is None:
        return Dual(float(val), float(der))
    return Dual(val, der)


def has_zero_der(x: Dual) -> bool:
    """True when the derivative channel is the lazy scalar zero."""
    return _is_zero(x.der)
