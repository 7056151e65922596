"""Exact-rational univariate polynomials and probabilists' Hermite polynomials.

Coefficients are stored densely as :class:`fractions.Fraction`, lowest degree
first.  Nothing here touches floating point until a polynomial is evaluated at
a float (or array) argument.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from numbers import Rational as _RationalABC
from typing import Iterable, Sequence

import numpy as np

# Arbitrary-precision exact rationals, always stored reduced with den > 0.
Rational = Fraction

__all__ = [
    "Rational",
    "Polynomial",
    "hermite",
    "poly_eval",
    "poly_derivative",
    "poly_combine",
]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, _RationalABC):
        return Fraction(c.numerator, c.denominator)
    raise TypeError(f"exact coefficient required, got {type(c).__name__}")


class Polynomial:
    """Dense polynomial with exact rational coefficients.

    ``Polynomial([a0, a1, a2])`` is ``a0 + a1*x + a2*x**2``.  Trailing zero
    coefficients are stripped, so the zero polynomial has ``coeffs == ()``.
    Instances are immutable and hashable.
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [_as_fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self._coeffs = tuple(cs)

    @classmethod
    def monomial(cls, degree: int, coeff=1) -> "Polynomial":
        return cls([0] * degree + [coeff])

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        return self._coeffs

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self._coeffs) - 1

    def is_zero(self) -> bool:
        return not self._coeffs

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._coeffs == other._coeffs
        if isinstance(other, (int, Fraction)):
            return self == Polynomial([other])
        return NotImplemented

    def __hash__(self):
        return hash(self._coeffs)

    def __repr__(self):
        if not self._coeffs:
            return "Polynomial(0)"
        terms = []
        for k, c in enumerate(self._coeffs):
            if c == 0:
                continue
            mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            terms.append(f"({c})" + (f"*{mono}" if mono else ""))
        return "Polynomial(" + " + ".join(terms) + ")"

    def __add__(self, other):
        other = _coerce(other)
        m = max(len(self._coeffs), len(other._coeffs))
        a = self._coeffs + (Fraction(0),) * (m - len(self._coeffs))
        b = other._coeffs + (Fraction(0),) * (m - len(other._coeffs))
        return Polynomial(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-c for c in self._coeffs)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero() or other.is_zero():
                return Polynomial()
            out = [Fraction(0)] * (len(self._coeffs) + len(other._coeffs) - 1)
            for i, a in enumerate(self._coeffs):
                for k, b in enumerate(other._coeffs):
                    out[i + k] += a * b
            return Polynomial(out)
        c = _as_fraction(other)
        return Polynomial(c * a for a in self._coeffs)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _as_fraction(other)
        return Polynomial(a / c for a in self._coeffs)

    def __call__(self, x):
        return poly_eval(self, x)

    def derivative(self) -> "Polynomial":
        return poly_derivative(self)

    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self._coeffs], dtype=float)


def _coerce(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial([p])


def poly_eval(p: Polynomial, x):
    """Horner evaluation of ``p`` at ``x``.

    Exact when ``x`` is an int or Fraction (the result is a Fraction); a float
    or ndarray argument is evaluated in double precision.
    """
    cs = p.coeffs
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        acc = Fraction(0)
        for c in reversed(cs):
            acc = acc * x + c
        return acc
    fx = np.asarray(x, dtype=float)
    acc = np.zeros_like(fx)
    for c in reversed(cs):
        acc = acc * fx + float(c)
    return float(acc) if acc.ndim == 0 else acc


def poly_derivative(p: Polynomial) -> Polynomial:
    return Polynomial(k * c for k, c in enumerate(p.coeffs) if k > 0)


def poly_combine(weights: Sequence, polys: Sequence[Polynomial]) -> Polynomial:
    """Return ``sum(w * p for w, p in zip(weights, polys))``.

    Float weights are converted to their exact binary value, so the result is
    always an exact :class:`Polynomial`; it is *meaningfully* exact only when
    the weights are themselves rational.
    """
    if len(weights) != len(polys):
        raise ValueError(f"length mismatch: {len(weights)} weights, {len(polys)} polynomials")
    out = Polynomial()
    for w, p in zip(weights, polys):
        out = out + p * _weight(w)
    return out


def _weight(w) -> Fraction:
    if isinstance(w, (float, np.floating)):
        if not np.isfinite(w):
            raise ValueError("polynomial weights must be finite")
        return Fraction(float(w))
    return _as_fraction(w)


@lru_cache(maxsize=None)
def hermite(r: int) -> Polynomial:
    """Probabilists' Hermite polynomial ``He_r``.

    This is the convention ``exp(x^2/2) (-d/dx)^r exp(-x^2/2)``, leading
    coefficient 1, *not* the physicists' ``H_r`` (leading coefficient 2^r).
    Built from ``He_{r+1} = x He_r - r He_{r-1}``.
    """
    if r < 0:
        raise ValueError("Hermite order must be nonnegative")
    if r == 0:
        return Polynomial([1])
    if r == 1:
        return Polynomial([0, 1])
    x = Polynomial([0, 1])
    return x * hermite(r - 1) - (r - 1) * hermite(r - 2)
