"""Edgeworth CDF expansion and Cornish-Fisher quantile transforms for a standardized mean.

For ``Y_n = sqrt(n) (Xbar - mu) / sigma`` with standardized cumulants ``ell_r``:

* ``edgeworth_cdf``  : P(Y_n <= x) ~ Phi(x) - phi(x) sum_r n^{-r/2} U_r(x)
* ``xi_transform``   : x - sum_r n^{-r/2} f_r(x), so P(Y_n <= x) ~ Phi(xi(x))
* ``eta_transform``  : y + sum_r n^{-r/2} g_r(y), the Y_n quantile at level Phi(y)

with ``f_r = beta_r . a_r`` and ``g_r = beta_r . b_r``.  Orders r = 1..4 are
supported; the fourth-order beta vector has five entries (one per basis entry).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, OrderError
from .poly import Polynomial, hermite, poly_combine, poly_eval

__all__ = [
    "MAX_ORDER",
    "StandardizedCumulants",
    "ExpansionSpec",
    "standardized_cumulants",
    "beta_vector",
    "a_basis",
    "b_basis",
    "edgeworth_polynomial",
    "edgeworth_cdf",
    "xi_transform",
    "eta_transform",
    "xi_terms",
    "eta_terms",
    "norm_cdf",
    "norm_pdf",
]

MAX_ORDER = 4

F = Fraction

# beta_r entries as (sign, ell indices); order matches a_r / b_r entries.
_BETA = {
    1: ((1, (3,)),),
    2: ((1, (4,)), (-1, (3, 3))),
    3: ((1, (5,)), (-1, (3, 4)), (1, (3, 3, 3))),
    4: ((1, (6,)), (-1, (4, 4)), (-1, (3, 5)), (1, (3, 3, 4)), (-1, (3, 3, 3, 3))),
}

# U_r as (ell indices, coefficient, Hermite order).
_EDGEWORTH = {
    1: (((3,), F(1, 6), 2),),
    2: (((4,), F(1, 24), 3), ((3, 3), F(1, 72), 5)),
    3: (((5,), F(1, 120), 4), ((3, 4), F(1, 144), 6), ((3, 3, 3), F(1, 1296), 8)),
    4: (
        ((6,), F(1, 720), 5),
        ((4, 4), F(1, 1152), 7),
        ((3, 5), F(1, 720), 7),
        ((3, 3, 4), F(1, 1728), 9),
        ((3, 3, 3, 3), F(1, 31104), 11),
    ),
}


def _P(coeffs, den) -> Polynomial:
    return Polynomial(coeffs) / den


@lru_cache(maxsize=None)
def a_basis(r: int) -> tuple[Polynomial, ...]:
    """Basis polynomials of the normalizing (xi) correction ``f_r``."""
    if r == 1:
        return (hermite(2) / 6,)
    if r == 2:
        return (hermite(3) / 24, _P([0, -7, 0, 4], 36))
    if r == 3:
        return (
            hermite(4) / 120,
            _P([15, 0, -42, 0, 11], 144),
            _P([52, 0, -187, 0, 69], 648),
        )
    if r == 4:
        return (
            hermite(5) / 720,
            _P([0, 35, 0, -32, 0, 5], 384),
            _P([0, 51, 0, -48, 0, 7], 360),
            _P([0, 456, 0, -547, 0, 111], 864),
            _P([0, 2473, 0, -3628, 0, 948], 7776),
        )
    raise OrderError(f"a_r is tabulated for 1 <= r <= {MAX_ORDER}, got r={r}")


@lru_cache(maxsize=None)
def b_basis(r: int) -> tuple[Polynomial, ...]:
    """Basis polynomials of the quantile (eta) correction ``g_r``."""
    if r == 1:
        return (hermite(2) / 6,)
    if r == 2:
        return (hermite(3) / 24, _P([0, -5, 0, 2], 36))
    if r == 3:
        return (
            hermite(4) / 120,
            _P([2, 0, -5, 0, 1], 24),
            _P([17, 0, -53, 0, 12], 324),
        )
    if r == 4:
        return (
            hermite(5) / 720,
            _P([0, 29, 0, -24, 0, 3], 384),
            _P([0, 21, 0, -17, 0, 2], 180),
            _P([0, 107, 0, -103, 0, 14], 288),
            _P([0, 1511, 0, -1688, 0, 252], 7776),
        )
    raise OrderError(f"b_r is tabulated for 1 <= r <= {MAX_ORDER}, got r={r}")


@dataclass(frozen=True)
class StandardizedCumulants:
    """``ell_1 .. ell_m`` stored 1-indexed: ``sc[3]`` is ell_3.

    ell_1 and ell_2 are always zero.  Values may be floats or Fractions.
    """

    values: tuple

    def __post_init__(self):
        vals = tuple(self.values)
        if len(vals) < 2:
            vals = vals + (0,) * (2 - len(vals))
        if vals[0] != 0 or vals[1] != 0:
            raise DomainError("ell_1 and ell_2 must be zero")
        for v in vals:
            if not isinstance(v, Fraction) and not math.isfinite(float(v)):
                raise DomainError("standardized cumulants must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_higher(cls, *ell) -> "StandardizedCumulants":
        """Build from ell_3, ell_4, ... ."""
        return cls((0, 0) + tuple(ell))

    @property
    def max_order(self) -> int:
        return len(self.values)

    def __getitem__(self, r: int):
        if r < 1:
            raise IndexError(r)
        if r > len(self.values):
            raise DomainError(f"ell_{r} not available (have up to ell_{len(self.values)})")
        return self.values[r - 1]

    def product(self, idx: Sequence[int]):
        out = 1
        for r in idx:
            out = out * self[r]
        return out


@dataclass(frozen=True)
class ExpansionSpec:
    n: int
    j: int
    kind: str = "eta"

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"sample size must be a positive integer, got {self.n}")
        if isinstance(self.j, bool) or int(self.j) != self.j or not 0 <= self.j <= MAX_ORDER:
            raise OrderError(f"expansion order j must satisfy 0 <= j <= {MAX_ORDER}, got {self.j}")
        if self.kind not in ("cdf", "xi", "eta"):
            raise DomainError(f"unknown expansion kind {self.kind!r}")


def _exact_sqrt(q: Fraction):
    """sqrt of a nonnegative rational if it is rational, else None."""
    q = Fraction(q)
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def standardized_cumulants(kappa: Sequence) -> StandardizedCumulants:
    """``ell_r = kappa_r / kappa_2^{r/2} - [r == 2]`` from cumulants ``kappa_1..kappa_m``.

    ``kappa[0]`` is kappa_1.  ell_1 is forced to zero (the statistic is centred).
    All-rational input with a rational ``sqrt(kappa_2)`` yields exact Fractions.
    """
    kappa = list(kappa)
    if len(kappa) < 2:
        raise DomainError("need at least kappa_1 and kappa_2")
    k2 = kappa[1]
    if not k2 > 0:
        raise DomainError(f"variance kappa_2 must be positive, got {k2}")
    exact = all(isinstance(k, (int, Fraction)) for k in kappa)
    s = _exact_sqrt(Fraction(k2)) if exact else None
    if s is None:
        s = math.sqrt(float(k2))
        kappa = [float(k) for k in kappa]
    ell = [0, 0]
    for r in range(3, len(kappa) + 1):
        v = kappa[r - 1] / s**r
        if not isinstance(v, Fraction) and not math.isfinite(v):
            raise DomainError(f"kappa_{r} is not finite")
        ell.append(v)
    return StandardizedCumulants(tuple(ell))


def beta_vector(r: int, ell: StandardizedCumulants) -> tuple:
    """Cumulant-product weights pairing with ``a_basis(r)`` / ``b_basis(r)``."""
    if r not in _BETA:
        raise OrderError(f"beta_r is defined for 1 <= r <= {MAX_ORDER}, got r={r}")
    return tuple(sign * ell.product(idx) for sign, idx in _BETA[r])


def edgeworth_polynomial(r: int, ell: StandardizedCumulants) -> Polynomial:
    """``U_r(x)`` as an explicit polynomial."""
    if r not in _EDGEWORTH:
        raise OrderError(f"U_r is defined for 1 <= r <= {MAX_ORDER}, got r={r}")
    weights, polys = [], []
    for idx, coef, h in _EDGEWORTH[r]:
        w = ell.product(idx)
        weights.append(w * coef if isinstance(w, (int, Fraction)) else float(w) * float(coef))
        polys.append(hermite(h))
    return poly_combine(weights, polys)


def norm_cdf(x):
    return ndtr(x)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def _scale(n: int, r: int, exact: bool):
    if exact:
        s = _exact_sqrt(Fraction(n))
        if s is not None:
            return 1 / s**r
    return float(n) ** (-r / 2.0)


def _is_exact(x, ell: StandardizedCumulants) -> bool:
    return isinstance(x, (int, Fraction)) and all(isinstance(v, (int, Fraction)) for v in ell.values)


def _dot(beta, basis, x):
    return sum(w * poly_eval(p, x) for w, p in zip(beta, basis))


def _terms(basis_fn, x, spec: ExpansionSpec, ell: StandardizedCumulants) -> list:
    exact = _is_exact(x, ell)
    if not exact:
        x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    out = []
    for r in range(1, spec.j + 1):
        beta = beta_vector(r, ell)
        if not exact:
            beta = tuple(float(b) for b in beta)
        out.append(_scale(spec.n, r, exact) * _dot(beta, basis_fn(r), x))
    return out


def xi_terms(x, spec: ExpansionSpec, ell: StandardizedCumulants) -> list:
    """``[n^{-r/2} f_r(x) for r = 1..j]``."""
    return _terms(a_basis, x, spec, ell)


def eta_terms(y, spec: ExpansionSpec, ell: StandardizedCumulants) -> list:
    """``[n^{-r/2} g_r(y) for r = 1..j]``."""
    return _terms(b_basis, y, spec, ell)


def xi_transform(x, spec: ExpansionSpec, ell: StandardizedCumulants):
    """Truncated normalizing transform ``xi_nj(x) = x - sum_{r<=j} n^{-r/2} f_r(x)``."""
    return x - sum(xi_terms(x, spec, ell), 0)


def eta_transform(y, spec: ExpansionSpec, ell: StandardizedCumulants):
    """Truncated Cornish-Fisher quantile ``eta_nj(y) = y + sum_{r<=j} n^{-r/2} g_r(y)``."""
    return y + sum(eta_terms(y, spec, ell), 0)


def edgeworth_cdf(x, spec: ExpansionSpec, ell: StandardizedCumulants, return_flag: bool = False):
    """``Phi(x) - phi(x) sum_{r<=j} n^{-r/2} U_r(x)``, deliberately unclamped.

    With ``return_flag=True`` also returns whether the value lies outside
    [0, 1] (i.e. whether clamping would have changed it).
    """
    xf = np.asarray(x, dtype=float)
    corr = np.zeros_like(xf)
    for r in range(1, spec.j + 1):
        for idx, coef, h in _EDGEWORTH[r]:
            corr = corr + _scale(spec.n, r, False) * float(ell.product(idx)) * float(coef) * poly_eval(hermite(h), xf)
    val = ndtr(xf) - norm_pdf(xf) * corr
    val = float(val) if np.ndim(val) == 0 else val
    if return_flag:
        outside = bool(np.any((np.asarray(val) < 0) | (np.asarray(val) > 1)))
        return val, outside
    return val
