"""One-parameter families described through their cumulants as functions of theta.

A model is specified directly in X-space (the already-transformed variable
whose sample mean drives inference).  Two Lehmann-alternative families are
built in:

* :class:`ExpLehmann`   - F(x, theta) = exp(theta x) on (-inf, 0]
* :class:`PowerLehmann` - F(x, theta) = x^(nu theta) on [0, 1]

:class:`CallbackModel` wraps user-supplied closed forms.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc
from scipy.stats import kstest

from .edgeworth import StandardizedCumulants, standardized_cumulants
from .errors import DomainError

__all__ = [
    "CumulantModel",
    "ExpLehmann",
    "PowerLehmann",
    "CallbackModel",
    "exp_lehmann_model",
    "power_lehmann_model",
    "raw_to_cumulants",
    "m_vector",
    "m_vector_derivatives",
    "numeric_derivative",
    "validate_model",
    "ModelDiagnostics",
]

MAX_CUMULANT = 6


def raw_to_cumulants(raw: Sequence) -> list:
    """Cumulants kappa_1..kappa_m from raw moments mu'_1..mu'_m.

    Uses ``kappa_n = mu'_n - sum_{k=1}^{n-1} C(n-1, k-1) kappa_k mu'_{n-k}``,
    which gives e.g. ``kappa_3 = mu'_3 - 3 mu'_2 mu'_1 + 2 mu'_1^3``.
    Works elementwise on arrays and exactly on Fractions.
    """
    mu = [1] + list(raw)
    kappa = [None]
    for n in range(1, len(mu)):
        acc = mu[n]
        for k in range(1, n):
            acc = acc - comb(n - 1, k - 1) * kappa[k] * mu[n - k]
        kappa.append(acc)
    return kappa[1:]


class CumulantModel(ABC):
    """Capability contract for a one-parameter family of X-distributions.

    Subclasses provide the mean map and its inverse/derivative, the variance,
    cumulants up to order 6 and an inverse-CDF sampler.  Everything else
    (standardized cumulants, the M-vectors used by the general interval, the
    pivot) is derived here.
    """

    name: str = "model"
    #: open parameter interval
    domain: tuple[float, float] = (-math.inf, math.inf)
    #: closed support of X
    support: tuple[float, float] = (-math.inf, math.inf)
    #: direction of the mean map
    increasing: bool = True
    #: open interval swept by g over the domain
    mean_bounds: tuple[float, float] = (-math.inf, math.inf)

    @abstractmethod
    def mean(self, theta): ...

    @abstractmethod
    def mean_inverse(self, t): ...

    @abstractmethod
    def mean_derivative(self, theta): ...

    @abstractmethod
    def variance(self, theta): ...

    @abstractmethod
    def cumulant(self, r: int, theta): ...

    @abstractmethod
    def sample(self, theta, size, rng: np.random.Generator) -> np.ndarray: ...

    def params(self) -> dict:
        return {}

    def cdf(self, x, theta):
        raise NotImplementedError(f"{self.name} has no closed-form CDF")

    def mean_cdf(self, x, n: int, theta):
        """Exact P(Xbar_n <= x), or None when no oracle is available."""
        return None

    def sigma(self, theta):
        return np.sqrt(self.variance(theta))

    def check_theta(self, theta):
        lo, hi = self.domain
        th = np.asarray(theta, dtype=float)
        if not np.all((th > lo) & (th < hi)):
            raise DomainError(f"{self.name}: theta={theta} outside parameter domain ({lo}, {hi})")

    def mean_range(self) -> tuple[float, float]:
        """Open interval of attainable means."""
        return tuple(self.mean_bounds)

    def in_mean_range(self, t) -> np.ndarray:
        lo, hi = self.mean_range()
        t = np.asarray(t, dtype=float)
        return (t > lo) & (t < hi)

    def cumulants(self, theta, rmax: int) -> list:
        return [self.mean(theta)] + [self.cumulant(r, theta) for r in range(2, rmax + 1)]

    def standardized(self, theta, rmax: int) -> StandardizedCumulants:
        """ell_1..ell_rmax at ``theta``."""
        if rmax > MAX_CUMULANT:
            raise DomainError(f"cumulants available up to order {MAX_CUMULANT}")
        return standardized_cumulants(self.cumulants(theta, max(rmax, 2)))

    def pivot(self, theta, sample_mean, n: int):
        """``Y_n(theta) = sqrt(n) (Xbar - g(theta)) / sigma(theta)``."""
        return math.sqrt(n) * (sample_mean - self.mean(theta)) / self.sigma(theta)

    def m_derivative(self, t, i: int, order: int):
        """Closed-form d^order/dt^order of M_i(t) entries, or None."""
        return None


class ExpLehmann(CumulantModel):
    """X = log U / theta: CDF exp(theta x) on (-inf, 0].

    kappa_r = (-theta)^{-r} (r-1)!, so every standardized cumulant
    ``ell_r = (-1)^r (r-1)!`` is free of theta, and 2 n theta |Xbar| ~ chi2_{2n}.
    The mean ``-1/theta`` is increasing in theta.
    """

    name = "exp-lehmann"
    domain = (0.0, math.inf)
    support = (-math.inf, 0.0)
    increasing = True
    mean_bounds = (-math.inf, 0.0)

    def mean(self, theta):
        return -1 / theta

    def mean_inverse(self, t):
        return -1 / t

    def mean_derivative(self, theta):
        return 1 / theta**2

    def variance(self, theta):
        return 1 / theta**2

    def cumulant(self, r: int, theta):
        if not 1 <= r <= MAX_CUMULANT:
            raise DomainError(f"cumulant order {r} not available")
        return (-theta) ** (-r) * factorial(r - 1)

    def sample(self, theta, size, rng):
        self.check_theta(theta)
        u = 1.0 - rng.random(size)  # (0, 1]
        return np.log(u) / theta

    def cdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, np.exp(theta * np.minimum(x, 0.0)), 1.0)

    def mean_cdf(self, x, n: int, theta):
        # n theta |Xbar| ~ Gamma(n, 1);  Xbar <= x  <=>  n theta |Xbar| >= -n theta x
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, gammaincc(n, -n * theta * np.minimum(x, 0.0)), 1.0)

    def m_derivative(self, t, i: int, order: int):
        # sigma(g^{-1}(t)) = -t and ell is constant, so every M-entry is linear in t
        slope = {1: (-1.0,), 2: (2.0,), 3: (-6.0, 4.0)}[i]
        t = np.asarray(t, dtype=float)
        if order == 1:
            return tuple(s + 0.0 * t for s in slope)
        return tuple(0.0 * t for _ in slope)


@dataclass(frozen=True)
class PowerLehmann(CumulantModel):
    """X = U^{1/(nu theta)}: CDF x^(nu theta) on [0, 1].

    Raw moments ``E X^r = 1 / (1 + r psi)`` with ``psi = 1/(nu theta)``; with
    ``t = g(theta)`` the variance is ``t (1-t)^2 / (2-t)``.  Higher cumulants
    depend on theta, so only the general transform applies beyond order 0.
    """

    nu: float = 1.0
    name = "power-lehmann"
    domain = (0.0, math.inf)
    support = (0.0, 1.0)
    increasing = True
    mean_bounds = (0.0, 1.0)

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DomainError(f"nu must be positive, got {self.nu}")

    def params(self) -> dict:
        return {"nu": self.nu}

    def raw_moment(self, r: int, theta):
        psi = 1 / (self.nu * theta)
        return 1 / (1 + r * psi)

    def mean(self, theta):
        nt = self.nu * theta
        return nt / (nt + 1)

    def mean_inverse(self, t):
        return t / (self.nu * (1 - t))

    def mean_derivative(self, theta):
        return self.nu / (self.nu * theta + 1) ** 2

    def variance(self, theta):
        t = self.mean(theta)
        return t * (1 - t) ** 2 / (2 - t)

    def cumulant(self, r: int, theta):
        # Factored forms in t of the raw-moment conversion.  Each carries a
        # (1-t)^r factor that the unfactored sum loses to cancellation as t -> 1.
        if not 1 <= r <= MAX_CUMULANT:
            raise DomainError(f"cumulant order {r} not available")
        t = self.mean(theta)
        u = 1 - t
        if r == 1:
            return t
        if r == 2:
            return self.variance(theta)
        if r == 3:
            return 2 * t * u**3 * (1 - 2 * t) / ((2 - t) * (3 - 2 * t))
        if r == 4:
            poly = ((6 * t - 17) * t + 12) * t - 2
            return -6 * t * u**4 * poly / ((2 - t) ** 2 * (3 - 2 * t) * (4 - 3 * t))
        if r == 5:
            poly = ((12 * t - 31) * t + 20) * t - 2
            return 24 * t * u**5 * (2 * t - 1) * poly / ((2 - t) ** 2 * (3 - 2 * t) * (4 - 3 * t) * (5 - 4 * t))
        coefs = (240, -1628, 4408, -6075, 4488, -1704, 282, -12)
        poly = 0.0
        for c in coefs:
            poly = poly * t + c
        den = (2 - t) ** 3 * (3 - 2 * t) ** 2 * (4 - 3 * t) * (5 - 4 * t) * (6 - 5 * t)
        return -120 * t * u**6 * poly / den

    def sample(self, theta, size, rng):
        self.check_theta(theta)
        u = 1.0 - rng.random(size)
        return u ** (1.0 / (self.nu * theta))

    def cdf(self, x, theta):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return x ** (self.nu * theta)

    # closed forms in t = g(theta)
    @staticmethod
    def m1_closed(t):
        """``M_1(t) = (1 - t) (2/t - 1)^{-1/2}``."""
        return (1 - t) * (2 / t - 1) ** -0.5

    @staticmethod
    def m2_closed(t):
        """``M_2(t) = kappa_3 / sigma^2 = 2 (1-t)(1-2t) / (3-2t)``."""
        return 2 * (1 - t) * (1 - 2 * t) / (3 - 2 * t)

    @staticmethod
    def half_d_m1_squared(t):
        """``D_t M_1(t)^2 / 2 = (1-t)(1 - 3t + t^2) / (2-t)^2``."""
        return (1 - t) * (1 - 3 * t + t * t) / (2 - t) ** 2

    def m_derivative(self, t, i: int, order: int):
        t = np.asarray(t, dtype=float)
        if i == 1:
            if order == 1:
                return ((1 - 3 * t + t * t) / (np.sqrt(t) * (2 - t) ** 1.5),)
            return (-(1 + t) / (t**1.5 * (2 - t) ** 2.5),)
        if i == 2:
            if order == 1:
                return (-2 * (4 * t * t - 12 * t + 7) / (3 - 2 * t) ** 2,)
            return (16 / (3 - 2 * t) ** 3,)
        return None


@dataclass(frozen=True)
class CallbackModel(CumulantModel):
    """A model assembled from user callbacks.

    ``cumulant(r, theta)`` must cover 2 <= r <= 6 (or as far as the requested
    expansion order needs).  ``sampler(theta, size, rng)`` draws X.
    """

    mean_fn: Callable = None
    mean_inverse_fn: Callable = None
    mean_derivative_fn: Callable = None
    variance_fn: Callable = None
    cumulant_fn: Callable = None
    sampler: Callable = None
    name: str = "custom"
    domain: tuple = (-math.inf, math.inf)
    support: tuple = (-math.inf, math.inf)
    increasing: bool = True
    mean_bounds: tuple = (-math.inf, math.inf)
    cdf_fn: Callable | None = None

    def mean(self, theta):
        return self.mean_fn(theta)

    def mean_inverse(self, t):
        return self.mean_inverse_fn(t)

    def mean_derivative(self, theta):
        return self.mean_derivative_fn(theta)

    def variance(self, theta):
        return self.variance_fn(theta)

    def cumulant(self, r, theta):
        return self.cumulant_fn(r, theta)

    def sample(self, theta, size, rng):
        return self.sampler(theta, size, rng)

    def cdf(self, x, theta):
        if self.cdf_fn is None:
            return super().cdf(x, theta)
        return self.cdf_fn(x, theta)



def exp_lehmann_model() -> ExpLehmann:
    return ExpLehmann()


def power_lehmann_model(nu: float) -> PowerLehmann:
    return PowerLehmann(nu=nu)


# M-vectors ---------------------------------------------------------------

_M_SIZES = {1: 1, 2: 1, 3: 2}


def m_vector(model: CumulantModel, t, i: int) -> tuple:
    """``M_i(t) = sigma * beta_{i-1}`` evaluated at ``theta = g^{-1}(t)``.

    M_1 = sigma, M_2 = kappa_3 / sigma^2, M_3 = (kappa_4 / sigma^3, -kappa_3^2 / sigma^5).
    """
    if i not in _M_SIZES:
        raise DomainError(f"M_i is available for i in 1..3, got {i}")
    if not np.all(model.in_mean_range(t)):
        raise DomainError(f"t={t} outside the range of the mean map {model.mean_range()}")
    theta = model.mean_inverse(t)
    s = model.sigma(theta)
    if i == 1:
        return (s,)
    k3 = model.cumulant(3, theta)
    if i == 2:
        return (k3 / s**2,)
    k4 = model.cumulant(4, theta)
    return (k4 / s**3, -(k3**2) / s**5)


def numeric_derivative(f: Callable, t, order: int, h=None):
    """Central difference with one Richardson step (error O(h^4)).

    Default steps: ``max(1e-5, 1e-5 |t|)`` for first derivatives and
    ``max(1e-3, 1e-3 |t|)`` for second derivatives, where the smaller step
    would be swamped by rounding.
    """
    t = np.asarray(t, dtype=float)
    if h is None:
        base = 1e-5 if order == 1 else 1e-3
        h = np.maximum(base, base * np.abs(t))

    def d(step):
        if order == 1:
            return (np.asarray(f(t + step)) - np.asarray(f(t - step))) / (2 * step)
        if order == 2:
            return (np.asarray(f(t + step)) - 2 * np.asarray(f(t)) + np.asarray(f(t - step))) / step**2
        raise ValueError("order must be 1 or 2")

    out = (4 * d(h / 2) - d(h)) / 3
    return float(out) if np.ndim(out) == 0 else out


def m_vector_derivatives(model: CumulantModel, t, i: int, order: int, method: str = "auto") -> tuple:
    """t-derivatives of the entries of ``M_i(t)``.

    ``method="auto"`` uses the model's closed forms when it has them and
    finite differences otherwise; ``"numeric"`` / ``"closed"`` force a path.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if method in ("auto", "closed"):
        closed = model.m_derivative(t, i, order)
        if closed is not None:
            return tuple(float(c) if np.ndim(c) == 0 else c for c in closed)
        if method == "closed":
            raise DomainError(f"{model.name} has no closed-form derivative for M_{i}")
    tt = np.asarray(t, dtype=float)
    base = 1e-5 if order == 1 else 1e-3
    h = np.maximum(base, base * np.abs(tt))
    lo, hi = model.mean_range()
    if np.any(tt - h <= lo) or np.any(tt + h >= hi):
        raise DomainError(f"t={t} too close to the boundary of the mean range for the difference stencil")
    k = _M_SIZES[i]
    return tuple(
        numeric_derivative(lambda s, e=e: m_vector(model, s, i)[e], tt, order, h=h) for e in range(k)
    )


# validation --------------------------------------------------------------


@dataclass
class ModelDiagnostics:
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def validate_model(
    model: CumulantModel,
    theta_range: tuple[float, float],
    *,
    n_grid: int = 101,
    draws: int = 10**6,
    ks_draws: int = 10**5,
    seed: int = 20240101,
) -> ModelDiagnostics:
    """Consistency checks of a model on ``[theta_lo, theta_hi]``.

    * mean map strictly monotone (in the declared direction) on the grid
    * ``g^{-1}(g(theta)) == theta`` to 1e-12 relative
    * ``kappa_2 == sigma^2`` to 1e-10 relative
    * sampler mean within 5 standard errors of g(theta) at three grid points
    * Kolmogorov-Smirnov distance below 1.95/sqrt(ks_draws) when a CDF exists
    """
    diag = ModelDiagnostics()
    grid = np.linspace(theta_range[0], theta_range[1], n_grid)
    g = np.array([float(model.mean(th)) for th in grid])
    dg = np.diff(g)
    diag.checks["monotone"] = bool(np.all(dg > 0) if model.increasing else np.all(dg < 0))

    back = np.array([float(model.mean_inverse(v)) for v in g])
    rel = np.max(np.abs(back - grid) / np.maximum(np.abs(grid), np.finfo(float).tiny))
    diag.details["inverse_max_rel_err"] = float(rel)
    diag.checks["inverse"] = bool(rel <= 1e-12)

    var = np.array([float(model.variance(th)) for th in grid])
    k2 = np.array([float(model.cumulant(2, th)) for th in grid])
    vrel = np.max(np.abs(k2 - var) / np.abs(var))
    diag.details["variance_max_rel_err"] = float(vrel)
    diag.checks["variance_positive"] = bool(np.all(var > 0))
    diag.checks["variance_consistency"] = bool(vrel <= 1e-10)

    points = [grid[0], grid[n_grid // 2], grid[-1]]
    ss = np.random.SeedSequence(seed)
    zs, kss = [], []
    has_cdf = True
    for th, child in zip(points, ss.spawn(len(points))):
        rng = np.random.Generator(np.random.Philox(child))
        x = model.sample(th, draws, rng)
        se = math.sqrt(float(model.variance(th)) / draws)
        zs.append(abs(float(np.mean(x)) - float(model.mean(th))) / se)
        try:
            d = kstest(x[:ks_draws], lambda v, th=th: model.cdf(v, th)).statistic
        except NotImplementedError:
            has_cdf = False
            continue
        kss.append(float(d))
    diag.details["sampler_mean_z"] = zs
    diag.checks["sampler_mean"] = bool(max(zs) < 5.0)
    if has_cdf:
        diag.details["ks_distance"] = kss
        diag.checks["sampler_ks"] = bool(max(kss) < 1.95 / math.sqrt(ks_draws))
    return diag
