"""Efficiency and robustness of the mean-of-transformed-sample estimator.

The estimator is ``theta_hat = g^{-1}(mean of h(Y_i))``.  Its influence
function is ``(h(y) - g(theta)) / g'(theta)`` and its asymptotic variance is
``V(theta, h) = sigma(theta)^2 / g'(theta)^2``.  The Lehmann families here
share the base law ``R(y, theta) = F0(y)^theta`` with ``F0(y) = exp(y)`` on
``(-inf, 0]`` and differ only in the transform ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .models import CumulantModel, ExpLehmann, PowerLehmann

__all__ = [
    "TransformedFamily",
    "exp_lehmann_family",
    "power_lehmann_family",
    "influence_value",
    "asymptotic_variance",
    "influence_mean",
    "relative_efficiency",
    "fisher_score",
    "induced_mean",
]

# exp(-40) ~ 4e-18 of base mass lies beyond -40/theta
_TAIL = 40.0


@dataclass(frozen=True)
class TransformedFamily:
    """Base family ``R(y, theta)`` observed through a fixed transform ``X = h(Y)``.

    ``model`` is the induced X-space model; ``mle_variance(theta)`` is the
    asymptotic variance of the maximum likelihood estimator, when known.
    """

    name: str
    base_pdf: Callable
    base_support: Callable
    h: Callable
    h_bounded: bool
    model: CumulantModel
    mle_variance: Callable | None = None
    log_f0: Callable | None = None


def _lehmann_pdf(theta):
    return lambda y: theta * np.exp(theta * y)


def _lehmann_support(theta):
    return (-_TAIL / theta, 0.0)


def exp_lehmann_family() -> TransformedFamily:
    """``h = log F0`` (the identity on this base): the score-equivalent transform."""
    return TransformedFamily(
        name="exp-lehmann",
        base_pdf=lambda y, th: _lehmann_pdf(th)(y),
        base_support=_lehmann_support,
        h=lambda y: y,
        h_bounded=False,
        model=ExpLehmann(),
        mle_variance=lambda th: th**2,
        log_f0=lambda y: y,
    )


def power_lehmann_family(nu: float) -> TransformedFamily:
    """``h = F0^{1/nu}``, bounded in [0, 1]."""
    model = PowerLehmann(nu=nu)
    return TransformedFamily(
        name="power-lehmann",
        base_pdf=lambda y, th: _lehmann_pdf(th)(y),
        base_support=_lehmann_support,
        h=lambda y: np.exp(y / nu),
        h_bounded=True,
        model=model,
        mle_variance=lambda th: th**2,
        log_f0=lambda y: y,
    )


def _gdot(family: TransformedFamily, theta):
    d = family.model.mean_derivative(theta)
    if d == 0:
        raise DomainError(f"g'({theta}) = 0: theta is not identifiable from the mean")
    return d


def influence_value(family: TransformedFamily, y, theta):
    """``I_theta(y) = (h(y) - g(theta)) / g'(theta)``."""
    family.model.check_theta(theta)
    return (family.h(y) - family.model.mean(theta)) / _gdot(family, theta)


def _integrate(family, fn, theta):
    a, b = family.base_support(theta)
    val, _ = quad(lambda y: fn(y) * family.base_pdf(y, theta), a, b, epsabs=1e-10, epsrel=1e-12, limit=200)
    return val


def asymptotic_variance(family: TransformedFamily, theta, method: str = "closed") -> float:
    """``V(theta, h)``: ``sigma^2 / g'^2`` or, with ``method="quadrature"``, the integral of ``I_theta^2``."""
    if method == "closed":
        family.model.check_theta(theta)
        return float(family.model.variance(theta) / _gdot(family, theta) ** 2)
    if method == "quadrature":
        return _integrate(family, lambda y: influence_value(family, y, theta) ** 2, theta)
    raise ValueError(f"unknown method {method!r}")


def influence_mean(family: TransformedFamily, theta) -> float:
    return _integrate(family, lambda y: influence_value(family, y, theta), theta)


def induced_mean(family: TransformedFamily, theta) -> float:
    """``g(theta)`` recomputed as the integral of h against the base law."""
    return _integrate(family, family.h, theta)


def relative_efficiency(family: TransformedFamily, theta) -> float:
    """``V_MLE / V(theta, h)``, in (0, 1]."""
    if family.mle_variance is None:
        raise DomainError(f"{family.name}: MLE variance unavailable")
    v = asymptotic_variance(family, theta)
    if v == 0:
        raise DomainError("asymptotic variance is zero")
    return float(family.mle_variance(theta) / v)


def fisher_score(family: TransformedFamily, y, theta):
    """Score of a Lehmann family: ``1/theta + log F0(y)``."""
    if family.log_f0 is None:
        raise DomainError(f"{family.name}: score only available for Lehmann families")
    return 1.0 / theta + family.log_f0(y)
