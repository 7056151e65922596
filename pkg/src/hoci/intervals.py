"""Confidence intervals for theta from the sample mean.

Three constructions, all driven by the tail points ``x1 > x2`` with
``Phi(x1) - Phi(x2) = 1 - alpha``:

``constant``  quantile of ``Xbar - g(theta)`` is ``n^{-1/2} sigma eta_nj(x)``,
              inverted through g.  Needs theta-free standardized cumulants.
``pivot``     solves ``Y_n(theta) = eta_nj(x)`` for theta by bisection.
``general``   ``g^{-1}(S_nxj(Xbar))`` with ``S_nxj(t) = t + sum_{i<=j+1} n^{-i/2} Q_i(t)``,
              valid when every cumulant moves with theta (j <= 2).

The scalar entry points return :class:`IntervalResult`; :func:`endpoints` is the
vectorized core used by the Monte Carlo harness (NaN marks a failed endpoint).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import ndtri

from .edgeworth import (
    ExpansionSpec,
    StandardizedCumulants,
    b_basis,
    eta_terms,
    eta_transform,
    norm_cdf,
)
from .errors import DomainError, OrderError, RangeError
from .models import CumulantModel, m_vector, m_vector_derivatives, numeric_derivative
from .poly import poly_eval

__all__ = [
    "METHODS",
    "GENERAL_MAX_ORDER",
    "ConfidenceSpec",
    "IntervalResult",
    "constant_cumulant_interval",
    "monotone_pivot_interval",
    "general_interval",
    "interval_from_sample",
    "endpoints",
    "q_polynomial",
    "q_recursion",
    "s_terms",
    "s_transform",
    "exp_lehmann_n_factor",
]

METHODS = ("constant", "pivot", "general")
GENERAL_MAX_ORDER = 2
_METHOD_NAMES = {"constant": "constant_cumulant", "pivot": "monotone_pivot", "general": "general_transform"}


@dataclass(frozen=True)
class ConfidenceSpec:
    """Sample size, expansion order and the two tail points.

    Build with :meth:`symmetric` for the usual ``x1 = -x2 = Phi^{-1}(1 - alpha/2)``.
    Passing ``x1 < x2`` is allowed; the interval bounds then come out swapped.
    """

    n: int
    j: int
    alpha: float
    x1: float
    x2: float

    def __post_init__(self):
        ExpansionSpec(self.n, self.j)
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        level = abs(norm_cdf(self.x1) - norm_cdf(self.x2))
        if abs(level - (1 - self.alpha)) > 1e-10:
            raise DomainError(
                f"tail points x1={self.x1}, x2={self.x2} give level {level}, not 1 - alpha = {1 - self.alpha}"
            )

    @classmethod
    def symmetric(cls, n: int, j: int, alpha: float) -> "ConfidenceSpec":
        z = float(ndtri(1 - alpha / 2))
        return cls(n=n, j=j, alpha=alpha, x1=z, x2=-z)

    @classmethod
    def from_tails(cls, n: int, j: int, x1: float, x2: float) -> "ConfidenceSpec":
        return cls(n=n, j=j, alpha=1 - abs(norm_cdf(x1) - norm_cdf(x2)), x1=x1, x2=x2)

    @property
    def expansion(self) -> ExpansionSpec:
        return ExpansionSpec(self.n, self.j)


@dataclass(frozen=True)
class IntervalResult:
    lower: float
    upper: float
    method: str
    j: int
    n: int
    alpha: float
    x1: float
    x2: float
    estimate: float
    corrections: tuple = ()
    warnings: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["corrections"] = list(self.corrections)
        d["warnings"] = list(self.warnings)
        return d


# root finding --------------------------------------------------------------


def _outward(theta0, bound, k):
    """Point k doublings from theta0 toward ``bound``."""
    if math.isfinite(bound):
        return bound + (theta0 - bound) * 2.0**-k
    sign = 1.0 if bound > 0 else -1.0
    return np.where(theta0 * sign > 0, theta0 * 2.0**k, theta0 + sign * 2.0**k * np.maximum(1.0, np.abs(theta0)))


def solve_monotone(fun, theta0, domain, max_expand: int = 80, max_iter: int = 200):
    """Vectorized root of a monotone ``fun`` by bracketed bisection.

    The bracket grows from ``theta0`` toward both ends of ``domain`` until the
    sign changes; bisection then runs to full double precision (capped at
    ``max_iter`` halvings).  Elements that cannot be bracketed come back NaN.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    f0 = np.asarray(fun(theta0), dtype=float)
    lo = theta0.copy()
    hi = theta0.copy()
    found = f0 == 0
    root = np.where(found, theta0, np.nan)
    flo = f0.copy()
    done = found | ~np.isfinite(f0)
    for k in range(1, max_expand + 1):
        if np.all(done):
            break
        for bound in domain:
            cand = _outward(theta0, bound, k)
            with np.errstate(all="ignore"):
                fc = np.asarray(fun(cand), dtype=float)
            hit = ~done & np.isfinite(fc) & (np.sign(fc) != np.sign(f0))
            lo = np.where(hit, np.minimum(theta0, cand), lo)
            hi = np.where(hit, np.maximum(theta0, cand), hi)
            flo = np.where(hit, np.where(cand < theta0, fc, f0), flo)
            done = done | hit
    active = done & ~found & np.isfinite(f0)
    for _ in range(max_iter):
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        stalled = (mid <= lo) | (mid >= hi)
        with np.errstate(all="ignore"):
            fm = np.asarray(fun(mid), dtype=float)
        exact = active & (fm == 0)
        root = np.where(exact | (active & stalled), mid, root)
        step = active & ~stalled & ~exact
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(step & left, mid, lo)
        flo = np.where(step & left, fm, flo)
        hi = np.where(step & ~left, mid, hi)
        active = step
    root = np.where(active, 0.5 * (lo + hi), root)
    return root


# helpers -------------------------------------------------------------------


def _theta_grid(model: CumulantModel, theta_hat: float, npts: int) -> np.ndarray:
    lo, hi = model.domain
    if lo == 0 and theta_hat > 0:
        return theta_hat * np.geomspace(0.5, 2.0, npts)
    width = 0.5 * max(abs(theta_hat), 1.0)
    pts = theta_hat + np.linspace(-width, width, npts)
    return np.clip(pts, lo + 1e-9 * width if math.isfinite(lo) else -np.inf, hi - 1e-9 * width if math.isfinite(hi) else np.inf)


def _check_theta_free_ell(model: CumulantModel, theta_hat: float, j: int) -> StandardizedCumulants:
    """Standardized cumulants ell_3..ell_{j+2}, checked constant on a 5-point grid."""
    rmax = j + 2
    ref = model.standardized(theta_hat, rmax)
    if j == 0:
        return ref
    for th in _theta_grid(model, theta_hat, 5):
        other = model.standardized(th, rmax)
        for r in range(3, rmax + 1):
            a, b = float(ref[r]), float(other[r])
            if abs(a - b) > 1e-10 * max(abs(a), abs(b), 1.0):
                raise DomainError(
                    f"{model.name}: ell_{r} depends on theta ({a} vs {b}); use the general transform"
                )
    return ref


def _sigma_is_constant(model: CumulantModel, theta_hat: float) -> bool:
    s0 = float(model.sigma(theta_hat))
    return all(abs(float(model.sigma(th)) - s0) <= 1e-10 * s0 for th in _theta_grid(model, theta_hat, 5))


def _plugin(model: CumulantModel, means):
    means = np.atleast_1d(np.asarray(means, dtype=float))
    ok = model.in_mean_range(means)
    safe = np.where(ok, means, np.nan)
    with np.errstate(all="ignore"):
        return np.asarray(model.mean_inverse(safe), dtype=float), ok


def _check_order(method: str, j: int):
    if method == "general" and j > GENERAL_MAX_ORDER:
        raise OrderError(f"the general transform supports j <= {GENERAL_MAX_ORDER} (Q_i known for i <= 3), got j={j}")
    ExpansionSpec(1, j)


# vectorized endpoints ------------------------------------------------------


def _constant_endpoints(model, means, x, n, j, ell, sigma_constant):
    theta_hat, ok = _plugin(model, means)
    shift = float(eta_transform(x, ExpansionSpec(n, j), ell)) / math.sqrt(n)
    if sigma_constant:
        target = means - float(model.sigma(np.nanmedian(theta_hat))) * shift
        inside = model.in_mean_range(target)
        with np.errstate(all="ignore"):
            out = np.asarray(model.mean_inverse(np.where(inside, target, np.nan)), dtype=float)
        return np.where(ok & inside, out, np.nan)

    # sigma moves with theta: the quantile is taken at the endpoint itself,
    # i.e. solve g(theta) + sigma(theta) n^{-1/2} eta = Xbar
    def fun(th):
        return model.mean(th) + model.sigma(th) * shift - means_ok

    means_ok = np.where(ok, means, np.nan)
    start = np.where(ok, theta_hat, np.nan)
    return solve_monotone(fun, start, model.domain)


def _pivot_endpoints(model, means, x, n, j, ell):
    theta_hat, ok = _plugin(model, means)
    target = float(eta_transform(x, ExpansionSpec(n, j), ell))
    means_ok = np.where(ok, means, np.nan)

    def fun(th):
        return model.pivot(th, means_ok, n) - target

    return solve_monotone(fun, np.where(ok, theta_hat, np.nan), model.domain)


def _general_endpoints(model, means, x, n, j):
    t = np.atleast_1d(np.asarray(means, dtype=float))
    ok = model.in_mean_range(t)
    out = np.full(t.shape, np.nan)
    if not np.any(ok):
        return out
    try:
        s = s_transform(model, t[ok], x, n, j)
    except DomainError:
        # stencil trouble near the boundary: fall back element by element
        s = np.full(int(ok.sum()), np.nan)
        for k, tk in enumerate(t[ok]):
            try:
                s[k] = s_transform(model, float(tk), x, n, j)
            except DomainError:
                pass
    s = np.asarray(s, dtype=float)
    inside = model.in_mean_range(s)
    with np.errstate(all="ignore"):
        v = np.asarray(model.mean_inverse(np.where(inside, s, np.nan)), dtype=float)
    out[ok] = np.where(inside, v, np.nan)
    return out


def endpoints(method: str, model: CumulantModel, means, x: float, n: int, j: int) -> np.ndarray:
    """Parameter value attached to tail point ``x`` for each sample mean (NaN = failure)."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    _check_order(method, j)
    means = np.atleast_1d(np.asarray(means, dtype=float))
    if method == "general":
        return _general_endpoints(model, means, x, n, j)
    theta_hat, ok = _plugin(model, means)
    if not np.any(ok):
        return np.full(means.shape, np.nan)
    ref = float(np.nanmedian(theta_hat))
    ell = _check_theta_free_ell(model, ref, j)
    if method == "constant":
        return _constant_endpoints(model, means, x, n, j, ell, _sigma_is_constant(model, ref))
    return _pivot_endpoints(model, means, x, n, j, ell)


# Q polynomials and the S transform -----------------------------------------


def _b(r, x):
    return tuple(poly_eval(p, x) for p in b_basis(r))


def q_polynomial(model: CumulantModel, t, x: float, i: int, derivatives: str = "auto"):
    """Closed-form ``Q_i(t)`` at tail point ``x`` for i = 1, 2, 3.

    Q_1 = -M_1 x
    Q_2 = -M_2 b_1(x) + x^2 D(M_1^2)/2
    Q_3 = -M_3' b_2(x) + x b_1(x) D(M_1 M_2) - x^3 D^2(M_1^3)/6
    """
    if i not in (1, 2, 3):
        raise OrderError(f"Q_i is available for i in 1..3, got {i}")
    (m1,) = m_vector(model, t, 1)
    if i == 1:
        return -m1 * x
    (b1,) = _b(1, x)
    (m2,) = m_vector(model, t, 2)
    (d1,) = m_vector_derivatives(model, t, 1, 1, derivatives)
    if i == 2:
        return -m2 * b1 + x * x * m1 * d1
    b2 = _b(2, x)
    m3 = m_vector(model, t, 3)
    (d2,) = m_vector_derivatives(model, t, 2, 1, derivatives)
    (dd1,) = m_vector_derivatives(model, t, 1, 2, derivatives)
    return (
        -(m3[0] * b2[0] + m3[1] * b2[1])
        + x * b1 * (d1 * m2 + m1 * d2)
        - x**3 * (m1 * d1 * d1 + 0.5 * m1 * m1 * dd1)
    )


def _p_function(model, x, i):
    """``P_i(t) = M_i(t)' b_{i-1}(x)`` with ``b_0(x) = x``."""
    if i == 1:
        return lambda t: m_vector(model, t, 1)[0] * x
    b = _b(i - 1, x)
    return lambda t: sum(m * bb for m, bb in zip(m_vector(model, t, i), b))


def q_recursion(model: CumulantModel, t, x: float, i: int, derivatives: str = "numeric"):
    """``Q_i`` from the series-reversion recursion.

    Q_1 = -P_1,  Q_2 = -P_2 - P_1' Q_1,  Q_3 = -P_3 - P_2' Q_1 - P_1' Q_2 - P_1'' Q_1^2 / 2

    ``derivatives="numeric"`` differentiates P_i(t) directly by finite
    differences; ``"closed"`` uses the model's closed-form M-derivatives.
    """
    if i not in (1, 2, 3):
        raise OrderError(f"Q_i is available for i in 1..3, got {i}")
    if derivatives not in ("numeric", "closed"):
        raise ValueError("derivatives must be 'numeric' or 'closed'")
    p1 = _p_function(model, x, 1)

    def dp(k, order):
        if derivatives == "numeric":
            return numeric_derivative(_p_function(model, x, k), t, order)
        dm = m_vector_derivatives(model, t, k, order, "closed")
        b = (x,) if k == 1 else _b(k - 1, x)
        return sum(d * bb for d, bb in zip(dm, b))

    q1 = -p1(t)
    if i == 1:
        return q1
    dp1 = dp(1, 1)
    q2 = -_p_function(model, x, 2)(t) - dp1 * q1
    if i == 2:
        return q2
    return -_p_function(model, x, 3)(t) - dp(2, 1) * q1 - dp1 * q2 - 0.5 * dp(1, 2) * q1 * q1


def s_terms(model: CumulantModel, t, x: float, n: int, j: int, derivatives: str = "auto") -> list:
    """``[n^{-i/2} Q_i(t) for i = 1..j+1]``."""
    if not 0 <= j <= GENERAL_MAX_ORDER:
        raise OrderError(f"the general transform supports j <= {GENERAL_MAX_ORDER}, got j={j}")
    return [n ** (-i / 2) * q_polynomial(model, t, x, i, derivatives) for i in range(1, j + 2)]


def s_transform(model: CumulantModel, t, x: float, n: int, j: int, derivatives: str = "auto"):
    """``S_nxj(t) = t + sum_{i=1}^{j+1} n^{-i/2} Q_i(t)``."""
    return t + sum(s_terms(model, t, x, n, j, derivatives))


# scalar API ----------------------------------------------------------------


def _diverging(mags) -> bool:
    return any(b >= a and b > 0 for a, b in zip(mags, mags[1:]))


def _finish(model, sample_mean, spec, method, e1, e2, mags, extra_warnings=()):
    if not (np.isfinite(e1) and np.isfinite(e2)):
        bad = [name for name, e in (("x1", e1), ("x2", e2)) if not np.isfinite(e)]
        raise RangeError(
            f"{_METHOD_NAMES[method]} endpoint(s) at {', '.join(bad)} fall outside the parameter domain "
            f"for mean {sample_mean} (n={spec.n}, j={spec.j})"
        )
    warnings = list(extra_warnings)
    if _diverging(mags):
        warnings.append("correction magnitudes do not decrease; n may be too small for this order")
    estimate = float(model.mean_inverse(sample_mean))
    return IntervalResult(
        lower=float(e1),
        upper=float(e2),
        method=_METHOD_NAMES[method],
        j=spec.j,
        n=spec.n,
        alpha=spec.alpha,
        x1=spec.x1,
        x2=spec.x2,
        estimate=estimate,
        corrections=tuple(float(m) for m in mags),
        warnings=tuple(warnings),
    )


def _require_mean(model, sample_mean):
    if not model.in_mean_range(sample_mean):
        raise RangeError(f"sample mean {sample_mean} outside the range {model.mean_range()} of {model.name}")


def _eta_magnitudes(spec: ConfidenceSpec, ell) -> list:
    es = ExpansionSpec(spec.n, spec.j)
    t1 = eta_terms(spec.x1, es, ell)
    t2 = eta_terms(spec.x2, es, ell)
    return [max(abs(float(a)), abs(float(b))) for a, b in zip(t1, t2)]


def _orient(e_x1, e_x2, x1_is_lower: bool):
    return (e_x1, e_x2) if x1_is_lower else (e_x2, e_x1)


def constant_cumulant_interval(model: CumulantModel, sample_mean: float, spec: ConfidenceSpec) -> IntervalResult:
    """Invert ``Xbar - g(theta)`` at its Cornish-Fisher quantiles ``n^{-1/2} sigma eta_nj(x)``.

    Requires ell_3..ell_{j+2} free of theta.  When sigma also varies with theta
    the quantile is evaluated at the endpoint being solved for.
    """
    _require_mean(model, sample_mean)
    theta_hat = float(model.mean_inverse(sample_mean))
    ell = _check_theta_free_ell(model, theta_hat, spec.j)
    const = _sigma_is_constant(model, theta_hat)
    e = [
        float(_constant_endpoints(model, np.array([sample_mean]), x, spec.n, spec.j, ell, const)[0])
        for x in (spec.x1, spec.x2)
    ]
    lower, upper = _orient(e[0], e[1], model.increasing)
    notes = () if const else ("sigma depends on theta; quantile evaluated at each endpoint",)
    return _finish(model, sample_mean, spec, "constant", lower, upper, _eta_magnitudes(spec, ell), notes)


def _check_pivot_monotone(model, sample_mean, n, theta_hat) -> bool:
    grid = _theta_grid(model, theta_hat, 41)
    y = np.array([float(model.pivot(th, sample_mean, n)) for th in grid])
    d = np.diff(y)
    if np.all(d < 0):
        return False
    if np.all(d > 0):
        return True
    raise DomainError(f"{model.name}: pivot Y_n(theta) is not monotone near theta={theta_hat}")


def monotone_pivot_interval(model: CumulantModel, sample_mean: float, spec: ConfidenceSpec) -> IntervalResult:
    """Solve ``Y_n(theta) = eta_nj(x)`` for theta at both tail points.

    Requires ell_3..ell_{j+2} free of theta; sigma may vary.  For the
    exponential Lehmann model the endpoints are ``N_nj(x) / |Xbar|``.
    """
    _require_mean(model, sample_mean)
    theta_hat = float(model.mean_inverse(sample_mean))
    ell = _check_theta_free_ell(model, theta_hat, spec.j)
    pivot_increasing = _check_pivot_monotone(model, sample_mean, spec.n, theta_hat)
    e = [float(_pivot_endpoints(model, np.array([sample_mean]), x, spec.n, spec.j, ell)[0]) for x in (spec.x1, spec.x2)]
    lower, upper = _orient(e[0], e[1], not pivot_increasing)
    return _finish(model, sample_mean, spec, "pivot", lower, upper, _eta_magnitudes(spec, ell))


def general_interval(model: CumulantModel, sample_mean: float, spec: ConfidenceSpec) -> IntervalResult:
    """``g^{-1}(S_nxj(Xbar))`` at both tail points (j <= 2)."""
    _check_order("general", spec.j)
    _require_mean(model, sample_mean)
    e, mags = [], []
    for x in (spec.x1, spec.x2):
        terms = s_terms(model, sample_mean, x, spec.n, spec.j)
        mags.append([abs(float(q)) for q in terms])
        s = sample_mean + sum(terms)
        if not model.in_mean_range(s):
            raise RangeError(
                f"S_nxj(Xbar) = {float(s)} at x = {x} leaves the range {model.mean_range()} of the mean map"
            )
        e.append(float(model.mean_inverse(s)))
    lower, upper = _orient(e[0], e[1], model.increasing)
    per_order = [max(a, b) for a, b in zip(*mags)]
    return _finish(model, sample_mean, spec, "general", lower, upper, per_order)


_DISPATCH = {
    "constant": constant_cumulant_interval,
    "pivot": monotone_pivot_interval,
    "general": general_interval,
}


def interval_from_sample(model: CumulantModel, samples, method: str, alpha: float, j: int) -> IntervalResult:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("samples must be a nonempty 1-d sequence")
    spec = ConfidenceSpec.symmetric(n=x.size, j=j, alpha=alpha)
    if method not in _DISPATCH:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    return _DISPATCH[method](model, float(np.mean(x)), spec)


def exp_lehmann_n_factor(x, n: int, j: int):
    """``N_nj(x) = 1 - n^{-1/2} eta_nj(x)`` with ell_r = (-1)^r (r-1)!.

    For the exponential Lehmann model the pivot interval is
    ``[N_nj(x1), N_nj(x2)] / |Xbar|``.
    """
    ell = StandardizedCumulants.from_higher(-2, 6, -24, 120)
    return 1 - eta_transform(x, ExpansionSpec(n, j), ell) / math.sqrt(n)
