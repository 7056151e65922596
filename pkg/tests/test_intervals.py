import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import gammaincinv
from scipy.stats import chi2

from hoci.edgeworth import ExpansionSpec, eta_terms
from hoci.errors import DomainError, OrderError, RangeError
from hoci.harness import rate_fit
from hoci.intervals import (
    ConfidenceSpec,
    constant_cumulant_interval,
    endpoints,
    exp_lehmann_n_factor,
    general_interval,
    interval_from_sample,
    monotone_pivot_interval,
    q_polynomial,
    q_recursion,
    s_transform,
    solve_monotone,
)
from hoci.models import CallbackModel, m_vector, m_vector_derivatives, power_lehmann_model

Z975 = 1.959963984540054
Z95 = 1.6448536269514722


def normal_model():
    return CallbackModel(
        mean_fn=lambda th: th,
        mean_inverse_fn=lambda t: t,
        mean_derivative_fn=lambda th: 1.0,
        variance_fn=lambda th: 1.0,
        cumulant_fn=lambda r, th: {1: th, 2: 1.0}.get(r, 0.0),
        sampler=lambda th, size, rng: th + rng.standard_normal(size),
        name="normal",
    )


# ---------------------------------------------------------------- spec type ---


def test_confidence_spec_level_check():
    spec = ConfidenceSpec.symmetric(30, 1, 0.05)
    assert spec.x1 == pytest.approx(Z975, abs=1e-15) and spec.x2 == -spec.x1
    with pytest.raises(DomainError):
        ConfidenceSpec(30, 1, 0.05, 1.9, -1.9)
    with pytest.raises(DomainError):
        ConfidenceSpec(30, 1, 0.0, 1.0, -1.0)
    with pytest.raises(OrderError):
        ConfidenceSpec.symmetric(30, 5, 0.05)
    assert ConfidenceSpec.from_tails(30, 1, 1.0, -2.0).alpha == pytest.approx(1 - 0.8185946141203637, abs=1e-12)


# -------------------------------------------------------------- constant path ---


@pytest.mark.parametrize("j", [0, 2, 4])
def test_normal_model_reduces_to_classical_interval(j):
    res = constant_cumulant_interval(normal_model(), 0.3, ConfidenceSpec.symmetric(100, j, 0.05))
    assert res.lower == pytest.approx(0.3 - Z975 / 10, abs=1e-14)
    assert res.upper == pytest.approx(0.3 + Z975 / 10, abs=1e-14)
    assert res.method == "constant_cumulant"


def test_exp_constant_j2_shift(exp_model, exp_ell):
    # with sigma = theta the endpoint solves Xbar = -1/theta + sigma eta / sqrt n
    n, xbar = 20, -1.0
    r0 = constant_cumulant_interval(exp_model, xbar, ConfidenceSpec.symmetric(n, 0, 0.05))
    r2 = constant_cumulant_interval(exp_model, xbar, ConfidenceSpec.symmetric(n, 2, 0.05))
    for z, b0, b2 in ((Z975, r0.lower, r2.lower), (-Z975, r0.upper, r2.upper)):
        eta = z + sum(eta_terms(z, ExpansionSpec(n, 2), exp_ell))
        assert b0 == pytest.approx(1 - z / math.sqrt(n), rel=1e-12)
        assert b2 == pytest.approx(1 - eta / math.sqrt(n), rel=1e-12)


def test_exp_correction_magnitudes_decrease(exp_model):
    res = constant_cumulant_interval(exp_model, -1.0, ConfidenceSpec(20, 3, 0.1, Z95, -Z95))
    mags = res.corrections
    assert len(mags) == 3
    assert all(b < a for a, b in zip(mags, mags[1:]))
    assert not any("do not decrease" in w for w in res.warnings)


def test_constant_path_rejects_theta_dependent_cumulants(power_model):
    with pytest.raises(DomainError):
        constant_cumulant_interval(power_model, 0.6, ConfidenceSpec.symmetric(50, 1, 0.05))


def test_constant_path_allows_j0_for_power(power_model):
    res = constant_cumulant_interval(power_model, 0.6, ConfidenceSpec.symmetric(50, 0, 0.05))
    assert res.lower < power_model.mean_inverse(0.6) < res.upper
    assert res.warnings  # sigma varies with theta


# ----------------------------------------------------------------- pivot path ---


def test_exp_pivot_example(exp_model):
    res = monotone_pivot_interval(exp_model, -1.0, ConfidenceSpec.symmetric(25, 0, 0.10))
    assert res.lower == pytest.approx(1 - Z95 / 5, abs=1e-12)
    assert res.upper == pytest.approx(1 + Z95 / 5, abs=1e-12)
    assert res.lower == pytest.approx(0.671029, abs=5e-7)
    assert res.upper == pytest.approx(1.328971, abs=5e-7)


@pytest.mark.parametrize("xbar", [-0.2, -1.0, -3.5])
def test_exp_pivot_contains_estimate(exp_model, xbar):
    res = monotone_pivot_interval(exp_model, xbar, ConfidenceSpec.symmetric(25, 0, 0.05))
    assert res.lower < -1 / xbar < res.upper
    assert res.estimate == pytest.approx(-1 / xbar)


@pytest.mark.parametrize("j", [0, 1, 2, 3, 4])
def test_exp_pivot_matches_n_factor(exp_model, j):
    xbar, n = -0.7, 30
    res = monotone_pivot_interval(exp_model, xbar, ConfidenceSpec.symmetric(n, j, 0.05))
    assert res.lower == pytest.approx(exp_lehmann_n_factor(Z975, n, j) / 0.7, rel=1e-12)
    assert res.upper == pytest.approx(exp_lehmann_n_factor(-Z975, n, j) / 0.7, rel=1e-12)


def test_chi2_quantile_anchor():
    # 2n N_n4(-x) against the chi^2_{2n} quantile
    n = 15
    exact = chi2.ppf(0.95, 2 * n)
    assert exact == pytest.approx(43.773, abs=5e-4)
    assert 2 * gammaincinv(n, 0.95) == pytest.approx(exact, rel=1e-12)
    approx = 2 * n * exp_lehmann_n_factor(-1.645, n, 4)
    assert approx == pytest.approx(chi2.ppf(ndtr_(1.645), 2 * n), rel=2e-4)
    assert abs(approx - exact) < abs(2 * n * exp_lehmann_n_factor(-1.645, n, 0) - exact)


def ndtr_(x):
    from scipy.special import ndtr

    return float(ndtr(x))


@pytest.mark.parametrize("j", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("xbar", [-0.05, -1.0, -7.0])
def test_pivot_and_constant_agree(exp_model, j, xbar):
    spec = ConfidenceSpec.symmetric(20, j, 0.05)
    a = constant_cumulant_interval(exp_model, xbar, spec)
    b = monotone_pivot_interval(exp_model, xbar, spec)
    assert a.lower == pytest.approx(b.lower, rel=1e-12)
    assert a.upper == pytest.approx(b.upper, rel=1e-12)


def test_exactness_anchor(exp_model):
    # max error of n |Xbar| * endpoint against Gamma(n, 1) quantiles shrinks with j
    n = 15
    worst = []
    for j in range(5):
        errs = []
        for x in (1.282, 1.645, 1.960):
            for xx in (x, -x):
                exact = gammaincinv(n, 1 - ndtr_(xx))
                errs.append(abs(n * exp_lehmann_n_factor(xx, n, j) - exact))
        worst.append(max(errs))
    assert all(b < a for a, b in zip(worst, worst[1:])), worst


def test_pivot_range_error(exp_model):
    # N_n0 < 0 when x > sqrt(n)
    spec = ConfidenceSpec.from_tails(2, 0, 1.5, -1.5)
    with pytest.raises(RangeError):
        monotone_pivot_interval(exp_model, -1.0, spec)


def test_mean_outside_range(exp_model):
    with pytest.raises(RangeError):
        monotone_pivot_interval(exp_model, 0.5, ConfidenceSpec.symmetric(20, 1, 0.05))


# ------------------------------------------------------------- Q and S ---


def test_q_examples(power_model):
    m = power_lehmann_model(1.0)
    assert q_polynomial(m, 0.5, 0.0, 1) == 0.0
    assert q_polynomial(m, 0.5, 1.0, 1) == pytest.approx(-1 / (2 * math.sqrt(3)), rel=1e-14)
    assert q_polynomial(m, 0.5, 1.0, 2) == pytest.approx(-1 / 18, rel=1e-12)
    assert s_transform(m, 0.5, 1.0, 100, 0) == pytest.approx(0.5 - 0.1 / (2 * math.sqrt(3)), rel=1e-14)
    assert s_transform(m, 0.5, 1.0, 100, 1) == pytest.approx(0.5 - 0.1 / (2 * math.sqrt(3)) - 0.01 / 18, rel=1e-12)
    assert s_transform(m, 0.5, 1.0, 100, 1) == pytest.approx(0.470577, abs=5e-7)
    with pytest.raises(OrderError):
        q_polynomial(m, 0.5, 1.0, 4)
    with pytest.raises(OrderError):
        s_transform(m, 0.5, 1.0, 100, 3)


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_s_at_zero_tail_point(t):
    # b_1(0) = -1/6 and b_2(0) = (0, 0), so only -M_2 b_1(0) / n survives
    m = power_lehmann_model(1.0)
    n = 50
    assert s_transform(m, t, 0.0, n, 0) == t
    m2 = m_vector(m, t, 2)[0]
    for j in (1, 2):
        assert s_transform(m, t, 0.0, n, j) == pytest.approx(t + m2 / (6 * n), rel=1e-14, abs=1e-16)


@pytest.mark.parametrize("model_name", ["exp", "power"])
@pytest.mark.parametrize("i", [1, 2, 3])
def test_recursion_matches_closed_forms(exp_model, power_model, model_name, i):
    rng = np.random.default_rng(17 + i)
    model, lo, hi = (exp_model, -3.0, -0.3) if model_name == "exp" else (power_model, 0.15, 0.85)
    for t, x in zip(rng.uniform(lo, hi, 20), rng.uniform(-2.5, 2.5, 20)):
        closed = q_polynomial(model, t, x, i)
        assert q_recursion(model, t, x, i, "numeric") == pytest.approx(closed, rel=1e-7, abs=1e-12)
        assert q_recursion(model, t, x, i, "closed") == pytest.approx(closed, rel=1e-12, abs=1e-14)


def _reversion_oracle(model, t, x, n, order=3):
    """Solve ``Xbar = s + n^{-1/2} sigma(theta) eta(x; theta)`` for ``s = g(theta)`` by root finding.

    eta uses the standardized cumulants at theta = g^{-1}(s) and the first
    ``order - 1`` Cornish-Fisher terms, independent of the M / Q machinery.
    """

    def resid(s):
        th = model.mean_inverse(s)
        ell = model.standardized(th, order + 1)
        eta = x + sum(eta_terms(x, ExpansionSpec(n, order - 1), ell))
        return s + model.sigma(th) * eta / math.sqrt(n) - t

    lo, hi = model.mean_range()
    return brentq(resid, max(lo, t - 0.3), min(hi, t + 0.3) - 1e-9, xtol=1e-15, rtol=1e-15)


@pytest.mark.parametrize("x", [-1.96, 1.2, 1.96])
def test_s_transform_matches_reversion_oracle(power_model, x):
    t = 0.6
    ns = [400, 1600, 6400, 25600]
    full, short = [], []
    for n in ns:
        target = _reversion_oracle(power_model, t, x, n)
        s = s_transform(power_model, t, x, n, 2)
        full.append((n, abs(s - target)))
        # the recursion without the -P_1' Q_2 term
        q3_short = q_recursion(power_model, t, x, 3, "closed") + m_vector_derivatives(power_model, t, 1, 1)[0] * x * q_recursion(
            power_model, t, x, 2, "closed"
        )
        s_short = s - n ** -1.5 * (q_polynomial(power_model, t, x, 3) - q3_short)
        short.append((n, abs(s_short - target)))
    assert rate_fit(full).slope <= -2 + 0.15
    assert rate_fit(short).slope > -1.5 - 0.15
    assert full[-1][1] < short[-1][1]


# ----------------------------------------------------------- general path ---


def test_general_interval_power_example():
    m = power_lehmann_model(1.0)
    spec = ConfidenceSpec.symmetric(100, 1, 0.05)
    res = general_interval(m, 0.5, spec)
    for z, bound in ((Z975, res.lower), (-Z975, res.upper)):
        s = s_transform(m, 0.5, z, 100, 1)
        assert bound == pytest.approx(1 / (1 / s - 1), rel=1e-13)
    assert res.lower < 1.0 < res.upper
    assert res.method == "general_transform"
    assert len(res.corrections) == 2


def test_general_rejects_high_order(power_model):
    with pytest.raises(OrderError):
        general_interval(power_model, 0.6, ConfidenceSpec.symmetric(50, 3, 0.05))


def test_general_vs_constant_first_order(exp_model):
    n = 10**4
    spec = ConfidenceSpec.symmetric(n, 0, 0.05)
    a = general_interval(exp_model, -1.0, spec)
    b = constant_cumulant_interval(exp_model, -1.0, spec)
    assert abs(a.lower - b.lower) <= 5 / n
    assert abs(a.upper - b.upper) <= 5 / n


def test_general_range_error(power_model):
    with pytest.raises(RangeError):
        general_interval(power_model, 0.9, ConfidenceSpec.symmetric(2, 0, 0.05))


# ------------------------------------------------------- shared properties ---

METHOD_FUNCS = {"constant": constant_cumulant_interval, "pivot": monotone_pivot_interval, "general": general_interval}


@pytest.mark.parametrize("method", ["constant", "pivot", "general"])
@pytest.mark.parametrize("j", [0, 1, 2])
def test_degenerate_alpha_one(exp_model, method, j):
    spec = ConfidenceSpec(40, j, 1.0, 0.0, 0.0)
    # zero width always; it sits at the plug-in estimate only for j = 0 since g_1(0) = -ell_3 / 6
    res = METHOD_FUNCS[method](exp_model, -0.8, spec)
    assert res.lower == res.upper
    if j == 0:
        assert res.lower == pytest.approx(1.25, rel=1e-12)


@pytest.mark.parametrize(
    "method, model_name", [("constant", "exp"), ("pivot", "exp"), ("general", "exp"), ("general", "power")]
)
@pytest.mark.parametrize("j", [0, 1, 2])
def test_nesting(exp_model, power_model, method, model_name, j):
    model, xbar = (exp_model, -0.9) if model_name == "exp" else (power_model, 0.62)
    wide = METHOD_FUNCS[method](model, xbar, ConfidenceSpec.symmetric(60, j, 0.01))
    narrow = METHOD_FUNCS[method](model, xbar, ConfidenceSpec.symmetric(60, j, 0.05))
    assert wide.lower <= narrow.lower < narrow.upper <= wide.upper


@pytest.mark.parametrize("method", ["constant", "pivot", "general"])
def test_orientation_swap(exp_model, method):
    spec = ConfidenceSpec.symmetric(60, 2, 0.05)
    flipped = ConfidenceSpec(60, 2, 0.05, spec.x2, spec.x1)
    a = METHOD_FUNCS[method](exp_model, -0.9, spec)
    b = METHOD_FUNCS[method](exp_model, -0.9, flipped)
    assert a.lower < a.upper
    assert (b.lower, b.upper) == (a.upper, a.lower)


def test_interval_from_sample(exp_model):
    rng = np.random.default_rng(5)
    x = exp_model.sample(2.0, 40, rng)
    res = interval_from_sample(exp_model, x, "pivot", 0.05, 2)
    direct = monotone_pivot_interval(exp_model, float(np.mean(x)), ConfidenceSpec.symmetric(40, 2, 0.05))
    assert res == direct
    with pytest.raises(DomainError):
        interval_from_sample(exp_model, x, "bogus", 0.05, 2)
    with pytest.raises(DomainError):
        interval_from_sample(exp_model, [], "pivot", 0.05, 2)


def test_vectorized_endpoints_match_scalar(exp_model, power_model):
    means = np.array([-2.0, -1.0, -0.4])
    v = endpoints("pivot", exp_model, means, Z975, 25, 3)
    for m, e in zip(means, v):
        r = monotone_pivot_interval(exp_model, float(m), ConfidenceSpec.symmetric(25, 3, 0.05))
        assert e == pytest.approx(r.lower, rel=1e-12)
    pm = np.array([0.3, 0.6, 0.8])
    v = endpoints("general", power_model, pm, -Z975, 80, 2)
    for m, e in zip(pm, v):
        assert e == pytest.approx(general_interval(power_model, float(m), ConfidenceSpec.symmetric(80, 2, 0.05)).upper, rel=1e-10)


def test_solve_monotone_basic():
    roots = solve_monotone(lambda th: th**3 - np.array([8.0, 27.0]), np.array([1.0, 1.0]), (0.0, math.inf))
    np.testing.assert_allclose(roots, [2.0, 3.0], rtol=1e-12)
    none = solve_monotone(lambda th: th * 0 + 1.0, np.array([1.0]), (0.0, math.inf))
    assert np.isnan(none[0])
