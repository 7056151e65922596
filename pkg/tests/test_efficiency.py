import math

import numpy as np
import pytest
from scipy.integrate import quad

from hoci.efficiency import (
    asymptotic_variance,
    exp_lehmann_family,
    fisher_score,
    induced_mean,
    influence_mean,
    influence_value,
    power_lehmann_family,
    relative_efficiency,
)
from hoci.errors import DomainError

FAMILIES = {
    "exp": exp_lehmann_family(),
    "power1": power_lehmann_family(1.0),
    "power2": power_lehmann_family(2.0),
}
THETAS = [0.5, 1.0, 3.0]


def test_influence_examples():
    fam = FAMILIES["exp"]
    for y in (-3.0, -1.0, -0.2):
        assert influence_value(fam, y, 1.0) == pytest.approx(y + 1.0, abs=1e-15)
    p = FAMILIES["power2"]
    # h(y) = g(theta) where exp(y / nu) = 2/3
    y0 = 2.0 * math.log(2 / 3)
    assert influence_value(p, y0, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_boundedness_flags():
    assert not FAMILIES["exp"].h_bounded
    assert FAMILIES["power1"].h_bounded


def test_variance_examples():
    assert asymptotic_variance(FAMILIES["exp"], 1.0) == pytest.approx(1.0, rel=1e-15)
    assert asymptotic_variance(FAMILIES["exp"], 2.5) == pytest.approx(6.25, rel=1e-14)
    assert asymptotic_variance(FAMILIES["power1"], 1.0) == pytest.approx(4 / 3, rel=1e-14)
    with pytest.raises(ValueError):
        asymptotic_variance(FAMILIES["exp"], 1.0, method="bogus")
    with pytest.raises(DomainError):
        asymptotic_variance(FAMILIES["exp"], -1.0)


@pytest.mark.parametrize("name", sorted(FAMILIES))
@pytest.mark.parametrize("theta", THETAS)
def test_quadrature_matches_closed_form(name, theta):
    fam = FAMILIES[name]
    closed = asymptotic_variance(fam, theta)
    assert asymptotic_variance(fam, theta, method="quadrature") == pytest.approx(closed, rel=1e-6)


@pytest.mark.parametrize("name", sorted(FAMILIES))
@pytest.mark.parametrize("theta", THETAS)
def test_influence_has_zero_mean(name, theta):
    assert abs(influence_mean(FAMILIES[name], theta)) < 1e-8


@pytest.mark.parametrize("name", sorted(FAMILIES))
@pytest.mark.parametrize("theta", THETAS)
def test_induced_mean_matches_model(name, theta):
    fam = FAMILIES[name]
    assert induced_mean(fam, theta) == pytest.approx(fam.model.mean(theta), rel=1e-10)


def test_efficiency_examples():
    assert relative_efficiency(FAMILIES["exp"], 1.0) == pytest.approx(1.0, rel=1e-15)
    assert relative_efficiency(FAMILIES["power2"], 1.0) == pytest.approx(8 / 9, rel=1e-14)
    assert relative_efficiency(power_lehmann_family(100.0), 1.0) == pytest.approx(1 - 101**-2, rel=1e-13)
    assert relative_efficiency(power_lehmann_family(100.0), 1.0) == pytest.approx(0.999902, abs=5e-7)


@pytest.mark.parametrize("nu", [0.3, 1.0, 2.0, 7.0])
@pytest.mark.parametrize("theta", THETAS)
def test_power_efficiency_formula(nu, theta):
    eff = relative_efficiency(power_lehmann_family(nu), theta)
    assert eff == pytest.approx(1 - (nu * theta + 1) ** -2, rel=1e-12)
    assert 0 < eff < 1


@pytest.mark.parametrize("theta", THETAS)
def test_fisher_score_is_centred_with_unit_information(theta):
    fam = FAMILIES["exp"]
    a, b = fam.base_support(theta)
    pdf = lambda y: fam.base_pdf(y, theta)
    mean, _ = quad(lambda y: fisher_score(fam, y, theta) * pdf(y), a, b, epsabs=1e-12)
    info, _ = quad(lambda y: fisher_score(fam, y, theta) ** 2 * pdf(y), a, b, epsabs=1e-12)
    assert abs(mean) < 1e-8
    # MLE variance theta^2 is the inverse information
    assert 1 / info == pytest.approx(fam.mle_variance(theta), rel=1e-8)


def test_asymptotic_normality_smoke():
    fam = FAMILIES["power2"]
    model, theta, n, reps = fam.model, 1.0, 400, 10**4
    rng = np.random.Generator(np.random.Philox(2024))
    means = model.sample(theta, (reps, n), rng).mean(axis=1)
    z = math.sqrt(n) * (model.mean_inverse(means) - theta) / math.sqrt(asymptotic_variance(fam, theta))
    assert abs(np.var(z, ddof=1) - 1) < 0.05
    assert abs(np.mean(z)) < 0.1
