"""Higher-order confidence intervals for one-parameter families from a sample mean.

Edgeworth and Cornish-Fisher expansions, the theta-dependent correction
transform, built-in Lehmann-alternative models and a coverage harness.
"""

from .edgeworth import (
    ExpansionSpec,
    StandardizedCumulants,
    a_basis,
    b_basis,
    beta_vector,
    edgeworth_cdf,
    edgeworth_polynomial,
    eta_transform,
    standardized_cumulants,
    xi_transform,
)
from .errors import DomainError, HociError, OrderError, RangeError
from .intervals import (
    ConfidenceSpec,
    IntervalResult,
    constant_cumulant_interval,
    general_interval,
    interval_from_sample,
    monotone_pivot_interval,
    q_polynomial,
    s_transform,
)
from .models import (
    CallbackModel,
    CumulantModel,
    ExpLehmann,
    PowerLehmann,
    exp_lehmann_model,
    m_vector,
    m_vector_derivatives,
    power_lehmann_model,
    validate_model,
)
from .poly import Polynomial, hermite, poly_combine, poly_derivative, poly_eval

__version__ = "0.1.0"
