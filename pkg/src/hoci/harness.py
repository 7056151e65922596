"""Coverage experiments: seeded Monte Carlo plus the exact Gamma oracle for the exponential model.

Replications are split into fixed-size blocks.  Block ``b`` of sample size
``n`` draws from a Philox stream keyed by ``SeedSequence(seed, spawn_key=(n, b))``,
so results do not depend on how many workers process the blocks or in what
order.  Aggregation is integer counting.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc, ndtri

from .edgeworth import ExpansionSpec, eta_terms
from .errors import DomainError, RangeError
from .intervals import METHODS, endpoints, exp_lehmann_n_factor, _check_order
from .models import CumulantModel, ExpLehmann

__all__ = [
    "BLOCK_SIZE",
    "ExperimentSpec",
    "CoverageCell",
    "CoverageReport",
    "RateFit",
    "ReplicationFailureError",
    "run_coverage",
    "exact_coverage_exp_lehmann",
    "rate_fit",
    "block_generator",
]

BLOCK_SIZE = 8192
MAX_FAILURE_RATE = 0.01


class ReplicationFailureError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ExperimentSpec:
    model: CumulantModel
    theta: float
    n_grid: tuple
    alpha: float
    j_list: tuple
    method: str = "pivot"
    reps: int = 10_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "j_list", tuple(int(j) for j in self.j_list))
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise DomainError("n grid must hold positive sample sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise DomainError("n grid must be strictly increasing")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        for j in self.j_list:
            _check_order(self.method, j)
        if int(self.reps) != self.reps or self.reps < 1:
            raise DomainError(f"reps must be a positive integer, got {self.reps}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        self.model.check_theta(self.theta)

    @property
    def tails(self) -> tuple[float, float]:
        z = float(ndtri(1 - self.alpha / 2))
        return z, -z


@dataclass(frozen=True)
class CoverageCell:
    n: int
    j: int
    reps: int
    covered: int
    failures: int
    coverage: float
    mc_se: float
    abs_error: float
    exact_coverage: float | None = None
    exact_abs_error: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    n_used: tuple
    notes: tuple = ()


@dataclass
class CoverageReport:
    spec: ExperimentSpec
    cells: list
    slopes: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def cell(self, n: int, j: int) -> CoverageCell:
        for c in self.cells:
            if c.n == n and c.j == j:
                return c
        raise KeyError((n, j))

    def header(self) -> dict:
        s = self.spec
        return {
            "model": s.model.name,
            "model_params": s.model.params(),
            "theta": s.theta,
            "alpha": s.alpha,
            "method": s.method,
            "reps": s.reps,
            "seed": s.seed,
            "block_size": BLOCK_SIZE,
            "n_grid": list(s.n_grid),
            "j_list": list(s.j_list),
        }


def block_generator(seed: int, n: int, block: int) -> np.random.Generator:
    """Independent Philox stream for replication block ``block`` at sample size ``n``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(n, block))))


def _block_counts(spec: ExperimentSpec, n: int, block: int, size: int):
    rng = block_generator(spec.seed, n, block)
    x = spec.model.sample(spec.theta, (size, n), rng)
    means = x.mean(axis=1)
    x1, x2 = spec.tails
    out = {}
    for j in spec.j_list:
        e1 = endpoints(spec.method, spec.model, means, x1, n, j)
        e2 = endpoints(spec.method, spec.model, means, x2, n, j)
        lo, hi = (e1, e2) if spec.model.increasing else (e2, e1)
        failed = ~(np.isfinite(e1) & np.isfinite(e2))
        covered = ~failed & (lo <= spec.theta) & (spec.theta <= hi)
        out[j] = (int(covered.sum()), int(failed.sum()))
    return out


def _series_diverges(model: CumulantModel, theta: float, n: int, j: int, x: float) -> bool:
    if j < 2:
        return False
    ell = model.standardized(theta, j + 2)
    mags = [abs(float(t)) for t in eta_terms(x, ExpansionSpec(n, j), ell)]
    return any(b >= a for a, b in zip(mags, mags[1:]))


def run_coverage(spec: ExperimentSpec) -> CoverageReport:
    """Monte Carlo coverage of the chosen interval for every (n, j) cell."""
    tasks = []
    for n in spec.n_grid:
        nblocks = math.ceil(spec.reps / BLOCK_SIZE)
        for b in range(nblocks):
            size = min(BLOCK_SIZE, spec.reps - b * BLOCK_SIZE)
            tasks.append((n, b, size))
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(lambda t: _block_counts(spec, *t), tasks))
    else:
        results = [_block_counts(spec, *t) for t in tasks]

    totals = {(n, j): [0, 0] for n in spec.n_grid for j in spec.j_list}
    for (n, _, _), res in zip(tasks, results):
        for j, (cov, fail) in res.items():
            totals[n, j][0] += cov
            totals[n, j][1] += fail

    nominal = 1 - spec.alpha
    oracle = isinstance(spec.model, ExpLehmann) and spec.method in ("pivot", "constant")
    x1, x2 = spec.tails
    cells, notes = [], []
    if spec.reps < 1000:
        notes.append(f"reps={spec.reps} is below 1000; coverage estimates are coarse")
    for n in spec.n_grid:
        for j in spec.j_list:
            cov, fail = totals[n, j]
            ok = spec.reps - fail
            c = cov / ok if ok else float("nan")
            se = math.sqrt(c * (1 - c) / ok) if ok else float("nan")
            exact = exact_err = None
            if oracle:
                try:
                    exact = exact_coverage_exp_lehmann(n, spec.alpha, j, x1, x2)
                    exact_err = abs(exact - nominal)
                except RangeError as exc:
                    notes.append(f"n={n}, j={j}: {exc}")
            cells.append(CoverageCell(n, j, spec.reps, cov, fail, c, se, abs(c - nominal), exact, exact_err))

    report = CoverageReport(spec=spec, cells=cells, notes=notes)
    for j in spec.j_list:
        pts = []
        for n in spec.n_grid:
            cell = report.cell(n, j)
            e = cell.exact_abs_error if cell.exact_abs_error is not None else cell.abs_error
            pts.append((n, e))
        if spec.method != "general" and pts and _series_diverges(spec.model, spec.theta, pts[0][0], j, x1):
            notes.append(f"j={j}: correction series not decreasing at n={pts[0][0]}; dropped from rate fit")
            pts = pts[1:]
        fit = rate_fit(pts)
        if fit is not None:
            report.slopes[j] = fit

    worst = max((c.failures / c.reps for c in cells), default=0.0)
    if worst > MAX_FAILURE_RATE:
        raise ReplicationFailureError(
            f"interval construction failed in {worst:.2%} of replications (limit {MAX_FAILURE_RATE:.0%})", report
        )
    return report


def exact_coverage_exp_lehmann(n: int, alpha: float, j: int, x1: float | None = None, x2: float | None = None, theta: float | None = None) -> float:
    """Exact coverage of the order-j pivot interval for the exponential Lehmann model.

    ``theta in [N_nj(x1), N_nj(x2)] / |Xbar|`` iff ``n N_nj(x1) <= G <= n N_nj(x2)``
    with ``G = n theta |Xbar| ~ Gamma(n, 1)``; theta cancels.  Passing ``theta``
    evaluates through the law of Xbar instead (a consistency path).
    """
    if x1 is None or x2 is None:
        z = float(ndtri(1 - alpha / 2))
        x1, x2 = z, -z
    n1 = float(exp_lehmann_n_factor(x1, n, j))
    n2 = float(exp_lehmann_n_factor(x2, n, j))
    if n1 <= 0 or n2 <= 0:
        raise RangeError(f"N_nj is nonpositive (N(x1)={n1}, N(x2)={n2}); interval truncated at 0")
    if theta is None:
        return float(gammainc(n, n * n2) - gammainc(n, n * n1))
    model = ExpLehmann()
    return float(model.mean_cdf(-n1 / theta, n, theta) - model.mean_cdf(-n2 / theta, n, theta))


def rate_fit(points) -> RateFit | None:
    """Least-squares slope of log(e) against log(n).

    Nonpositive errors are dropped with a note; fewer than three usable points
    gives ``None``.
    """
    notes = []
    keep = []
    for n, e in points:
        if e is None or not e > 0 or not math.isfinite(e):
            notes.append(f"dropped n={n}: error {e} not positive")
        else:
            keep.append((n, e))
    if len(keep) < 3:
        return None
    ln = np.log([p[0] for p in keep])
    le = np.log([p[1] for p in keep])
    slope, intercept = np.polyfit(ln, le, 1)
    return RateFit(float(slope), float(intercept), tuple(p[0] for p in keep), tuple(notes))
