"""Command-line front end.

    hoci quantile   --model exp-lehmann --n 25 --j 1 --x 1.96
    hoci interval   --model exp-lehmann --mean -1.0 --n 25 --method pivot --j 0 --alpha 0.10
    hoci coverage   --model exp-lehmann --theta 1 --n 10,20,40 --j 0,1,2 --reps 100000 --seed 42
    hoci efficiency --model power-lehmann --nu 2 --theta 1

Exit codes: 0 ok, 2 flag error, 3 domain error, 4 data error, 5 range error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from .edgeworth import MAX_ORDER, ExpansionSpec, eta_terms, xi_terms
from .efficiency import (
    asymptotic_variance,
    exp_lehmann_family,
    power_lehmann_family,
    relative_efficiency,
)
from .errors import DomainError, OrderError, RangeError
from .harness import ExperimentSpec, ReplicationFailureError, run_coverage
from .intervals import (
    GENERAL_MAX_ORDER,
    ConfidenceSpec,
    constant_cumulant_interval,
    general_interval,
    monotone_pivot_interval,
)
from .models import ExpLehmann, PowerLehmann

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FLAG, EXIT_DOMAIN, EXIT_DATA, EXIT_RANGE = 0, 2, 3, 4, 5

ORDER_SUPPORT = {"constant": MAX_ORDER, "pivot": MAX_ORDER, "general": GENERAL_MAX_ORDER}


class FlagError(Exception):
    pass


class DataError(Exception):
    pass


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise FlagError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise FlagError(f"expected comma-separated numbers, got {text!r}") from None


def _single_int(text: str, flag: str) -> int:
    vals = _int_list(text)
    if len(vals) != 1:
        raise FlagError(f"{flag} takes a single integer here, got {text!r}")
    return vals[0]


def _model(args):
    if args.model == "exp-lehmann":
        return ExpLehmann()
    if args.nu is None:
        raise FlagError("--nu is required for power-lehmann")
    return PowerLehmann(nu=args.nu)


def _family(args):
    if args.model == "exp-lehmann":
        return exp_lehmann_family()
    if args.nu is None:
        raise FlagError("--nu is required for power-lehmann")
    return power_lehmann_family(args.nu)


def read_data(path: str, model) -> list[float]:
    """One number per line; blank lines and lines starting with '#' are skipped."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise DataError(f"{path} is not UTF-8 text") from None
    lo, hi = model.support
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise DataError(f"{path}:{lineno}: not a number: {s!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{path}:{lineno}: non-finite value {s!r}")
        if not lo <= v <= hi:
            raise DataError(f"{path}:{lineno}: value {s} outside the support [{lo}, {hi}] of {model.name}")
        values.append(v)
    if not values:
        raise DataError(f"{path}: no observations")
    return values


def _model_info(args) -> dict:
    info = {"model": args.model}
    if args.model == "power-lehmann":
        info["nu"] = args.nu
    return info


# commands ------------------------------------------------------------------


def cmd_quantile(args):
    model = _model(args)
    n = _single_int(args.n, "--n")
    if args.j is None or args.x is None:
        raise FlagError("quantile needs --n, --j and --x")
    j = _single_int(args.j, "--j")
    spec = ExpansionSpec(n, j)
    theta = 1.0 if args.theta is None else args.theta
    model.check_theta(theta)
    ell = model.standardized(theta, max(j + 2, 3))
    rows = []
    for x in _float_list(args.x):
        et = [float(t) for t in eta_terms(x, spec, ell)]
        xt = [float(t) for t in xi_terms(x, spec, ell)]
        rows.append({"point": x, "eta": x + sum(et), "xi": x - sum(xt), "terms": et, "xi_terms": xt})
    header = {"command": "quantile", **_model_info(args), "theta": theta, "n": n, "j": j}
    if args.format == "json":
        return _json({**header, "results": rows})
    cols = ["point", "eta", "xi"] + [f"term_{r}" for r in range(1, j + 1)]
    return _csv(cols, [[r["point"], r["eta"], r["xi"], *r["terms"]] for r in rows])


_INTERVALS = {
    "constant": constant_cumulant_interval,
    "pivot": monotone_pivot_interval,
    "general": general_interval,
}


def cmd_interval(args):
    model = _model(args)
    if (args.data is None) == (args.mean is None):
        raise FlagError("give exactly one of --data PATH or --mean (with --n)")
    j = 0 if args.j is None else _single_int(args.j, "--j")
    if j > ORDER_SUPPORT[args.method]:
        raise OrderError(f"method {args.method} supports j <= {ORDER_SUPPORT[args.method]}, got j={j}")
    if args.data is not None:
        if args.n is not None:
            raise FlagError("--n is implied by --data")
        data = read_data(args.data, model)
        n, mean = len(data), math.fsum(data) / len(data)
    else:
        if args.n is None:
            raise FlagError("--mean needs --n")
        n, mean = _single_int(args.n, "--n"), args.mean
    if (args.x1 is None) != (args.x2 is None):
        raise FlagError("--x1 and --x2 go together")
    if args.x1 is not None:
        spec = ConfidenceSpec.from_tails(n, j, args.x1, args.x2)
    else:
        spec = ConfidenceSpec.symmetric(n, j, args.alpha)
    result = _INTERVALS[args.method](model, mean, spec)
    d = result.to_dict()
    d["sample_mean"] = mean
    if args.format == "json":
        return _json({"command": "interval", **_model_info(args), "result": d})
    cols = ["method", "j", "n", "alpha", "x1", "x2", "sample_mean", "estimate", "lower", "upper", "corrections", "warnings"]
    row = [d[c] for c in cols[:-2]] + [";".join(_fmt(c) for c in d["corrections"]), ";".join(d["warnings"])]
    return _csv(cols, [row])


def cmd_coverage(args):
    model = _model(args)
    if args.n is None or args.j is None:
        raise FlagError("coverage needs --n and --j lists")
    if args.reps is None or args.reps < 1:
        raise FlagError(f"--reps must be a positive integer, got {args.reps}")
    theta = 1.0 if args.theta is None else args.theta
    spec = ExperimentSpec(
        model=model,
        theta=theta,
        n_grid=tuple(_int_list(args.n)),
        alpha=args.alpha,
        j_list=tuple(_int_list(args.j)),
        method=args.method,
        reps=args.reps,
        seed=args.seed,
        workers=args.workers,
    )
    try:
        report = run_coverage(spec)
    except ReplicationFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _render_coverage(args, exc.report), EXIT_RANGE
    return _render_coverage(args, report)


def _render_coverage(args, report):
    cells = [c.to_dict() for c in report.cells]
    slopes = {j: fit.slope for j, fit in report.slopes.items()}
    if args.format == "json":
        return _json(
            {
                "command": "coverage",
                **report.header(),
                "cells": cells,
                "slopes": {str(j): s for j, s in slopes.items()},
                "notes": report.notes,
            }
        )
    cols = ["n", "j", "reps", "covered", "failures", "coverage", "mc_se", "abs_error", "exact_coverage", "exact_abs_error", "slope"]
    rows = [[c[k] for k in cols[:-1]] + [slopes.get(c["j"])] for c in cells]
    return _csv(cols, rows)


def cmd_efficiency(args):
    family = _family(args)
    if args.theta is None:
        raise FlagError("efficiency needs --theta")
    theta = args.theta
    out = {
        "command": "efficiency",
        **_model_info(args),
        "theta": theta,
        "asymptotic_variance": asymptotic_variance(family, theta),
        "asymptotic_variance_quadrature": asymptotic_variance(family, theta, "quadrature"),
        "influence_bounded": family.h_bounded,
        "relative_efficiency": relative_efficiency(family, theta),
    }
    if args.format == "json":
        return _json(out)
    cols = ["model", "theta", "asymptotic_variance", "asymptotic_variance_quadrature", "influence_bounded", "relative_efficiency"]
    return _csv(cols, [[out[c] for c in cols]])


def _json(obj) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, allow_nan=True) + "\n"


def _csv(cols, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=["exp-lehmann", "power-lehmann"], required=True)
    common.add_argument("--nu", type=float)
    common.add_argument("--theta", type=float)
    common.add_argument("--n", help="sample size (comma list for coverage)")
    common.add_argument("--j", help="expansion order (comma list for coverage)")
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="write output here instead of stdout")

    parser = argparse.ArgumentParser(prog="hoci", description="Higher-order confidence intervals from a sample mean.")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantile", parents=[common], help="Cornish-Fisher eta/xi at given points")
    q.add_argument("--x", help="evaluation point(s), comma separated")

    i = sub.add_parser("interval", parents=[common], help="confidence interval for theta")
    i.add_argument("--method", choices=["constant", "pivot", "general"], default="pivot")
    i.add_argument("--data", help="file with one observation per line")
    i.add_argument("--mean", type=float, help="pre-aggregated sample mean (needs --n)")
    i.add_argument("--x1", type=float)
    i.add_argument("--x2", type=float)

    c = sub.add_parser("coverage", parents=[common], help="Monte Carlo / exact coverage study")
    c.add_argument("--method", choices=["constant", "pivot", "general"], default="pivot")
    c.add_argument("--reps", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, default=1)

    sub.add_parser("efficiency", parents=[common], help="asymptotic variance and relative efficiency")
    return parser


_COMMANDS = {
    "quantile": cmd_quantile,
    "interval": cmd_interval,
    "coverage": cmd_coverage,
    "efficiency": cmd_efficiency,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on malformed flags
    try:
        out = _COMMANDS[args.command](args)
    except (FlagError, OrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    code = EXIT_OK
    if isinstance(out, tuple):
        out, code = out
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
