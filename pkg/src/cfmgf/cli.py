"""Command-line interface: ``cfmgf <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import BadParameter, CfmgfError, DataError, NumericError
from .garch import GarchSpec, bootstrap_test, garch_simulate, qmle_fit
from .sampling import AlternativeSpec, RngStream, sample
from .standardize import read_csv, scaled_residuals
from .statistics import (Decision, WeightConfig, hw_stat, mean_w_norm, sigma2_closed,
                         t_stat, t_tilde_stat)

SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(doc: dict, output: str | None):
    text = json.dumps({"schema_version": SCHEMA_VERSION, **doc}, indent=2)
    if output:
        Path(output).write_text(text + "\n")
    print(text)


def _finite(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def _test_doc(res, **fields) -> dict:
    doc = {"family": res.family.value, "statistic": res.statistic, "scaled": _finite(res.scaled),
           "gamma": res.gamma_or_beta, "n": res.n, "d": res.d}
    if res.decision is not None:
        doc.update(critical_value=_finite(res.decision.critical_value),
                   p_value=res.decision.p_value, reject=res.decision.reject,
                   alpha=res.decision.alpha)
    doc.update(fields)
    return doc


def _check_common(args):
    if getattr(args, "gamma", None) is not None and not args.gamma > 0:
        raise UsageError("--gamma must be positive")
    if getattr(args, "alpha", None) is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")


def cmd_test(args) -> dict:
    x = read_csv(args.input, header=args.header)
    y = scaled_residuals(x)
    gamma = args.beta if args.stat == "hw" else args.gamma
    if args.stat == "t":
        res = t_stat(y, WeightConfig(gamma, y.d))
        key, value, kw = ex.T, res.scaled, {"gammas": [gamma]}
    elif args.stat == "ttilde":
        res = t_tilde_stat(y, WeightConfig(gamma, y.d))
        key = ex.T_TWO if args.two_sided else ex.T_ONE
        value = abs(res.statistic) if args.two_sided else res.statistic
        kw = {"ttilde_gammas": [gamma]}
    else:
        res = hw_stat(y, gamma)
        key, value, kw = ex.HW, res.statistic, {"betas": [gamma]}
    null = ex.null_statistics(y.d, y.n, args.reps, RngStream(args.seed), **kw)[(key, float(gamma))]
    crit = args.critical if args.critical is not None else ex.upper_quantile(null, args.alpha)
    p = (1 + int(np.sum(null >= value))) / (len(null) + 1)
    res.decision = Decision(bool(value > crit), args.alpha, crit, p)
    extra = {"two_sided": bool(args.two_sided)} if args.stat == "ttilde" else {}
    return _test_doc(res, null_reps=args.reps, seed=args.seed, **extra)


def cmd_garch_test(args) -> dict:
    x = read_csv(args.input, header=args.header).values
    fam = {"t": "T", "ttilde": "Ttilde", "hw": "HW"}[args.stat]
    gamma = args.beta if fam == "HW" else args.gamma
    w = WeightConfig(gamma, x.shape[1])
    res = bootstrap_test(x, w, fam, m_boot=args.reps, rng=RngStream(args.seed),
                         alpha=args.alpha, two_sided=args.two_sided)
    return _test_doc(res, **res.extra, seed=args.seed)


def cmd_simulate(args) -> dict:
    rng = RngStream(args.seed)
    if args.garch:
        spec = _garch_spec(args.garch, args.r)
        innov = AlternativeSpec.parse(args.dist, spec.d)
        x = garch_simulate(spec, args.n, rng, innov, burn_in=args.burn_in).x
        source = {"garch": spec.to_dict(), "innovations": str(innov)}
    else:
        spec = AlternativeSpec.parse(args.dist, args.d)
        x = sample(spec, args.n, rng, standardize=args.standardize).values
        source = {"distribution": str(spec), "standardized": args.standardize}
    if args.output:
        np.savetxt(args.output, x, delimiter=",", fmt="%.17g")
    else:
        np.savetxt(sys.stdout, x, delimiter=",", fmt="%.17g")
        return {}
    return {"n": x.shape[0], "d": x.shape[1], "seed": args.seed, "output": args.output, **source}


def cmd_fit(args) -> dict:
    x = read_csv(args.input, header=args.header).values
    fit = qmle_fit(x, raise_on_failure=args.strict)
    if args.spec_out:
        fit.theta_hat.to_json(args.spec_out)
    return {"theta_hat": fit.theta_hat.to_dict(), "loglik": fit.loglik,
            "converged": fit.converged, "iterations": fit.iterations,
            "grad_norm": fit.grad_norm, "n": x.shape[0], "d": x.shape[1]}


def cmd_constants(args) -> dict:
    w = WeightConfig(args.gamma, args.d)
    doc = {"gamma": args.gamma, "d": args.d, "sigma2": sigma2_closed(w),
           "mean_w_norm": mean_w_norm(w)}
    if args.oracle:
        from .quadrature import kernel_integrals

        k = kernel_integrals(args.gamma, args.d)
        doc.update(sigma2_quadrature=k.sigma2, mean_w_norm_quadrature=k.mean_w_norm)
    return doc


def _reps(args, kind: str) -> int:
    if args.reps is not None:
        return args.reps
    return (ex.FULL if args.full else ex.DESK)[kind]


def _report(report: ex.ExperimentReport, args) -> dict:
    if args.output:
        report.to_csv(args.output)
        Path(args.output).with_suffix(".json").write_text(report.to_json() + "\n")
    print(report.to_text(digits=args.digits))
    return {}


def cmd_table1(args) -> dict:
    stat = {"t": ex.T, "ttilde": ex.T_ONE, "ttilde2": ex.T_TWO, "hw": ex.HW}[args.stat]
    rep = ex.critical_table(args.d, args.n, args.gammas, args.alphas, _reps(args, "critical"),
                            RngStream(args.seed), stat, workers=args.workers)
    return _report(rep, args)


def cmd_power(args) -> dict:
    null_reps = args.null_reps or (ex.FULL if args.full else ex.DESK)["critical"]
    rep = ex.power_table(args.alternatives, args.d, args.n, args.gammas, args.alphas,
                         _reps(args, "power"), RngStream(args.seed),
                         family="T" if args.stat == "t" else "Ttilde", beta_list=args.betas,
                         null_reps=null_reps, workers=args.workers)
    return _report(rep, args)


def _garch_spec(name: str, r: float) -> GarchSpec:
    if name == "bivariate":
        return GarchSpec.bivariate_reference(r)
    if name == "trivariate":
        return GarchSpec.trivariate_reference(r)
    return GarchSpec.from_json(name)


def cmd_garch_table(args) -> dict:
    spec = _garch_spec(args.spec, args.r)
    rep = ex.warp_speed_garch(spec, args.alternatives, args.n, args.gammas, args.alphas,
                              _reps(args, "warp"), RngStream(args.seed), beta_list=args.betas,
                              workers=args.workers)
    return _report(rep, args)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfmgf", description="CF x MGF tests for multivariate normality.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--input", "-i", required=True, help="CSV file, one observation per row")
        s.add_argument("--header", action="store_true", help="skip a header line")
        s.add_argument("--output", "-o", help="also write the JSON result here")
        return s

    s = data_cmd("test", "test an i.i.d. sample for normality")
    s.add_argument("--stat", choices=["t", "ttilde", "hw"], default="t")
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--beta", type=float, default=1.0, help="HW smoothing parameter")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--two-sided", action="store_true", help="two-sided Ttilde test")
    s.add_argument("--critical", type=float, help="use this critical value instead of simulating")
    s.add_argument("--reps", type=int, default=2000, help="null simulations for the p-value")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_test)

    s = data_cmd("garch-test", "bootstrap test of Gaussian CCC-GARCH(1,1) innovations")
    s.add_argument("--stat", choices=["t", "ttilde", "hw"], default="ttilde")
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--two-sided", action="store_true")
    s.add_argument("--reps", type=int, default=199, help="bootstrap resamples")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_garch_test)

    s = sub.add_parser("simulate", help="draw a sample as CSV")
    s.add_argument("--dist", default="normal", help="e.g. normal, laplace, t:5, gn:1.5, aep")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--standardize", action="store_true", help="zero mean, identity covariance")
    s.add_argument("--garch", help="bivariate, trivariate or a GarchSpec JSON file")
    s.add_argument("--r", type=float, default=0.0, help="correlation for the reference specs")
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)

    s = data_cmd("fit", "QMLE fit of a CCC-GARCH(1,1) model")
    s.add_argument("--spec-out", help="write the fitted GarchSpec JSON here")
    s.add_argument("--strict", action="store_true", help="fail when the optimizer does not converge")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("constants", help="sigma^2 and E|W|^2 for (gamma, d)")
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--oracle", action="store_true", help="add quadrature values (d <= 3)")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_constants)

    def table_cmd(name, help_, func):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--reps", type=int)
        s.add_argument("--full", action="store_true",
                       help="full-scale replication counts (10000 / 1000 / 10000)")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--alphas", type=float, nargs="+", default=[0.05])
        s.add_argument("--digits", type=int, default=2)
        s.add_argument("--output", "-o", help="CSV path; a JSON sidecar is written next to it")
        s.set_defaults(func=func)
        return s

    s = table_cmd("table1", "null critical points", cmd_table1)
    s.add_argument("--d", type=int, nargs="+", default=[2])
    s.add_argument("--n", type=int, nargs="+", default=[20, 50])
    s.add_argument("--gammas", type=float, nargs="+", default=[1.5, 2.0, 2.5])
    s.add_argument("--stat", choices=["t", "ttilde", "ttilde2", "hw"], default="t")
    s.set_defaults(alphas=[0.05, 0.10])

    s = table_cmd("power", "rejection percentages against alternatives", cmd_power)
    s.add_argument("--alternatives", nargs="+", default=["laplace"])
    s.add_argument("--d", type=int, nargs="+", default=[2])
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--gammas", type=float, nargs="+", default=[2.0])
    s.add_argument("--betas", type=float, nargs="*", default=[])
    s.add_argument("--stat", choices=["t", "ttilde"], default="t")
    s.add_argument("--null-reps", type=int)
    s.set_defaults(digits=1)

    s = table_cmd("garch-table", "warp-speed level and power of the GARCH test", cmd_garch_table)
    s.add_argument("--spec", default="bivariate", help="bivariate, trivariate or a JSON file")
    s.add_argument("--r", type=float, default=0.0)
    s.add_argument("--alternatives", nargs="+", default=["normal"])
    s.add_argument("--n", type=int, default=300)
    s.add_argument("--gammas", type=float, nargs="+", default=[1.2])
    s.add_argument("--betas", type=float, nargs="*", default=[])
    s.set_defaults(digits=2)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_common(args)
        doc = args.func(args)
        if doc:
            _emit(doc, getattr(args, "output", None) if args.command in
                  ("test", "garch-test", "fit", "constants") else None)
        return 0
    except UsageError as exc:
        print(f"cfmgf: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"cfmgf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"cfmgf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (BadParameter, CfmgfError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"cfmgf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
