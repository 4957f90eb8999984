"""
Command line entry point.

    stratlab constants   --process bbm --K 1 --tol 1e-10
    stratlab audit       --process fbm --H 1/6 --all
    stratlab functionals --process fbm --H 1/6 --n 512 --f x3 --paths 20000
    stratlab limitlaw    --process fbm --H 1/6 --n 512 --t 1 --f x3 --paths 20000
    stratlab experiment  --config exp.cfg
    stratlab simulate    --process fbm --H 1/6 --n 8 --T 1 --seed 1

Exit codes: 0 success, 1 a verdict failed, 2 usage error, 3 domain or
numerical error. With ``--format json`` errors are printed to stderr as
``{"error": ..., "code": ...}``.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from fractions import Fraction

import numpy as np

from . import conditions, mc
from .constants import c_h, c_K, empirical_eta, eta_fn
from .errors import StratlabError, UnsupportedRegimeError
from .kernels import CovarianceKernel, Family, GridSpec, grid_index
from .limitlaw import sample_limit_ensemble
from .sampler import CACHE_ENV, factorize, sample_paths
from .stats import moments
from .variation import (
    TestFunction,
    cubic_variation,
    fifth_order_sum,
    increment_of_f,
    phi_n,
    third_order_sum,
    y_n_term,
)

SCHEMA = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3

log = logging.getLogger("stratlab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def rational(text: str) -> float:
    """Parse ``1/6``, ``0.25`` or ``1e-10`` to float."""
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def float_list(text: str) -> list[float]:
    return [rational(x) for x in text.split(",") if x.strip()]


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--process", choices=[f.value for f in Family])
    p.add_argument("--H", type=rational)
    p.add_argument("--K", type=rational)
    p.add_argument("--h", dest="h_sf", type=rational, metavar="h")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", help="write to this file instead of stdout")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int, help="cap BLAS threads")
    p.add_argument("--cache-dir", help=f"persist covariance factors here (or set {CACHE_ENV})")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="stratlab", description=__doc__.split("\n\n")[1].strip(),
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("constants", parents=[common], help="series constants c_K, c_h")
    p.add_argument("--tol", type=rational, default=1e-10)
    p.add_argument("--empirical", action="store_true", help="sum beta_n^3 instead of the series")
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--t", type=rational, default=1.0)

    p = sub.add_parser("audit", parents=[common], help="covariance condition audits")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--condition", choices=("i", "ii", "iii", "iv", "v", "vi"))
    g.add_argument("--all", action="store_true", help="(i)-(v) with the family's exponents")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--T", type=rational, default=2.0)
    p.add_argument("--theta", type=rational)
    p.add_argument("--nu", type=rational)
    p.add_argument("--lam", type=rational)
    p.add_argument("--gamma", type=rational)
    p.add_argument("--t", type=rational, default=1.0, help="time for condition vi")
    p.add_argument("--n-list", type=int_list, default=[64, 128, 256, 512])

    p = sub.add_parser("functionals", parents=[common], help="Monte Carlo path functionals")
    _path_args(p)
    p.add_argument("--stat", choices=("mean", "var", "meanabs", "ms", "all"), default="all")
    p.add_argument("--dump-paths", help="CSV file of per-path functionals and values")

    p = sub.add_parser("limitlaw", parents=[common], help="draws from the limit law")
    _path_args(p)

    p = sub.add_parser("experiment", parents=[common], help="Monte Carlo experiments")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--experiment", choices=[e.value for e in mc.Experiment])
    p.add_argument("--f")
    p.add_argument("--t-list", type=float_list)
    p.add_argument("--n-list", type=int_list)
    p.add_argument("--paths", type=int)
    p.add_argument("--threshold", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--plot-csv", help="also write the wide n-vs-statistic CSV here")

    p = sub.add_parser("simulate", parents=[common], help="sample paths on the grid j/n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=rational, default=1.0)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--index", type=int, default=0, help="index of the first path")
    return parser


def _path_args(p):
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--t", type=rational, default=1.0)
    p.add_argument("--T", type=rational, help="horizon of the simulated grid (default t)")
    p.add_argument("--f", default="x3")
    p.add_argument("--paths", type=int, default=20000)


def make_kernel(process, H=None, K=None, h=None) -> CovarianceKernel:
    if process is None:
        raise UsageError("--process is required")
    fam = Family.parse(process)
    need = {Family.FBM: ("H",), Family.BBM: ("H", "K"), Family.EXT_BBM: ("H", "K"),
            Family.SFBM: ("h",)}[fam]
    given = {"H": H, "K": K, "h": h}
    missing = [k for k in need if given[k] is None]
    if missing:
        raise UsageError(f"--process {fam.value} needs " + ", ".join(f"--{k}" for k in missing))
    if fam is Family.FBM:
        return CovarianceKernel.fbm(H)
    if fam is Family.BBM:
        return CovarianceKernel.bbm(H, K)
    if fam is Family.EXT_BBM:
        return CovarianceKernel.ext_bbm(H, K)
    return CovarianceKernel.sfbm(h)


def _kernel(args) -> CovarianceKernel:
    return make_kernel(args.process, args.H, args.K, args.h_sf)


# -- emission -----------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def to_json(payload: dict) -> str:
    return json.dumps(_jsonable({"schema": SCHEMA, **payload}), indent=2)


def emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -- subcommands --------------------------------------------------------------

def cmd_constants(args) -> int:
    if args.empirical:
        kernel = _kernel(args)
        value = empirical_eta(kernel, args.n, args.t)
        out = {"empirical_sum": value, "n": args.n, "t": args.t}
    else:
        if args.process == Family.SFBM.value:
            sv = c_h(args.tol)
        else:
            if args.process is None:
                raise UsageError("--process is required")
            K = 1.0 if args.process == Family.FBM.value and args.K is None else args.K
            if K is None:
                raise UsageError(f"--process {args.process} needs --K")
            sv = c_K(K, args.tol)
        out = {"value": sv.value, "truncation_M": sv.truncation_M, "tail_bound": sv.tail_bound}
    if args.format == "csv":
        emit(to_csv(list(out), [list(out.values())]), args.output)
    else:
        emit(to_json(out), args.output)
    return EXIT_OK


_AUDIT_CSV = ["condition", "exponent", "sup_ratio", "grid_resolution", "pass",
              "argmax_s", "argmax_t", "argmax_r"]


def cmd_audit(args) -> int:
    kernel = _kernel(args)
    if args.condition == "vi":
        rep = conditions.check_condition_vi(kernel, args.t, args.n_list)
        if args.format == "csv":
            rows = [[n, v, rep.predicted, rep.passed] for n, v in zip(rep.n_list, rep.values)]
            emit(to_csv(["n", "empirical_eta", "predicted", "pass"], rows), args.output)
        else:
            emit(to_json({"kernel": kernel.params(), **rep.to_dict()}), args.output)
        return EXIT_OK if rep.passed else EXIT_FAIL

    if args.all:
        ex = conditions.default_exponents(kernel)
        overrides = {k: getattr(args, k) for k in ("theta", "nu", "lam", "gamma")
                     if getattr(args, k) is not None}
        if overrides:
            ex = conditions.ExponentSet(**{**ex.__dict__, **overrides})
        reports = conditions.audit_all(kernel, args.T, args.res, ex)
    else:
        fn, key = {
            "i": (conditions.check_condition_i, None),
            "ii": (conditions.check_condition_ii, "theta"),
            "iii": (conditions.check_condition_iii, "nu"),
            "iv": (conditions.check_condition_iv, "lam"),
            "v": (conditions.check_condition_v, "gamma"),
        }[args.condition]
        kw = {}
        if key is not None:
            value = getattr(args, key)
            kw[key] = value if value is not None else getattr(conditions.default_exponents(kernel), key)
        reports = [fn(kernel, args.T, args.res, **kw)]
    passed = all(r.passed for r in reports)
    if args.format == "csv":
        rows = [[r.condition, r.exponent, r.sup_ratio, r.grid_resolution, r.passed,
                 *r.argmax_point] for r in reports]
        emit(to_csv(_AUDIT_CSV, rows), args.output)
    elif len(reports) == 1:
        emit(to_json({"kernel": kernel.params(), **reports[0].to_dict()}), args.output)
    else:
        emit(to_json({"kernel": kernel.params(), "pass": passed,
                      "reports": [r.to_dict() for r in reports]}), args.output)
    return EXIT_OK if passed else EXIT_FAIL


def _grid_for(args) -> GridSpec:
    T = args.T if args.T is not None else args.t
    if T < args.t:
        raise UsageError("--T must be at least --t")
    return GridSpec(args.n, T)


_STATS = {
    "mean": lambda v: float(np.mean(v)),
    "var": lambda v: float(np.var(v, ddof=1)) if v.size > 1 else 0.0,
    "meanabs": lambda v: float(np.mean(np.abs(v))),
    "ms": lambda v: float(np.mean(v**2)),
}


def cmd_functionals(args) -> int:
    kernel = _kernel(args)
    f = TestFunction.parse(args.f)
    grid = _grid_for(args)
    ens = sample_paths(factorize(kernel, grid), args.seed, args.paths)
    t = args.t
    phi = phi_n(ens, f, t)
    inc = increment_of_f(ens, f, t)
    values = {
        "phi_n": phi,
        "increment_of_f": inc,
        "phi_minus_increment": phi - inc,
        "third_order_sum": third_order_sum(ens, f, t),
        "fifth_order_sum": fifth_order_sum(ens, f, t),
        "y_n_term": y_n_term(ens, f, t),
        "cubic_variation": cubic_variation(ens, t),
    }
    stats = list(_STATS) if args.stat == "all" else [args.stat]
    summary = {name: {s: _STATS[s](np.asarray(v)) for s in stats} for name, v in values.items()}
    if args.dump_paths:
        m_t = grid_index(grid.n, t)
        header = ["path", "x_t", *values, *[f"x_{j}" for j in range(grid.m + 1)]]
        rows = ([i, ens.values[i, m_t], *[v[i] for v in values.values()], *ens.values[i]]
                for i in range(len(ens)))
        with open(args.dump_paths, "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(header, rows))
    if args.format == "csv":
        rows = [[name, s, v] for name, d in summary.items() for s, v in d.items()]
        emit(to_csv(["functional", "statistic", "value"], rows), args.output)
    else:
        emit(to_json({"kernel": kernel.params(), "f": f.name, "n": args.n, "t": t,
                      "paths": args.paths, "seed": args.seed, "functionals": summary}),
             args.output)
    return EXIT_OK


def cmd_limitlaw(args) -> int:
    kernel = _kernel(args)
    f = TestFunction.parse(args.f)
    grid = _grid_for(args)
    eta = eta_fn(kernel)
    if eta.trivial:
        raise UnsupportedRegimeError(
            f"{kernel.params()} is {kernel.regime}: the correction vanishes, so there is no "
            "limit law to sample beyond f(X_t) - f(0); pass exact rationals such as --H 1/6 "
            "for a critical kernel"
        )
    s = sample_limit_ensemble(kernel, grid, f, args.t, eta, args.seed, args.paths)
    if args.format == "csv":
        emit(to_csv(["x_t", "correction", "rhs"], zip(s.x_t, s.correction, s.rhs)), args.output)
    else:
        m = moments(s.rhs) if args.paths >= 2 else None
        emit(to_json({
            "kernel": kernel.params(), "f": f.name, "n": args.n, "t": args.t,
            "paths": args.paths, "seed": args.seed, "eta_t": eta(args.t),
            "summary": None if m is None else {"mean": m.mean, "var": m.var, "skew": m.skew,
                                               "ex_kurtosis": m.ex_kurtosis},
            "x_t": s.x_t, "correction": s.correction, "rhs": s.rhs,
        }), args.output)
    return EXIT_OK


def read_keyvalue(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; optional surrounding quotes."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value.strip("'\"")
    return out


_CONFIG_KEYS = {"process", "H", "K", "h", "experiment", "f", "t_list", "n_list", "paths", "seed"}


def experiment_config(args) -> mc.ExperimentConfig:
    conf = read_keyvalue(args.config) if args.config else {}
    thresholds = {k.split(".", 1)[1]: rational(v) for k, v in conf.items()
                  if k.startswith("threshold.")}
    unknown = {k for k in conf if not k.startswith("threshold.")} - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for item in args.threshold:
        if "=" not in item:
            raise UsageError(f"--threshold expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        thresholds[k.strip()] = rational(v)

    def pick(flag, key, conv, default=None):
        if flag is not None:
            return flag
        if key in conf:
            try:
                return conv(conf[key])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config {key}: {exc}")
        return default

    kernel = make_kernel(
        pick(args.process, "process", str),
        pick(args.H, "H", rational), pick(args.K, "K", rational), pick(args.h_sf, "h", rational),
    )
    experiment = pick(args.experiment, "experiment", str)
    if experiment is None:
        raise UsageError("--experiment (or experiment = ... in the config) is required")
    return mc.ExperimentConfig(
        kernel=kernel,
        f=TestFunction.parse(pick(args.f, "f", str, "x3")),
        experiment=experiment,
        t_list=pick(args.t_list, "t_list", float_list, [1.0]),
        n_list=pick(args.n_list, "n_list", int_list, [64, 128, 256, 512]),
        paths=pick(args.paths, "paths", int, 20000),
        seed=pick(args.seed, "seed", int, 0),
        thresholds=thresholds,
    )


def cmd_experiment(args) -> int:
    cfg = experiment_config(args)
    try:
        mc.Experiment(cfg.experiment)
    except ValueError:
        raise UsageError(f"unknown experiment {cfg.experiment!r}")
    result = mc.run_experiment(cfg)
    for w in result.warnings:
        log.warning(w)
    if args.format == "csv":
        emit(result.long_csv(), args.output)
    else:
        emit(result.to_json(), args.output)
    if args.plot_csv:
        with open(args.plot_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.plot_csv())
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    kernel = _kernel(args)
    grid = GridSpec(args.n, args.T)
    ens = sample_paths(factorize(kernel, grid), args.seed, args.paths, args.index)
    if args.format == "csv":
        if args.paths == 1:
            header = ["t", "x"]
        else:
            header = ["t"] + [f"x{args.index + i}" for i in range(args.paths)]
        emit(to_csv(header, zip(grid.times, *ens.values)), args.output)
    else:
        emit(to_json({"kernel": kernel.params(), "n": args.n, "T": args.T, "seed": args.seed,
                      "start": args.index, "t": grid.times, "paths": ens.values}), args.output)
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "audit": cmd_audit,
    "functionals": cmd_functionals,
    "limitlaw": cmd_limitlaw,
    "experiment": cmd_experiment,
    "simulate": cmd_simulate,
}


def _wants_json(argv) -> bool:
    for i, a in enumerate(argv):
        if a == "--format=json" or (a == "--format" and argv[i + 1 : i + 2] == ["json"]):
            return True
    return False


def _report(message: str, code: int, as_json: bool) -> int:
    if as_json:
        sys.stderr.write(json.dumps({"schema": SCHEMA, "error": message, "code": code}) + "\n")
    else:
        sys.stderr.write(f"error: {message}\n")
    return code


def _thread_limit(n):
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = _wants_json(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.seed is None and args.command != "experiment":
            args.seed = 0
        if args.cache_dir:
            os.environ[CACHE_ENV] = args.cache_dir
        with _thread_limit(args.threads):
            return COMMANDS[args.command](args)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        if not as_json:
            parser.print_usage(sys.stderr)
        return _report(str(exc), EXIT_USAGE, as_json)
    except (StratlabError, ValueError, ArithmeticError) as exc:
        return _report(f"{type(exc).__name__}: {exc}", EXIT_DOMAIN, as_json)
    except OSError as exc:
        return _report(f"{type(exc).__name__}: {exc}", EXIT_DOMAIN, as_json)


if __name__ == "__main__":
    sys.exit(main())
