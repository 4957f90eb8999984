"""
Monte Carlo experiments on the trapezoidal sum.

* ``weak_limit``      Phi_n(t) against draws of the limit law (critical kernels)
* ``vanishing``       Var(Phi_n - (f(X_t) - f(X_0))) -> 0 (supercritical kernels)
* ``scaling``         log-log slopes of the fifth-order sum, the Taylor
                      remainder and the Y_n term
* ``eta_convergence`` sum beta_n^3 against eta(t) over n

Paths are simulated once at the finest n and restricted to the coarser grids
when every n divides it, so all n share the same underlying paths. Ensembles
are processed in chunks; path i always uses the normals of counter i, so the
chunk size does not change any result.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import check_condition_vi
from .constants import eta_fn
from .errors import ParameterDomainError, WrongExperimentError
from .kernels import CovarianceKernel, GridSpec
from .limitlaw import sample_limit_ensemble
from .sampler import factorize, sample_paths
from .stats import correlation, ks_null_quantile, ks_two_sample, moments
from .variation import (
    TestFunction,
    fifth_order_sum,
    increment_of_f,
    phi_n,
    residual_bound,
    taylor_residuals,
    y_n_term,
)

log = logging.getLogger(__name__)

CHUNK = 4096
SCHEMA_VERSION = 1

DEFAULT_THRESHOLDS = {
    # KS: asymptotic 95% null quantile times this slack
    "ks_slack": 2.0,
    "vanishing_ratio": 0.5,
    "vanishing_floor": 1e-20,
    "slope_slack": 0.25,
}


class Experiment(str, enum.Enum):
    WEAK_LIMIT = "weak_limit"
    VANISHING = "vanishing"
    SCALING = "scaling"
    ETA_CONVERGENCE = "eta_convergence"


@dataclass
class ExperimentConfig:
    kernel: CovarianceKernel
    f: TestFunction
    experiment: Experiment
    t_list: tuple = (1.0,)
    n_list: tuple = (64, 128, 256, 512)
    paths: int = 20000
    seed: int = 0
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        self.t_list = tuple(float(t) for t in self.t_list)
        self.n_list = tuple(int(n) for n in self.n_list)
        if not self.n_list or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ParameterDomainError("n_list must be strictly increasing")
        if not self.t_list or min(self.t_list) <= 0:
            raise ParameterDomainError("t_list must contain positive times")
        distributional = self.experiment in (Experiment.WEAK_LIMIT, Experiment.VANISHING)
        if distributional and self.paths < 1000:
            raise ParameterDomainError("distributional experiments need paths >= 1000")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise ParameterDomainError(f"unknown thresholds {sorted(unknown)}")

    def threshold(self, name):
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.params(),
            "f": self.f.name,
            "experiment": self.experiment.value,
            "t_list": list(self.t_list),
            "n_list": list(self.n_list),
            "paths": self.paths,
            "seed": self.seed,
            "thresholds": {**DEFAULT_THRESHOLDS, **self.thresholds},
        }


@dataclass
class Verdict:
    name: str
    statistic: str
    value: float
    threshold: float
    comparison: str
    passed: bool
    t: float | None = None


@dataclass
class ExperimentResult:
    experiment: Experiment
    config: dict
    records: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add(self, n, t, statistic, value):
        self.records.append({"n": n, "t": t, "statistic": statistic, "value": float(value)})

    def value(self, statistic, n=None, t=None):
        for r in self.records:
            if r["statistic"] == statistic and (n is None or r["n"] == n) \
                    and (t is None or r["t"] == t):
                return r["value"]
        raise KeyError((statistic, n, t))

    def series(self, statistic, t):
        """[(n, value)] for one statistic at time t, in record order."""
        return [(r["n"], r["value"]) for r in self.records
                if r["statistic"] == statistic and r["t"] == t]

    def verdict(self, name, t=None) -> Verdict:
        for v in self.verdicts:
            if v.name == name and (t is None or v.t == t):
                return v
        raise KeyError(name)

    def judge(self, name, statistic, value, threshold, comparison, t=None):
        ops = {"<": value < threshold, "<=": value <= threshold, "==": value == threshold}
        self.verdicts.append(Verdict(name, statistic, float(value), float(threshold),
                                     comparison, bool(ops[comparison]), t))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "experiment": self.experiment.value,
            "config": self.config,
            "passed": self.passed,
            "verdicts": [v.__dict__ for v in self.verdicts],
            "records": self.records,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "n", "t", "statistic", "value"])
        for r in self.records:
            w.writerow([self.experiment.value, r["n"], _fmt(r["t"]), r["statistic"],
                        _fmt(r["value"])])
        return buf.getvalue()

    def plot_csv(self) -> str:
        """Wide table, one row per n, one column per (key statistic, t)."""
        stat = _PLOT_STATISTIC[self.experiment]
        ts = sorted({r["t"] for r in self.records if r["statistic"] == stat})
        ns = sorted({r["n"] for r in self.records if r["statistic"] == stat})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n"] + [f"{stat}@t={_fmt(t)}" for t in ts])
        for n in ns:
            row = [n]
            for t in ts:
                try:
                    row.append(_fmt(self.value(stat, n, t)))
                except KeyError:
                    row.append("")
            w.writerow(row)
        return buf.getvalue()


_PLOT_STATISTIC = {
    Experiment.WEAK_LIMIT: "ks_D",
    Experiment.VANISHING: "var_phi_minus_increment",
    Experiment.SCALING: "ms_fifth_order",
    Experiment.ETA_CONVERGENCE: "empirical_eta",
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _ensembles(cfg: ExperimentConfig, start: int, count: int) -> dict:
    """X ensembles for paths start..start+count-1 on every grid of ``cfg.n_list``."""
    T = max(cfg.t_list)
    n_max = cfg.n_list[-1]
    if all(n_max % n == 0 for n in cfg.n_list):
        fine = sample_paths(factorize(cfg.kernel, GridSpec(n_max, T)), cfg.seed, count, start)
        return {n: fine.coarsen(n) for n in cfg.n_list}
    return {n: sample_paths(factorize(cfg.kernel, GridSpec(n, T)), cfg.seed, count, start)
            for n in cfg.n_list}


def _collect(cfg: ExperimentConfig, functionals: dict) -> dict:
    """Evaluate ``functionals[name](ensemble, t)`` for every (n, t), chunk by chunk."""
    out = {(name, n, t): [] for name in functionals for n in cfg.n_list for t in cfg.t_list}
    for start in range(0, cfg.paths, CHUNK):
        count = min(CHUNK, cfg.paths - start)
        ens = _ensembles(cfg, start, count)
        for n, e in ens.items():
            for t in cfg.t_list:
                for name, fn in functionals.items():
                    out[(name, n, t)].append(np.asarray(fn(e, t)))
    return {k: np.concatenate(v) for k, v in out.items()}


def limit_seed(seed: int) -> int:
    """Seed of the limit-law ensemble, disjoint from the Phi_n ensemble's."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(0x4C494D,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_weak_limit(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kernel.regime != "critical":
        raise WrongExperimentError(
            f"weak_limit needs a critical kernel; {cfg.kernel.params()} is "
            f"{cfg.kernel.regime} (use the vanishing experiment)"
        )
    f = cfg.f
    eta = eta_fn(cfg.kernel)
    res = ExperimentResult(cfg.experiment, cfg.to_dict())
    data = _collect(cfg, {
        "phi": lambda e, t: phi_n(e, f, t),
        "inc": lambda e, t: increment_of_f(e, f, t),
        "x_t": lambda e, t: e.values[:, round(e.grid.n * t)],
    })
    T = max(cfg.t_list)
    n_max = cfg.n_list[-1]
    lseed = limit_seed(cfg.seed)
    for t in cfg.t_list:
        lim_x, lim_rhs, lim_corr = [], [], []
        for start in range(0, cfg.paths, CHUNK):
            count = min(CHUNK, cfg.paths - start)
            s = sample_limit_ensemble(cfg.kernel, GridSpec(n_max, T), f, t, eta, lseed, count, start)
            lim_x.append(s.x_t)
            lim_rhs.append(s.rhs)
            lim_corr.append(s.correction)
        lim_x, lim_rhs, lim_corr = map(np.concatenate, (lim_x, lim_rhs, lim_corr))
        lim_m = moments(lim_rhs)
        corr_lim = _safe_corr(lim_x, lim_corr)
        thr = cfg.threshold("ks_slack") * ks_null_quantile(cfg.paths, cfg.paths)
        res.add(None, t, "limit_var_correction", np.var(lim_corr, ddof=1))
        res.add(None, t, "limit_eta", eta(t))
        ds = []
        for n in cfg.n_list:
            phi = data[("phi", n, t)]
            diff = phi - data[("inc", n, t)]
            x_t = data[("x_t", n, t)]
            D, p = ks_two_sample(phi, lim_rhs)
            D_sum, _ = ks_two_sample(x_t + phi, lim_x + lim_rhs)
            pm = moments(phi)
            res.add(n, t, "ks_D", D)
            res.add(n, t, "ks_p", p)
            res.add(n, t, "ks_threshold", thr)
            res.add(n, t, "ks_D_x_plus_phi", D_sum)
            res.add(n, t, "mean_delta", pm.mean - lim_m.mean)
            res.add(n, t, "var_delta", pm.var - lim_m.var)
            res.add(n, t, "skew_delta", pm.skew - lim_m.skew)
            res.add(n, t, "var_phi_minus_increment", np.var(diff, ddof=1))
            res.add(n, t, "var_phi_minus_increment_se", _var_se(diff))
            res.add(n, t, "corr_x_t_phi_minus_increment", _safe_corr(x_t, diff))
            res.add(n, t, "corr_x_t_correction_limit", corr_lim)
            ds.append(D)
        res.judge("ks_D_at_largest_n", "ks_D", ds[-1], thr, "<", t)
        res.judge("ks_D_largest_below_smallest", "ks_D", ds[-1], ds[0], "<", t)
        inversions = sum(b > a for a, b in zip(ds, ds[1:]))
        if inversions:
            res.warnings.append(f"t={t}: KS D increases between {inversions} adjacent n")
    return res


def _safe_corr(x, y) -> float:
    try:
        return correlation(x, y)
    except ParameterDomainError:
        return float("nan")


def _var_se(x) -> float:
    """Standard error of the sample variance, sqrt((m4 - s^4 (N-3)/(N-1)) / N)."""
    x = np.asarray(x)
    N = x.size
    c = x - x.mean()
    s2 = np.mean(c**2)
    m4 = np.mean(c**4)
    return float(math.sqrt(max(m4 - s2**2 * (N - 3) / (N - 1), 0.0) / N))


def run_vanishing(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kernel.regime != "supercritical":
        raise WrongExperimentError(
            f"vanishing needs a supercritical kernel; {cfg.kernel.params()} is {cfg.kernel.regime}"
        )
    f = cfg.f
    res = ExperimentResult(cfg.experiment, cfg.to_dict())
    data = _collect(cfg, {"diff": lambda e, t: phi_n(e, f, t) - increment_of_f(e, f, t)})
    floor = cfg.threshold("vanishing_floor")
    ratio = cfg.threshold("vanishing_ratio")
    for t in cfg.t_list:
        vs = []
        for n in cfg.n_list:
            d = data[("diff", n, t)]
            v = float(np.var(d, ddof=1))
            res.add(n, t, "var_phi_minus_increment", v)
            res.add(n, t, "var_phi_minus_increment_se", _var_se(d))
            vs.append(v)
        steps = [b < a or (a <= floor and b <= floor) for a, b in zip(vs, vs[1:])]
        res.judge("strictly_decreasing_steps", "var_phi_minus_increment",
                  sum(steps), len(steps), "==", t)
        final = vs[-1] if vs[-1] > floor else 0.0
        res.judge("final_below_ratio_of_first", "var_phi_minus_increment",
                  final, max(ratio * vs[0], floor), "<=", t)
    return res


def _remainder_function(f: TestFunction) -> TestFunction:
    return f if f.degree >= 7 else TestFunction.parse("x7")


def _roundoff(path, f: TestFunction, t: float):
    """Floating-point allowance for the per-step residual: 32 eps times the
    magnitude of the terms that cancel in it."""
    m_t = round(path.grid.n * t)
    x = np.asarray(path.values)[..., : m_t + 1]
    dx = np.diff(x, axis=-1)
    fx = np.abs(f(x))
    fp = np.abs(f.d(1, x))
    scale = fx[..., 1:] + fx[..., :-1] + (fp[..., 1:] + fp[..., :-1]) * np.abs(dx)
    return 32 * np.finfo(float).eps * scale


def run_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    """Slopes of MS(fifth order), MS(Taylor remainder) and E|Y_n| against n.

    Each is expected to decay at least like n^(-1/3) at fixed t. The remainder
    uses f itself when deg f >= 7, otherwise x^7 (it vanishes identically for
    lower degrees).
    """
    if cfg.kernel.regime != "critical":
        raise WrongExperimentError("scaling needs a critical kernel")
    if len(cfg.n_list) < 2:
        raise ParameterDomainError("scaling needs at least two values of n")
    f = cfg.f
    g = _remainder_function(f)
    res = ExperimentResult(cfg.experiment, cfg.to_dict())
    res.config["remainder_f"] = g.name

    def violations(e, t):
        rho = np.abs(taylor_residuals(e, g, t))
        bound = residual_bound(e, g, t) * (1 + 1e-9) + _roundoff(e, g, t)
        return np.sum(rho > bound, axis=-1)

    data = _collect(cfg, {
        "fifth": lambda e, t: fifth_order_sum(e, f, t),
        "remainder": lambda e, t: np.sum(taylor_residuals(e, g, t), axis=-1),
        "y_n": lambda e, t: y_n_term(e, f, t),
        "violations": violations,
    })
    slack = cfg.threshold("slope_slack")
    logn = np.log(cfg.n_list)
    for t in cfg.t_list:
        stats = {"ms_fifth_order": [], "ms_taylor_remainder": [], "mean_abs_y_n": []}
        total_viol = 0
        for n in cfg.n_list:
            ms5 = float(np.mean(data[("fifth", n, t)] ** 2))
            msr = float(np.mean(data[("remainder", n, t)] ** 2))
            may = float(np.mean(np.abs(data[("y_n", n, t)])))
            viol = int(np.sum(data[("violations", n, t)]))
            total_viol += viol
            for key, val in zip(stats, (ms5, msr, may)):
                res.add(n, t, key, val)
                stats[key].append(val)
            res.add(n, t, "remainder_bound_violations", viol)
        for key, vals in stats.items():
            vals = np.asarray(vals)
            if np.all(vals > 0):
                slope = float(np.polyfit(logn, np.log(vals), 1)[0])
                res.add(None, t, f"slope_{key}", slope)
                res.judge(f"slope_{key}", f"slope_{key}", slope, -1 / 3 + slack, "<=", t)
            else:
                res.warnings.append(f"t={t}: {key} vanishes at some n; slope not fitted")
        res.judge("remainder_bound_pathwise", "remainder_bound_violations", total_viol, 0, "==", t)
    return res


def run_eta_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment, cfg.to_dict())
    for t in cfg.t_list:
        rep = check_condition_vi(cfg.kernel, t, cfg.n_list)
        for n, v in zip(rep.n_list, rep.values):
            res.add(n, t, "empirical_eta", v)
        if rep.predicted is not None:
            res.add(None, t, "predicted_eta", rep.predicted)
            res.judge("final_gap_to_prediction", "empirical_eta",
                      abs(rep.values[-1] - rep.predicted), abs(rep.values[0] - rep.predicted),
                      "<=", t)
        res.judge("contracting", "empirical_eta", float(rep.passed), 1.0, "==", t)
    return res


_RUNNERS = {
    Experiment.WEAK_LIMIT: run_weak_limit,
    Experiment.VANISHING: run_vanishing,
    Experiment.SCALING: run_scaling,
    Experiment.ETA_CONVERGENCE: run_eta_convergence,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    log.info("running %s on %s", cfg.experiment.value, cfg.kernel.params())
    return _RUNNERS[cfg.experiment](cfg)
