"""``carousel-lab <command> [flags]``: run an experiment and emit a CSV or JSON
report.

Exit codes: 0 all gated checks pass, 1 a gated check failed, 2 usage or
configuration error, 3 numeric or solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import carousel_queue as cq
from . import exact_laws as ex
from . import multi_carousel as mc
from .distributions import Erlang, Uniform01, parse_distribution, read_number_file
from .numerics import (ArgumentError, NumericError, RandomStream, ks_against_cdf, ks_critical_value,
                       ks_two_sample, map_chunks, sup_cdf_distance)
from .spacings import OrderInstance, sample_sorted_positions
from .strategies import Kind, StrategySpec, batch_travel_times, plan_route


class ConfigError(ArgumentError):
    pass


# ---------------------------------------------------------------------------
# Parameter schema


def _int(lo=None, hi=None):
    def parse(text):
        try:
            v = int(str(text))
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}") from None
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(f"{v} outside [{lo}, {hi if hi is not None else 'inf'}]")
        return v
    return parse


def _float(lo=None, hi=None, open_lo=False):
    def parse(text):
        try:
            v = float(str(text))
        except ValueError:
            raise ConfigError(f"expected a number, got {text!r}") from None
        if not math.isfinite(v):
            raise ConfigError("value must be finite")
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ConfigError(f"{v} must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"{v} must be <= {hi}")
        return v
    return parse


def _choice(*options):
    def parse(text):
        if str(text) not in options:
            raise ConfigError(f"{text!r} not one of {', '.join(options)}")
        return str(text)
    return parse


def _bool(text):
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _dist(text):
    parse_distribution(str(text))  # validate only; the report keeps the text
    return str(text)


def _path(text):
    return str(text)


def _list(item):
    def parse(text):
        if isinstance(text, (list, tuple)):
            parts = list(text)
        else:
            parts = [p for p in str(text).split(",") if p.strip()]
        if not parts:
            raise ConfigError("empty list")
        return [item(p) for p in parts]
    return parse


STRATEGY_NAMES = ("clockwise", "counterclockwise", "nearest-item", "m-step", "optimal",
                  "cw", "ccw", "ni", "mstep", "opt")


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable
    default: object
    help: str = ""


COMMANDS: dict[str, tuple[str, list[Param]]] = {
    "strategy-sim": ("simulate single-carousel travel times", [
        Param("n", _int(1), 5, "items per order"),
        Param("strategy", _choice(*STRATEGY_NAMES), "nearest-item"),
        Param("m", _int(0), None, "turn limit for m-step"),
        Param("samples", _int(1), 100_000),
        Param("method", _choice("direct", "representation", "both"), "both",
              "direct simulation, representation sampler, or both with a KS comparison"),
        Param("positions", _path, None, "route a single instance read from this file"),
        Param("ks-threshold", _float(0, 1, open_lo=True), None,
              "KS tolerance; default max(0.01, 1%% critical value for the sample size)"),
    ]),
    "exact-law": ("tabulate clockwise and nearest-item CDFs", [
        Param("n", _int(1), 2),
        Param("start", _float(0, 1), 0.0),
        Param("stop", _float(0, 1), 1.0),
        Param("step", _float(0, 1, open_lo=True), 0.1),
        Param("high-precision", _bool, False, "exact rational evaluation (needed for n > 64)"),
    ]),
    "limit-check": ("compare scaled shortfall (n+1)(1-T) with its limit law", [
        Param("strategy", _choice("nearest-item", "optimal"), "nearest-item"),
        Param("n", _int(2), 200),
        Param("samples", _int(2), 100_000),
        Param("ks-threshold", _float(0, 1, open_lo=True), None,
              "KS tolerance; default max(0.02, 1%% critical value for the sample size)"),
    ]),
    "queue-sim": ("simulate the two-carousel recursion", [
        Param("pick", _dist, "exp:1"),
        Param("rotation", _dist, "uniform01"),
        Param("steps", _int(2), 1_000_000),
        Param("burn-in", _int(0), 10_000),
        Param("lags", _int(0, 50), 0, "autocovariance lags to report"),
    ]),
    "queue-solve": ("stationary waiting-time law for rotations on [0, 1)", [
        Param("pick", _dist, "exp:1"),
        Param("rotation", _dist, "uniform01"),
        Param("grid-size", _int(16, 1 << 15), 2048),
        Param("tol", _float(0, 1, open_lo=True), 1e-10),
        Param("points", _int(2, 10_001), 11, "CDF table size"),
    ]),
    "erlang-structure": ("exponential-mixture density for Erlang picks, uniform rotation", [
        Param("rate", _float(0, open_lo=True), 2.0),
        Param("stages", _int(1, 12), 2),
        Param("grid-size", _int(16, 1 << 15), 2048),
    ]),
    "erlang-rotation": ("waiting-time law for Erlang rotations", [
        Param("pick", _dist, "exp:1"),
        Param("mu", _float(0, open_lo=True), 2.0),
        Param("stages", _int(1, 30), 2),
        Param("points", _int(2, 10_001), 11),
        Param("steps", _int(0), 0, "if positive, also simulate and compare CDFs"),
    ]),
    "error-bound": ("check the rotation-perturbation error bound", [
        Param("pick", _dist, "exp:1"),
        Param("rotation", _dist, "uniform01"),
        Param("perturbed", _dist, None, "perturbed rotation; omit for randomized trials"),
        Param("trials", _int(1, 10_000), 50),
        Param("grid-size", _int(16, 1 << 14), 1024),
    ]),
    "multi-sim": ("cyclic service of r carousels", [
        Param("carousels", _list(_int(2, 1000)), [2, 3, 4, 6]),
        Param("pick", _dist, "exp:1"),
        Param("rotation", _dist, "uniform01"),
        Param("steps", _int(2), 1_000_000),
        Param("burn-in", _int(0), 10_000),
    ]),
    "compare-repair": ("alternating versus first-ready service", [
        Param("pick", _dist, "exp:1"),
        Param("rotation", _dist, "uniform01"),
        Param("steps", _int(2), 1_000_000),
        Param("burn-in", _int(0), 10_000),
        Param("replications", _int(2), 2000),
        Param("confidence", _float(0, 1, open_lo=True), 0.99),
    ]),
    "sensitivity": ("throughput versus pick-time variability", [
        Param("mean-pick", _float(0, open_lo=True), 1.0),
        Param("scv", _list(_float(0, open_lo=True)), [0.5, 1.0, 2.0]),
        Param("rotation", _dist, "uniform01"),
        Param("grid-size", _int(16, 1 << 15), 2048),
    ]),
}

GLOBAL_KEYS = ("command", "seed", "format", "out", "threads")


@dataclass
class ExperimentConfig:
    command: str
    params: dict
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"
    threads: int = 1


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Check:
    name: str
    measured: float
    relation: str
    threshold: float
    gated: bool = True

    _OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
            "==": operator.eq}

    @property
    def passed(self) -> bool:
        m = self.measured
        if isinstance(m, float) and math.isnan(m):
            return False
        return bool(self._OPS[self.relation](m, self.threshold))


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list]


@dataclass
class Report:
    command: str
    parameters: dict
    seed: int
    version: str = __version__
    results: dict = field(default_factory=dict)
    tables: list[Table] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def table(self, name, columns, rows):
        self.tables.append(Table(name, list(columns), [list(r) for r in rows]))

    def check(self, name, measured, relation, threshold, gated=True):
        self.checks.append(Check(name, _plain(measured), relation, _plain(threshold), gated))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.gated)

    def to_json(self) -> str:
        doc = {
            "metadata": {"command": self.command, "parameters": self.parameters,
                         "seed": self.seed, "version": self.version, "warnings": self.warnings},
            "results": self.results,
            "tables": {t.name: {"columns": t.columns, "rows": t.rows} for t in self.tables},
            "checks": [{"name": c.name, "passed": c.passed, "measured": c.measured,
                        "relation": c.relation, "threshold": c.threshold, "gated": c.gated}
                       for c in self.checks],
        }
        return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# command={self.command}\n# seed={self.seed}\n# version={self.version}\n")
        for k, v in self.parameters.items():
            buf.write(f"# param.{k}={_cell(v)}\n")
        for msg in self.warnings:
            buf.write(f"# warning={msg}\n")
        sections = []
        if self.results:
            sections.append(Table("results", ["quantity", "value"], [[k, v] for k, v in self.results.items()]))
        sections += self.tables
        if self.checks:
            sections.append(Table("checks", ["name", "passed", "measured", "relation", "threshold", "gated"],
                                  [[c.name, c.passed, c.measured, c.relation, c.threshold, c.gated]
                                   for c in self.checks]))
        for i, t in enumerate(sections):
            if i:
                buf.write("\n")
            buf.write(f"# table={t.name}\n")
            w.writerow(t.columns)
            for row in t.rows:
                w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _plain(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _cell(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".9g")
    if isinstance(v, list):
        return ",".join(_cell(x) for x in v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    v = _plain(obj)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


# ---------------------------------------------------------------------------
# Commands


def _ks_tolerance(given, floor, samples):
    # Two-sample critical value covers the one-sample case as well.
    if given is not None:
        return given
    return max(floor, ks_critical_value(samples, samples))


def _grid_cdf_rows(xs, *columns):
    return [[float(x)] + [float(c[i]) for c in columns] for i, x in enumerate(xs)]


def _cmd_strategy_sim(p, cfg, rep):
    strategy = StrategySpec.parse(p["strategy"], p["m"])
    if p["positions"] is not None:
        inst = OrderInstance(read_number_file(p["positions"]))
        route = plan_route(inst, strategy)
        rep.results.update(n=inst.n, travel_time=route.travel_time, turns=route.turns)
        rep.table("route", ["step", "item", "position", "leg"],
                  [[k + 1, int(i), float(inst.positions[i]), float(leg)]
                   for k, (i, leg) in enumerate(zip(route.pick_order, route.legs))])
        return
    n, samples = p["n"], p["samples"]
    thr = _ks_tolerance(p["ks-threshold"], 0.01, samples)
    stream = RandomStream(cfg.seed)

    def draw(size, gen):
        r = batch_travel_times(sample_sorted_positions(size, n, gen), strategy)
        return r.travel_time, r.turns

    times = turns = None
    if p["method"] in ("direct", "both"):
        times, turns = map_chunks(draw, stream.substream(0), samples, threads=cfg.threads)
        se = float(times.std(ddof=1) / math.sqrt(samples))
        rep.results.update(mean=float(times.mean()), mean_se=se, max=float(times.max()),
                           min=float(times.min()))
        values, counts = np.unique(turns, return_counts=True)
        rep.table("turns", ["turns", "fraction"], [[int(v), c / samples] for v, c in zip(values, counts)])
        if strategy.kind in (Kind.CLOCKWISE, Kind.COUNTERCLOCKWISE):
            ks = ks_against_cdf(times, lambda t: np.clip(t, 0, 1) ** n)
            rep.check("ks_vs_power_law", ks.statistic, "<", thr)
        elif strategy.kind is Kind.NEAREST_ITEM:
            if n <= ex.EXACT_MAX_N:
                ks = ks_against_cdf(times, lambda t: ex.ni_cdf_array(n, np.clip(t, 0, 1)))
                rep.check("ks_vs_exact_law", ks.statistic, "<", thr)
            rep.check("max_below_support_bound", float(times.max()), "<=", ex.ni_support_max(n))
            rep.check("mean_z_score", abs(float(times.mean()) - ex.ni_mean(n)) / se, "<=", 3.0)
            rep.results["exact_mean"] = ex.ni_mean(n)

    if p["method"] in ("representation", "both"):
        rstream = stream.substream(1)
        if strategy.kind is Kind.NEAREST_ITEM:
            rep_draws = map_chunks(lambda s, g: ex.sample_ni_representation(n, g, s), rstream, samples,
                                   threads=cfg.threads)
        elif strategy.kind is Kind.M_STEP:
            rep_draws = map_chunks(lambda s, g: ex.sample_mstep_representation(n, strategy.m, g, s),
                                   rstream, samples, threads=cfg.threads)
        else:
            raise ConfigError(f"no representation sampler for {strategy}")
        rep.results["representation_mean"] = float(rep_draws.mean())
        if times is not None:
            rep.check("ks_direct_vs_representation", ks_two_sample(times, rep_draws).statistic, "<", thr)


def _cmd_exact_law(p, cfg, rep):
    n = p["n"]
    if p["stop"] < p["start"]:
        raise ConfigError("stop must not be below start")
    k = int(round((p["stop"] - p["start"]) / p["step"]))
    t = np.round(p["start"] + p["step"] * np.arange(k + 1), 12)
    t = t[t <= 1.0]
    cw = t**n
    ni = ex.ni_cdf_array(n, t, high_precision=p["high-precision"])
    rep.results.update(cw_mean=ex.cw_mean(n), ni_mean=ex.ni_mean(n), ni_support_max=ex.ni_support_max(n))
    rep.table("cdf", ["t", "cw_cdf", "ni_cdf"], _grid_cdf_rows(t, cw, ni))
    rep.check("ni_cdf_min_increment", float(np.min(np.diff(ni), initial=0.0)), ">=", -1e-12)


def _cmd_limit_check(p, cfg, rep):
    n, samples = p["n"], p["samples"]
    strategy = StrategySpec.parse(p["strategy"])
    stream = RandomStream(cfg.seed)

    def draw(size, gen):
        return (n + 1) * (1 - batch_travel_times(sample_sorted_positions(size, n, gen), strategy).travel_time)

    scaled = map_chunks(draw, stream.substream(0), samples, threads=cfg.threads)
    spec = ex.LimitFunctionalSpec("ni-limit" if strategy.kind is Kind.NEAREST_ITEM else "opt-limit")
    limit = map_chunks(lambda s, g: ex.sample_limit_functional(spec, g, s), stream.substream(1), samples,
                       threads=cfg.threads)
    rep.results.update(scaled_mean=float(scaled.mean()), limit_mean=float(limit.mean()),
                       truncation_terms=spec.truncation_terms)
    thr = _ks_tolerance(p["ks-threshold"], 0.02, samples)
    rep.check("ks_scaled_vs_limit", ks_two_sample(scaled, limit).statistic, "<", thr)
    if strategy.kind is Kind.NEAREST_ITEM:
        se = float(limit.std(ddof=1) / math.sqrt(samples))
        rep.check("limit_mean_z_score", abs(float(limit.mean()) - spec.mean()) / se, "<=", 3.0)


def _summary_results(rep, s, prefix=""):
    rep.results.update({prefix + k: getattr(s, k) for k in
                        ("mean_wait", "mean_wait_se", "pi0", "pi0_se", "mean_pick", "throughput",
                         "utilization", "steps")})


def _cmd_queue_sim(p, cfg, rep):
    pick, rot = parse_distribution(p["pick"]), parse_distribution(p["rotation"])
    if p["steps"] <= p["burn-in"]:
        raise ConfigError("steps must exceed burn-in")
    path = cq.simulate_recursion(pick, rot, p["steps"], p["burn-in"], RandomStream(cfg.seed))
    _summary_results(rep, path.summary())
    w = path.waits[path.window]
    top = rot.support_max if math.isfinite(rot.support_max) else float(np.quantile(w, 0.999))
    xs = np.linspace(0.0, top, 11)
    emp = np.searchsorted(np.sort(w), xs, side="right") / w.size
    rep.table("cdf", ["x", "empirical_cdf"], _grid_cdf_rows(xs, emp))
    if p["lags"]:
        cov = cq.covariance_diagnostics(w, p["lags"])
        rep.table("autocovariance", ["lag", "estimate", "se"], [[c.lag, c.estimate, c.se] for c in cov])
        for c in cov[1:]:
            if c.lag % 2 == 0:
                rep.check(f"lag{c.lag}_nonnegative_z", c.estimate / c.se, ">=", -3.0)
            else:
                rep.check(f"lag{c.lag}_nonpositive_z", c.estimate / c.se, "<=", 3.0)


def _structure_checks(rep, st: cq.ErlangUniformStructure, base: cq.StationarySolution):
    rep.check("root_residual", st.root_residual, "<", 1e-8)
    rep.check("projection_residual", st.projection_residual, "<", 1e-6)
    rep.check("pi0_identity_rel_error", abs(st.pi0 - base.atom_pi0) / max(base.atom_pi0, 1e-300), "<", 1e-4)
    rep.check("throughput_identity_rel_error", abs(st.throughput - base.throughput) / base.throughput,
              "<", 1e-4)


def _cmd_queue_solve(p, cfg, rep):
    pick, rot = parse_distribution(p["pick"]), parse_distribution(p["rotation"])
    if isinstance(rot, Uniform01):
        sol = cq.solve_stationary_fixed_point(pick, rot, p["grid-size"], p["tol"])
    else:
        sol = cq.solve_stationary_general(pick, rot, p["grid-size"], p["tol"])
    rep.results.update(pi0=sol.atom_pi0, mean_wait=sol.mean_wait, throughput=sol.throughput,
                       iterations=sol.iterations, contraction=sol.contraction)
    xs = np.linspace(0.0, 1.0, p["points"])
    rep.table("cdf", ["x", "cdf"], _grid_cdf_rows(xs, sol.cdf(xs)))
    if sol.density is not None:
        rep.check("mass_error", abs(sol.mass() - 1.0), "<", 1e-8)
    if isinstance(rot, Uniform01) and isinstance(pick, Erlang):
        st = cq.erlang_uniform_structure(pick.rate, pick.stages, sol, residual_tol=math.inf,
                                         identity_tol=math.inf)
        rep.results.update(structure_pi0=st.pi0, structure_throughput=st.throughput)
        _structure_checks(rep, st, sol)


def _cmd_erlang_structure(p, cfg, rep):
    base = cq.solve_stationary_fixed_point(Erlang(p["rate"], p["stages"]), grid_size=p["grid-size"])
    st = cq.erlang_uniform_structure(p["rate"], p["stages"], base, residual_tol=math.inf,
                                     identity_tol=math.inf)
    rep.results.update(pi0=st.pi0, throughput=st.throughput, grid_pi0=base.atom_pi0,
                       grid_throughput=base.throughput)
    order = np.lexsort((st.roots.imag, st.roots.real))
    rep.table("roots", ["root_re", "root_im", "coef_re", "coef_im"],
              [[st.roots[i].real, st.roots[i].imag, st.coefficients[i].real, st.coefficients[i].imag]
               for i in order])
    _structure_checks(rep, st, base)


def _cmd_erlang_rotation(p, cfg, rep):
    pick = parse_distribution(p["pick"])
    sol = cq.solve_erlang_rotation(pick, p["mu"], p["stages"])
    rot = Erlang(p["mu"], p["stages"])
    rep.results.update(pi0=sol.pi0, mean_wait=sol.mean_wait(),
                       throughput=1.0 / (sol.mean_wait() + pick.mean()))
    rep.table("psi", ["k", "psi_derivative", "phi_derivative"],
              [[k, sol.psi_derivatives[k], sol.phi_derivatives[k]] for k in range(sol.stages)])
    top = float(rot.mean() + 6 * math.sqrt(rot.stages) / rot.rate)
    xs = np.linspace(0.0, top, p["points"])
    rep.table("cdf", ["x", "cdf"], _grid_cdf_rows(xs, sol.cdf(xs)))
    rep.check("total_mass_error", abs(sol.pi0 + sol.density_mass() - 1.0), "<", 1e-8)
    if p["steps"] > 0:
        burn = min(10_000, p["steps"] // 10)
        path = cq.simulate_recursion(pick, rot, p["steps"], burn, RandomStream(cfg.seed))
        w = path.waits[path.window]
        grid = np.concatenate([[0.0], np.linspace(0.0, float(w.max()), 2001)])
        rep.check("sup_cdf_vs_simulation", sup_cdf_distance(w, sol.cdf, grid), "<", 0.01)


def _cmd_error_bound(p, cfg, rep):
    if p["perturbed"] is not None:
        cases = [(parse_distribution(p["pick"]), parse_distribution(p["rotation"]),
                  parse_distribution(p["perturbed"]))]
    else:
        gen = RandomStream(cfg.seed).generator()
        cases = [cq.random_error_bound_case(gen) for _ in range(p["trials"])]
    rows, held = [], 0
    for k, (pick, rot, pert) in enumerate(cases):
        r = cq.error_bound_check(pick, rot, pert, p["grid-size"])
        held += r.holds
        rows.append([k, pick.describe(), rot.describe(), pert.describe(), r.epsilon, r.contraction,
                     r.bound, r.measured, r.holds])
    rep.table("trials", ["trial", "pick", "rotation", "perturbed", "epsilon", "contraction", "bound",
                         "measured", "holds"], rows)
    rep.check("fraction_within_bound", held / len(cases), ">=", 1.0)


def _cmd_multi_sim(p, cfg, rep):
    pick, rot = parse_distribution(p["pick"]), parse_distribution(p["rotation"])
    rs = p["carousels"]
    stream = RandomStream(cfg.seed)
    rows, summaries = [], []
    for r in rs:
        path, s = mc.simulate_cyclic(mc.MultiCarouselConfig(r, pick, rot, p["steps"], p["burn-in"]), stream)
        summaries.append(s)
        rows.append([r, s.mean_wait, s.mean_wait_se, s.pi0, s.utilization, s.throughput,
                     s.per_carousel_throughput])
        if r == 2:
            ref = cq.simulate_recursion(pick, rot, p["steps"], p["burn-in"], stream)
            rep.check("r2_matches_two_carousel_path", float(np.array_equal(path.waits, ref.waits)), "==", 1.0)
    rep.table("carousels", ["r", "mean_wait", "mean_wait_se", "pi0", "utilization", "throughput",
                            "per_carousel_throughput"], rows)
    if len(rs) > 1 and list(rs) == sorted(rs):
        w = np.array([s.mean_wait for s in summaries])
        u = np.array([s.utilization for s in summaries])
        rep.check("mean_wait_max_increase", float(np.max(np.diff(w))), "<=", 0.0)
        rep.check("utilization_max_decrease", float(np.max(-np.diff(u))), "<=", 0.0)
        a, b = summaries[0], summaries[-1]
        z = (a.mean_wait - b.mean_wait) / math.hypot(a.mean_wait_se, b.mean_wait_se)
        rep.check("endpoint_separation_z", z, ">=", 3.0)


def _cmd_compare_repair(p, cfg, rep):
    pick, rot = parse_distribution(p["pick"]), parse_distribution(p["rotation"])
    if p["steps"] <= p["burn-in"]:
        raise ConfigError("steps must exceed burn-in")
    c = mc.compare_disciplines(pick, rot, p["steps"], RandomStream(cfg.seed), burn_in=p["burn-in"],
                               replications=p["replications"], confidence=p["confidence"])
    _summary_results(rep, c.alternating, "alternating_")
    _summary_results(rep, c.non_alternating, "repair_")
    rep.table("partial_sums", ["horizon", "mean_alternating", "mean_repair", "se_difference", "z"],
              [[x.horizon, x.mean_alternating, x.mean_repair, x.se_difference,
                (x.mean_alternating - x.mean_repair) / x.se_difference] for x in c.partial_sums])
    rep.check("repair_mean_wait_below_ci", float(c.mean_wait_separated()), "==", 1.0)
    rep.check("alternating_pi0_above_ci", float(c.pi0_separated()), "==", 1.0)
    rep.check("repair_throughput_excess", c.non_alternating.throughput - c.alternating.throughput, ">=", 0.0)
    for x in c.partial_sums:
        rep.check(f"partial_sum_{x.horizon}_z", (x.mean_alternating - x.mean_repair) / x.se_difference,
                  ">=", -3.0)


def _cmd_sensitivity(p, cfg, rep):
    rot = parse_distribution(p["rotation"])
    s = cq.throughput_sensitivity(p["mean-pick"], p["scv"], rot, p["grid-size"])
    rep.table("throughput", ["scv", "throughput"], [[c, t] for c, t in zip(s.scv, s.throughput)])
    rep.results["relative_spread"] = s.relative_spread
    rep.check("throughput_nonincreasing", float(s.nonincreasing), "==", 1.0, gated=False)


HANDLERS = {
    "strategy-sim": _cmd_strategy_sim,
    "exact-law": _cmd_exact_law,
    "limit-check": _cmd_limit_check,
    "queue-sim": _cmd_queue_sim,
    "queue-solve": _cmd_queue_solve,
    "erlang-structure": _cmd_erlang_structure,
    "erlang-rotation": _cmd_erlang_rotation,
    "error-bound": _cmd_error_bound,
    "multi-sim": _cmd_multi_sim,
    "compare-repair": _cmd_compare_repair,
    "sensitivity": _cmd_sensitivity,
}


# ---------------------------------------------------------------------------
# Configuration


def _add_globals(ap, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    ap.add_argument("--seed", default=d(None), help="64-bit seed (default 0)")
    ap.add_argument("--out", default=d(None), help="report path (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default=d(None))
    ap.add_argument("--config", default=d(None), help="key=value or JSON config file")
    ap.add_argument("--threads", default=d(None), help="worker threads for sampling")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carousel-lab", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"carousel-lab {__version__}")
    _add_globals(ap, suppress=True)
    sub = ap.add_subparsers(dest="command", metavar="command")
    for name, (help_text, params) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _add_globals(sp, suppress=True)
        for prm in params:
            hint = "" if prm.default is None else f"default {_cell(prm.default)}"
            text = f"{prm.help} ({hint})" if prm.help and hint else prm.help or hint
            sp.add_argument(f"--{prm.name}", dest=prm.name, default=argparse.SUPPRESS, help=text)
    return ap


def read_config_file(path) -> dict:
    """Flat mapping from a dotted ``key = value`` file or a JSON object.

    Command parameters live under ``params.``; top-level keys are
    command, seed, format, out and threads.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat = {}
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        for k, v in doc.items():
            if k == "params":
                if not isinstance(v, dict):
                    raise ConfigError(f"{path}: params must be an object")
                flat.update({f"params.{pk}": pv for pk, pv in v.items()})
            else:
                flat[k] = v
    else:
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            flat[key.strip()] = value.strip()
    for k in flat:
        if k not in GLOBAL_KEYS and not k.startswith("params."):
            raise ConfigError(f"{path}: unknown key {k!r}")
    return flat


def parse_config(argv) -> ExperimentConfig:
    argv = list(argv)
    ap = build_parser()
    pre, _ = _prescan(argv)
    file_vals = read_config_file(pre) if pre else {}
    if "command" in file_vals and not any(a in COMMANDS for a in argv):
        argv = [str(file_vals["command"])] + argv
    ns = vars(ap.parse_args(argv))
    command = ns.pop("command", None)
    if command is None:
        raise ConfigError("no command given")
    if "command" in file_vals and file_vals["command"] != command:
        raise ConfigError(f"config is for {file_vals['command']!r}, not {command!r}")

    params_schema = {prm.name: prm for prm in COMMANDS[command][1]}
    params = {}
    for key, prm in params_schema.items():
        raw = ns.get(key, file_vals.get(f"params.{key}", prm.default))
        try:
            params[key] = None if raw is None else prm.parse(raw)
        except ConfigError as exc:
            raise ConfigError(f"--{key}: {exc}") from None
    for k in file_vals:
        if k.startswith("params.") and k[7:] not in params_schema:
            raise ConfigError(f"unknown parameter {k[7:]!r} for {command}")

    def glob(key, parse, default):
        raw = ns.get(key)
        if raw is None:
            raw = file_vals.get(key, default)
        try:
            return None if raw is None else parse(raw)
        except ConfigError as exc:
            raise ConfigError(f"--{key}: {exc}") from None

    cfg = ExperimentConfig(
        command=command, params=params,
        seed=glob("seed", _int(0, 2**64 - 1), 0),
        output_path=glob("out", str, None),
        format=glob("format", _choice("csv", "json"), "csv"),
        threads=glob("threads", _int(1, 256), 1),
    )
    _validate(cfg)
    return cfg


def _prescan(argv):
    """Find ``--config`` without letting argparse fail on a missing command."""
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return argv[i + 1], i
        if a.startswith("--config="):
            return a.split("=", 1)[1], i
    return None, None


def _validate(cfg: ExperimentConfig):
    p = cfg.params
    if cfg.command == "strategy-sim":
        spec = StrategySpec.parse(p["strategy"], p["m"])
        if p["m"] is not None and spec.kind is not Kind.M_STEP:
            raise ConfigError("--m only applies to the m-step strategy")
        if spec.kind is Kind.M_STEP and 2 * spec.m >= p["n"] and p["positions"] is None:
            if p["method"] != "direct":
                raise ConfigError(f"m-step representation needs 2m < n (m={spec.m}, n={p['n']}); "
                                  "use --method direct to simulate anyway")
        if p["method"] != "direct" and spec.kind in (Kind.CLOCKWISE, Kind.COUNTERCLOCKWISE, Kind.OPTIMAL) \
                and p["positions"] is None:
            raise ConfigError(f"no representation sampler for {spec}; use --method direct")
    for key in ("pick", "rotation", "perturbed"):
        if key in p and p[key] is not None:
            parse_distribution(p[key])


def _warnings(cfg: ExperimentConfig) -> list[str]:
    p = cfg.params
    out = []
    if cfg.command == "strategy-sim" and p["positions"] is None:
        spec = StrategySpec.parse(p["strategy"], p["m"])
        if spec.kind is Kind.M_STEP and 2 * spec.m >= p["n"]:
            out.append(f"2m >= n: no representation law for m-step({spec.m}) at n={p['n']}; "
                       "direct simulation only")
    return out


def run(cfg: ExperimentConfig) -> Report:
    rep = Report(cfg.command, dict(cfg.params), cfg.seed)
    rep.warnings = _warnings(cfg)
    HANDLERS[cfg.command](cfg.params, cfg, rep)
    return rep


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except ArgumentError as exc:
        print(f"carousel-lab: error: {exc}", file=sys.stderr)
        return 2
    try:
        rep = run(cfg)
    except ArgumentError as exc:
        print(f"carousel-lab {cfg.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"carousel-lab {cfg.command}: numeric error: {exc}", file=sys.stderr)
        return 3
    for msg in rep.warnings:
        print(f"carousel-lab: warning: {msg}", file=sys.stderr)
    text = rep.to_json() if cfg.format == "json" else rep.to_csv()
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
