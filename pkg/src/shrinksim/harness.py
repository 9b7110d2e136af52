"""Factorial Monte Carlo study of shrinkage methods.

Every random draw comes from a stream keyed by (purpose, scenario, run,
step) under the master seed, so results do not depend on scenario order,
filtering, or the number of worker processes.
"""

from __future__ import annotations

import csv
import enum
import itertools
import logging
import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from ._rng import child
from .datagen import (
    Dataset,
    Population,
    TrueModel,
    apply_standardization,
    draw_development_sample,
    generate_population,
    solve_intercept,
    standardize,
)
from .errors import ConfigurationError
from .firth import fit_firth
from .glm import FitOptions, FitResult, Method, fit_ml, linear_predictor
from .metrics import (
    aggregate_slopes,
    c_statistic,
    coefficient_bias,
    selection_stats,
    shrinkage_correlation,
    slope_for_run,
    winsorize,
)
from .penalized import (
    fit_adaptive_lasso,
    fit_garrote,
    fit_lasso,
    fit_pml,
    fit_ridge,
    lambda_grid,
    make_cv_plan,
)
from .uniform import bootstrap_uniform, likelihood_uniform

log = logging.getLogger(__name__)

__all__ = [
    "PredictorSet",
    "EPVS",
    "RHOS",
    "EVENT_RATES",
    "ALL_METHODS",
    "SELECTION_METHODS",
    "Scenario",
    "HarnessConfig",
    "MethodMetrics",
    "RunRecord",
    "MethodSummary",
    "ScenarioSummary",
    "enumerate_scenarios",
    "true_intercept",
    "scenario_populations",
    "run_one",
    "run_scenario",
    "summarize",
    "write_results",
    "run_study",
]

SCHEMA_VERSION = 1

# run-level exclusion threshold: the 0/1 warning level of R's glm.fit
SEPARATION_EPSILON = 10 * np.finfo(float).eps


class PredictorSet(str, enum.Enum):
    FIVE_TRUE = "FiveTrue"
    FIVE_TRUE_FIVE_NOISE = "FiveTrueFiveNoise"
    TEN_TRUE = "TenTrue"

    def __str__(self) -> str:
        return self.value

    @property
    def betas(self) -> np.ndarray:
        five = [0.2, 0.2, 0.2, 0.5, 0.8]
        if self is PredictorSet.FIVE_TRUE:
            return np.array(five)
        if self is PredictorSet.FIVE_TRUE_FIVE_NOISE:
            return np.array(five + [0.0] * 5)
        return np.array([0.2] * 6 + [0.5] * 2 + [0.8] * 2)


EPVS = (3, 5, 10, 20, 50)
PREDICTOR_SETS = tuple(PredictorSet)
RHOS = (0.0, 0.5)
EVENT_RATES = (0.1, 0.5)

ALL_METHODS = tuple(Method)
SELECTION_METHODS = (Method.LASSO, Method.ADAPTIVE_LASSO, Method.GARROTE)

# stream purposes under the master seed
_INTERCEPT, _DEV_POOL, _VALIDATION, _RUN = range(4)
# stream steps within a run
_SAMPLE, _CV, _BOOTSTRAP = range(3)


@dataclass(frozen=True)
class Scenario:
    epv: int
    predictor_set: PredictorSet
    rho: float
    event_rate: float
    true_intercept: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "predictor_set", PredictorSet(self.predictor_set))
        if self.epv not in EPVS or self.rho not in RHOS or self.event_rate not in EVENT_RATES:
            raise ConfigurationError(f"not a design cell: {self!r}")

    @property
    def index(self) -> int:
        """Position in the full factorial; stable under filtering."""
        return (
            ((PREDICTOR_SETS.index(self.predictor_set) * len(RHOS) + RHOS.index(self.rho))
             * len(EVENT_RATES) + EVENT_RATES.index(self.event_rate)) * len(EPVS)
            + EPVS.index(self.epv)
        )

    @property
    def scenario_id(self) -> str:
        return f"{self.predictor_set.value}_rho{self.rho:g}_er{self.event_rate:g}_epv{self.epv}"

    @property
    def true_betas(self) -> np.ndarray:
        return self.predictor_set.betas

    @property
    def df(self) -> int:
        return self.true_betas.size

    @property
    def n_events(self) -> int:
        return self.epv * self.df

    @property
    def n_total(self) -> int:
        return int(round(self.n_events / self.event_rate))

    def true_model(self) -> TrueModel:
        if self.true_intercept is None:
            raise ConfigurationError(f"{self.scenario_id}: true intercept not solved")
        return TrueModel(self.true_betas, self.true_intercept, self.rho)


@dataclass(frozen=True)
class HarnessConfig:
    runs_per_scenario: int = 200
    dev_pool_size: int = 200_000
    validation_size: int = 100_000
    bootstrap_reps: int = 200
    master_seed: int = 20190417
    scenario_filter: Mapping[str, Sequence] | None = None
    output_dir: str = "results"
    parallelism: int = 1
    methods: tuple[Method, ...] = ALL_METHODS
    intercept_mc_size: int = 500_000
    cv_folds: int = 10
    lambda_min: float = 1e-4
    separation_epsilon: float = SEPARATION_EPSILON

    def __post_init__(self):
        if self.runs_per_scenario < 1:
            raise ConfigurationError("runs_per_scenario must be >= 1")
        if self.bootstrap_reps < 1:
            raise ConfigurationError("bootstrap_reps must be >= 1")
        methods = tuple(Method(m) for m in self.methods)
        if Method.ML not in methods:
            methods = (Method.ML,) + methods
        # canonical order so output never depends on how methods were listed
        object.__setattr__(self, "methods", tuple(m for m in ALL_METHODS if m in methods))

    def check_sizes(self, scenarios: Iterable[Scenario]) -> None:
        largest = max(s.n_total for s in scenarios)
        for name in ("dev_pool_size", "validation_size"):
            if getattr(self, name) < 10 * largest:
                raise ConfigurationError(
                    f"{name}={getattr(self, name)} is below 10 x the largest sample size ({largest})"
                )


@dataclass
class MethodMetrics:
    slope: float
    c_stat: float
    fit: FitResult
    n_selected: int
    n_noise_selected: int


@dataclass
class RunRecord:
    scenario_id: str
    run_index: int
    per_method: dict = field(default_factory=dict)
    excluded: bool = False
    exclusion_reason: str | None = None


@dataclass(frozen=True)
class MethodSummary:
    median_slope: float
    slope_p5: float
    slope_p95: float
    mad_log_slope: float
    rmsd_log_slope: float
    median_cstat: float
    spearman_vs_optimal: float | None
    mean_coef_bias_true: float | None
    mean_coef_bias_noise: float | None
    mean_n_selected: float | None
    mean_n_noise_selected: float | None


@dataclass
class ScenarioSummary:
    scenario: Scenario
    per_method: dict
    n_runs_included: int
    n_runs_excluded: int
    n_runs_separation: int


def _matches(scenario: Scenario, flt: Mapping[str, Sequence] | None) -> bool:
    if not flt:
        return True
    for key, allowed in flt.items():
        if key not in ("epv", "predictor_set", "rho", "event_rate"):
            raise ConfigurationError(f"unknown scenario filter key {key!r}")
        if isinstance(allowed, (str, int, float)):
            allowed = [allowed]
        value = getattr(scenario, key)
        if key == "predictor_set":
            if value not in {PredictorSet(a) for a in allowed}:
                return False
        elif not any(math.isclose(value, float(a)) for a in allowed):
            return False
    return True


@lru_cache(maxsize=None)
def true_intercept(predictor_set: PredictorSet, rho: float, event_rate: float,
                   master_seed: int, mc_size: int) -> float:
    """Intercept for one (predictor set, rho, event rate) cell, cached per solving seed."""
    ps = PredictorSet(predictor_set)
    seed = child(master_seed, _INTERCEPT, PREDICTOR_SETS.index(ps), RHOS.index(rho),
                 EVENT_RATES.index(event_rate))
    return solve_intercept(ps.betas, rho, event_rate, mc_size=mc_size, seed=seed)


def enumerate_scenarios(config: HarnessConfig, solve: bool = True) -> list[Scenario]:
    cells = itertools.product(PREDICTOR_SETS, RHOS, EVENT_RATES, EPVS)
    out = [
        Scenario(epv=e, predictor_set=ps, rho=r, event_rate=er)
        for ps, r, er, e in cells
    ]
    out = [s for s in out if _matches(s, config.scenario_filter)]
    if not out:
        raise ConfigurationError(f"scenario filter {config.scenario_filter!r} selects nothing")
    if solve:
        out = [
            replace(s, true_intercept=true_intercept(
                s.predictor_set, s.rho, s.event_rate, config.master_seed, config.intercept_mc_size))
            for s in out
        ]
    return out


def scenario_populations(scenario: Scenario, config: HarnessConfig) -> tuple[Population, Dataset]:
    model = scenario.true_model()
    dev_pool = generate_population(
        model, config.dev_pool_size, child(config.master_seed, _DEV_POOL, scenario.index))
    val = generate_population(
        model, config.validation_size, child(config.master_seed, _VALIDATION, scenario.index))
    return dev_pool, Dataset(val.X, val.y)


def _fit_method(method: Method, dev: Dataset, ml: FitResult, scenario: Scenario,
                config: HarnessConfig, run_seed, opts: FitOptions, state: dict) -> FitResult:
    if method is Method.ML:
        return ml
    if method is Method.LU:
        return likelihood_uniform(ml, dev, df=scenario.df, opts=opts)
    if method is Method.BU:
        return bootstrap_uniform(dev, config.bootstrap_reps, opts,
                                 seed=child(run_seed, _BOOTSTRAP), ml_fit=ml)
    if method is Method.FIRTH:
        return fit_firth(dev)
    grid = lambda_grid(lower=config.lambda_min)
    if method is Method.PML:
        return fit_pml(dev, grid, opts)
    if "plan" not in state:
        state["plan"] = make_cv_plan(dev, config.cv_folds, child(run_seed, _CV))
    plan = state["plan"]
    if method is Method.RIDGE:
        return fit_ridge(dev, grid, plan, opts)
    if method is Method.LASSO:
        return fit_lasso(dev, grid, plan, opts)
    if method is Method.ADAPTIVE_LASSO:
        return fit_adaptive_lasso(dev, grid, plan, ml, opts)
    return fit_garrote(dev, grid, plan, ml, opts)


def run_one(scenario: Scenario, config: HarnessConfig, run_index: int,
            dev_pool: Population, validation: Dataset) -> RunRecord:
    """One simulation run: sample, standardize, fit every method, validate."""
    record = RunRecord(scenario.scenario_id, run_index)
    run_seed = child(config.master_seed, _RUN, scenario.index, run_index)
    opts = FitOptions(prob_epsilon=config.separation_epsilon)
    noise = scenario.true_betas == 0
    method = Method.ML
    try:
        dev = draw_development_sample(
            dev_pool, scenario.n_events, scenario.n_total, child(run_seed, _SAMPLE))
        dev, params = standardize(dev)
        ml = fit_ml(dev, opts)
        if ml.separation_detected:
            record.excluded = True
            record.exclusion_reason = "separation"
            return record
        val = apply_standardization(params, validation)
        state: dict = {}
        for method in config.methods:
            fit = _fit_method(method, dev, ml, scenario, config, run_seed, opts, state)
            selected = fit.betas != 0
            record.per_method[method] = MethodMetrics(
                slope=slope_for_run(fit, val),
                c_stat=c_statistic(linear_predictor(fit, val.X), val.y),
                fit=fit,
                n_selected=int(selected.sum()),
                n_noise_selected=int((selected & noise).sum()),
            )
    except Exception as exc:  # a failing fitter must not abort the scenario
        log.warning("%s run %d failed in %s: %s", scenario.scenario_id, run_index, method, exc)
        record.per_method = {}
        record.excluded = True
        record.exclusion_reason = f"failed:{method.value}:{type(exc).__name__}: {exc}"
    return record


def _run_chunk(scenario, config, indices, dev_pool, validation):
    return [run_one(scenario, config, r, dev_pool, validation) for r in indices]


def summarize(scenario: Scenario, records: Sequence[RunRecord],
              methods: Sequence[Method] = ALL_METHODS) -> ScenarioSummary:
    """Aggregate included runs; all statistics are paired by run index."""
    included = [r for r in records if not r.excluded]
    per_method = {}
    model = scenario.true_model() if scenario.true_intercept is not None else \
        TrueModel(scenario.true_betas, 0.0, scenario.rho)
    if included:
        ml_slopes = np.array([r.per_method[Method.ML].slope for r in included])
        for m in methods:
            rows = [r.per_method[m] for r in included]
            slopes = np.array([x.slope for x in rows])
            agg = aggregate_slopes(slopes)
            fits = [x.fit for x in rows]
            bias = coefficient_bias(fits, model)
            sel = selection_stats(fits, model) if m in SELECTION_METHODS else {}
            per_method[m] = MethodSummary(
                median_slope=agg.median,
                slope_p5=agg.p5,
                slope_p95=agg.p95,
                mad_log_slope=agg.mad_log,
                rmsd_log_slope=agg.rmsd_log,
                median_cstat=float(np.median([x.c_stat for x in rows])),
                spearman_vs_optimal=None if m is Method.ML else shrinkage_correlation(slopes, ml_slopes),
                mean_coef_bias_true=bias["mean_bias_true"],
                mean_coef_bias_noise=bias["mean_bias_noise"],
                mean_n_selected=sel.get("mean_n_selected"),
                mean_n_noise_selected=sel.get("mean_n_noise_selected"),
            )
    return ScenarioSummary(
        scenario=scenario,
        per_method=per_method,
        n_runs_included=len(included),
        n_runs_excluded=len(records) - len(included),
        n_runs_separation=sum(r.exclusion_reason == "separation" for r in records),
    )


def run_scenario(scenario: Scenario, config: HarnessConfig) -> tuple[list[RunRecord], ScenarioSummary]:
    if scenario.true_intercept is None:
        scenario = replace(scenario, true_intercept=true_intercept(
            scenario.predictor_set, scenario.rho, scenario.event_rate,
            config.master_seed, config.intercept_mc_size))
    config.check_sizes([scenario])
    dev_pool, validation = scenario_populations(scenario, config)
    runs = range(config.runs_per_scenario)
    if config.parallelism <= 1:
        records = _run_chunk(scenario, config, runs, dev_pool, validation)
    else:
        n_chunks = min(len(runs), 4 * config.parallelism)
        chunks = [list(c) for c in np.array_split(np.arange(len(runs)), n_chunks)]
        parts = Parallel(n_jobs=config.parallelism, backend="loky")(
            delayed(_run_chunk)(scenario, config, c, dev_pool, validation) for c in chunks
        )
        records = [rec for part in parts for rec in part]
    records.sort(key=lambda r: r.run_index)
    return records, summarize(scenario, records, config.methods)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "" if not np.isfinite(value) else repr(float(value))
    return str(value)


def _scenario_fields(s: Scenario) -> list:
    return [s.scenario_id, s.predictor_set.value, s.rho, s.event_rate, s.epv, s.n_events, s.n_total]


_SCENARIO_COLS = ["scenario_id", "predictor_set", "rho", "event_rate", "epv", "n_events", "n_total"]
RUNS_COLUMNS = _SCENARIO_COLS + [
    "run_index", "method", "slope_raw", "slope_winsorized", "c_stat", "lambda",
    "shrinkage_factor", "n_selected", "n_noise_selected", "excluded", "reason",
]
SUMMARY_COLUMNS = _SCENARIO_COLS + [
    "method", "n_runs_included", "n_runs_excluded", "n_runs_separation",
    "median_slope", "slope_p5", "slope_p95", "mad_log_slope", "rmsd_log_slope",
    "median_cstat", "spearman_vs_optimal", "mean_coef_bias_true", "mean_coef_bias_noise",
    "mean_n_selected", "mean_n_noise_selected",
]


def _header(kind: str, config: HarnessConfig | None) -> str:
    line = f"#schema=shrinksim.{kind}/v{SCHEMA_VERSION}"
    if config is not None:
        meta = {
            "master_seed": config.master_seed,
            "runs_per_scenario": config.runs_per_scenario,
            "dev_pool_size": config.dev_pool_size,
            "validation_size": config.validation_size,
            "bootstrap_reps": config.bootstrap_reps,
            "cv_folds": config.cv_folds,
            "lambda_min": config.lambda_min,
            "separation_epsilon": config.separation_epsilon,
        }
        line += ";" + ";".join(f"{k}={v}" for k, v in meta.items())
    return line + "\n"


def write_results(records: Sequence[RunRecord], summaries: Sequence[ScenarioSummary],
                  output_dir, config: HarnessConfig | None = None) -> tuple[Path, Path]:
    """Write ``runs.csv`` and ``summary.csv``; returns both paths."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    scenarios = {s.scenario.scenario_id: s.scenario for s in summaries}
    methods = [m for m in ALL_METHODS if any(m in s.per_method for s in summaries)]
    if config is not None:
        methods = list(config.methods)

    runs_path = out / "runs.csv"
    with open(runs_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header("runs", config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_COLUMNS)
        for rec in records:
            base = _scenario_fields(scenarios[rec.scenario_id]) + [rec.run_index]
            if rec.excluded:
                w.writerow([_fmt(v) for v in base + [None] * 8 + [True, rec.exclusion_reason]])
                continue
            for m in methods:
                mm = rec.per_method[m]
                w.writerow([_fmt(v) for v in base + [
                    m.value, mm.slope, float(winsorize(mm.slope)), mm.c_stat, mm.fit.lam,
                    mm.fit.shrinkage_factor, mm.n_selected, mm.n_noise_selected, False, None,
                ]])

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header("summary", config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            for m in methods:
                ms = s.per_method.get(m)
                stats = [getattr(ms, f.name) if ms else None for f in fields(MethodSummary)]
                w.writerow([_fmt(v) for v in _scenario_fields(s.scenario) + [
                    m.value, s.n_runs_included, s.n_runs_excluded, s.n_runs_separation] + stats])
    return runs_path, summary_path


def run_study(config: HarnessConfig, write: bool = True):
    """Run every selected scenario in factorial order and optionally write CSVs."""
    scenarios = enumerate_scenarios(config)
    config.check_sizes(scenarios)
    all_records: list[RunRecord] = []
    summaries: list[ScenarioSummary] = []
    for s in scenarios:
        log.info("scenario %s: %d runs", s.scenario_id, config.runs_per_scenario)
        records, summary = run_scenario(s, config)
        all_records.extend(records)
        summaries.append(summary)
    paths = write_results(all_records, summaries, config.output_dir, config) if write else None
    return all_records, summaries, paths
