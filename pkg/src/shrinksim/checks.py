"""Acceptance checks for the study, one function per criterion.

Each check returns a :class:`CheckResult`; none raises on a failed
comparison. The brute-force oracles here are deliberately naive and share
no code with the fitters they check.
"""

from __future__ import annotations

import filecmp
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, log_expit

from ._rng import child
from .datagen import Dataset, TrueModel, generate_population, standardize
from .firth import firth_penalized_loglik, fit_firth
from .glm import Method, fit_ml
from .harness import EPVS, HarnessConfig, PredictorSet, run_study, true_intercept
from .metrics import c_statistic
from .penalized import PenaltySpec, fit_at_lambda

__all__ = ["CheckResult", "CRITERIA", "QUICK_CRITERIA", "run_checks"] + [
    f"criterion_{k}" for k in range(1, 11)
]

DEFAULT_SEED = HarnessConfig().master_seed


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.title}: {self.detail}"


def _within(x: float, target: float, tol: float) -> bool:
    return abs(x - target) <= tol


def _config(seed: int, **kw) -> HarnessConfig:
    return HarnessConfig(master_seed=seed, **kw)


# ---------------------------------------------------------------- criterion 1

_CONSTANTS = [
    (PredictorSet.FIVE_TRUE, 0.0, -2.57, 0.75),
    (PredictorSet.FIVE_TRUE, 0.5, -2.98, 0.83),
    (PredictorSet.TEN_TRUE, 0.0, -2.88, 0.82),
    (PredictorSet.TEN_TRUE, 0.5, -4.34, 0.93),
]


def criterion_1(seed: int = DEFAULT_SEED) -> CheckResult:
    cfg = _config(seed)
    ok = True
    parts = []
    values = {}
    for k, (ps, rho, a_ref, c_ref) in enumerate(_CONSTANTS):
        a = true_intercept(ps, rho, 0.1, seed, cfg.intercept_mc_size)
        pop = generate_population(TrueModel(ps.betas, a, rho), 200_000, child(seed, 90, k))
        c = c_statistic(pop.true_risk, pop.y)
        good = _within(a, a_ref, 0.05) and _within(c, c_ref, 0.01)
        ok &= good
        values[f"{ps.value}_rho{rho:g}"] = (a, c)
        parts.append(f"{ps.value}/rho{rho:g} alpha={a:.3f} ({a_ref}) c={c:.3f} ({c_ref})")
    return CheckResult(1, "scenario constants", ok, "; ".join(parts), values)


# ---------------------------------------------------------------- criterion 2

def criterion_2(seed: int = DEFAULT_SEED, runs: int = 200) -> CheckResult:
    cfg = _config(seed, runs_per_scenario=runs, methods=(Method.ML,), scenario_filter={
        "predictor_set": "FiveTrue", "rho": 0.0, "event_rate": 0.1})
    _, sums, _ = run_study(cfg, write=False)
    med = {s.scenario.epv: s.per_method[Method.ML].median_slope for s in sums}
    targets = {3: 0.67, 10: 0.88, 50: 0.98}
    banded = all(_within(med[e], t, 0.05) for e, t in targets.items())
    ordered = [med[e] for e in EPVS]
    monotone = all(b > a for a, b in zip(ordered, ordered[1:]))
    detail = ", ".join(f"EPV{e}={med[e]:.3f}" for e in EPVS)
    detail += f"; targets {targets} +-0.05; monotone={monotone}"
    return CheckResult(2, "ML slope trend in EPV", banded and monotone, detail, med)


# ---------------------------------------------------------------- criterion 3

def criterion_3(seed: int = DEFAULT_SEED, runs: int = 200) -> CheckResult:
    methods = (Method.ML, Method.RIDGE)
    cfg = _config(seed, runs_per_scenario=runs, methods=methods, scenario_filter={
        "predictor_set": "FiveTrue", "rho": 0.0, "event_rate": 0.1, "epv": [3, 5]})
    _, sums, _ = run_study(cfg, write=False)
    low = {s.scenario.epv: s.per_method[Method.RIDGE].median_slope for s in sums}
    cfg2 = replace(cfg, scenario_filter={
        "predictor_set": "FiveTrue", "rho": 0.5, "event_rate": 0.5, "epv": 3})
    _, sums2, _ = run_study(cfg2, write=False)
    corr = sums2[0].per_method[Method.RIDGE].median_slope
    ok = all(v > 1 for v in low.values()) and _within(corr, 1.25, 0.15)
    detail = (", ".join(f"EPV{e}={v:.3f}" for e, v in low.items())
              + f" (each > 1); rho0.5/ER0.5/EPV3={corr:.3f} (1.25 +-0.15)")
    return CheckResult(3, "ridge over-shrinkage", ok, detail, {"low_epv": low, "corr": corr})


# ---------------------------------------------------------------- criterion 4

def criterion_4(seed: int = DEFAULT_SEED, runs: int = 200) -> CheckResult:
    cfg = _config(seed, runs_per_scenario=runs, methods=(Method.ML, Method.BU, Method.FIRTH),
                  scenario_filter={"predictor_set": "FiveTrue", "rho": 0.0,
                                   "event_rate": 0.1, "epv": 3})
    _, sums, _ = run_study(cfg, write=False)
    r = {m.value: sums[0].per_method[m].rmsd_log_slope for m in cfg.methods}
    ref = {"ML": 0.50, "BU": 0.37, "Firth": 0.41}
    banded = all(_within(r[k], v, 0.10) for k, v in ref.items())
    order = r["BU"] < r["ML"] and r["Firth"] < r["ML"]
    detail = ", ".join(f"{k}={r[k]:.3f} ({ref[k]})" for k in ref) + f"; ordering={order}"
    return CheckResult(4, "RMSD ordering", banded and order, detail, r)


# ---------------------------------------------------------------- criterion 5

def criterion_5(seed: int = DEFAULT_SEED, runs: int = 200) -> CheckResult:
    cfg = _config(seed, runs_per_scenario=runs,
                  methods=(Method.ML, Method.LU, Method.PML, Method.FIRTH),
                  scenario_filter={"predictor_set": "FiveTrue", "rho": 0.0,
                                   "event_rate": 0.1, "epv": 10})
    _, sums, _ = run_study(cfg, write=False)
    sp = {m.value: sums[0].per_method[m].spearman_vs_optimal for m in (Method.LU, Method.PML, Method.FIRTH)}
    ok = (sp["LU"] is not None and sp["LU"] <= -0.85
          and sp["PML"] is not None and sp["PML"] <= -0.85
          and sp["Firth"] is not None and sp["Firth"] >= 0.6)
    detail = f"LU={sp['LU']:.3f} (<= -0.85), PML={sp['PML']:.3f} (<= -0.85), Firth={sp['Firth']:.3f} (>= 0.6)"
    return CheckResult(5, "estimated vs optimal shrinkage", ok, detail, sp)


# ---------------------------------------------------------------- criterion 6

def criterion_6(seed: int = DEFAULT_SEED, runs: int = 40,
                scenario: dict | None = None) -> CheckResult:
    """Uniform shrinkage keeps the ML c-statistic.

    The identity holds for positive factors. A negative likelihood factor
    reverses the ranking, so such runs are checked against ``1 - c_ML``.
    """
    flt = scenario or {"predictor_set": "FiveTrue", "rho": 0.0, "event_rate": 0.5, "epv": 10}
    cfg = _config(seed, runs_per_scenario=runs, methods=(Method.ML, Method.LU, Method.BU),
                  scenario_filter=flt)
    records, _, _ = run_study(cfg, write=False)
    checked = flipped = bad = 0
    for rec in records:
        if rec.excluded:
            continue
        c_ml = rec.per_method[Method.ML].c_stat
        for m in (Method.LU, Method.BU):
            mm = rec.per_method[m]
            checked += 1
            if mm.fit.shrinkage_factor > 0:
                bad += mm.c_stat != c_ml
            else:
                flipped += 1
                bad += abs(mm.c_stat - (1.0 - c_ml)) > 1e-12
    ok = bad == 0 and checked > 0 and flipped == 0
    detail = f"{checked} LU/BU fits compared bitwise with ML, {bad} mismatches, {flipped} non-positive factors"
    return CheckResult(6, "uniform shrinkage c-statistic identity", ok, detail,
                       {"checked": checked, "mismatches": bad, "flipped": flipped})


# ---------------------------------------------------------------- criterion 7

def criterion_7(seed: int = DEFAULT_SEED, runs_hard: int = 500, runs_easy: int = 200) -> CheckResult:
    cfg = _config(seed, runs_per_scenario=runs_hard, methods=(Method.ML,), scenario_filter={
        "predictor_set": "TenTrue", "rho": 0.5, "event_rate": 0.5, "epv": 3})
    _, sums, _ = run_study(cfg, write=False)
    frac = sums[0].n_runs_excluded / runs_hard
    cfg50 = replace(cfg, runs_per_scenario=runs_easy, scenario_filter={"epv": 50})
    _, sums50, _ = run_study(cfg50, write=False)
    excl50 = sum(s.n_runs_excluded for s in sums50)
    ok = _within(frac, 0.12, 0.05) and excl50 == 0
    detail = (f"TenTrue/rho0.5/ER0.5/EPV3 excluded {frac:.1%} of {runs_hard} (12% +-5pp); "
              f"EPV50 exclusions {excl50} over {len(sums50)} scenarios")
    return CheckResult(7, "separation exclusions", ok, detail, {"fraction": frac, "epv50": excl50})


# ---------------------------------------------------------------- criterion 8

def oracle_dataset(n: int, betas, seed: int, intercept: float = -0.3) -> Dataset:
    """Small standardized dataset for oracle comparisons."""
    rng = np.random.default_rng(seed)
    betas = np.asarray(betas, dtype=float)
    while True:
        X = rng.standard_normal((n, betas.size))
        y = (rng.random(n) < expit(intercept + X @ betas)).astype(float)
        if 3 <= y.sum() <= n - 3:
            return standardize(Dataset(X, y))[0]


def _profile_intercept(eta0: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Maximize the log-likelihood over the intercept for each column of ``eta0``."""
    ybar = y.mean()
    a = np.full(eta0.shape[1], np.log(ybar / (1 - ybar)))
    for _ in range(60):
        p = expit(a + eta0)
        a = a + (y[:, None] - p).sum(axis=0) / (p * (1 - p)).sum(axis=0)
    return a


def _naive_loglik(a: np.ndarray, eta0: np.ndarray, y: np.ndarray) -> np.ndarray:
    eta = a + eta0
    return (y[:, None] * log_expit(eta) + (1 - y[:, None]) * log_expit(-eta)).sum(axis=0)


def _oracle_value(kind: str, X, y, lam: float, P: np.ndarray, init=None) -> np.ndarray:
    """Objective to maximize at candidate parameter rows ``P`` (intercept profiled)."""
    n = y.size
    B = P * init if kind == "garrote" else P
    eta0 = X @ B.T
    ll = _naive_loglik(_profile_intercept(eta0, y), eta0, y)
    if kind == "ridge":
        return ll / n - lam * (P**2).sum(axis=1)
    if kind == "pml":
        return ll - 0.5 * lam * (P**2).sum(axis=1)
    if kind == "lasso":
        return ll / n - lam * np.abs(P).sum(axis=1)
    return ll / n - lam * P.sum(axis=1)


def brute_force(kind: str, data: Dataset, lam: float, lo: float, hi: float, init=None) -> np.ndarray:
    """Grid search for the maximizer: coarse pass at 0.05, then 1e-3 around the best."""
    p = data.p
    best = None
    for step, center, half in ((0.05, None, None), (1e-3, "best", 0.06)):
        if center is None:
            axes = [np.arange(lo, hi + step / 2, step)] * p
        else:
            axes = [np.clip(np.arange(b - half, b + half + step / 2, step), lo, hi) for b in best]
        P = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = _oracle_value(kind, data.X, data.y, lam, P, init)
        best = P[int(np.argmax(vals))]
    return best


def golden_lasso(data: Dataset, lam: float) -> float:
    """Single-predictor lasso coefficient by golden-section search."""
    def neg(b):
        P = np.array([[b]])
        return -_oracle_value("lasso", data.X, data.y, lam, P)[0]
    res = minimize_scalar(neg, bracket=(-3.0, 0.0, 3.0), method="golden", tol=1e-10)
    return float(res.x)


def _fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _theta_loglik(theta, data: Dataset) -> float:
    eta = theta[0] + data.X @ theta[1:]
    return float(np.sum(data.y * log_expit(eta) + (1 - data.y) * log_expit(-eta)))


def oracle_suite() -> list[tuple[str, float, float]]:
    """(label, discrepancy, tolerance) for every oracle comparison."""
    out = []
    two = oracle_dataset(60, [0.8, -0.5], seed=11)
    one = oracle_dataset(40, [0.7], seed=12)
    ml_two = fit_ml(two)

    cases = [
        ("ridge", PenaltySpec.ridge(), 0.05, -3.0, 3.0, None),
        ("pml", PenaltySpec.pml(two), 5.0, -3.0, 3.0, None),
        ("lasso", PenaltySpec.lasso(), 0.03, -3.0, 3.0, None),
        ("garrote", PenaltySpec.garrote(ml_two.betas), 0.02, 0.0, 3.0, ml_two.betas),
    ]
    for kind, spec, lam, lo, hi, init in cases:
        fit = fit_at_lambda(two, spec, lam)
        got = fit.info["garrote_c"] if kind == "garrote" else fit.betas
        ref = brute_force(kind, two, lam, lo, hi, init)
        out.append((f"{kind} 2-predictor grid", float(np.max(np.abs(got - ref))), 2e-3))

    for lam in (0.02, 0.08):
        fit = fit_at_lambda(one, PenaltySpec.lasso(), lam)
        out.append((f"lasso 1-predictor golden lam={lam}",
                    abs(fit.betas[0] - golden_lasso(one, lam)), 1e-5))

    # smooth objectives: gradient at the optimum, relative to the objective scale
    n = two.n
    ridge = fit_at_lambda(two, PenaltySpec.ridge(), 0.05)
    pml_spec = PenaltySpec.pml(two)
    pml = fit_at_lambda(two, pml_spec, 5.0)
    firth = fit_firth(two)
    smooth = [
        ("ML", ml_two.theta, lambda t: _theta_loglik(t, two)),
        ("ridge", ridge.theta, lambda t: _theta_loglik(t, two) / n - 0.05 * np.sum(t[1:] ** 2)),
        ("pml", pml.theta,
         lambda t: _theta_loglik(t, two) - 2.5 * np.sum((pml_spec.scaling * t[1:]) ** 2)),
        ("firth", np.concatenate([[firth.info["firth_intercept"]], firth.betas]),
         lambda t: firth_penalized_loglik(t, two)),
    ]
    for label, theta, f in smooth:
        g = _fd_gradient(f, np.asarray(theta, dtype=float))
        rel = float(np.max(np.abs(g)) / max(1.0, abs(f(theta))))
        out.append((f"{label} gradient", rel, 1e-4))
    return out


def criterion_8() -> CheckResult:
    results = oracle_suite()
    failed = [(l, d, t) for l, d, t in results if not d <= t]
    detail = f"{len(results) - len(failed)}/{len(results)} comparisons within tolerance"
    if failed:
        detail += "; failed: " + ", ".join(f"{l} ({d:.2e} > {t:.0e})" for l, d, t in failed)
    worst = max(results, key=lambda r: r[1] / r[2])
    detail += f"; worst {worst[0]} {worst[1]:.2e}"
    return CheckResult(8, "oracle equivalence", not failed, detail,
                       {l: d for l, d, _ in results})


# ---------------------------------------------------------------- criterion 9

def separated_dataset(k: int) -> Dataset:
    """The ``k``-th constructed dataset with complete or quasi-complete separation."""
    rng = np.random.default_rng(child(0, 9, k))
    n = int(rng.integers(15, 80))
    p = int(rng.integers(1, 4))
    X = rng.standard_normal((n, p))
    w = rng.standard_normal(p)
    score = X @ w
    cut = np.quantile(score, rng.uniform(0.2, 0.8))
    y = (score > cut).astype(float)
    if k % 4 == 3:
        # quasi-complete: a duplicated row on the boundary carries both outcomes
        X[1] = X[0]
        cut = score[0]
        y = (X @ w > cut).astype(float)
        y[0], y[1] = 0.0, 1.0
    return Dataset(X, y)


def criterion_9(n_datasets: int = 100) -> CheckResult:
    flagged = finite = 0
    for k in range(n_datasets):
        data = separated_dataset(k)
        flagged += bool(fit_ml(data).separation_detected)
        try:
            f = fit_firth(data)
            finite += bool(np.all(np.isfinite(f.theta)))
        except Exception:
            pass
    ok = flagged == n_datasets and finite == n_datasets
    detail = f"ML flagged separation in {flagged}/{n_datasets}; Firth finite in {finite}/{n_datasets}"
    return CheckResult(9, "Firth under separation", ok, detail, {"flagged": flagged, "finite": finite})


# --------------------------------------------------------------- criterion 10

QUICK_DETERMINISM_FILTER = {"predictor_set": "FiveTrue", "rho": [0.0, 0.5], "event_rate": 0.5, "epv": 3}


def criterion_10(seed: int = DEFAULT_SEED, runs: int = 6, scenario_filter: dict | None = None,
                 parallelism: tuple[int, int] = (1, 2), workdir=None) -> CheckResult:
    """Compare output bytes for two parallelism levels.

    The defaults run a reduced study. Pass ``scenario_filter={}`` and
    ``runs=200`` for the full desk scale.
    """
    flt = QUICK_DETERMINISM_FILTER if scenario_filter is None else (scenario_filter or None)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        same = True
        dirs = []
        for par in parallelism:
            out = Path(tmp) / f"par{par}"
            cfg = _config(seed, runs_per_scenario=runs, scenario_filter=flt,
                          parallelism=par, output_dir=str(out))
            run_study(cfg)
            dirs.append(out)
        for name in ("runs.csv", "summary.csv"):
            same &= filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False)
        n_rows = sum(1 for _ in open(dirs[0] / "runs.csv")) - 2
    detail = (f"parallelism {parallelism[0]} vs {parallelism[1]}, {runs} runs/scenario, "
              f"{n_rows} run rows: {'byte-identical' if same else 'DIFFERENT'}")
    return CheckResult(10, "determinism across parallelism", same, detail, {"rows": n_rows})


CRITERIA: dict[int, Callable[..., CheckResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}
QUICK_CRITERIA = (1, 6, 8, 9, 10)
_SEEDED = {1, 2, 3, 4, 5, 6, 7, 10}


def run_checks(numbers=QUICK_CRITERIA, seed: int = DEFAULT_SEED, report=print) -> list[CheckResult]:
    results = []
    for k in numbers:
        t0 = time.perf_counter()
        fn = CRITERIA[k]
        res = fn(seed=seed) if k in _SEEDED else fn()
        res.seconds = time.perf_counter() - t0
        if report:
            report(res.line() + f" [{res.seconds:.1f}s]")
        results.append(res)
    return results
