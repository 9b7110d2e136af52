import csv
from dataclasses import replace

import pytest

from shrinksim import harness
from shrinksim.cli import load_config_file, main
from shrinksim.errors import ConfigurationError
from shrinksim.glm import Method
from shrinksim.harness import (
    ALL_METHODS,
    HarnessConfig,
    PredictorSet,
    RunRecord,
    Scenario,
    enumerate_scenarios,
    run_scenario,
    run_study,
    summarize,
    write_results,
)

SMALL = dict(dev_pool_size=20_000, validation_size=20_000, bootstrap_reps=20,
             intercept_mc_size=100_000)
TWO_CELLS = {"predictor_set": "FiveTrue", "rho": 0.0, "event_rate": 0.5, "epv": [10, 20]}


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        return header, list(csv.DictReader(fh))


def test_full_factorial():
    cells = enumerate_scenarios(HarnessConfig(), solve=False)
    assert len(cells) == 60
    assert sorted(s.index for s in cells) == list(range(60))
    assert len({s.scenario_id for s in cells}) == 60


@pytest.mark.parametrize("flt,n_events,n_total", [
    ({"epv": 3, "predictor_set": "TenTrue", "rho": 0.5, "event_rate": 0.5}, 30, 60),
    ({"epv": 50, "predictor_set": "FiveTrue", "rho": 0.0, "event_rate": 0.1}, 250, 2500),
    ({"epv": 3, "predictor_set": "FiveTrueFiveNoise", "rho": 0.0, "event_rate": 0.1}, 30, 300),
])
def test_scenario_arithmetic(flt, n_events, n_total):
    (s,) = enumerate_scenarios(HarnessConfig(scenario_filter=flt), solve=False)
    assert (s.n_events, s.n_total) == (n_events, n_total)
    assert s.n_events == s.epv * s.df


def test_predictor_sets():
    assert list(PredictorSet.FIVE_TRUE.betas) == [0.2, 0.2, 0.2, 0.5, 0.8]
    assert list(PredictorSet.FIVE_TRUE_FIVE_NOISE.betas[5:]) == [0.0] * 5
    assert sorted(PredictorSet.TEN_TRUE.betas) == [0.2] * 6 + [0.5] * 2 + [0.8] * 2


def test_config_validation():
    with pytest.raises(ConfigurationError):
        enumerate_scenarios(HarnessConfig(scenario_filter={"epv": 7}), solve=False)
    with pytest.raises(ConfigurationError):
        enumerate_scenarios(HarnessConfig(scenario_filter={"colour": 1}), solve=False)
    with pytest.raises(ConfigurationError):
        HarnessConfig(runs_per_scenario=0)
    small = HarnessConfig(dev_pool_size=1000)
    with pytest.raises(ConfigurationError):
        small.check_sizes(enumerate_scenarios(small, solve=False))
    assert HarnessConfig(methods=(Method.RIDGE,)).methods == (Method.ML, Method.RIDGE)


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    cfg = HarnessConfig(runs_per_scenario=10, scenario_filter=TWO_CELLS, output_dir=str(out), **SMALL)
    records, summaries, paths = run_study(cfg)
    return cfg, records, summaries, paths


def test_output_row_counts(study):
    _, records, summaries, (runs_csv, summary_csv) = study
    assert not any(r.excluded for r in records)
    header, rows = _rows(runs_csv)
    assert header.startswith("#schema=shrinksim.runs/")
    assert len(rows) == 2 * 10 * 9
    header, rows = _rows(summary_csv)
    assert header.startswith("#schema=shrinksim.summary/")
    assert "dev_pool_size=20000" in header and "validation_size=20000" in header
    assert len(rows) == 2 * 9


def test_summary_contents(study):
    _, records, summaries, (_, summary_csv) = study
    for s in summaries:
        assert s.n_runs_included + s.n_runs_excluded == 10
        ml = s.per_method[Method.ML]
        assert ml.spearman_vs_optimal is None
        assert ml.slope_p5 <= ml.median_slope <= ml.slope_p95
        assert s.per_method[Method.LASSO].mean_n_selected is not None
        assert s.per_method[Method.RIDGE].mean_n_selected is None
    _, rows = _rows(summary_csv)
    ml_rows = [r for r in rows if r["method"] == "ML"]
    assert all(r["spearman_vs_optimal"] == "" for r in ml_rows)
    assert all(r["mean_coef_bias_noise"] == "" for r in rows)  # no noise predictors


def test_runs_are_paired(study):
    _, records, _, _ = study
    for rec in records:
        assert set(rec.per_method) == set(ALL_METHODS)
        c_ml = rec.per_method[Method.ML].c_stat
        assert rec.per_method[Method.LU].c_stat == c_ml
        assert rec.per_method[Method.BU].c_stat == c_ml


def test_rerun_is_byte_identical(study, tmp_path):
    cfg, _, _, (runs_csv, summary_csv) = study
    again = replace(cfg, output_dir=str(tmp_path))
    _, _, (r2, s2) = run_study(again)
    assert r2.read_bytes() == runs_csv.read_bytes()
    assert s2.read_bytes() == summary_csv.read_bytes()


def test_filtering_does_not_change_numbers(study, tmp_path):
    cfg, records, _, _ = study
    one = replace(cfg, scenario_filter={**TWO_CELLS, "epv": 20}, output_dir=str(tmp_path))
    rec2, _, _ = run_study(one, write=False)
    ref = [r for r in records if r.scenario_id.endswith("epv20")]
    assert [r.per_method[Method.RIDGE].slope for r in rec2] == [r.per_method[Method.RIDGE].slope for r in ref]


def test_parallel_matches_serial(tmp_path):
    flt = {"predictor_set": "FiveTrue", "rho": 0.5, "event_rate": 0.5, "epv": 3}
    base = HarnessConfig(runs_per_scenario=6, scenario_filter=flt, **SMALL,
                         methods=(Method.ML, Method.LU, Method.LASSO))
    _, _, (r1, s1) = run_study(replace(base, output_dir=str(tmp_path / "a")))
    _, _, (r2, s2) = run_study(replace(base, output_dir=str(tmp_path / "b"), parallelism=2))
    assert r1.read_bytes() == r2.read_bytes() and s1.read_bytes() == s2.read_bytes()


def test_excluded_and_failed_runs(tmp_path, monkeypatch):
    def broken(data, *a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(harness, "fit_firth", broken)
    cfg = HarnessConfig(runs_per_scenario=3, scenario_filter={**TWO_CELLS, "epv": 10},
                        output_dir=str(tmp_path), **SMALL, methods=(Method.ML, Method.FIRTH))
    records, summaries, (runs_csv, summary_csv) = run_study(cfg)
    assert all(r.excluded and r.exclusion_reason.startswith("failed:Firth") for r in records)
    assert all(r.per_method == {} for r in records)
    _, rows = _rows(runs_csv)
    assert len(rows) == 3
    assert all(r["excluded"] == "true" and r["method"] == "" and r["slope_raw"] == "" for r in rows)
    assert summaries[0].n_runs_excluded == 3 and summaries[0].per_method == {}
    _, srows = _rows(summary_csv)
    assert len(srows) == 2 and all(r["median_slope"] == "" for r in srows)


def test_separated_run_is_excluded():
    # ten predictors, fifteen events: exclusions are common in this cell
    flt = {"predictor_set": "TenTrue", "rho": 0.5, "event_rate": 0.5, "epv": 3}
    cfg = HarnessConfig(runs_per_scenario=30, scenario_filter=flt, **SMALL, methods=(Method.ML,))
    (scenario,) = enumerate_scenarios(cfg)
    records, summary = run_scenario(scenario, cfg)
    excluded = [r for r in records if r.excluded]
    assert excluded and all(r.exclusion_reason == "separation" for r in excluded)
    assert summary.n_runs_separation == len(excluded)
    assert summary.n_runs_included == 30 - len(excluded)


def test_write_results_reports_bad_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_results([], [], blocker / "sub")


def test_summarize_with_no_included_runs():
    s = Scenario(3, PredictorSet.FIVE_TRUE, 0.0, 0.1, true_intercept=-2.57)
    recs = [RunRecord(s.scenario_id, 0, excluded=True, exclusion_reason="separation")]
    out = summarize(s, recs)
    assert out.per_method == {} and out.n_runs_excluded == 1


# ---------------------------------------------------------------------- CLI

def test_cli_scenario(tmp_path, capsys):
    code = main(["scenario", "--predictor-set", "FiveTrue", "--rho", "0", "--event-rate", "0.5",
                 "--epv", "10", "--runs", "2", "--dev-pool-size", "20000", "--validation-size",
                 "20000", "--bootstrap-reps", "10", "--methods", "ML,LU,Ridge",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    _, rows = _rows(tmp_path / "runs.csv")
    assert len(rows) == 2 * 3 and {r["method"] for r in rows} == {"ML", "LU", "Ridge"}
    assert "wrote" in capsys.readouterr().out


def test_cli_config_file(tmp_path):
    ini = tmp_path / "study.ini"
    ini.write_text(
        "[study]\nmaster_seed = 5\nruns_per_scenario = 2\ndev_pool_size = 20000\n"
        "validation_size = 20000\nmethods = ML, Firth\n"
        f"output_dir = {tmp_path / 'out'}\n"
        "[scenarios]\npredictor_set = FiveTrue\nrho = 0.5\nevent_rate = 0.5\nepv = 5, 10\n"
    )
    kw = load_config_file(ini)
    assert kw["master_seed"] == 5 and kw["methods"] == (Method.ML, Method.FIRTH)
    assert kw["scenario_filter"]["epv"] == [5, 10]
    # flags override the file
    assert main(["run", "--config", str(ini), "--epv", "5", "--runs", "1"]) == 0
    _, rows = _rows(tmp_path / "out" / "runs.csv")
    assert len(rows) == 2 and {r["epv"] for r in rows} == {"5"}


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[study]\nnonsense = 1\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--epv", "7", "--output-dir", str(tmp_path)]) == 2
    assert main(["run", "--dev-pool-size", "10", "--epv", "3", "--output-dir", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["scenario", "--epv", "3"])
