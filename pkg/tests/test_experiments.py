import math

import numpy as np
import pytest

from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import DemoSettings, LabelsMode, OptimizerKind, SelectionMode
from TrajCert.application.services.experiment_service import (
    SERIES_METRICS,
    ExperimentService,
    check_unique_labels,
    label_conditions,
    necessity_demo,
    neighbor_conditions,
    optimizer_conditions,
    step_size_conditions,
)
from TrajCert.infrastructure.data.csv_store import read_csv
from TrajCert.orchestration.coordinators.suite_coordinator import run_suite
from diagnostics.business_logic.format_response import emit_plot_series, render_tables
from diagnostics.business_logic.report_service import compare_trees
from diagnostics.business_logic.table_specs import TABLE_SPECS, TableId, appendix_steps
from diagnostics.config.config import load_suite_config


def test_cell_result_is_complete(smoke_condition):
    cell = ExperimentService().run_cell(smoke_condition, 0)
    T = smoke_condition.T
    assert cell.log.steps == T
    assert cell.log.a.shape == (T,)
    assert all(check.report.ok for check in cell.checks)
    summary = cell.summary
    assert summary.final_cert == cell.log.cert_prefix[-1]
    assert summary.gen_gap == pytest.approx(summary.final_test_mse - summary.final_train_mse)
    assert summary.stability_threshold == pytest.approx(2.0 / summary.sharpness)
    assert 0.0 <= summary.tightness <= 1.0 + 1e-6
    assert not summary.diverged


def test_conditions_share_data_per_seed(smoke_condition):
    service = ExperimentService()
    first, slow = step_size_conditions([0.05, 0.4], smoke_condition)
    base_a, probes_a = service.build_data(first, 1)
    base_b, probes_b = service.build_data(slow, 1)
    assert np.array_equal(base_a.X, base_b.X)
    assert np.array_equal(base_a.y, base_b.y)
    assert np.array_equal(probes_a.X_test, probes_b.X_test)


def test_permuted_condition_keeps_design(smoke_condition):
    service = ExperimentService()
    clean, permuted = label_conditions(smoke_condition)
    base_clean, _ = service.build_data(clean, 0)
    base_permuted, _ = service.build_data(permuted, 0)
    assert base_permuted.labels == LabelsMode.PERMUTED
    assert np.array_equal(base_clean.X, base_permuted.X)
    assert not np.array_equal(base_clean.y, base_permuted.y)


def test_condition_builders(smoke_config, smoke_condition):
    sweep = step_size_conditions([0.05, 0.1], smoke_condition)
    assert [c.label for c in sweep] == ["sweep_eta_0.05", "sweep_eta_0.1"]
    assert all(c.optimizer.kind == OptimizerKind.GD for c in sweep)
    optimizers = optimizer_conditions(smoke_condition, smoke_config.optimizer_specs())
    assert [c.label for c in optimizers] == ["opt_sgd", "opt_gd", "opt_adam"]
    neighbors = neighbor_conditions(smoke_condition)
    assert [c.selection for c in neighbors] == [SelectionMode.RANDOM_INDEX, SelectionMode.HIGH_LEVERAGE]


def test_condition_builders_reject_bad_input(smoke_config, smoke_condition):
    with pytest.raises(InvalidInputError):
        step_size_conditions([0.1, -1.0], smoke_condition)
    with pytest.raises(InvalidInputError):
        step_size_conditions([], smoke_condition)
    adam = smoke_condition.model_copy(update={"optimizer": smoke_config.optimizer_spec(OptimizerKind.ADAM)})
    with pytest.raises(InvalidInputError):
        neighbor_conditions(adam)
    with pytest.raises(InvalidInputError):
        check_unique_labels([smoke_condition, smoke_condition])


def test_certificate_grows_with_step_size(smoke_config):
    base = smoke_config.base_condition()
    suite = run_suite(step_size_conditions([0.05, 0.1, 0.2, 0.4], base))
    assert suite.ok
    certs = [suite.aggregates[c.label].stats["final_cert"].mean for c in suite.conditions]
    assert all(later > earlier for earlier, later in zip(certs, certs[1:]))
    assert [cell.seed for cell in suite.cells[:2]] == [0, 1]
    assert all(check.passed for check in suite.null_checks)


def test_null_check_for_every_optimizer(smoke_config, smoke_condition):
    service = ExperimentService()
    for condition in optimizer_conditions(smoke_condition, smoke_config.optimizer_specs()):
        check = service.run_null_check(condition, 0)
        assert check.passed
        assert check.optimizer == condition.optimizer.kind


def test_aggregate_statistics(smoke_condition):
    condition = smoke_condition.model_copy(update={"seeds": (0, 1, 2)})
    service = ExperimentService()
    cells = [service.run_cell(condition, seed) for seed in reversed(condition.seeds)]
    suite = service.aggregate([condition], cells)
    assert [cell.seed for cell in suite.cells] == [0, 1, 2]
    values = np.array([cell.summary.final_test_mse for cell in suite.cells])
    stats = suite.aggregates[condition.label].stats["final_test_mse"]
    assert stats.mean == pytest.approx(values.mean())
    assert stats.std == pytest.approx(values.std(ddof=1))
    assert suite.series[condition.label]["cert_prefix"].shape == (condition.T + 1,)
    with pytest.raises(InvalidInputError):
        service.aggregate([condition], cells[:2])


def test_necessity_demo_calibrates_on_pilot():
    settings = DemoSettings(n=8, p=64, spike_count=2, trials=6, pilot_trials=4, m_probe=16, n_test=32)
    report = necessity_demo(settings)
    assert report.calibrated
    assert report.interpolation_ok
    assert report.dropped == 0
    assert report.counted_trials == 6
    assert 0.0 <= report.fraction <= 1.0
    assert sum(t.phase == "pilot" for t in report.trials) == 4
    fresh = [t for t in report.trials if t.phase == "fresh"]
    assert report.fraction == pytest.approx(sum(t.hit for t in fresh) / 6)
    assert all(t.train_mse_S <= 1e-10 for t in fresh)


def test_necessity_demo_with_fixed_thresholds():
    settings = DemoSettings(n=8, p=64, spike_count=2, trials=3, pilot_trials=2, m_probe=16, n_test=32)
    report = necessity_demo(settings, thresholds=(math.inf, 0.0))
    assert not report.calibrated
    assert report.fraction == 1.0
    assert all(t.phase == "fresh" for t in report.trials)
    again = necessity_demo(settings, thresholds=(math.inf, 0.0))
    assert [t.probe_disc for t in again.trials] == [t.probe_disc for t in report.trials]


def _wide_spectrum(config, p):
    return config.spectrum().model_copy(update={"p": p, "variance_scale": config.data.row_energy / p})


def test_suite_series_cover_every_metric(smoke_condition, tmp_path):
    suite = run_suite([smoke_condition])
    assert suite.ok
    assert not any(cell.summary.diverged for cell in suite.cells)
    series = suite.series[smoke_condition.label]
    assert set(series) == set(SERIES_METRICS)
    assert np.array_equal(series["test_mse"], suite.cells[0].log.test_mse_S)
    series_path, _ = emit_plot_series(suite, tmp_path)
    rows = read_csv(series_path)
    assert {row["metric"] for row in rows} == set(SERIES_METRICS)
    assert len(rows) == len(SERIES_METRICS) * (smoke_condition.T + 1)


def test_sweep_certificates_are_proportional(smoke_config):
    # a_t stays at 1 and the residuals barely move, so Cert_T scales with eta
    base = smoke_config.base_condition().model_copy(
        update={"n": 128, "m_probe": 64, "n_test": 512, "spectrum": _wide_spectrum(smoke_config, 256)}
    )
    etas = [0.05, 0.1, 0.2, 0.4]
    suite = run_suite(step_size_conditions(etas, base))
    assert suite.ok
    sigma2 = base.sigma**2
    reference = suite.aggregates["sweep_eta_0.05"].stats["final_cert"].mean
    for condition in suite.conditions:
        stats = suite.aggregates[condition.label].stats
        ratio = stats["final_cert"].mean / reference
        assert ratio == pytest.approx(condition.optimizer.eta / 0.05, rel=0.03)
        assert abs(stats["gen_gap"].mean) <= 0.02
        assert stats["final_test_mse"].mean == pytest.approx(sigma2, rel=0.15)


def test_optimizer_ordering(smoke_config, smoke_condition):
    base = smoke_condition.model_copy(update={"spectrum": _wide_spectrum(smoke_config, 256)})
    suite = run_suite(optimizer_conditions(base, smoke_config.optimizer_specs()))
    cert = {label: suite.aggregates[label].stats["final_cert"].mean for label in ("opt_sgd", "opt_gd", "opt_adam")}
    assert cert["opt_sgd"] * 10 <= cert["opt_gd"]
    assert cert["opt_adam"] >= 50 * cert["opt_gd"]


def test_suite_is_bitwise_reproducible(smoke_config, tmp_path):
    conditions = step_size_conditions([0.1, 0.4], smoke_config.base_condition())
    first, second = tmp_path / "first", tmp_path / "second"
    run_suite(conditions, workers=1, out_dir=first)
    run_suite(conditions, workers=2, out_dir=second)
    files = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert files == sorted(p.relative_to(second) for p in second.rglob("*.csv"))
    assert len(files) > 4
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    assert compare_trees(first, second) == (True, [])


@pytest.fixture(scope="module")
def every_condition_suite():
    config = load_suite_config(None, profile="smoke", environ={})
    base = config.base_condition().model_copy(update={"T": 8, "seeds": (0,)})
    conditions = (
        step_size_conditions(config.suite.etas, base)
        + optimizer_conditions(base, config.optimizer_specs())
        + neighbor_conditions(base)
        + label_conditions(base)
    )
    return run_suite(conditions)


TABLE_SCHEMAS = [
    (TableId.T1, ("eta", "final_certificate", "final_test_mse", "gen_gap"), 4),
    (TableId.T2, ("replacement_type", "final_certificate", "probe_discrepancy"), 2),
    (TableId.T3, ("optimizer", "final_certificate", "final_test_mse", "gen_gap"), 3),
    (TableId.T4, ("labels", "final_certificate", "final_test_mse", "gen_gap"), 2),
    (TableId.A5, ("t", "cert_eta_0.05", "cert_eta_0.1", "cert_eta_0.2", "cert_eta_0.4"), 4),
    (TableId.A6, ("t", "random_index", "high_leverage"), 4),
    (TableId.A7, ("t", "sgd", "gd", "adam"), 4),
    (TableId.A8, ("t", "clean", "permuted"), 4),
]


def test_every_table_has_a_schema():
    assert {table_id for table_id, _, _ in TABLE_SCHEMAS} == set(TABLE_SPECS)


@pytest.mark.parametrize("table_id,header,row_count", TABLE_SCHEMAS, ids=[t.value for t, _, _ in TABLE_SCHEMAS])
def test_table_schema(every_condition_suite, tmp_path, table_id, header, row_count):
    path = render_tables(every_condition_suite, [TABLE_SPECS[table_id]], tmp_path)[table_id]
    rows = read_csv(path, header)
    assert len(rows) == row_count
    assert all(value != "nan" for row in rows for value in row.values())
    if TABLE_SPECS[table_id].per_step:
        assert [int(row["t"]) for row in rows] == appendix_steps(8)
    elif table_id == TableId.T2:
        assert [row["replacement_type"] for row in rows] == ["random_index", "high_leverage"]
    elif table_id == TableId.T3:
        assert [row["optimizer"] for row in rows] == ["sgd", "gd", "adam"]


def test_necessity_demo_finds_stable_and_unstable_interpolators():
    settings = DemoSettings(n=8, p=64, spike_count=2, trials=60, pilot_trials=40, m_probe=16, n_test=32, seed=3)
    report = necessity_demo(settings)
    assert report.calibrated
    assert report.interpolation_ok
    assert report.counted_trials == 60
    assert report.fraction >= 0.25
