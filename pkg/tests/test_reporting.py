import csv

import pytest

from TrajCert.application.models.errors import ArtifactError
from TrajCert.infrastructure.data.artifact_store import DEMO_SUMMARY_HEADER, SUMMARY_HEADER, run_dir
from TrajCert.infrastructure.data.csv_store import format_number, read_csv, write_csv
from TrajCert.orchestration.coordinators.orchestrator import EXIT_ARTIFACT, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE
from api.main import main
from diagnostics.business_logic.report_service import (
    FAIL,
    PASS,
    SOFT,
    item_labels,
    item_neighbor,
    item_optimizers,
    item_step_size,
    neighbor_direction_counts,
    power_oracle,
    report,
)


@pytest.fixture
def sweep_dir(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--out", str(out), "--profile", "smoke", "--seeds", "1"]) == EXIT_OK
    return out


def test_sweep_writes_artifacts(sweep_dir):
    for name in ("config.resolved", "summary.csv", "suite.csv", "checks.csv", "null_checks.csv", "series.csv"):
        assert (sweep_dir / name).is_file()
    assert (sweep_dir / "tables" / "T1.csv").is_file()
    rows = read_csv(sweep_dir / "summary.csv", SUMMARY_HEADER)
    assert [row["condition_id"] for row in rows] == [
        "sweep_eta_0.05",
        "sweep_eta_0.1",
        "sweep_eta_0.2",
        "sweep_eta_0.4",
    ]
    steps = read_csv(run_dir(sweep_dir, "sweep_eta_0.05", 0) / "steps.csv")
    assert len(steps) == 21
    assert steps[0]["cert_prefix"] == "0.0"
    assert steps[-1]["a_t"] == "nan"


def test_report_passes_on_fresh_output(sweep_dir, capsys):
    outcome = report(sweep_dir)
    assert outcome.exit_code == EXIT_OK
    statuses = {number: status for number, status, _ in outcome.checklist}
    assert statuses[1] == "PASS"
    assert statuses[2] == "PASS"
    assert statuses[7] == "PASS"
    assert statuses[8] == "PASS"
    assert main(["report", "--out", str(sweep_dir)]) == EXIT_OK
    assert "exit code 0" in capsys.readouterr().out


def test_report_flags_tampered_steps(sweep_dir):
    path = run_dir(sweep_dir, "sweep_eta_0.1", 0) / "steps.csv"
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header = rows[0]
    column = header.index("delta_w_norm")
    rows[5][column] = format_number(float(rows[5][header.index("cert_prefix")]) * 2 + 1.0)
    write_csv(path, header, rows[1:])
    outcome = report(sweep_dir)
    assert outcome.exit_code == EXIT_CHECK_FAILED
    assert not outcome.invariants["bound"].ok
    assert main(["report", "--out", str(sweep_dir)]) == EXIT_CHECK_FAILED


def test_report_on_missing_outputs(tmp_path):
    with pytest.raises(ArtifactError):
        report(tmp_path)
    assert main(["report", "--out", str(tmp_path)]) == EXIT_ARTIFACT


def test_report_on_truncated_summary(sweep_dir):
    path = sweep_dir / "summary.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:2] + [lines[2][:10]]) + "\n")
    with pytest.raises(ArtifactError):
        report(sweep_dir)


def test_refuses_to_overwrite_outputs(sweep_dir):
    assert main(["sweep", "--out", str(sweep_dir), "--profile", "smoke", "--seeds", "1"]) == EXIT_USAGE


def test_invalid_configuration_is_a_usage_error(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[suite]\nT = 0\n")
    assert main(["sweep", "--out", str(tmp_path / "out"), "--config", str(config)]) == EXIT_USAGE


def test_necessity_demo_command(tmp_path):
    out = tmp_path / "demo"
    assert main(["necessity-demo", "--out", str(out), "--profile", "smoke", "--trials", "4"]) == EXIT_OK
    rows = read_csv(out / "demo_summary.csv")
    assert len(rows) == 1
    assert rows[0]["interpolation_ok"] == "1"
    assert report(out).exit_code == EXIT_OK


def test_gen_command_writes_datasets(tmp_path):
    out = tmp_path / "gen"
    assert main(["gen", "--out", str(out), "--profile", "smoke"]) == EXIT_OK
    assert sorted(p.name for p in (out / "data").iterdir()) == ["0.tcds", "1.tcds"]


def test_power_oracle_agrees_with_svd():
    failures, worst = power_oracle()
    assert failures == 0
    assert worst < 1e-6


def test_csv_formatting():
    assert format_number(0.1) == "0.1"
    assert format_number(float("nan")) == "nan"
    assert format_number(None) == "nan"
    assert format_number(True) == "1"
    assert format_number(3) == "3"


def test_report_compares_against_a_rerun(sweep_dir, tmp_path, capsys):
    rerun = tmp_path / "rerun"
    assert main(["sweep", "--out", str(rerun), "--profile", "smoke", "--seeds", "1"]) == EXIT_OK
    statuses = {number: status for number, status, _ in report(sweep_dir).checklist}
    assert statuses[10] == "SKIP"
    statuses = {number: status for number, status, _ in report(sweep_dir, rerun).checklist}
    assert statuses[10] == PASS

    (rerun / "tables" / "T1.csv").write_text("eta\n0.1\n")
    outcome = report(sweep_dir, rerun)
    number, status, detail = outcome.checklist[9]
    assert (number, status) == (10, FAIL)
    assert "differs: tables/T1.csv" in detail
    assert outcome.exit_code == EXIT_OK
    capsys.readouterr()
    assert main(["report", "--out", str(sweep_dir), "--reference", str(rerun)]) == EXIT_OK
    assert "[FAIL] 10." in capsys.readouterr().out


def test_report_with_missing_reference(sweep_dir, tmp_path):
    assert main(["report", "--out", str(sweep_dir), "--reference", str(tmp_path / "absent")]) == EXIT_ARTIFACT


def _row(eta=0.2, cert=0.01, test_mse=0.0625, gap=0.0, disc=1e-4):
    return {
        "eta": eta,
        "final_cert": cert,
        "final_test_mse": test_mse,
        "final_train_mse": test_mse - gap,
        "gen_gap": gap,
        "final_probe_disc": disc,
        "diverged": 0.0,
    }


def test_step_size_misses_are_failures():
    grouped = {f"sweep_eta_{eta!r}": {0: _row(eta, cert=eta * 0.05)} for eta in (0.05, 0.1, 0.2, 0.4)}
    assert item_step_size(grouped, 0.25)[0] == PASS
    grouped["sweep_eta_0.4"][0]["final_cert"] = 0.4 * 0.05 * 0.9
    status, detail = item_step_size(grouped, 0.25)
    assert status == FAIL
    assert "0.4:7.200/8.000" in detail
    grouped["sweep_eta_0.4"][0]["final_cert"] = 0.4 * 0.05
    assert item_step_size(grouped, 0.5)[0] == FAIL


def test_optimizer_misses_are_failures():
    grouped = {
        "opt_sgd": {0: _row(cert=1e-4, gap=0.001)},
        "opt_gd": {0: _row(cert=0.02, gap=0.001)},
        "opt_adam": {0: _row(cert=20.0, gap=0.05)},
    }
    assert item_optimizers(grouped)[0] == PASS
    grouped["opt_sgd"][0]["final_cert"] = 0.01
    assert item_optimizers(grouped)[0] == FAIL
    grouped["opt_sgd"][0]["final_cert"] = 1e-4
    grouped["opt_adam"][0]["gen_gap"] = -0.01
    assert item_optimizers(grouped)[0] == FAIL


def test_label_misses_are_failures():
    grouped = {"labels_clean": {0: _row(cert=0.02)}, "labels_permuted": {0: _row(cert=0.03, test_mse=0.065)}}
    assert item_labels(grouped)[0] == PASS
    grouped["labels_permuted"][0]["final_test_mse"] = 0.09
    assert item_labels(grouped)[0] == FAIL


def test_demo_below_target_fraction_fails(tmp_path):
    values = {"risk_max": 0.1, "delta_min": 0.01, "fraction": 0.1, "counted_trials": 20, "dropped": 0}
    write_csv(tmp_path / "demo_summary.csv", DEMO_SUMMARY_HEADER, [[*values.values(), 1, 1]])
    outcome = report(tmp_path)
    assert outcome.checklist[8][:2] == (9, FAIL)
    assert outcome.exit_code == EXIT_OK


def test_neighbor_detail_counts_directions_per_seed():
    # high_leverage lower on cert in seeds 0-3, on probe discrepancy in seeds 0-2
    grouped = {
        "neighbor_random_index": {s: _row(cert=0.02, disc=2e-4) for s in range(5)},
        "neighbor_high_leverage": {
            s: _row(cert=0.01 if s < 4 else 0.03, disc=1e-4 if s < 3 else 3e-4) for s in range(5)
        },
    }
    assert neighbor_direction_counts(grouped) == (4, 3, 3, 5)
    status, detail = item_neighbor(grouped)
    assert status == SOFT
    assert "cert in 4/5 seeds" in detail
    assert "probe discrepancy in 3/5" in detail
    assert "both in 3/5" in detail
    grouped["neighbor_high_leverage"][3]["final_probe_disc"] = 1e-4
    assert item_neighbor(grouped)[0] == PASS
