import logging
from pathlib import Path
from typing import List

from TrajCert.application.models.domain import CellResult, DemoReport, StepLog, SuiteResult
from TrajCert.infrastructure.data.csv_store import write_csv

# Configure logging
logger = logging.getLogger(__name__)

STEPS_HEADER = ("t", "a_t", "b_t", "cert_prefix", "delta_w_norm", "probe_disc")
TRAJECTORY_HEADER = ("t", "delta_w_norm", "train_mse_S", "train_mse_Sprime", "test_mse_S", "diverged_flag")
SUMMARY_HEADER = (
    "condition_id",
    "seed",
    "optimizer",
    "eta",
    "selection",
    "labels",
    "final_cert",
    "final_test_mse",
    "final_train_mse",
    "gen_gap",
    "final_probe_disc",
    "diverged",
)
DIAGNOSTICS_HEADER = ("condition_id", "seed", "replaced_index", "sharpness", "stability_threshold", "tightness")
SUITE_METRICS = ("final_cert", "final_test_mse", "final_train_mse", "gen_gap", "final_probe_disc")
SUITE_HEADER = (
    ("condition_id", "seeds", "diverged")
    + tuple(f"{m}_{s}" for m in SUITE_METRICS for s in ("mean", "std"))
    + ("dataset_cert", "beta_T", "L_d", "neighbor_count")
)
CHECKS_HEADER = (
    "condition_id",
    "seed",
    "neighbor",
    "ok",
    "max_ratio",
    "worst_step",
    "one_step_ok",
    "max_recursion_deviation",
    "violations",
)
NULL_CHECKS_HEADER = ("optimizer", "max_delta_w_norm", "final_cert", "passed")
DEMO_HEADER = (
    "phase",
    "trial",
    "train_mse_S",
    "train_mse_Sprime",
    "test_mse",
    "excess_empirical",
    "excess_population",
    "probe_disc",
    "param_disc",
    "interpolates",
    "hit",
)
DEMO_SUMMARY_HEADER = ("risk_max", "delta_min", "fraction", "counted_trials", "dropped", "calibrated", "interpolation_ok")


def run_dir(out_dir: Path, condition_id: str, seed: int) -> Path:
    return Path(out_dir) / "runs" / condition_id / str(seed)


def _steps_rows(log: StepLog) -> List[list]:
    rows = []
    for t in range(log.steps + 1):
        a = log.a[t] if t < log.steps else float("nan")
        b = log.b[t] if t < log.steps else float("nan")
        rows.append([t, a, b, log.cert_prefix[t], log.delta_w_norm[t], log.probe_disc[t]])
    return rows


def _trajectory_rows(log: StepLog) -> List[list]:
    rows = []
    for t in range(log.steps + 1):
        flag = log.diverged_at is not None and t == log.steps
        rows.append([t, log.delta_w_norm[t], log.train_mse_S[t], log.train_mse_Sprime[t], log.test_mse_S[t], flag])
    return rows


def write_run_artifacts(out_dir: Path, cell: CellResult) -> Path:
    """Write steps.csv and trajectory.csv for one (condition, seed) cell."""
    target = run_dir(out_dir, cell.condition_id, cell.seed)
    write_csv(target / "steps.csv", STEPS_HEADER, _steps_rows(cell.log))
    write_csv(target / "trajectory.csv", TRAJECTORY_HEADER, _trajectory_rows(cell.log))
    return target


def write_suite_artifacts(out_dir: Path, suite: SuiteResult) -> None:
    """Write the per-run files and the suite-level summary, aggregate, check and null-test files."""
    out_dir = Path(out_dir)
    for cell in suite.cells:
        write_run_artifacts(out_dir, cell)

    summaries = suite.summaries
    write_csv(
        out_dir / "summary.csv",
        SUMMARY_HEADER,
        (
            [
                s.condition_id,
                s.seed,
                s.optimizer,
                s.eta,
                s.selection,
                s.labels,
                s.final_cert,
                s.final_test_mse,
                s.final_train_mse,
                s.gen_gap,
                s.final_probe_disc,
                s.diverged,
            ]
            for s in summaries
        ),
    )
    write_csv(
        out_dir / "diagnostics.csv",
        DIAGNOSTICS_HEADER,
        ([s.condition_id, s.seed, s.replaced_index, s.sharpness, s.stability_threshold, s.tightness] for s in summaries),
    )

    suite_rows = []
    for condition in suite.conditions:
        agg = suite.aggregates[condition.label]
        row = [condition.label, agg.seed_count, agg.diverged_count]
        for metric in SUITE_METRICS:
            row += [agg.stats[metric].mean, agg.stats[metric].std]
        cert = agg.certificate
        row += [cert.dataset_cert, cert.beta_T, cert.L_d, cert.neighbor_count]
        suite_rows.append(row)
    write_csv(out_dir / "suite.csv", SUITE_HEADER, suite_rows)

    write_csv(
        out_dir / "checks.csv",
        CHECKS_HEADER,
        (
            [
                c.condition_id,
                c.seed,
                c.neighbor,
                c.report.ok,
                c.report.max_ratio,
                c.report.worst_step,
                c.report.one_step_ok,
                c.report.max_recursion_deviation,
                " ".join(str(t) for t in c.report.violations),
            ]
            for c in suite.checks
        ),
    )
    write_csv(
        out_dir / "null_checks.csv",
        NULL_CHECKS_HEADER,
        ([c.optimizer, c.max_delta_w_norm, c.final_cert, c.passed] for c in suite.null_checks),
    )
    logger.info(f"Wrote artifacts of {len(suite.cells)} cells to {out_dir}")


def write_demo(out_dir: Path, report: DemoReport) -> None:
    out_dir = Path(out_dir)
    write_csv(
        out_dir / "demo.csv",
        DEMO_HEADER,
        (
            [
                t.phase,
                t.trial,
                t.train_mse_S,
                t.train_mse_Sprime,
                t.test_mse,
                t.excess_empirical,
                t.excess_population,
                t.probe_disc,
                t.param_disc,
                t.interpolates,
                t.hit,
            ]
            for t in report.trials
        ),
    )
    write_csv(
        out_dir / "demo_summary.csv",
        DEMO_SUMMARY_HEADER,
        [
            [
                report.risk_max,
                report.delta_min,
                report.fraction,
                report.counted_trials,
                report.dropped,
                report.calibrated,
                report.interpolation_ok,
            ]
        ],
    )
