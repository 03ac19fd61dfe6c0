"""
Offline verification of a suite output directory.

Everything is recomputed from the emitted CSV files; the only live computation is
the power-iteration oracle on small random maps.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from TrajCert.application.models.errors import ArtifactError
from TrajCert.infrastructure.data.artifact_store import (
    CHECKS_HEADER,
    DEMO_SUMMARY_HEADER,
    NULL_CHECKS_HEADER,
    STEPS_HEADER,
    SUITE_HEADER,
    SUMMARY_HEADER,
    run_dir,
)
from TrajCert.infrastructure.data.csv_store import float_column, format_number, parse_float, read_csv
from TrajCert.infrastructure.numerics.linalg import operator_norm_power_iteration
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId
from diagnostics.business_logic.format_response import SERIES_HEADER
from diagnostics.business_logic.table_specs import SWEEP_PREFIX

# Configure logging
logger = logging.getLogger(__name__)

BOUND_RTOL = 1e-9
BOUND_ATOL = 1e-12
RECURSION_RTOL = 1e-10
AGGREGATE_TOL = 1e-12
ORACLE_MAPS = 20
ORACLE_DIM = 16
ORACLE_RTOL = 1e-6
RATIO_RTOL = 0.03
MSE_RTOL = 0.15
GAP_ATOL = 0.02
DIRECTION_SHARE = 0.8
DEMO_FRACTION = 0.25

PASS, FAIL, SOFT, SKIP = "PASS", "FAIL", "SOFT", "SKIP"


@dataclass
class InvariantTally:
    name: str
    checked: int = 0
    failed: int = 0
    details: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def fail(self, detail: str) -> None:
        self.failed += 1
        if len(self.details) < 10:
            self.details.append(detail)


@dataclass
class ReportOutcome:
    lines: List[str]
    invariants: Dict[str, InvariantTally]
    checklist: List[Tuple[int, str, str]]

    @property
    def exit_code(self) -> int:
        return 0 if all(tally.ok for tally in self.invariants.values()) else 1

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _bool(value: str) -> bool:
    return value.strip().lower() in ("1", "true")


def _summary_rows(out_dir: Path) -> List[Dict[str, str]]:
    return read_csv(out_dir / "summary.csv", SUMMARY_HEADER)


def check_steps(out_dir: Path, summary: Sequence[Dict[str, str]]) -> Tuple[InvariantTally, InvariantTally]:
    """Unrolling bound and recursion identity over every steps.csv named by the summary."""
    bound = InvariantTally("unrolling bound")
    recursion = InvariantTally("recursion identity")
    for row in summary:
        path = run_dir(out_dir, row["condition_id"], int(row["seed"])) / "steps.csv"
        steps = read_csv(path, STEPS_HEADER)
        if not steps:
            raise ArtifactError("no step rows", path)
        delta = float_column(steps, "delta_w_norm", path)
        prefix = float_column(steps, "cert_prefix", path)
        a = float_column(steps, "a_t", path)[:-1]
        b = float_column(steps, "b_t", path)[:-1]
        cell = f"{row['condition_id']}/{row['seed']}"

        bound.checked += delta.shape[0]
        for t in np.flatnonzero(~(delta <= prefix * (1.0 + BOUND_RTOL) + BOUND_ATOL)):
            bound.fail(f"{cell} t={t}: delta_w_norm={format_number(delta[t])} > cert_prefix={format_number(prefix[t])}")

        recursion.checked += a.shape[0] + 1
        if prefix[0] != 0.0:
            recursion.fail(f"{cell}: cert_prefix[0]={format_number(prefix[0])} is not 0")
        expected = a * prefix[:-1] + b
        scale = np.maximum(np.abs(expected), np.abs(prefix[1:]))
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0, np.abs(expected - prefix[1:]) / scale, 0.0)
        for t in np.flatnonzero(~(rel <= RECURSION_RTOL)):
            recursion.fail(f"{cell} t={t}: cert_prefix[t+1] differs from a_t*cert_prefix[t]+b_t by {format_number(rel[t])}")
    return bound, recursion


def check_null(out_dir: Path) -> InvariantTally:
    path = out_dir / "null_checks.csv"
    tally = InvariantTally("coupling null test")
    for row in read_csv(path, NULL_CHECKS_HEADER):
        tally.checked += 1
        exact = parse_float(row, "max_delta_w_norm", path) == 0.0 and parse_float(row, "final_cert", path) == 0.0
        if not (exact and _bool(row["passed"])):
            tally.fail(f"{row['optimizer']}: max_delta_w_norm={row['max_delta_w_norm']} final_cert={row['final_cert']}")
    return tally


def power_oracle(seed: int = 0) -> Tuple[int, float]:
    """Number of random square maps where power iteration misses the top singular value, and the worst error."""
    failures, worst = 0, 0.0
    root = SeededStream(seed, StreamId.POWER)
    for j in range(ORACLE_MAPS):
        A = root.derive(j, 0).generator().standard_normal((ORACLE_DIM, ORACLE_DIM))
        estimate = operator_norm_power_iteration(lambda v: A @ v, lambda u: A.T @ u, ORACLE_DIM, root.derive(j, 1), 5000, 1e-13)
        exact = float(np.linalg.svd(A, compute_uv=False)[0])
        error = abs(estimate - exact) / exact
        worst = max(worst, error)
        failures += int(error > ORACLE_RTOL)
    return failures, worst


def _by_condition(summary: Sequence[Dict[str, str]], path: Path) -> Dict[str, Dict[int, Dict[str, float]]]:
    grouped: Dict[str, Dict[int, Dict[str, float]]] = {}
    for row in summary:
        values = {
            col: parse_float(row, col, path)
            for col in ("eta", "final_cert", "final_test_mse", "final_train_mse", "gen_gap", "final_probe_disc")
        }
        values["diverged"] = float(_bool(row["diverged"]))
        grouped.setdefault(row["condition_id"], {})[int(row["seed"])] = values
    return grouped


def _mean(rows: Dict[int, Dict[str, float]], metric: str) -> float:
    kept = [r[metric] for r in rows.values() if not r["diverged"]]
    return float(np.mean(kept)) if kept else float("nan")


def check_aggregates(out_dir: Path, grouped) -> Tuple[bool, List[str]]:
    """Recompute suite.csv means and stds from the per-seed rows."""
    path = out_dir / "suite.csv"
    mismatches = []
    for row in read_csv(path, SUITE_HEADER):
        seeds = grouped.get(row["condition_id"])
        if seeds is None:
            mismatches.append(f"{row['condition_id']} has no summary rows")
            continue
        for metric in ("final_cert", "final_test_mse", "final_train_mse", "gen_gap", "final_probe_disc"):
            kept = np.array([r[metric] for r in seeds.values() if not r["diverged"]])
            if kept.size == 0:
                continue
            mean = float(np.mean(kept))
            std = float(np.std(kept, ddof=1)) if kept.size > 1 else 0.0
            for value, reported in ((mean, parse_float(row, f"{metric}_mean", path)), (std, parse_float(row, f"{metric}_std", path))):
                if abs(value - reported) > AGGREGATE_TOL * max(1.0, abs(value)):
                    mismatches.append(f"{row['condition_id']} {metric}: recomputed {format_number(value)}, reported {format_number(reported)}")
    return not mismatches, mismatches


def _sigma(out_dir: Path) -> Optional[float]:
    path = out_dir / "config.resolved"
    if not path.is_file():
        return None
    try:
        return float(json.loads(path.read_text(encoding="utf-8"))["data"]["sigma"])
    except (ValueError, KeyError, TypeError) as e:
        raise ArtifactError(f"unreadable: {e}", path) from e


def _paired(grouped, first: str, second: str, metric: str) -> Tuple[np.ndarray, np.ndarray]:
    seeds = sorted(set(grouped[first]) & set(grouped[second]))
    seeds = [s for s in seeds if not grouped[first][s]["diverged"] and not grouped[second][s]["diverged"]]
    return (
        np.array([grouped[first][s][metric] for s in seeds]),
        np.array([grouped[second][s][metric] for s in seeds]),
    )


def paired_ttest_line(grouped, first: str, second: str) -> Optional[str]:
    """Paired t-test on final_cert and the share of seeds where the first condition's cert is below the second's."""
    if first not in grouped or second not in grouped:
        return None
    a, b = _paired(grouped, first, second, "final_cert")
    if a.size == 0:
        return f"{first} vs {second}: no paired seeds"
    share = float(np.mean(a < b))
    if a.size < 2 or np.all(a - b == 0):
        return f"{first} vs {second}: t=n/a p=n/a, {first} lower in {share:.2f} of {a.size} seeds"
    t, p = stats.ttest_rel(a, b)
    return f"{first} vs {second}: t={t:.4f} p={p:.6f}, {first} lower in {share:.2f} of {a.size} seeds"


def spearman_line(out_dir: Path) -> str:
    path = out_dir / "scatter.csv"
    if not path.is_file():
        return "spearman(final_cert, final_test_mse): n/a (no scatter.csv)"
    rows = read_csv(path, ("condition", "seed", "final_cert", "early_cert", "final_test_mse"))
    x = float_column(rows, "final_cert", path)
    y = float_column(rows, "final_test_mse", path)
    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 3 or np.ptp(x[keep]) == 0 or np.ptp(y[keep]) == 0:
        return f"spearman(final_cert, final_test_mse): n/a ({int(keep.sum())} usable rows)"
    rho, p = stats.spearmanr(x[keep], y[keep])
    return f"spearman(final_cert, final_test_mse): rho={rho:.4f} p={p:.6f} over {int(keep.sum())} runs"


def _sweep(grouped) -> List[Tuple[float, str]]:
    etas = []
    for label, seeds in grouped.items():
        if label.startswith(SWEEP_PREFIX) and seeds:
            etas.append((next(iter(seeds.values()))["eta"], label))
    return sorted(etas)


def item_step_size(grouped, sigma: Optional[float]) -> Tuple[str, str]:
    sweep = _sweep(grouped)
    if len(sweep) < 2:
        return SKIP, "needs at least two swept step sizes"
    eta0, base = sweep[0]
    cert0 = _mean(grouped[base], "final_cert")
    ratios, within = [], True
    for eta, label in sweep:
        ratio = _mean(grouped[label], "final_cert") / cert0 if cert0 > 0 else float("nan")
        expected = eta / eta0
        ratios.append(f"{format_number(eta)}:{ratio:.3f}/{expected:.3f}")
        within &= bool(abs(ratio - expected) <= RATIO_RTOL * expected)
    mse_ok = True
    if sigma is not None and sigma > 0:
        mses = [_mean(grouped[label], "final_test_mse") for _, label in sweep]
        mse_ok = all(abs(mse - sigma**2) <= MSE_RTOL * sigma**2 for mse in mses)
    gaps_ok = all(abs(_mean(grouped[label], "gen_gap")) <= GAP_ATOL for _, label in sweep)
    detail = (
        f"cert ratios (observed/expected) {' '.join(ratios)}; test MSE within 15% of sigma^2: {mse_ok}; "
        f"|gen_gap| <= {GAP_ATOL!r}: {gaps_ok}"
    )
    return (PASS if within and mse_ok and gaps_ok else FAIL), detail


def item_optimizers(grouped) -> Tuple[str, str]:
    if not all(label in grouped for label in ("opt_sgd", "opt_gd", "opt_adam")):
        return SKIP, "needs opt_sgd, opt_gd and opt_adam"
    sgd, gd, adam = (_mean(grouped[label], "final_cert") for label in ("opt_sgd", "opt_gd", "opt_adam"))
    gaps = {label: _mean(grouped[label], "gen_gap") for label in ("opt_sgd", "opt_gd", "opt_adam")}
    ordered = sgd * 10 <= gd and adam >= 50 * gd
    gaps_ok = gaps["opt_adam"] > 0 and abs(gaps["opt_gd"]) <= GAP_ATOL and abs(gaps["opt_sgd"]) <= GAP_ATOL
    detail = (
        f"cert sgd={format_number(sgd)} gd={format_number(gd)} adam={format_number(adam)}; "
        f"gen_gap sgd={format_number(gaps['opt_sgd'])} gd={format_number(gaps['opt_gd'])} "
        f"adam={format_number(gaps['opt_adam'])}"
    )
    return (PASS if ordered and gaps_ok else FAIL), detail


def neighbor_direction_counts(grouped) -> Optional[Tuple[int, int, int, int]]:
    """Seeds where high_leverage is below random_index on cert, on probe discrepancy, on both, and the seed count."""
    if "neighbor_random_index" not in grouped or "neighbor_high_leverage" not in grouped:
        return None
    hl_cert, ri_cert = _paired(grouped, "neighbor_high_leverage", "neighbor_random_index", "final_cert")
    hl_probe, ri_probe = _paired(grouped, "neighbor_high_leverage", "neighbor_random_index", "final_probe_disc")
    cert, probe = hl_cert < ri_cert, hl_probe < ri_probe
    return int(cert.sum()), int(probe.sum()), int((cert & probe).sum()), int(cert.size)


def item_neighbor(grouped) -> Tuple[str, str]:
    counts = neighbor_direction_counts(grouped)
    if counts is None:
        return SKIP, "needs neighbor_random_index and neighbor_high_leverage"
    cert, probe, both, seeds = counts
    if seeds == 0:
        return SKIP, "no paired seeds"
    hl_cert, ri_cert = _paired(grouped, "neighbor_high_leverage", "neighbor_random_index", "final_cert")
    detail = (
        f"high_leverage below random_index on cert in {cert}/{seeds} seeds, on probe discrepancy in {probe}/{seeds}, "
        f"on both in {both}/{seeds} "
        f"(cert {format_number(float(np.mean(hl_cert)))} vs {format_number(float(np.mean(ri_cert)))})"
    )
    if both >= DIRECTION_SHARE * seeds:
        return PASS, detail
    return SOFT, detail + "; direction is sensitive to how the replacement point is constructed"


def item_labels(grouped) -> Tuple[str, str]:
    if "labels_clean" not in grouped or "labels_permuted" not in grouped:
        return SKIP, "needs labels_clean and labels_permuted"
    clean, permuted = _mean(grouped["labels_clean"], "final_cert"), _mean(grouped["labels_permuted"], "final_cert")
    mse_clean = _mean(grouped["labels_clean"], "final_test_mse")
    mse_permuted = _mean(grouped["labels_permuted"], "final_test_mse")
    within = clean > 0 and permuted > 0 and 0.5 <= permuted / clean <= 2.0
    close = abs(mse_clean - mse_permuted) <= 0.01
    detail = (
        f"cert clean={format_number(clean)} permuted={format_number(permuted)}; "
        f"test MSE clean={format_number(mse_clean)} permuted={format_number(mse_permuted)}"
    )
    return (PASS if within and close else FAIL), detail


def item_demo(out_dir: Path) -> Tuple[str, str]:
    path = out_dir / "demo_summary.csv"
    if not path.is_file():
        return SKIP, "no demo_summary.csv"
    rows = read_csv(path, DEMO_SUMMARY_HEADER)
    if len(rows) != 1:
        raise ArtifactError(f"expected one row, found {len(rows)}", path)
    row = rows[0]
    fraction = parse_float(row, "fraction", path)
    interpolates = _bool(row["interpolation_ok"])
    detail = (
        f"fraction={format_number(fraction)} over {row['counted_trials']} trials, dropped={row['dropped']}, "
        f"interpolation ok={interpolates}, thresholds risk_max={row['risk_max']} delta_min={row['delta_min']}"
    )
    return (PASS if interpolates and fraction >= DEMO_FRACTION else FAIL), detail


def compare_trees(out_dir: Path, reference_dir: Path) -> Tuple[bool, List[str]]:
    """Byte comparison of every CSV file and config.resolved under two output directories."""

    def files(root: Path) -> Dict[str, Path]:
        found = {p.relative_to(root).as_posix(): p for p in root.rglob("*.csv")}
        resolved = root / "config.resolved"
        if resolved.is_file():
            found["config.resolved"] = resolved
        return found

    ours, theirs = files(out_dir), files(reference_dir)
    differences = [f"only in {out_dir}: {name}" for name in sorted(ours.keys() - theirs.keys())]
    differences += [f"only in {reference_dir}: {name}" for name in sorted(theirs.keys() - ours.keys())]
    for name in sorted(ours.keys() & theirs.keys()):
        if ours[name].read_bytes() != theirs[name].read_bytes():
            differences.append(f"differs: {name}")
    return not differences and bool(ours), differences


def item_determinism(out_dir: Path, reference_dir: Optional[Path]) -> Tuple[str, str]:
    if reference_dir is None:
        return SKIP, "determinism: pass --reference with a rerun from the same config"
    reference_dir = Path(reference_dir)
    if not reference_dir.is_dir():
        raise ArtifactError("missing reference directory", reference_dir)
    same, differences = compare_trees(out_dir, reference_dir)
    if same:
        return PASS, f"CSV tree identical to {reference_dir}"
    return FAIL, f"{len(differences)} differences from {reference_dir}: {'; '.join(differences[:3])}"


def item_early_rank(out_dir: Path, grouped) -> Tuple[str, str]:
    sweep = _sweep(grouped)
    path = out_dir / "series.csv"
    if len(sweep) < 2 or not path.is_file():
        return SKIP, "needs a step-size sweep and series.csv"
    prefixes: Dict[str, Dict[int, Dict[int, float]]] = {}
    for row in read_csv(path, SERIES_HEADER):
        if row["metric"] == "cert_prefix" and row["condition"].startswith(SWEEP_PREFIX):
            prefixes.setdefault(row["condition"], {}).setdefault(int(row["seed"]), {})[int(row["t"])] = parse_float(
                row, "value", path
            )
    early, final = [], []
    for _, label in sweep:
        runs = prefixes.get(label, {})
        if not runs:
            return SKIP, f"no cert_prefix series for {label}"
        T = min(max(run) for run in runs.values())
        step = max(T // 4, 1)
        early.append(float(np.mean([run[step] for run in runs.values()])))
        final.append(float(np.mean([run[T] for run in runs.values()])))
    same = bool(np.array_equal(np.argsort(early, kind="stable"), np.argsort(final, kind="stable")))
    return (PASS if same else FAIL), f"rank order at T/4 {'matches' if same else 'differs from'} rank order at T"


def report(out_dir: Path, reference_dir: Optional[Path] = None) -> ReportOutcome:
    """
    Verify a suite output directory and build the console report.

    Raises:
        ArtifactError: If a required file is missing or corrupt
    """
    out_dir = Path(out_dir)
    has_suite = (out_dir / "summary.csv").is_file()
    has_demo = (out_dir / "demo_summary.csv").is_file()
    if not has_suite and not has_demo:
        raise ArtifactError("missing file", out_dir / "summary.csv")

    lines: List[str] = [f"report for {out_dir}"]
    invariants: Dict[str, InvariantTally] = {}
    grouped: Dict[str, Dict[int, Dict[str, float]]] = {}
    if has_suite:
        summary = _summary_rows(out_dir)
        grouped = _by_condition(summary, out_dir / "summary.csv")
        bound, recursion = check_steps(out_dir, summary)
        null = check_null(out_dir)
        invariants = {"bound": bound, "recursion": recursion, "null": null}

        lines.append("")
        lines.append("aggregates (seed mean over non-diverged runs)")
        for label, seeds in grouped.items():
            diverged = int(sum(r["diverged"] for r in seeds.values()))
            lines.append(
                f"  {label}: final_cert={format_number(_mean(seeds, 'final_cert'))} "
                f"final_test_mse={format_number(_mean(seeds, 'final_test_mse'))} "
                f"gen_gap={format_number(_mean(seeds, 'gen_gap'))} "
                f"probe_disc={format_number(_mean(seeds, 'final_probe_disc'))} seeds={len(seeds)} diverged={diverged}"
            )
        aggregates_ok, mismatches = check_aggregates(out_dir, grouped)
        lines.append(f"  suite.csv recomputation: {'ok' if aggregates_ok else 'MISMATCH'}")
        lines.extend(f"    {m}" for m in mismatches[:10])

        checks_path = out_dir / "checks.csv"
        if checks_path.is_file():
            check_rows = read_csv(checks_path, CHECKS_HEADER)
            worst = max((parse_float(r, "max_ratio", checks_path) for r in check_rows), default=float("nan"))
            lines.append(f"  live bound checks: {sum(_bool(r['ok']) for r in check_rows)}/{len(check_rows)} ok, max tightness={format_number(worst)}")

        lines.append("")
        lines.append("invariants")
        for tally in invariants.values():
            lines.append(f"  {tally.name}: {'PASS' if tally.ok else 'FAIL'} ({tally.checked - tally.failed}/{tally.checked})")
            lines.extend(f"    {d}" for d in tally.details)

        lines.append("")
        lines.append("statistics")
        lines.append(f"  {spearman_line(out_dir)}")
        for first, second in (("neighbor_high_leverage", "neighbor_random_index"), ("labels_permuted", "labels_clean")):
            line = paired_ttest_line(grouped, first, second)
            if line:
                lines.append(f"  {line}")

    oracle_failures, oracle_worst = power_oracle()
    sigma = _sigma(out_dir)
    bound_status = SKIP if "bound" not in invariants else (PASS if invariants["bound"].ok else FAIL)
    recursion_status = SKIP if "recursion" not in invariants else (PASS if invariants["recursion"].ok else FAIL)
    null_status = SKIP if "null" not in invariants else (PASS if invariants["null"].ok else FAIL)
    checklist = [
        (1, bound_status, "||dw_t|| <= cert_prefix[t] at every logged step"),
        (2, recursion_status, f"prefix recursion identity within {RECURSION_RTOL!r} relative"),
        (3, *item_step_size(grouped, sigma)),
        (4, *item_optimizers(grouped)),
        (5, *item_neighbor(grouped)),
        (6, *item_labels(grouped)),
        (7, null_status, "S' = S gives zero discrepancy and zero certificate"),
        (
            8,
            PASS if oracle_failures == 0 else FAIL,
            f"power iteration vs dense SVD on {ORACLE_MAPS} {ORACLE_DIM}x{ORACLE_DIM} maps, worst rel error {oracle_worst:.2e}",
        ),
        (9, *item_demo(out_dir)),
        (10, *item_determinism(out_dir, reference_dir)),
        (11, *item_early_rank(out_dir, grouped)),
    ]
    lines.append("")
    lines.append("acceptance checklist")
    lines.extend(f"  [{status}] {number}. {detail}" for number, status, detail in checklist)
    outcome = ReportOutcome(lines=lines, invariants=invariants, checklist=checklist)
    lines.append("")
    lines.append(f"exit code {outcome.exit_code}")
    logger.info(f"Report for {out_dir}: exit code {outcome.exit_code}")
    return outcome
