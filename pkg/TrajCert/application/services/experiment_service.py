import logging
from dataclasses import replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from TrajCert.application.models.domain import (
    CellCheck,
    CellResult,
    ConditionAggregate,
    ContractivityProfile,
    CoupledTrajectory,
    Dataset,
    DemoReport,
    DemoTrial,
    MetricStats,
    NeighborOutcome,
    NullCheck,
    ProbeSet,
    RunSummary,
    StepLog,
    SuiteResult,
)
from TrajCert.application.models.errors import InvalidInputError, NumericalError
from TrajCert.application.models.model_configs import (
    Condition,
    DemoSettings,
    LabelMode,
    LabelsMode,
    OptimizerKind,
    OptimizerSpec,
    ReplacementKind,
    SelectionMode,
    SignalKind,
)
from TrajCert.application.services.certificate_service import (
    ProfileRequest,
    ProfileSelector,
    check_unrolling_bound,
    sharpness,
    summarize_certificates,
)
from TrajCert.application.services.datagen_service import (
    make_dataset,
    make_neighbor,
    make_probe_and_test,
    permute_labels,
)
from TrajCert.application.services.dynamics_service import mse, probe_rms, run_coupled
from TrajCert.infrastructure.numerics.linalg import min_norm_interpolator
from TrajCert.infrastructure.numerics.streams import SeededStream, StreamId

# Configure logging
logger = logging.getLogger(__name__)

SUMMARY_METRICS = ("final_cert", "final_test_mse", "final_train_mse", "gen_gap", "final_probe_disc")
# series.csv metric name -> StepLog field
SERIES_METRICS = {
    "cert_prefix": "cert_prefix",
    "probe_disc": "probe_disc",
    "test_mse": "test_mse_S",
    "delta_w_norm": "delta_w_norm",
}
INTERPOLATION_TOL = 1e-10
RISK_QUANTILE = 0.75
DELTA_QUANTILE = 0.25


def early_step(T: int) -> int:
    """The prefix step used as the early-certificate signal."""
    return max(T // 4, 1)


def step_log(traj: CoupledTrajectory, profile: ContractivityProfile) -> StepLog:
    return StepLog(
        a=profile.a,
        b=profile.b,
        cert_prefix=profile.cert_prefix,
        delta_w_norm=traj.delta_norm,
        probe_disc=traj.probe_disc,
        train_mse_S=traj.train_mse,
        train_mse_Sprime=traj.train_mse_prime,
        test_mse_S=traj.test_mse,
        diverged_at=traj.diverged_at,
    )


class ExperimentService:
    """Runs single (condition, seed) cells and folds them into suite results."""

    def __init__(self):
        self.selector = ProfileSelector()

    def build_data(self, condition: Condition, seed: int) -> Tuple[Dataset, ProbeSet]:
        """
        Base dataset and probes of one seed.

        Conditions sharing a seed and a data design get identical values, which is
        what pairs the conditions of a suite.
        """
        base = make_dataset(
            condition.spectrum,
            condition.n,
            condition.sigma,
            SeededStream(seed, StreamId.DATA),
            condition.signal,
            condition.jitter_scale,
        )
        if condition.labels_mode == LabelsMode.PERMUTED:
            base = permute_labels(base, SeededStream(seed, StreamId.PERMUTATION))
        probes = make_probe_and_test(
            condition.spectrum,
            base.w_star,
            condition.sigma,
            condition.m_probe,
            condition.n_test,
            SeededStream(seed, StreamId.PROBE),
            condition.jitter_scale,
        )
        return base, probes

    def _run_pair(self, condition: Condition, seed: int, pair, probes: ProbeSet):
        traj = run_coupled(pair, probes, condition.optimizer, condition.T, SeededStream(seed, StreamId.INIT), condition.init_scale)
        request = ProfileRequest(
            traj,
            pair,
            SeededStream(seed, StreamId.POWER),
            condition.power_iters,
            condition.power_tol,
            condition.injection,
        )
        return traj, self.selector.extract(request)

    def run_cell(self, condition: Condition, seed: int) -> CellResult:
        """
        Run every neighbor of one (condition, seed) cell.

        Neighbor 0 provides the per-step log and the summary row; all neighbors feed
        the dataset certificate and the unrolling-bound checks.
        """
        base, probes = self.build_data(condition, seed)
        checks: List[CellCheck] = []
        outcomes: List[NeighborOutcome] = []
        log: Optional[StepLog] = None
        summary: Optional[RunSummary] = None
        for k in range(condition.K_neighbors):
            pair = make_neighbor(
                base,
                condition.selection,
                SeededStream(seed, StreamId.NEIGHBOR).derive(k),
                condition.label_mode,
                condition.replacement,
                condition.jitter_scale,
            )
            traj, profile = self._run_pair(condition, seed, pair, probes)
            report = check_unrolling_bound(traj, profile, raise_on_violation=False)
            checks.append(CellCheck(condition.label, seed, k, report))
            outcomes.append(
                NeighborOutcome(k, profile.final_cert, float(traj.delta_norm[-1]), float(traj.probe_disc[-1]), traj.diverged)
            )
            if k == 0:
                log = step_log(traj, profile)
                summary = self._summarize(condition, seed, base, traj, profile, report.max_ratio)
        logger.info(
            f"Cell {condition.label}/{seed}: final_cert={summary.final_cert:.6g} "
            f"test_mse={summary.final_test_mse:.6g} diverged={summary.diverged}"
        )
        return CellResult(condition.label, seed, summary, log, tuple(checks), tuple(outcomes))

    def _summarize(self, condition, seed, base, traj, profile, tightness) -> RunSummary:
        lam_max = sharpness(
            base.X, SeededStream(seed, StreamId.POWER).derive(1), condition.power_iters, condition.power_tol
        )
        early = min(early_step(condition.T), traj.steps)
        return RunSummary(
            condition_id=condition.label,
            seed=seed,
            optimizer=condition.optimizer.kind,
            eta=condition.optimizer.eta,
            selection=condition.selection,
            labels=condition.labels_mode,
            final_cert=profile.final_cert,
            final_test_mse=float(traj.test_mse[-1]),
            final_train_mse=float(traj.train_mse[-1]),
            gen_gap=float(traj.test_mse[-1] - traj.train_mse[-1]),
            final_probe_disc=float(traj.probe_disc[-1]),
            diverged=traj.diverged,
            replaced_index=traj.replaced_index,
            sharpness=lam_max,
            stability_threshold=2.0 / lam_max if lam_max > 0 else float("inf"),
            tightness=tightness,
            early_cert=float(profile.cert_prefix[early]),
        )

    def run_null_check(self, condition: Condition, seed: int) -> NullCheck:
        """Coupled run with S' = S; every discrepancy and certificate must be exactly 0."""
        base, probes = self.build_data(condition, seed)
        pair = make_neighbor(base, SelectionMode.IDENTITY, SeededStream(seed, StreamId.NEIGHBOR))
        traj, profile = self._run_pair(condition, seed, pair, probes)
        check = NullCheck(condition.optimizer.kind, float(np.max(traj.delta_norm)), profile.final_cert)
        if not check.passed:
            logger.error(f"Coupling null test failed for {check.optimizer.value}: {check}")
        return check

    def aggregate(
        self,
        conditions: Sequence[Condition],
        cells: Iterable[CellResult],
        null_checks: Sequence[NullCheck] = (),
    ) -> SuiteResult:
        """Order cells by (condition, seed) and compute per-condition statistics and mean series."""
        order = {c.label: i for i, c in enumerate(conditions)}
        by_key: Dict[Tuple[str, int], CellResult] = {(cell.condition_id, cell.seed): cell for cell in cells}
        ordered = []
        for condition in conditions:
            for seed in condition.seeds:
                if (condition.label, seed) not in by_key:
                    raise InvalidInputError(f"missing cell {condition.label}/{seed}")
                ordered.append(by_key[(condition.label, seed)])
        ordered.sort(key=lambda cell: order[cell.condition_id])

        aggregates: Dict[str, ConditionAggregate] = {}
        series: Dict[str, Dict[str, np.ndarray]] = {}
        for condition in conditions:
            group = [cell for cell in ordered if cell.condition_id == condition.label]
            kept = [cell for cell in group if not cell.summary.diverged]
            stats = {}
            for metric in SUMMARY_METRICS:
                values = np.array([getattr(cell.summary, metric) for cell in kept])
                stats[metric] = _stats(values)
            per_neighbor = [[cell.neighbors[k] for cell in group] for k in range(condition.K_neighbors)]
            aggregates[condition.label] = ConditionAggregate(
                condition_id=condition.label,
                seed_count=len(group),
                diverged_count=len(group) - len(kept),
                stats=stats,
                certificate=summarize_certificates(per_neighbor, condition.L_d),
            )
            series[condition.label] = _mean_series(kept)

        failures = []
        for cell in ordered:
            for check in cell.checks:
                if not check.report.ok:
                    failures.append(
                        f"{check.condition_id}/{check.seed} neighbor {check.neighbor}: unrolling bound violated "
                        f"at steps {list(check.report.violations)[:5]} (one-step ok={check.report.one_step_ok})"
                    )
        for check in null_checks:
            if not check.passed:
                failures.append(f"coupling null test failed for {check.optimizer.value}")
        return SuiteResult(
            conditions=tuple(conditions),
            cells=tuple(ordered),
            aggregates=aggregates,
            series=series,
            null_checks=tuple(null_checks),
            failures=tuple(failures),
        )


def _stats(values: np.ndarray) -> MetricStats:
    if values.size == 0:
        return MetricStats(float("nan"), float("nan"))
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return MetricStats(float(np.mean(values)), std)


def _mean_series(cells: Sequence[CellResult]) -> Dict[str, np.ndarray]:
    if not cells:
        return {}
    return {
        metric: np.mean(np.vstack([getattr(cell.log, field) for cell in cells]), axis=0)
        for metric, field in SERIES_METRICS.items()
    }


def _unique_label(label: str, used: Dict[str, int]) -> str:
    count = used.get(label, 0)
    used[label] = count + 1
    return label if count == 0 else f"{label}_{count + 1}"


def step_size_conditions(etas: Sequence[float], base: Condition) -> List[Condition]:
    """One GD condition per step size, labelled sweep_eta_<eta>."""
    if not etas:
        raise InvalidInputError("at least one step size is required")
    used: Dict[str, int] = {}
    conditions = []
    for eta in etas:
        if not (np.isfinite(eta) and eta > 0):
            raise InvalidInputError(f"step sizes must be positive, got {eta}")
        optimizer = base.optimizer.model_copy(update={"kind": OptimizerKind.GD, "eta": float(eta)})
        label = _unique_label(f"sweep_eta_{float(eta)!r}", used)
        conditions.append(base.model_copy(update={"label": label, "optimizer": optimizer}))
    return conditions


def optimizer_conditions(base: Condition, optimizers: Mapping[OptimizerKind, OptimizerSpec]) -> List[Condition]:
    """SGD, GD and Adam on identical data, labelled opt_<kind>."""
    order = (OptimizerKind.SGD, OptimizerKind.GD, OptimizerKind.ADAM)
    return [base.model_copy(update={"label": f"opt_{kind.value}", "optimizer": optimizers[kind]}) for kind in order]


def _require_gd(base: Condition) -> None:
    if base.optimizer.kind != OptimizerKind.GD:
        raise InvalidInputError(f"this ablation runs GD, got {base.optimizer.kind.value}")


def neighbor_conditions(base: Condition) -> List[Condition]:
    """GD with random-index and high-leverage replacement, labelled neighbor_<selection>."""
    _require_gd(base)
    selections = (SelectionMode.RANDOM_INDEX, SelectionMode.HIGH_LEVERAGE)
    return [base.model_copy(update={"label": f"neighbor_{s.value}", "selection": s}) for s in selections]


def label_conditions(base: Condition) -> List[Condition]:
    """GD on clean and permuted labels, labelled labels_<mode>."""
    _require_gd(base)
    modes = (LabelsMode.CLEAN, LabelsMode.PERMUTED)
    return [base.model_copy(update={"label": f"labels_{m.value}", "labels_mode": m}) for m in modes]


def check_unique_labels(conditions: Sequence[Condition]) -> None:
    seen = set()
    for condition in conditions:
        if condition.label in seen:
            raise InvalidInputError(f"duplicate condition label {condition.label!r}")
        seen.add(condition.label)


def _demo_trial(settings: DemoSettings, stream: SeededStream, phase: str, index: int) -> DemoTrial:
    spec = settings.spectrum()
    base = make_dataset(spec, settings.n, settings.sigma, stream.derive(0), SignalKind.SPIKED, settings.jitter_scale)
    pair = make_neighbor(
        base,
        SelectionMode.RANDOM_INDEX,
        stream.derive(1),
        LabelMode.CONDITIONAL,
        ReplacementKind.POPULATION,
        settings.jitter_scale,
    )
    probes = make_probe_and_test(
        spec, base.w_star, settings.sigma, settings.m_probe, settings.n_test, stream.derive(2), settings.jitter_scale
    )
    fit = min_norm_interpolator(base.X, base.y, settings.jitter_scale, settings.refine_steps)
    fit_prime = min_norm_interpolator(pair.neighbor.X, pair.neighbor.y, settings.jitter_scale, settings.refine_steps)

    train = mse(fit.weights, base.X, base.y)
    train_prime = mse(fit_prime.weights, pair.neighbor.X, pair.neighbor.y)
    test = mse(fit.weights, probes.X_test, probes.y_test)
    error = fit.weights - base.w_star
    population = float(error @ (spec.covariance_diagonal() * error))
    delta = fit.weights - fit_prime.weights
    return DemoTrial(
        phase=phase,
        trial=index,
        train_mse_S=train,
        train_mse_Sprime=train_prime,
        test_mse=test,
        excess_empirical=test - settings.sigma**2,
        excess_population=population,
        probe_disc=probe_rms(delta, probes.X_probe),
        param_disc=float(np.linalg.norm(delta)),
        interpolates=max(train, train_prime) <= INTERPOLATION_TOL,
    )


def _demo_batch(settings: DemoSettings, phase: str, count: int) -> Tuple[List[DemoTrial], int]:
    root = SeededStream(settings.seed, StreamId.DEMO).derive(0 if phase == "pilot" else 1)
    trials, dropped = [], 0
    for j in range(count):
        try:
            trials.append(_demo_trial(settings, root.derive(j), phase, j))
        except NumericalError as e:
            dropped += 1
            logger.warning(f"Demo {phase} trial {j} dropped: {e}")
    return trials, dropped


def calibrate_thresholds(pilot: Sequence[DemoTrial], jitter_scale: float) -> Tuple[float, float]:
    """
    (risk_max, delta_min) from the interpolating pilot trials: the upper quartile of
    the population excess and the lower quartile of the probe discrepancy.

    At least half of the pilot mass meets both thresholds for any joint distribution
    of the two quantities.
    """
    usable = [t for t in pilot if t.interpolates]
    if not usable:
        raise NumericalError("no interpolating pilot trial to calibrate thresholds", jitter=jitter_scale)
    return (
        float(np.quantile([t.excess_population for t in usable], RISK_QUANTILE)),
        float(np.quantile([t.probe_disc for t in usable], DELTA_QUANTILE)),
    )


def necessity_demo(
    settings: DemoSettings,
    thresholds: Optional[Tuple[float, float]] = None,
    trials: Optional[int] = None,
) -> DemoReport:
    """
    Estimate how often an interpolating minimum-norm fit has small excess risk
    together with a large neighbor discrepancy.

    Args:
        settings: Spiked design and trial counts
        thresholds: (risk_max, delta_min); when omitted they come from the settings
            or, failing that, from the quartiles of a pilot batch on its own stream
        trials: Number of fresh trials, settings.trials by default

    Returns:
        The per-trial records and the fraction of interpolating fresh trials with
        population excess <= risk_max and probe discrepancy >= delta_min
    """
    count = settings.trials if trials is None else trials
    if count < 1:
        raise InvalidInputError(f"trials must be at least 1, got {count}")
    if thresholds is None and settings.risk_max is not None:
        thresholds = (settings.risk_max, settings.delta_min)

    records: List[DemoTrial] = []
    dropped = 0
    calibrated = thresholds is None
    if calibrated:
        pilot, pilot_dropped = _demo_batch(settings, "pilot", settings.pilot_trials)
        thresholds = calibrate_thresholds(pilot, settings.jitter_scale)
        records.extend(pilot)
        dropped += pilot_dropped
        logger.info(f"Pilot thresholds: risk_max={thresholds[0]:.6g} delta_min={thresholds[1]:.6g}")
    risk_max, delta_min = thresholds

    fresh, fresh_dropped = _demo_batch(settings, "fresh", count)
    dropped += fresh_dropped
    counted = 0
    hits = 0
    for trial in fresh:
        if not trial.interpolates:
            records.append(trial)
            continue
        counted += 1
        hit = bool(trial.excess_population <= risk_max and trial.probe_disc >= delta_min)
        hits += int(hit)
        records.append(replace(trial, hit=hit))
    fraction = hits / counted if counted else float("nan")
    logger.info(f"Necessity demo: {hits}/{counted} interpolating trials in the regime, {dropped} dropped")
    return DemoReport(
        trials=tuple(records),
        risk_max=float(risk_max),
        delta_min=float(delta_min),
        fraction=fraction,
        counted_trials=counted,
        dropped=dropped,
        calibrated=calibrated,
    )
