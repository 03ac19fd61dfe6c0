"""
Immutable value types passed between the datagen, dynamics, certificate and
experiment services.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from TrajCert.application.models.model_configs import (
    Condition,
    InjectionMode,
    LabelMode,
    LabelsMode,
    OptimizerKind,
    ProfileMethod,
    ReplacementKind,
    SelectionMode,
    SignalKind,
    SpectrumSpec,
)
from TrajCert.infrastructure.numerics.streams import SeededStream


def frozen_array(values) -> np.ndarray:
    """Copy into a read-only float64 array."""
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """A regression sample y = X w_star + noise with its generating provenance."""

    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    noise: np.ndarray
    sigma: float
    spectrum: SpectrumSpec
    source: SeededStream
    signal: SignalKind = SignalKind.ISOTROPIC
    labels: LabelsMode = LabelsMode.CLEAN

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class NeighborPair:
    base: Dataset
    neighbor: Dataset
    replaced_index: int
    selection: SelectionMode
    label_mode: LabelMode = LabelMode.MARGINAL
    replacement: ReplacementKind = ReplacementKind.EMPIRICAL


@dataclass(frozen=True)
class ProbeSet:
    X_probe: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


@dataclass(frozen=True)
class CoupledTrajectory:
    """
    Two runs of one optimizer from a shared initialization, one on S and one on S'.

    Row t of w / w_prime holds the iterate after t steps. Every per-step sequence
    has one entry per recorded iterate; a diverged run is truncated at the last
    finite iterate and carries the step at which divergence was detected.
    """

    optimizer: OptimizerKind
    eta: float
    w: np.ndarray
    w_prime: np.ndarray
    delta_norm: np.ndarray
    train_mse: np.ndarray
    train_mse_prime: np.ndarray
    test_mse: np.ndarray
    test_mse_prime: np.ndarray
    probe_disc: np.ndarray
    replaced_index: int
    requested_steps: int
    minibatch_indices: Optional[Tuple[np.ndarray, ...]] = None
    diverged_at: Optional[int] = None

    @property
    def steps(self) -> int:
        return self.w.shape[0] - 1

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


@dataclass(frozen=True)
class UnrolledCertificate:
    prefix: np.ndarray
    max_deviation: float


@dataclass(frozen=True)
class ContractivityProfile:
    a: np.ndarray
    b: np.ndarray
    cert_prefix: np.ndarray
    method: ProfileMethod
    injection: InjectionMode = InjectionMode.RESIDUAL
    max_recursion_deviation: float = 0.0

    @property
    def final_cert(self) -> float:
        return float(self.cert_prefix[-1])


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking ||Δw_t|| <= Cert_t along one logged trajectory."""

    ok: bool
    max_ratio: float
    worst_step: int
    safety_factor: float
    one_step_ok: bool
    max_recursion_deviation: float
    violations: Tuple[int, ...] = ()


@dataclass(frozen=True)
class CertificateReport:
    cert_T: float
    beta_T: float
    L_d: float
    delta_T: float
    probe_disc_T: float
    neighbor_count: int
    dataset_cert: float
    neighbor_certs: Tuple[float, ...] = ()
    worst_neighbor: int = 0
    diverged_count: int = 0

    @property
    def flagged(self) -> bool:
        return self.diverged_count > 0


@dataclass(frozen=True)
class StepLog:
    """Per-step scalars of one coupled run, the rows of steps.csv and trajectory.csv."""

    a: np.ndarray
    b: np.ndarray
    cert_prefix: np.ndarray
    delta_w_norm: np.ndarray
    probe_disc: np.ndarray
    train_mse_S: np.ndarray
    train_mse_Sprime: np.ndarray
    test_mse_S: np.ndarray
    diverged_at: Optional[int] = None

    @property
    def steps(self) -> int:
        return self.delta_w_norm.shape[0] - 1


@dataclass(frozen=True)
class RunSummary:
    condition_id: str
    seed: int
    optimizer: OptimizerKind
    eta: float
    selection: SelectionMode
    labels: LabelsMode
    final_cert: float
    final_test_mse: float
    final_train_mse: float
    gen_gap: float
    final_probe_disc: float
    diverged: bool
    replaced_index: int = -1
    sharpness: float = float("nan")
    stability_threshold: float = float("nan")
    tightness: float = float("nan")
    early_cert: float = float("nan")


@dataclass(frozen=True)
class CellCheck:
    condition_id: str
    seed: int
    neighbor: int
    report: BoundReport


@dataclass(frozen=True)
class NeighborOutcome:
    """Terminal values of one (cell, neighbor) run, the inputs of the dataset certificate."""

    neighbor: int
    final_cert: float
    delta_T: float
    probe_disc_T: float
    diverged: bool


@dataclass(frozen=True)
class CellResult:
    condition_id: str
    seed: int
    summary: RunSummary
    log: StepLog
    checks: Tuple[CellCheck, ...]
    neighbors: Tuple[NeighborOutcome, ...]


@dataclass(frozen=True)
class NullCheck:
    optimizer: OptimizerKind
    max_delta_w_norm: float
    final_cert: float

    @property
    def passed(self) -> bool:
        return self.max_delta_w_norm == 0.0 and self.final_cert == 0.0


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float


@dataclass(frozen=True)
class ConditionAggregate:
    condition_id: str
    seed_count: int
    diverged_count: int
    stats: Dict[str, MetricStats]
    certificate: CertificateReport


@dataclass(frozen=True)
class SuiteResult:
    """
    Everything a suite run produced, rows ordered by (condition order, seed).

    series maps a condition label to seed-mean per-step arrays keyed by metric name.
    """

    conditions: Tuple[Condition, ...]
    cells: Tuple[CellResult, ...]
    aggregates: Dict[str, ConditionAggregate]
    series: Dict[str, Dict[str, np.ndarray]]
    null_checks: Tuple[NullCheck, ...] = ()
    failures: Tuple[str, ...] = field(default=())

    @property
    def summaries(self) -> Tuple[RunSummary, ...]:
        return tuple(cell.summary for cell in self.cells)

    @property
    def checks(self) -> Tuple[CellCheck, ...]:
        return tuple(check for cell in self.cells for check in cell.checks)

    @property
    def ok(self) -> bool:
        return not self.failures

    def condition(self, label: str) -> Condition:
        for condition in self.conditions:
            if condition.label == label:
                return condition
        raise KeyError(label)


@dataclass(frozen=True)
class DemoTrial:
    phase: str
    trial: int
    train_mse_S: float
    train_mse_Sprime: float
    test_mse: float
    excess_empirical: float
    excess_population: float
    probe_disc: float
    param_disc: float
    interpolates: bool
    hit: bool = False


@dataclass(frozen=True)
class DemoReport:
    trials: Tuple[DemoTrial, ...]
    risk_max: float
    delta_min: float
    fraction: float
    counted_trials: int
    dropped: int
    calibrated: bool

    @property
    def interpolation_ok(self) -> bool:
        return all(trial.interpolates for trial in self.trials if trial.phase == "fresh")
