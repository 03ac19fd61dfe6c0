from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SpectrumKind(str, Enum):
    POWER_DECAY: str = "power_decay"
    FLAT: str = "flat"
    SPIKED: str = "spiked"


class SignalKind(str, Enum):
    ISOTROPIC: str = "isotropic"
    SPIKED: str = "spiked"


class SelectionMode(str, Enum):
    RANDOM_INDEX: str = "random_index"
    HIGH_LEVERAGE: str = "high_leverage"
    # S' = S, used by the coupling null test
    IDENTITY: str = "identity"


class LabelMode(str, Enum):
    MARGINAL: str = "marginal"
    CONDITIONAL: str = "conditional"


class ReplacementKind(str, Enum):
    EMPIRICAL: str = "empirical"
    POPULATION: str = "population"


class LabelsMode(str, Enum):
    CLEAN: str = "clean"
    PERMUTED: str = "permuted"


class OptimizerKind(str, Enum):
    GD: str = "gd"
    SGD: str = "sgd"
    ADAM: str = "adam"


class ProfileMethod(str, Enum):
    GD_EXACT: str = "gd_exact"
    SGD_JACOBIAN_PROXY: str = "sgd_jacobian_proxy"
    ADAM_IDENTITY: str = "adam_identity"


class InjectionMode(str, Enum):
    RESIDUAL: str = "residual"
    GRADIENT_BOUND: str = "gradient_bound"


class SpectrumSpec(BaseModel):
    """
    Covariance spectrum of the Gaussian design.

    The configured eigenvalues are normalized to mean 1; the covariance actually
    sampled is variance_scale * diag(eigenvalues).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: SpectrumKind = SpectrumKind.POWER_DECAY
    p: int = Field(512, ge=1)
    alpha: float = Field(1.0, ge=0.0, allow_inf_nan=False)
    spike_count: int = Field(0, ge=0)
    spike_value: float = Field(1.0, gt=0.0, allow_inf_nan=False)
    weak_value: float = Field(1e-3, ge=0.0, allow_inf_nan=False)
    variance_scale: float = Field(1.0, gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_spikes(self) -> "SpectrumSpec":
        if self.kind == SpectrumKind.SPIKED and not 1 <= self.spike_count <= self.p:
            raise ValueError(f"spiked spectrum needs 1 <= spike_count <= p, got {self.spike_count}")
        return self

    def eigenvalues(self) -> np.ndarray:
        """Mean-one eigenvalues in descending order."""
        if self.kind == SpectrumKind.POWER_DECAY:
            values = np.arange(1, self.p + 1, dtype=np.float64) ** (-self.alpha)
        elif self.kind == SpectrumKind.FLAT:
            values = np.ones(self.p)
        else:
            values = np.full(self.p, self.weak_value, dtype=np.float64)
            values[: self.spike_count] = self.spike_value
        return values / values.mean()

    def covariance_diagonal(self) -> np.ndarray:
        return self.variance_scale * self.eigenvalues()


class OptimizerSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: OptimizerKind = OptimizerKind.GD
    eta: float = Field(0.2, gt=0.0, allow_inf_nan=False)
    batch_size: int = Field(32, ge=1)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0, allow_inf_nan=False)


class Condition(BaseModel):
    """One cell family of the intervention suite; the label doubles as its directory name."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9_.\-]+$")
    optimizer: OptimizerSpec = OptimizerSpec()
    selection: SelectionMode = SelectionMode.RANDOM_INDEX
    labels_mode: LabelsMode = LabelsMode.CLEAN
    spectrum: SpectrumSpec = SpectrumSpec()
    signal: SignalKind = SignalKind.ISOTROPIC
    T: int = Field(200, ge=1)
    n: int = Field(256, ge=2)
    sigma: float = Field(0.25, ge=0.0, allow_inf_nan=False)
    seeds: Tuple[int, ...]
    m_probe: int = Field(512, ge=1)
    n_test: int = Field(1024, ge=1)
    init_scale: float = Field(0.0, ge=0.0, allow_inf_nan=False)
    label_mode: LabelMode = LabelMode.MARGINAL
    replacement: ReplacementKind = ReplacementKind.EMPIRICAL
    jitter_scale: float = Field(1e-6, ge=0.0, allow_inf_nan=False)
    power_iters: int = Field(30, ge=1)
    power_tol: float = Field(1e-10, ge=0.0)
    injection: InjectionMode = InjectionMode.RESIDUAL
    L_d: float = Field(1.0, gt=0.0, allow_inf_nan=False)
    K_neighbors: int = Field(1, ge=1)

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, seeds: Tuple[int, ...]) -> Tuple[int, ...]:
        if not seeds:
            raise ValueError("seeds must be nonempty")
        for seed in seeds:
            if not 0 <= seed < 2**64:
                raise ValueError(f"seed {seed} is not a 64-bit unsigned integer")
        return seeds

    @property
    def p(self) -> int:
        return self.spectrum.p


class DemoSettings(BaseModel):
    """Design of the benign-overfitting necessity demo."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(64, ge=2)
    p: int = Field(1024, ge=2)
    spike_count: int = Field(4, ge=1)
    spike_value: float = Field(1.0, gt=0.0)
    weak_value: float = Field(1e-3, ge=0.0)
    sigma: float = Field(0.25, ge=0.0)
    trials: int = Field(200, ge=1)
    pilot_trials: int = Field(50, ge=1)
    m_probe: int = Field(512, ge=1)
    n_test: int = Field(1024, ge=1)
    jitter_scale: float = Field(1e-6, ge=0.0)
    refine_steps: int = Field(2, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    risk_max: Optional[float] = None
    delta_min: Optional[float] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "DemoSettings":
        if self.n > self.p:
            raise ValueError(f"the demo needs n <= p, got n={self.n}, p={self.p}")
        if self.spike_count > self.p:
            raise ValueError(f"spike_count {self.spike_count} exceeds p={self.p}")
        if (self.risk_max is None) != (self.delta_min is None):
            raise ValueError("risk_max and delta_min must be given together")
        return self

    def spectrum(self) -> SpectrumSpec:
        return SpectrumSpec(
            kind=SpectrumKind.SPIKED,
            p=self.p,
            spike_count=self.spike_count,
            spike_value=self.spike_value,
            weak_value=self.weak_value,
        )
