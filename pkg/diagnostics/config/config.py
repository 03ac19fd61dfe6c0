"""
Configuration settings for the certificate suite.

Layers, lowest first: the named profile from get_config, the TOML suite file,
environment variables (TCERT_SEED, TCERT_WORKERS, TCERT_PROFILE) and CLI flags.
"""

import copy
import difflib
import json
import logging
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from TrajCert.application.models.errors import ConfigError
from TrajCert.application.models.model_configs import (
    Condition,
    DemoSettings,
    InjectionMode,
    LabelMode,
    OptimizerKind,
    OptimizerSpec,
    ReplacementKind,
    SignalKind,
    SpectrumKind,
    SpectrumSpec,
)

# Configure logging
logger = logging.getLogger(__name__)

PROFILES = ("full", "smoke")


def get_config(profile: str = "full") -> Dict[str, Any]:
    """
    Get the base configuration for a named profile.

    Args:
        profile: full (the documented defaults) or smoke (a tiny, fast suite)

    Returns:
        Dictionary containing configuration settings
    """
    if profile not in PROFILES:
        suggestion = next(iter(difflib.get_close_matches(profile, PROFILES, n=1)), None)
        raise ConfigError(f"unknown profile {profile!r}", suggestion=suggestion)

    # Base configuration
    config = {
        "data": {
            "n": 256,
            "p": 512,
            "sigma": 0.25,
            "spectrum": "power_decay",
            "alpha": 1.0,
            "spike_count": 0,
            "spike_value": 1.0,
            "weak_value": 1e-3,
            "normalize_rows": True,
            "row_energy": 0.2,
            "signal": "isotropic",
            "m_probe": 512,
            "n_test": 1024,
            "jitter_scale": 1e-6,
            "label_mode": "marginal",
            "replacement": "empirical",
        },
        "optimizer": {
            "gd": {"eta": 0.2},
            "sgd": {"eta": 0.001, "batch_size": 32},
            "adam": {"eta": 0.05, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
        },
        "suite": {
            "T": 200,
            "etas": [0.05, 0.1, 0.2, 0.4],
            "init_scale": 0.0,
            "power_iters": 30,
            "power_tol": 1e-10,
            "L_d": 1.0,
            "K_neighbors": 1,
            "injection": "residual",
            "workers": 1,
        },
        "seeds": {"base": 0, "count": 5},
        "demo": {
            "n": 64,
            "p": 1024,
            "spike_count": 4,
            "spike_value": 1.0,
            "weak_value": 1e-3,
            "sigma": 0.25,
            "trials": 200,
            "pilot_trials": 50,
            "m_probe": 512,
            "n_test": 1024,
            "refine_steps": 2,
        },
        "observability": {"type": "logging", "enabled": True, "project_name": "tcert"},
    }

    # Profile-specific overrides
    if profile == "smoke":
        config["data"].update({"n": 32, "p": 64, "m_probe": 32, "n_test": 64})
        config["optimizer"]["sgd"]["batch_size"] = 8
        config["suite"]["T"] = 20
        config["seeds"]["count"] = 2
        config["demo"].update(
            {"n": 8, "p": 64, "spike_count": 2, "trials": 20, "pilot_trials": 10, "m_probe": 32, "n_test": 64}
        )

    config["profile"] = profile
    return config


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=2)
    p: int = Field(..., ge=1)
    sigma: float = Field(..., ge=0.0, allow_inf_nan=False)
    spectrum: SpectrumKind
    alpha: float = Field(..., ge=0.0, allow_inf_nan=False)
    spike_count: int = Field(..., ge=0)
    spike_value: float = Field(..., gt=0.0)
    weak_value: float = Field(..., ge=0.0)
    normalize_rows: bool
    row_energy: float = Field(..., gt=0.0, allow_inf_nan=False)
    signal: SignalKind
    m_probe: int = Field(..., ge=1)
    n_test: int = Field(..., ge=1)
    jitter_scale: float = Field(..., ge=0.0)
    label_mode: LabelMode
    replacement: ReplacementKind


class GDSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eta: float = Field(..., gt=0.0, allow_inf_nan=False)


class SGDSection(GDSection):
    batch_size: int = Field(..., ge=1)


class AdamSection(GDSection):
    beta1: float = Field(..., ge=0.0, lt=1.0)
    beta2: float = Field(..., ge=0.0, lt=1.0)
    eps: float = Field(..., gt=0.0)


class OptimizerSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gd: GDSection
    sgd: SGDSection
    adam: AdamSection


class SuiteSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: int = Field(..., ge=1)
    etas: List[float] = Field(..., min_length=1)
    init_scale: float = Field(..., ge=0.0)
    power_iters: int = Field(..., ge=1)
    power_tol: float = Field(..., ge=0.0)
    L_d: float = Field(..., gt=0.0)
    K_neighbors: int = Field(..., ge=1)
    injection: InjectionMode
    workers: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_etas(self) -> "SuiteSection":
        if any(not eta > 0 for eta in self.etas):
            raise ValueError(f"etas must all be positive, got {self.etas}")
        return self


class SeedsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base: int = Field(..., ge=0, lt=2**64)
    count: int = Field(..., ge=1)


class DemoSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=2)
    p: int = Field(..., ge=2)
    spike_count: int = Field(..., ge=1)
    spike_value: float = Field(..., gt=0.0)
    weak_value: float = Field(..., ge=0.0)
    sigma: float = Field(..., ge=0.0)
    trials: int = Field(..., ge=1)
    pilot_trials: int = Field(..., ge=1)
    m_probe: int = Field(..., ge=1)
    n_test: int = Field(..., ge=1)
    refine_steps: int = Field(..., ge=0)
    risk_max: Optional[float] = None
    delta_min: Optional[float] = None


class ObservabilitySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: str = "logging"
    enabled: bool = True
    project_name: str = "tcert"


class SuiteConfig(BaseModel):
    """The fully resolved suite configuration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    profile: str
    data: DataSection
    optimizer: OptimizerSection
    suite: SuiteSection
    seeds: SeedsSection
    demo: DemoSection
    observability: ObservabilitySection

    @property
    def seed_list(self) -> Tuple[int, ...]:
        return tuple(self.seeds.base + k for k in range(self.seeds.count))

    def spectrum(self) -> SpectrumSpec:
        data = self.data
        return SpectrumSpec(
            kind=data.spectrum,
            p=data.p,
            alpha=data.alpha,
            spike_count=data.spike_count,
            spike_value=data.spike_value,
            weak_value=data.weak_value,
            variance_scale=data.row_energy / data.p if data.normalize_rows else 1.0,
        )

    def optimizer_spec(self, kind: OptimizerKind) -> OptimizerSpec:
        section = getattr(self.optimizer, kind.value)
        return OptimizerSpec(kind=kind, **section.model_dump())

    def optimizer_specs(self) -> Dict[OptimizerKind, OptimizerSpec]:
        return {kind: self.optimizer_spec(kind) for kind in OptimizerKind}

    def base_condition(self, label: str = "base") -> Condition:
        """GD condition carrying every data and suite setting; the builders vary one factor of it."""
        data, suite = self.data, self.suite
        return Condition(
            label=label,
            optimizer=self.optimizer_spec(OptimizerKind.GD),
            spectrum=self.spectrum(),
            signal=data.signal,
            T=suite.T,
            n=data.n,
            sigma=data.sigma,
            seeds=self.seed_list,
            m_probe=data.m_probe,
            n_test=data.n_test,
            init_scale=suite.init_scale,
            label_mode=data.label_mode,
            replacement=data.replacement,
            jitter_scale=data.jitter_scale,
            power_iters=suite.power_iters,
            power_tol=suite.power_tol,
            injection=suite.injection,
            L_d=suite.L_d,
            K_neighbors=suite.K_neighbors,
        )

    def demo_settings(self) -> DemoSettings:
        return DemoSettings(seed=self.seeds.base, jitter_scale=self.data.jitter_scale, **self.demo.model_dump())

    def resolved_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base; non-dict values replace."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


_SECTION = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-\" ]+?)\s*\]\s*(?:#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")


def locate_key(text: str, loc: Tuple[Any, ...]) -> Optional[int]:
    """1-based line of the key at loc (section path + key) in TOML text, if it can be found."""
    if not text or not loc:
        return None
    keys = [str(part) for part in loc if not isinstance(part, int)]
    section, key = ".".join(keys[:-1]), keys[-1]
    current = ""
    section_line = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION.match(line)
        if header:
            current = header.group(1).replace('"', "").replace(" ", "")
            if current == ".".join(keys):
                section_line = number
            continue
        match = _KEY.match(line)
        if match and match.group(1) == key and current == section:
            return number
    return section_line


def _fields_at(loc: Tuple[Any, ...]) -> List[str]:
    model = SuiteConfig
    for part in loc:
        field = model.model_fields.get(str(part))
        if field is None or not isinstance(field.annotation, type) or not issubclass(field.annotation, BaseModel):
            return []
        model = field.annotation
    return list(model.model_fields)


def _config_error(error: ValidationError, text: str) -> ConfigError:
    first = error.errors()[0]
    loc = tuple(first["loc"])
    name = ".".join(str(part) for part in loc) or "configuration"
    line = locate_key(text, loc)
    if first["type"] == "extra_forbidden":
        allowed = _fields_at(loc[:-1])
        suggestion = next(iter(difflib.get_close_matches(str(loc[-1]), allowed, n=1)), None)
        return ConfigError(f"unknown key {name!r}", line=line, suggestion=suggestion)
    if first["type"] == "missing":
        return ConfigError(f"missing key {name!r}", line=line)
    return ConfigError(f"invalid value for {name!r}: {first['msg']}", line=line)


def _env_int(environ: Mapping[str, str], name: str) -> Optional[int]:
    raw = environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}")


def load_suite_config(
    path: Optional[Path] = None,
    profile: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SuiteConfig:
    """
    Resolve the layered suite configuration.

    Args:
        path: TOML suite file; None uses the profile alone
        profile: Profile name; falls back to TCERT_PROFILE, then the file's profile key, then full
        environ: Environment, os.environ by default
        overrides: Nested dict applied last (CLI flags)

    Returns:
        The validated configuration

    Raises:
        ConfigError: On a missing or unparsable file, an unknown key or an invalid value
    """
    environ = os.environ if environ is None else environ
    text = ""
    from_file: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            from_file = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"cannot parse {path}: {e}", line=int(match.group(1)) if match else None) from e

    chosen = profile or environ.get("TCERT_PROFILE") or from_file.pop("profile", None) or "full"
    from_file.pop("profile", None)
    merged = deep_merge(get_config(chosen), from_file)

    seed = _env_int(environ, "TCERT_SEED")
    if seed is not None:
        merged["seeds"]["base"] = seed
    workers = _env_int(environ, "TCERT_WORKERS")
    if workers is not None:
        merged["suite"]["workers"] = workers
    if overrides:
        merged = deep_merge(merged, overrides)

    try:
        config = SuiteConfig(**merged)
    except ValidationError as e:
        raise _config_error(e, text) from e
    if config.seeds.base + config.seeds.count > 2**64:
        raise ConfigError("seeds.base + seeds.count exceeds the 64-bit seed range", line=locate_key(text, ("seeds", "base")))
    try:
        config.base_condition()
        config.demo_settings()
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"inconsistent configuration: {first['msg']}") from e
    logger.debug(f"Resolved configuration profile={chosen} seeds={config.seed_list}")
    return config
