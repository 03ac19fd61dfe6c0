from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class Subcommand(str, Enum):
    GEN: str = "gen"
    RUN: str = "run"
    SWEEP: str = "sweep"
    COMPARE_OPTIMIZERS: str = "compare-optimizers"
    ABLATE_NEIGHBOR: str = "ablate-neighbor"
    ABLATE_LABELS: str = "ablate-labels"
    NECESSITY_DEMO: str = "necessity-demo"
    REPORT: str = "report"


class CliCommand(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    subcommand: Subcommand
    output_dir: Path
    config_path: Optional[Path] = None
    seeds: Optional[int] = Field(None, ge=1)
    workers: Optional[int] = Field(None, ge=1)
    trials: Optional[int] = Field(None, ge=1)
    reference_dir: Optional[Path] = None
    profile: Optional[str] = None
    force: bool = False
    debug: bool = False
