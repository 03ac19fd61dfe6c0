"""
Binary dataset container.

Layout: a magic line, one line of JSON header, then little-endian float64 blocks
X (row-major n*p), y (n), w_star (p) and noise (n).
"""

import json
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from TrajCert.application.models.domain import Dataset, frozen_array
from TrajCert.application.models.errors import InvalidInputError
from TrajCert.application.models.model_configs import LabelsMode, SignalKind, SpectrumSpec
from TrajCert.infrastructure.numerics.streams import SeededStream

# Configure logging
logger = logging.getLogger(__name__)

MAGIC = b"TCERT-DS v1\n"
DTYPE = "<f8"


class DatasetHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=1)
    p: int = Field(..., ge=1)
    sigma: float = Field(..., ge=0.0)
    spectrum: SpectrumSpec
    signal: SignalKind
    labels: LabelsMode
    seed: int
    stream_id: int
    path: Tuple[int, ...] = ()
    dtype: str = DTYPE
    byte_order: str = "little"


def save_dataset(dataset: Dataset, path: Path) -> None:
    """Write a dataset container to path."""
    header = DatasetHeader(
        n=dataset.n,
        p=dataset.p,
        sigma=dataset.sigma,
        spectrum=dataset.spectrum,
        signal=dataset.signal,
        labels=dataset.labels,
        seed=dataset.source.seed,
        stream_id=dataset.source.stream_id,
        path=dataset.source.path,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(header.model_dump(mode="json"), sort_keys=True).encode("utf-8") + b"\n")
        for block in (dataset.X, dataset.y, dataset.w_star, dataset.noise):
            f.write(np.ascontiguousarray(block, dtype=DTYPE).tobytes())
    logger.info(f"Saved dataset n={dataset.n} p={dataset.p} to {path}")


def load_dataset(path: Path) -> Dataset:
    """
    Read a dataset container.

    Raises:
        InvalidInputError: On a wrong magic line, an invalid header or a truncated payload
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InvalidInputError(f"cannot read dataset {path}: {e}") from e
    if not raw.startswith(MAGIC):
        raise InvalidInputError(f"{path} is not a TCERT-DS v1 container")
    end = raw.find(b"\n", len(MAGIC))
    if end < 0:
        raise InvalidInputError(f"{path}: header line is truncated")
    try:
        header = DatasetHeader(**json.loads(raw[len(MAGIC) : end].decode("utf-8")))
    except (ValueError, TypeError, ValidationError) as e:
        raise InvalidInputError(f"{path}: invalid header: {e}") from e
    if header.dtype != DTYPE or header.byte_order != "little":
        raise InvalidInputError(f"{path}: unsupported payload encoding {header.dtype}/{header.byte_order}")

    n, p = header.n, header.p
    sizes = (n * p, n, p, n)
    payload = raw[end + 1 :]
    expected = 8 * sum(sizes)
    if len(payload) != expected:
        raise InvalidInputError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=DTYPE)
    offsets = np.cumsum((0,) + sizes)
    X, y, w_star, noise = (values[offsets[i] : offsets[i + 1]] for i in range(4))
    return Dataset(
        X=frozen_array(X.reshape(n, p)),
        y=frozen_array(y),
        w_star=frozen_array(w_star),
        noise=frozen_array(noise),
        sigma=header.sigma,
        spectrum=header.spectrum,
        source=SeededStream(header.seed, header.stream_id, header.path),
        signal=header.signal,
        labels=header.labels,
    )
