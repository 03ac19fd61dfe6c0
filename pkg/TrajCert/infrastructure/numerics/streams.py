from dataclasses import dataclass, field
from enum import IntEnum
from typing import Tuple

import numpy as np

from TrajCert.application.models.errors import InvalidInputError

_U64 = 2**64


class StreamId(IntEnum):
    """Named randomness sources; one coupled run draws each from its own stream."""

    INIT = 0
    DATA = 1
    MINIBATCH = 2
    NEIGHBOR = 3
    PROBE = 4
    PERMUTATION = 5
    POWER = 6
    DEMO = 7


@dataclass(frozen=True)
class SeededStream:
    """
    A reproducible randomness stream keyed by (seed, stream_id, path).

    The generator is counter-based (Philox) and seeded through a SeedSequence whose
    spawn key is the stream id plus the derivation path, so distinct ids never share
    a sequence and no mutable state is shared between workers.
    """

    seed: int
    stream_id: int
    path: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        for name, value in (("seed", self.seed), ("stream_id", self.stream_id), *(("path", k) for k in self.path)):
            if not 0 <= int(value) < _U64:
                raise InvalidInputError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def derive(self, *keys: int) -> "SeededStream":
        """Return a child stream; equal keys give equal children."""
        return SeededStream(self.seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def with_id(self, stream_id: int) -> "SeededStream":
        """Return the sibling stream with the same seed and path under another id."""
        return SeededStream(self.seed, int(stream_id), self.path)

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        sequence = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), *self.path))
        return np.random.Generator(np.random.Philox(sequence))
