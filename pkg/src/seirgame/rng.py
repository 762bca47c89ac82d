"""Reproducible random streams keyed by ``(seed, stream id)``.

Each stream is a Philox counter-based generator seeded from a
``SeedSequence`` whose spawn key is the stream id, so a stream's output does
not depend on which other streams were drawn before it or on which worker
draws it.
"""

from __future__ import annotations

import zlib
from typing import Sequence

import numpy as np

PURPOSES = {"train": 0, "validation": 1, "simulate": 2, "evaluate": 3,
            "probe": 4, "init": 5, "x0": 6, "verify": 7}


def _key_part(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream id components must be non-negative")
        return int(part)
    if isinstance(part, str):
        return PURPOSES.get(part, zlib.crc32(part.encode()) + 1000)
    raise TypeError(f"unsupported stream id component {part!r}")


def stream_key(stream: Sequence) -> tuple[int, ...]:
    if isinstance(stream, (int, str)):
        stream = (stream,)
    return tuple(_key_part(p) for p in stream)


def generator(seed: int, stream: Sequence = ()) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=stream_key(stream))
    return np.random.Generator(np.random.Philox(ss))


def brownian_increments(seed: int, stream: Sequence, batch: int, n_steps: int,
                        dim: int, dt: float = 1.0) -> np.ndarray:
    """I.i.d. ``N(0, dt)`` increments of shape ``(batch, n_steps, dim)``."""
    rng = generator(seed, stream)
    return rng.standard_normal((batch, n_steps, dim)) * np.sqrt(dt)
