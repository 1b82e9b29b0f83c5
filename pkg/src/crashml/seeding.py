"""Sub-seed derivation.

Every random draw in the package comes from a generator built by
:func:`substream`.  A stream is identified by the root seed plus a path of
keys; string keys are folded to integers with CRC-32 so the mapping is
stable across processes and platforms.  The path becomes the ``spawn_key``
of a :class:`numpy.random.SeedSequence`, and the generator is Philox
(counter based), so ``substream(s, "bag", 7)`` is the same stream no matter
which thread asks for it or in what order.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"stream keys must be non-negative, got {part}")
    return int(part)


def seed_sequence(seed: int, *path: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(_key(p) for p in path))


def substream(seed: int, *path: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *path)))


def subseed(seed: int, *path: int | str) -> int:
    """A 64-bit integer seed for the stream at ``path``."""
    state = seed_sequence(seed, *path).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def resolve_seed(seed: int | None, env_var: str = "CRASHML_SEED", default: int = 0) -> int:
    """Explicit seed, else the environment fallback, else ``default``."""
    if seed is not None:
        return int(seed) & MASK64
    raw = os.environ.get(env_var)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw) & MASK64
    except ValueError as exc:
        raise ValueError(f"{env_var} must be an integer, got {raw!r}") from exc
