"""Seeded, splittable random streams.

All randomness flows from one experiment seed through the counter-based
Philox4x64-10 generator.  Stream derivation rule (documented so that any
implementation of Philox can reproduce runs bit-for-bit):

    stream(seed, k) = Philox4x64-10 with key = (seed mod 2^64, k mod 2^64)
                      and counter starting at 0,

where ``k`` is the replicate index.  Replicate streams are therefore pure
functions of ``(seed, k)`` and independent of execution order or worker
count.  Downstream draws consume only ``random()`` uniforms in a fixed
order; every distribution sampler is an explicit transform of those
uniforms (inverse CDF or categorical inversion), never an opaque
rejection loop.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["replicate_stream"]


def replicate_stream(seed: int, replicate: int = 0) -> np.random.Generator:
    """Return the Philox stream for one replicate of an experiment."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise InvalidArgumentError(f"seed must be an integer, got {seed!r}")
    if not isinstance(replicate, (int, np.integer)) or replicate < 0:
        raise InvalidArgumentError(f"replicate index must be a nonnegative integer, got {replicate!r}")
    key = np.array([np.uint64(seed % 2**64), np.uint64(replicate % 2**64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
