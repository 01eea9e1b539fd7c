"""Seedable, splittable random streams with a pinned algorithm.

Stream derivation: the string labels are joined with an ASCII unit
separator, hashed with SHA-256, and the first 8 digest bytes
(little-endian) seed a PCG64 generator.  Both SHA-256 and PCG64 are
stable across platforms and numpy versions, so any (seed, labels)
combination reproduces the same draws everywhere.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = "\x1f"


def derive_seed(*parts: object) -> int:
    """Map an ordered label tuple to a 64-bit seed."""
    payload = _SEP.join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def spawn(*parts: object) -> np.random.Generator:
    """Independent generator for the given label tuple."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
