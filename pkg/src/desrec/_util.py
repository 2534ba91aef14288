"""Shared helpers: stable seed derivation and small numeric utilities."""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Derive a stable 64-bit seed from arbitrary parts.

    Unlike ``hash()``, the result is identical across processes and runs,
    which is what makes worker count irrelevant to the outputs.
    """
    h = hashlib.sha256()
    for p in parts:
        h.update(_encode(p))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def _encode(p) -> bytes:
    if isinstance(p, bytes):
        return b"b:" + p
    if isinstance(p, bool):
        return b"o:" + str(p).encode()
    if isinstance(p, (int, np.integer)):
        return b"i:" + str(int(p)).encode()
    if isinstance(p, float):
        return b"f:" + repr(p).encode()
    if isinstance(p, str):
        return b"s:" + p.encode()
    name = getattr(p, "name", None)
    if name is not None:  # enum members hash by name
        return b"e:" + str(name).encode()
    raise TypeError(f"cannot derive seed from {type(p)!r}")


def rng_from(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def population_sd(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))
