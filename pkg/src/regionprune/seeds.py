"""Deterministic RNG derivation from structured keys.

Every generator in the project is derived from a tuple of ints/strings so
call order never affects results and reruns are bit-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_material(*parts: int | str) -> list[int]:
    """Stable 32-bit words from a mixed int/string key tuple."""
    words: list[int] = []
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {part!r}")
        if isinstance(part, int):
            words.append(part & 0xFFFFFFFF)
            words.append((part >> 32) & 0xFFFFFFFF)
        else:
            digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
            words.append(int.from_bytes(digest[:4], "little"))
            words.append(int.from_bytes(digest[4:], "little"))
    return words


def derive_rng(*parts: int | str) -> np.random.Generator:
    """Generator fully determined by the key tuple."""
    return np.random.default_rng(np.random.SeedSequence(seed_material(*parts)))
