"""Seed splitting.

A sub-seed is the first 8 bytes of ``sha256("<base>:<tag>:<tag>...")`` read
big-endian, shifted right by one bit so it fits a signed 64-bit integer.
Tags are joined with ``:`` after ``str()``, so any language can rebuild the
same seeds even though the RNG streams fed by them differ.
"""

from __future__ import annotations

import hashlib


def derive_seed(base: int, *tags) -> int:
    text = ":".join([str(base), *map(str, tags)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1
