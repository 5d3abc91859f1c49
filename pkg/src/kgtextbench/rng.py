"""Seedable, splittable random streams.

Every stochastic step derives its own child stream from the run seed plus a
path of labels (task name, instance index, phase, attempt counter).  Child
seeds are SHA-256 digests of the path, so any single instance can be
regenerated in isolation and parallel workers cannot perturb sibling
streams.  Streams are CPython ``random.Random`` (Mersenne Twister), which is
stable across platforms and interpreter versions.
"""

from __future__ import annotations

import hashlib
import random

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *path: object) -> int:
    """Derive a 64-bit child seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode("utf-8"))
    for part in path:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") & _MASK64


def child_rng(root: int, *path: object) -> random.Random:
    """Return the random stream for one labelled child of ``root``."""
    return random.Random(derive_seed(root, *path))
