"""Deterministic seed derivation.

All randomness in the package flows from a single master seed through named
derivation: child seed = SHA-256(master, label, label, ...) truncated to 64
bits. Deterministic across platforms and process boundaries.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels) -> int:
    """Derive a child seed from a master seed and a sequence of labels."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "big")


def derived_rng(master_seed: int, *labels) -> np.random.Generator:
    """A PCG64 generator seeded by named derivation from the master seed."""
    return np.random.default_rng(derive_seed(master_seed, *labels))
