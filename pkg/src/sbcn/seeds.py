"""Deterministic sub-seed derivation for composite jobs.

Every randomized component takes an explicit seed.  Jobs made of many
independent units (grid cells, repetitions, bootstrap replicates) derive one
sub-seed per unit by hashing the master seed together with the unit's
coordinates, so results never depend on scheduling or worker count.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Hash the parts into a 64-bit seed, stable across runs and platforms."""
    text = "\x1f".join(str(part) for part in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
