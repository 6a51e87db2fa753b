"""Seed streams: one top-level seed, per-purpose streams by hashing."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, purpose: str) -> int:
    """Stable 63-bit stream seed for (master, purpose).

    Adding a new purpose tag never perturbs existing streams.
    """
    digest = hashlib.sha256(f"{master}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)
