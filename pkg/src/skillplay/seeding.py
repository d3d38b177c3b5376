"""Deterministic seed derivation.

All randomness in a run flows from a single master seed.  Sub-streams are
derived by hashing (seed, purpose) with SHA-256, so adding a new consumer
never shifts the draws of an existing one.  Population runs give agent i the
generator ``np.random.default_rng([master_seed, i])``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, purpose: str) -> int:
    """Stable 64-bit sub-seed for a named purpose."""
    digest = hashlib.sha256(f"{master_seed}|{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(master_seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, purpose))


def agent_rng(master_seed: int, agent_index: int) -> np.random.Generator:
    """Generator owned by one agent of a population run.

    The (master seed, agent index) pair is the documented splitting rule:
    agent streams are independent of chunking and of how many agents run.
    """
    if master_seed < 0 or agent_index < 0:
        raise ValueError("seed and agent index must be non-negative")
    return np.random.default_rng([master_seed, agent_index])
