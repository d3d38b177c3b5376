"""Seed derivation: stability, independence, and the splitting rule."""

from __future__ import annotations

import numpy as np
import pytest

from skillplay.seeding import agent_rng, derive_rng, derive_seed


def test_derive_seed_deterministic():
    assert derive_seed(42, "gen-data") == derive_seed(42, "gen-data")


def test_derive_seed_frozen_values():
    # Guard against accidental changes to the hashing scheme: these values
    # pin the current (seed, purpose) -> sub-seed mapping.
    assert derive_seed(0, "x") == 8009969373994375886
    assert derive_seed(7, "gen-data|book") == 7486851240461130419


def test_derive_seed_distinguishes_purpose_and_seed():
    seen = {
        derive_seed(0, "a"),
        derive_seed(0, "b"),
        derive_seed(1, "a"),
        derive_seed(1, "b"),
    }
    assert len(seen) == 4


def test_derive_seed_no_separator_collision():
    # The purpose string is joined with '|'; different (seed, purpose)
    # splits of the same text must not collide.
    assert derive_seed(1, "2|x") != derive_seed(12, "x")


def test_derive_rng_reproducible_stream():
    a = derive_rng(3, "play").random(5)
    b = derive_rng(3, "play").random(5)
    assert np.array_equal(a, b)
    assert derive_rng(3, "play").random() == pytest.approx(0.7036686779523498)


def test_agent_rng_splitting_rule():
    # Agent streams depend only on (master seed, index), not on how many
    # other agents exist or in which order they run.
    direct = agent_rng(11, 4).random(3)
    assert np.array_equal(direct, np.random.default_rng([11, 4]).random(3))
    assert agent_rng(11, 4).random() == pytest.approx(0.14803097107685836)


def test_agent_rng_streams_differ():
    draws = {agent_rng(0, i).random() for i in range(20)}
    assert len(draws) == 20


@pytest.mark.parametrize("seed,index", [(-1, 0), (0, -1)])
def test_agent_rng_rejects_negative(seed, index):
    with pytest.raises(ValueError, match="non-negative"):
        agent_rng(seed, index)
