"""Shared fixtures: scenarios and a seed-0 generated book dataset.

Dataset generation and cross-validation are the slowest pieces of the
suite, so anything reusable is session-scoped.
"""

from __future__ import annotations

import pytest

from skillplay.agent import create_haptic_database
from skillplay.seeding import derive_rng
from skillplay.world import load_scenario


@pytest.fixture(scope="session")
def book_scenario():
    return load_scenario("book")


@pytest.fixture(scope="session")
def box_scenario():
    return load_scenario("box")


@pytest.fixture(scope="session")
def book_dataset(book_scenario):
    """Unsupervised book database, 50 samples per state, master seed 0."""
    rng = derive_rng(0, "db|book")
    return create_haptic_database(book_scenario, list(book_scenario.sensing), 50, False, rng)
