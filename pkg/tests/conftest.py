"""Shared markets and helpers for the test suite."""

import pytest

from core import fixtures
from core.valuations import generate_random_gs


@pytest.fixture
def market_a():
    return fixtures.instance_a()


@pytest.fixture
def market_b():
    return fixtures.instance_b()


@pytest.fixture
def market_c():
    return fixtures.instance_c()


@pytest.fixture
def market_d():
    return fixtures.instance_d()


@pytest.fixture
def complements_market():
    return fixtures.complements_market()


@pytest.fixture
def gs_corpus():
    """Small seeded gross-substitutes markets mixing every family."""
    families = ("additive", "unit_demand", "matroid_rank_mix")
    return [
        generate_random_gs(families[seed % 3], 2 + seed % 3, 1 + seed % 3, 9, seed)
        for seed in range(12)
    ]


@pytest.fixture(autouse=True)
def _isolated_budget(monkeypatch):
    monkeypatch.delenv("WALRUS_BUDGET", raising=False)
