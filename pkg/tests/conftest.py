from __future__ import annotations

import pytest

from services import (BraidService, ConnectionService, GarnierService,
                      LinalgService, MonodromyService)


@pytest.fixture
def linalg() -> LinalgService:
    return LinalgService(seed=0)


@pytest.fixture
def braid(linalg) -> BraidService:
    return BraidService(linalg, threads=2)


@pytest.fixture
def connections(linalg) -> ConnectionService:
    return ConnectionService(linalg)


@pytest.fixture
def garnier() -> GarnierService:
    return GarnierService(threads=2)


@pytest.fixture
def monodromy() -> MonodromyService:
    return MonodromyService(threads=2)
