import sys
from pathlib import Path

import pytest

# Add backend to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.services import catalog
from app.services.scenarios import build_scenario


@pytest.fixture(scope="session")
def torus_pair():
    return build_scenario("flat_torus_pair", {"a": 0.3}, validate=False)


@pytest.fixture(scope="session")
def hopf():
    return build_scenario("hopf", {"rotation": 0.05}, validate=False)


@pytest.fixture(scope="session")
def torus3():
    return build_scenario("torus3_orthogonal", validate=False)


@pytest.fixture(scope="session")
def unit_sphere():
    return catalog.round_sphere(1.0)


@pytest.fixture(scope="session")
def plane():
    return catalog.flat_plane()
