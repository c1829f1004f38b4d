import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from crimesim.env import load_city
from crimesim.synth import synthetic_city


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def mini_env():
    return load_city(FIXTURES / "mini_city" / "features.csv",
                     FIXTURES / "mini_city" / "boundaries.geojson",
                     name="miniville")


@pytest.fixture(scope="session")
def small_env():
    # 25-cell lattice without boundaries: nearest-centroid paths
    return synthetic_city(25, seed=9)


@pytest.fixture(scope="session")
def medium_env():
    return synthetic_city(100, seed=3)
