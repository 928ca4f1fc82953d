import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def descriptions_dir():
    return FIXTURES / "descriptions"


@pytest.fixture(scope="session")
def vectors_path():
    return FIXTURES / "vectors" / "wordvecs_50d.txt"
