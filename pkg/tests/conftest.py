from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def configs_dir():
    return ROOT / "configs"


@pytest.fixture
def data_dir():
    return Path(__file__).resolve().parent / "data"
