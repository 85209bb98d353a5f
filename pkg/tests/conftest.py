from pathlib import Path

import pytest

import adaptbench

SYNTHETIC_DIR = Path(adaptbench.__file__).parent / "data" / "synthetic"
GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def synth_dir() -> Path:
    return SYNTHETIC_DIR


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR
