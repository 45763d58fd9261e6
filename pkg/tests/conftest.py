import json
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def configs_dir() -> Path:
    return REPO / "configs"


@pytest.fixture(scope="session")
def load_config(configs_dir):
    def _load(name: str) -> dict:
        return json.loads((configs_dir / name).read_text())

    return _load
