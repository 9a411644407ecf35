import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from cyclenas.space import parse_space
from goldens import TINY16_DOCUMENT

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "cyclenas" / "data"


@pytest.fixture(scope="session")
def tiny16():
    return parse_space(json.dumps(TINY16_DOCUMENT))


@pytest.fixture(scope="session")
def ssd_tiny():
    return parse_space((DATA_DIR / "ssd_tiny.json").read_text())


@pytest.fixture(scope="session")
def ssd_small():
    return parse_space((DATA_DIR / "ssd_small.json").read_text())


@pytest.fixture(scope="session")
def ssd_tiny_path():
    return DATA_DIR / "ssd_tiny.json"
