import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def report_line(capsys):
    """Print a line straight to the terminal, bypassing output capture."""
    def emit(text):
        with capsys.disabled():
            print(text)
    return emit
