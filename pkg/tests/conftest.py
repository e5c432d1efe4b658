"""Shared pytest setup: put src/ on the path the way run.py does."""
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

RUN_BENCHMARKS = os.environ.get('FKS_RUN_BENCHMARKS', 'False').lower() == 'true'


def pytest_collection_modifyitems(config, items):
    if RUN_BENCHMARKS:
        return
    skip = pytest.mark.skip(reason="set FKS_RUN_BENCHMARKS=true to run timing benchmarks")
    for item in items:
        if 'benchmark' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(1234)
