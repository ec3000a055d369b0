import os

import hypothesis
import pytest

from qopt_bench.problems import generate_problem

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None
)
hypothesis.settings.register_profile(
    "fast", max_examples=15, deadline=None
)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def graph3():
    """Frozen 3-vertex benchmark instance (weighted triangle)."""
    return generate_problem(3, seed=32, density=1.0, weight_range=(10, 100))


@pytest.fixture(scope="session")
def graph5():
    """Frozen 5-vertex benchmark instance."""
    return generate_problem(5, seed=32, density=0.7, weight_range=(10, 100))
