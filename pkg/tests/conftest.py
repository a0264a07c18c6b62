import numpy as np
import pytest

from zslenergy.models.gbrt import Hyperparams
from zslenergy.synthgen import default_profiles, generate
from zslenergy.tabular import CATEGORICAL, Dataset, Feature, FeatureSchema

# One cheap configuration keeps model-fitting tests fast.
TINY_GRID = (Hyperparams(max_depth=3, learning_rate=0.3, n_rounds=20),)


@pytest.fixture(scope="session")
def small_default_data():
    return generate(default_profiles(), 150, seed=5)


def toy_schema() -> FeatureSchema:
    return FeatureSchema(
        features=(Feature("a"), Feature("b"), Feature("c", CATEGORICAL, ("x", "y", "z"))),
        target_metrics=("T1", "T2"),
        classes=("P", "Q", "R"),
    )


def toy_dataset(n_per_class: int = 20, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    labels = np.repeat(["P", "Q", "R"], n_per_class)
    shift = np.repeat([0.0, 2.0, 4.0], n_per_class)
    a = rng.normal(size=len(labels)) + shift
    b = rng.normal(size=len(labels))
    c = rng.choice(["x", "y", "z"], size=len(labels))
    return Dataset(
        toy_schema(),
        {"a": a, "b": b, "c": c},
        labels,
        {"T1": 3 * a + b + rng.normal(size=len(a)), "T2": 10 + a * b},
    )


@pytest.fixture
def toy():
    return toy_dataset()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
