import numpy as np
import pytest

from ubknn.dataset import Dataset


def random_dataset(rng, n, n_classes=2, d=2, weights=None):
    """Random features with every class present at least once."""
    if weights is None:
        y = rng.integers(1, n_classes + 1, n)
    else:
        y = rng.choice(np.arange(1, n_classes + 1), size=n, p=weights)
    y[:n_classes] = np.arange(1, n_classes + 1)
    return Dataset(rng.random((n, d)), y, n_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
