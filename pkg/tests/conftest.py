import numpy as np
import pytest

from topocharge.geometry import validate_config


def random_config(rng, n_max=8, max_deg=3, dim=2, scale=5.0):
    """Zero-sum config with 2..n_max charges and |d_i| <= max_deg."""
    while True:
        n = int(rng.integers(2, n_max + 1))
        degs = rng.integers(1, max_deg + 1, size=n) * rng.choice([-1, 1], size=n)
        degs[-1] = -degs[:-1].sum()
        if np.all(degs != 0) and np.all(np.abs(degs) <= max_deg):
            pts = rng.uniform(-scale, scale, size=(n, dim))
            return validate_config([(tuple(p), int(d)) for p, d in zip(pts, degs)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def circle(k, count=512):
    t = 2 * np.pi * np.arange(count) / count
    return np.stack([np.cos(k * t), np.sin(k * t)], axis=1)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
