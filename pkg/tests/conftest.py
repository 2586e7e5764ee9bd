import os
from pathlib import Path

import numpy as np
import pytest

from blockgcl.graph import GraphDataset, generate_sbm

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: list[tuple[int, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, title = marker
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
    _criteria.append((number, title, status))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    # parametrized criteria collapse to one line: any FAIL wins, then SKIP
    merged: dict[int, tuple[str, str]] = {}
    rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
    for number, title, status in _criteria:
        prev = merged.get(number)
        if prev is None or rank[status] > rank[prev[1]]:
            merged[number] = (title, status)
    for number in sorted(merged):
        title, status = merged[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")


def central_difference(f, w: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d f / d w by central differences, perturbing ``w`` in place and restoring it."""
    grad = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        orig = w[idx]
        w[idx] = orig + step
        fp = f()
        w[idx] = orig - step
        fm = f()
        w[idx] = orig
        grad[idx] = (fp - fm) / (2 * step)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    return float(np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), floor))


@pytest.fixture
def path3() -> GraphDataset:
    return GraphDataset(
        features=np.eye(3),
        labels=np.array([0, 0, 0]),
        edges=np.array([[0, 1], [1, 2]]),
        split=np.array(["train", "val", "test"]),
        name="path3",
    )


@pytest.fixture
def small_sbm() -> GraphDataset:
    return generate_sbm(2, 50, 0.5, 0.05, 16, seed=7)


@pytest.fixture
def sbm_fixture_dir() -> Path:
    return FIXTURES / "sbm_small"


def benchmark_dir(name: str) -> Path | None:
    """Locate a benchmark dataset under ``$BLOCKGCL_DATA_DIR`` (case-insensitive)."""
    root = os.environ.get("BLOCKGCL_DATA_DIR")
    if not root or not Path(root).is_dir():
        return None
    for child in Path(root).iterdir():
        if child.is_dir() and child.name.lower() == name.lower():
            return child
    return None
