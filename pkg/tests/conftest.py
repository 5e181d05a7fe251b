import numpy as np
import pytest

from bpl.forward import Scene, solve_modes

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, ok, detail):
        _CRITERIA[number] = (title, ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def disk():
    return solve_modes(Scene(2, 2.0, 1.0, "dirichlet_pair", (1.0, 0.0)))


@pytest.fixture(scope="session")
def disk_slow():
    return solve_modes(Scene(2, 0.5, 1.0, "dirichlet_pair", (1.0, 0.0)))


@pytest.fixture(scope="session")
def sphere():
    return solve_modes(Scene(3, 2.0, 1.0, "dirichlet_pair", (0.0, 0.0, 1.0)))


@pytest.fixture(scope="session")
def sphere_slow():
    return solve_modes(Scene(3, 0.5, 1.0, "dirichlet_pair", (0.0, 0.0, 1.0)))


def at_angle(m, deg):
    th = np.radians(deg)
    if m == 2:
        return np.array([np.cos(th), np.sin(th)])
    return np.array([np.sin(th), 0.0, np.cos(th)])


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """One end-to-end run of the reference pipeline config: (exit code, seconds, out dir)."""
    import time
    from pathlib import Path

    from bpl.harness import ExperimentConfig, run

    cfg = ExperimentConfig.load(Path(__file__).parent.parent / "configs" / "pipeline_disk.json")
    out = tmp_path_factory.mktemp("pipeline")
    start = time.perf_counter()
    code = run("pipeline", cfg, out)
    return code, time.perf_counter() - start, out
