import numpy as np
import pytest

from symeye.irismatch import Circle
from symeye.synthbench import gen_synthetic_eye


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_eye():
    """96x96 eye centred at (48, 48): pupil r=10, sclera r=28."""
    return gen_synthetic_eye((96, 96), Circle(48, 48, 10), Circle(48, 48, 28), edge_T=6, texture_seed=1)


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
