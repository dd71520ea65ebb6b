import numpy as np
import pytest

from ledgerlens import _accel
from ledgerlens.synth.cards import DEFAULT_DESIGN, render_template


@pytest.fixture(scope="session")
def template():
    return render_template(DEFAULT_DESIGN)


@pytest.fixture(scope="session")
def layout():
    return DEFAULT_DESIGN.layout()


@pytest.fixture(scope="session")
def aligner(template):
    from ledgerlens.align import Aligner

    return Aligner(template)


@pytest.fixture(params=[True, False], ids=["numba", "numpy"])
def kernel_path(request):
    """Run a test once through each kernel implementation."""
    with _accel.use_jit(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
