import numpy as np
import pytest

from uqme.models import BathSpec, build_two_level, build_v_model


@pytest.fixture(scope="session")
def two_level():
    """Two-level model at Delta=0.001, T=1, a=0.02 (gamma = 0.02)."""
    return build_two_level(0.001, BathSpec(coupling_a=0.02, temperature=1.0))


@pytest.fixture(scope="session")
def v_model():
    """V model at nu=1, Delta=0.001, T=1, a=0.02."""
    return build_v_model(1.0, 0.001, BathSpec(coupling_a=0.02, temperature=1.0))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run."""

    def report(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
