import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sixvertex import DEFAULT_PARAMS

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# (criterion number, PASS/FAIL line) collected by the acceptance tests
ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}"
        if detail:
            line += f" | {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(line)


def empirical_law(outcomes) -> dict:
    """Counts of hashable outcomes."""
    out: dict = {}
    for o in outcomes:
        out[o] = out.get(o, 0) + 1
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
