import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


# one line per acceptance criterion, printed after the test session
CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    def record(label: str, ok: bool, detail: str) -> bool:
        CRITERIA.append(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(CRITERIA[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
