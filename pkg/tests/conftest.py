import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mdlevents.model import PowerSeries

# every property below runs at least 100 generated cases
settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def series(values, reactive=None, start_epoch=0.0):
    return PowerSeries(start_epoch, np.asarray(values, dtype=float),
                       None if reactive is None else np.asarray(reactive, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
