import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cio.params import VehicleParams

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return VehicleParams.load()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_quaternion(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


# acceptance criteria report: one line per criterion at the end of the session
ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
