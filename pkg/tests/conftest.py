import re

import numpy as np
import pytest
from hypothesis import settings

from qvolterra.model import build_bilinear, kerr_cavity, linear_component, cavity, optomech

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

KERR = dict(omega_a=1.0, chi=0.01, gamma=0.2)
OPTO = dict(omega_a=1.0, omega_b=0.01, g=1e-4, gamma_a=0.2, gamma_b=1e-4)


@pytest.fixture(scope="session")
def kerr_sys():
    return build_bilinear(kerr_cavity(**KERR))


@pytest.fixture(scope="session")
def kerr_linear_sys():
    return build_bilinear(kerr_cavity(1.0, 0.0, 0.2))


@pytest.fixture(scope="session")
def cavity_sys():
    return linear_component(cavity(1.0, 0.2))


@pytest.fixture(scope="session")
def opto_sys():
    return build_bilinear(optomech(**OPTO))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion

_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes: dict = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance" not in report.nodeid:
        return
    n = int(m.group(1))
    ok = _outcomes.get(n, True)
    if report.when == "call":
        ok = ok and report.passed
    elif report.failed:
        ok = False
    _outcomes[n] = ok


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if _outcomes[n] else 'FAIL'}")
