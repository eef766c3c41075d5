import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entroflux import _accel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=1000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (ok, detail); printed in the terminal summary
ACCEPTANCE = {}


def report(number, title, ok, detail, merge=False):
    """Record a criterion outcome; ``merge`` folds parametrized parts together."""
    if merge and number in ACCEPTANCE:
        _, prev_ok, prev_detail = ACCEPTANCE[number]
        ACCEPTANCE[number] = (title, prev_ok and bool(ok), prev_detail + "; " + detail)
    else:
        ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} -- {detail}")


BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


def simplex_ic(x):
    return np.array([0.1 + 0.5 * (x < 0.5), 0.2 + 0.1 * np.cos(np.pi * x)])


def orthant_ic(x):
    return np.array([1.0 + 0.5 * np.cos(np.pi * x), 1.0 - 0.5 * np.cos(np.pi * x)])


@pytest.fixture
def cli_cmd():
    return [sys.executable, "-m", "entroflux.cli"]


@pytest.fixture
def write_config(tmp_path):
    import json

    def _write(data, name="config.json"):
        p = Path(tmp_path) / name
        p.write_text(json.dumps(data))
        return p

    return _write
