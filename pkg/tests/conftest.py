import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# lines appended by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def disk_image(n=224, r=50.0, inside=(120, 80, 50), outside=(220, 180, 160), center=None):
    cy, cx = ((n - 1) / 2, (n - 1) / 2) if center is None else center
    yy, xx = np.indices((n, n))
    img = np.empty((n, n, 3), np.uint8)
    img[:] = outside
    mask = np.hypot(xx - cx, yy - cy) <= r
    img[mask] = inside
    return img, mask


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
