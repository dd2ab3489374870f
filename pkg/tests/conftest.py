import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; ``ok=None`` marks a reported figure with no gate."""

    def record(tag: str, ok: bool | None, detail: str) -> bool | None:
        status = "NOTE" if ok is None else "PASS" if ok else "FAIL"
        line = f"{tag}: {status} | {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
