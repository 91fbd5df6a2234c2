import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_clipping():
    # large-signal drives clip the VCSEL briefly by design; the warning is noise here
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="VCSEL intensity clipped", category=RuntimeWarning)
        yield


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; returns a reporter."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def report(number: int, checks: list[tuple[str, bool]]):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{'ok' if passed else 'MISS'} {text}" for text, passed in checks)
        line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
