import sys

import mpmath
import pytest

from conflab.appendix_a import SpectrumTarget, build_appendix_a
from conflab.appendix_b import build_appendix_b
from conflab.dynsys import Rotation

# Fractional part of the golden ratio, computed independently of the
# continued-fraction code.
with mpmath.workdps(40):
    GOLDEN = float((mpmath.sqrt(5) - 1) / 2)
    SILVER = float(mpmath.sqrt(2) - 1)


@pytest.fixture(scope="session")
def golden():
    return Rotation.named("golden")


@pytest.fixture(scope="session")
def silver():
    return Rotation.named("silver")


@pytest.fixture(scope="session")
def appendix_a(golden):
    """Two base points, a closed target at -1 and an open one at -1/2."""
    return build_appendix_a(golden, [0.1, 0.6],
                            [SpectrumTarget(-1.0, True), SpectrumTarget(-0.5, False)], depth=3)


@pytest.fixture(scope="session")
def appendix_b(golden):
    return build_appendix_b(golden, K=2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        else:
            terminalreporter.write_line(f"criterion {n}: FAIL (did not run to completion)")
