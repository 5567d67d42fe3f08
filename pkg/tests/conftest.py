import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from intershap.synthgen import SynthConfig, generate


@pytest.fixture(scope="session")
def small_synergy():
    return generate(SynthConfig(setting="synergy", N=2000, seed=5))


@pytest.fixture(scope="session")
def small_uniqueness():
    return generate(SynthConfig(setting="uniqueness", N=2000, seed=6))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
