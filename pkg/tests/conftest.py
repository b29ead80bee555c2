import numpy as np
import pytest

from secure_offload.compute import ComputeParams
from secure_offload.env import EnvConfig

CONSISTENT = ComputeParams(kappa_loc=1e-27, kappa_edg=1e-28)


def consistent_env(**kw) -> EnvConfig:
    return EnvConfig(compute=kw.pop("compute", CONSISTENT), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
