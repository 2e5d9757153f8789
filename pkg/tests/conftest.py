import numpy as np
import pytest

from softcrowd import CrowdConfig, MseInit

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def set_b_config():
    """The benchmark crowd: 39 agents, gain 0.75, sigma 60, MSE(0) 72000."""
    return CrowdConfig(n=39, gains=0.75, noise_sigma=60.0,
                       init=MseInit(72000.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def record(name: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
